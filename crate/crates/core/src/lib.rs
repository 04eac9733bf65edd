//! DC power-flow cascading-failure simulation and worst-case disturbance
//! identification on small transmission grids.

pub mod cascade;
pub mod cli;
pub mod error;
pub mod gridlinalg;
pub mod identify;
pub mod network;
pub mod powerflow;
pub mod report;
pub mod sensitivity;

pub use cascade::{simulate, CascadeConfig, CascadeTrajectory, DisturbancePlan};
pub use error::{CaseError, ModelError};
pub use gridlinalg::{ReferencePolicy, Topology};
pub use identify::{iterative_search, rank_branches, SearchConfig, SearchResult};
pub use network::{load_case, PowerNetwork};
