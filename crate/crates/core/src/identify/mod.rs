//! Worst-case disturbance identification.
//!
//! A candidate trajectory `Y^1..Y^m` is a root of the necessary-condition
//! residual when it is the forward cascade driven by the control recovered
//! from its own costates. Random restarts of a Newton solve on that residual,
//! each validated by forward simulation, give the iterative search.

mod conditions;
mod search;
mod solver;

pub use conditions::{
    control_from_costate, cost, terminal_cost, CostBreakdown, CostateSequence, NecessaryConditions,
};
pub use search::{
    iterative_search, rank_branches, solve_necessary_conditions, IterationRecord, SearchConfig,
    SearchResult, SolveOutcome,
};
pub use solver::{newton_solve, NewtonOptions, SolverReport, SolverStatus};
