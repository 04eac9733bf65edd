//! Islanded DC power flow: `θ = inv_star(B) P` and branch flows `y_l (θ_i − θ_j)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gridlinalg::{build_nodal_admittance, check_len, inv_star, NodalAdmittance, Topology};
use crate::network::{BusKind, PowerNetwork};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseAngles {
    pub theta: Vec<f64>,
}

/// Signed per-unit flow on each branch, positive from `from_bus` to `to_bus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchFlows {
    pub flows: Vec<f64>,
}

/// Power balance of one island.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslandBalance {
    /// One-based bus ids.
    pub buses: Vec<usize>,
    pub reference_bus: usize,
    /// Sum of scheduled injections in the island.
    pub imbalance: f64,
    /// Extra injection picked up by the reference bus (`-imbalance` in theory).
    pub slack: f64,
    /// The reference bus ends up producing while marked as a load, or
    /// consuming while marked as a source.
    pub sign_violation: bool,
}

/// Everything computed by one power-flow solve, including the reduced
/// inverse that the sensitivity code reuses.
#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    pub admittance: NodalAdmittance,
    /// `inv_star(B)`.
    pub reduced_inverse: DMatrix<f64>,
    pub live: Vec<bool>,
    pub angles: PhaseAngles,
    pub flows: BranchFlows,
}

pub fn solve_power_flow(
    network: &PowerNetwork,
    y: &[f64],
    injections: &[f64],
    topology: &Topology,
) -> Result<PowerFlowSolution> {
    check_len(network.branch_count(), y.len())?;
    check_len(network.bus_count(), injections.len())?;
    let admittance = build_nodal_admittance(network, y, topology)?;
    let reduced_inverse = inv_star(&admittance)?;
    let theta = &reduced_inverse * DVector::from_column_slice(injections);
    let live = topology.live_mask(network, y);
    let flows = network
        .branches()
        .iter()
        .enumerate()
        .map(|(l, br)| {
            if !live[l] {
                return 0.0;
            }
            let (i, j) = br.endpoints();
            y[l] * (theta[i] - theta[j])
        })
        .collect();
    Ok(PowerFlowSolution {
        admittance,
        reduced_inverse,
        live,
        angles: PhaseAngles {
            theta: theta.iter().copied().collect(),
        },
        flows: BranchFlows { flows },
    })
}

pub fn solve_angles(
    network: &PowerNetwork,
    y: &[f64],
    injections: &[f64],
    topology: &Topology,
) -> Result<PhaseAngles> {
    solve_power_flow(network, y, injections, topology).map(|s| s.angles)
}

pub fn branch_flows(
    network: &PowerNetwork,
    y: &[f64],
    injections: &[f64],
    topology: &Topology,
) -> Result<BranchFlows> {
    solve_power_flow(network, y, injections, topology).map(|s| s.flows)
}

/// Branch flows written as `e_i^T B e_j (e_i − e_j)^T inv_star(B) P`.
///
/// With `B_ij = −y_l` this is the negative of the physical flow; only the
/// magnitude enters the line-state function.
pub fn branch_flows_bilinear(
    network: &PowerNetwork,
    y: &[f64],
    injections: &[f64],
    topology: &Topology,
) -> Result<Vec<f64>> {
    let sol = solve_power_flow(network, y, injections, topology)?;
    let b = &sol.admittance.matrix;
    let xp = &sol.reduced_inverse * DVector::from_column_slice(injections);
    Ok(network
        .branches()
        .iter()
        .map(|br| {
            let (i, j) = br.endpoints();
            b[(i, j)] * (xp[i] - xp[j])
        })
        .collect())
}

impl PowerFlowSolution {
    /// `Σ_l A(l,i) flow(l) − P_i` for each bus; zero away from the references.
    pub fn bus_mismatch(&self, network: &PowerNetwork, injections: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = injections.iter().map(|p| -p).collect();
        for (br, f) in network.branches().iter().zip(&self.flows.flows) {
            let (i, j) = br.endpoints();
            out[i] += f;
            out[j] -= f;
        }
        out
    }

    pub fn island_balances(&self, network: &PowerNetwork, injections: &[f64]) -> Vec<IslandBalance> {
        let mismatch = self.bus_mismatch(network, injections);
        self.admittance
            .decomposition
            .islands()
            .iter()
            .map(|isl| {
                let r = isl.reference;
                let slack = mismatch[r];
                let produced = injections[r] + slack;
                let tol = 1e-9;
                let sign_violation = match network.bus(r).kind {
                    BusKind::Load => produced > tol,
                    BusKind::Generator | BusKind::Reference => produced < -tol,
                };
                IslandBalance {
                    buses: isl.buses.iter().map(|b| b + 1).collect(),
                    reference_bus: r + 1,
                    imbalance: isl.buses.iter().map(|&b| injections[b]).sum(),
                    slack,
                    sign_violation,
                }
            })
            .collect()
    }
}
