use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::conditions::{cost, terminal_cost, NecessaryConditions};
use super::solver::{newton_solve, NewtonOptions, SolverReport, SolverStatus};
use crate::cascade::{simulate_with, CascadeConfig, CascadeModel, CascadeTrajectory};
use crate::error::{ModelError, Result};
use crate::gridlinalg::{check_len, Topology};
use crate::network::PowerNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub sigma: f64,
    pub epsilon: f64,
    pub iota: usize,
    pub steps: usize,
    pub i_max: usize,
    pub j_max: f64,
    pub seed: u64,
    pub root_tol: f64,
    pub max_solver_iterations: usize,
    pub reclosing: bool,
    pub topology: Topology,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            sigma: 5e4,
            epsilon: 1e-4,
            iota: 1,
            steps: 9,
            i_max: 10,
            j_max: 1e6,
            seed: 0,
            root_tol: 1e-8,
            max_solver_iterations: 50,
            reclosing: false,
            topology: Topology::default(),
        }
    }
}

impl SearchConfig {
    pub fn cascade(&self) -> CascadeConfig {
        CascadeConfig {
            sigma: self.sigma,
            steps: self.steps,
            reclosing: self.reclosing,
            topology: self.topology,
        }
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.root_tol,
            max_iterations: self.max_solver_iterations,
            ..NewtonOptions::default()
        }
    }

    pub fn validate(&self, network: &PowerNetwork) -> Result<()> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.steps < 2 || self.iota < 1 || self.iota > self.steps - 1 {
            return bad(format!(
                "need 1 <= iota <= steps - 1, got iota = {} and steps = {}",
                self.iota, self.steps
            ));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.root_tol >= 0.0) {
            return bad(format!("root tolerance must be non-negative, got {}", self.root_tol));
        }
        let nominal = terminal_cost(&network.nominal_susceptances());
        if !(self.j_max > nominal) {
            return bad(format!(
                "j_max = {} does not exceed the undisturbed cost {nominal:.6}",
                self.j_max
            ));
        }
        crate::cascade::check_sharpness(network, self.sigma)
    }
}

/// Result of one root solve from a random start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub stacked: Vec<f64>,
    pub controls: Vec<f64>,
    pub report: SolverReport,
    /// Residual infinity norm at the forward simulation of `controls`.
    pub consistency_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub status: SolverStatus,
    pub solver_iterations: usize,
    pub residual_norm: f64,
    pub consistency_residual: f64,
    /// Signed `u_0` recovered by this iteration, if it converged.
    pub u0: Option<f64>,
    /// Validated cost, or `j_max` on failure.
    pub cost: f64,
    /// Best cost after this iteration.
    pub j_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// One-based branch id.
    pub branch: usize,
    /// Best control sequence; all zeros when no iteration succeeded.
    pub u_star: Vec<f64>,
    pub j_star: f64,
    pub iterations: Vec<IterationRecord>,
    pub trajectory: Option<CascadeTrajectory>,
    pub config: SearchConfig,
    pub initialization: String,
}

impl SearchResult {
    pub fn u0(&self) -> f64 {
        self.u_star.first().copied().unwrap_or(0.0)
    }

    pub fn found(&self) -> bool {
        self.trajectory.is_some()
    }
}

fn stream_rng(seed: u64, branch_id: usize, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((branch_id as u64) << 32) | iteration as u64);
    rng
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// One Newton solve of the necessary conditions from a start drawn
/// uniformly from `[0, y^0_l]` for every entry.
pub fn solve_necessary_conditions(
    conditions: &NecessaryConditions<'_>,
    config: &SearchConfig,
    rng: &mut ChaCha8Rng,
) -> SolveOutcome {
    let nominal = &conditions.model.nominal;
    let start: Vec<f64> = (0..conditions.steps)
        .flat_map(|_| nominal.iter())
        .map(|&y0| rng.gen::<f64>() * y0)
        .collect();

    let mut consistency = f64::INFINITY;
    let mut controls = Vec::new();
    let (stacked, report) = newton_solve(
        |z| conditions.residual(z),
        start,
        &config.newton(),
        |z| {
            let Ok(u) = conditions.controls(z) else {
                return false;
            };
            consistency = conditions
                .forward(&u)
                .and_then(|fwd| conditions.residual(&fwd))
                .map_or(f64::INFINITY, |r| inf_norm(&r));
            controls = u;
            consistency <= 10.0 * config.root_tol
        },
    );
    if !report.converged() {
        controls.clear();
    }
    SolveOutcome {
        stacked,
        controls,
        report,
        consistency_residual: consistency,
    }
}

/// Randomized restarts of the root solve, keeping the best validated cost.
pub fn iterative_search(
    network: &PowerNetwork,
    target: usize,
    injections: &[f64],
    config: &SearchConfig,
) -> Result<SearchResult> {
    config.validate(network)?;
    check_len(network.bus_count(), injections.len())?;
    if target >= network.branch_count() {
        return Err(ModelError::UnknownBranch(target + 1));
    }
    let cascade = config.cascade();
    let model = CascadeModel::with_injections(network, injections.to_vec(), &cascade)?;
    let conditions = NecessaryConditions {
        model,
        target,
        epsilon: config.epsilon,
        iota: config.iota,
        steps: config.steps,
    };
    let branch_id = network.branch(target).id;

    let mut j_star = config.j_max;
    let mut u_star = vec![0.0; config.steps];
    let mut best: Option<CascadeTrajectory> = None;
    let mut iterations = Vec::with_capacity(config.i_max + 1);
    for i in 0..=config.i_max {
        let mut rng = stream_rng(config.seed, branch_id, i);
        let outcome = solve_necessary_conditions(&conditions, config, &mut rng);
        let mut validated = None;
        if outcome.report.converged() {
            let plan = conditions.plan(outcome.controls.clone());
            match simulate_with(&conditions.model, &plan, config.steps)
                .and_then(|t| cost(&t, config.epsilon).map(|c| (t, c)))
            {
                Ok(pair) => validated = Some(pair),
                Err(e) => log::warn!("branch {branch_id} iteration {i}: validation failed: {e}"),
            }
        }
        let cost_i = validated.as_ref().map_or(config.j_max, |(_, c)| c.total);
        if cost_i < j_star {
            j_star = cost_i;
            u_star = outcome.controls.clone();
            best = validated.map(|(t, _)| t);
        }
        log::debug!(
            "branch {branch_id} iteration {i}: {:?} after {} steps, cost {cost_i}",
            outcome.report.status,
            outcome.report.iterations
        );
        iterations.push(IterationRecord {
            iteration: i,
            status: outcome.report.status.clone(),
            solver_iterations: outcome.report.iterations,
            residual_norm: outcome.report.residual_norm,
            consistency_residual: outcome.consistency_residual,
            u0: outcome.controls.first().copied(),
            cost: cost_i,
            j_star,
        });
    }
    if best.is_none() {
        log::warn!("branch {branch_id}: no iteration produced a validated control");
    }
    Ok(SearchResult {
        branch: branch_id,
        u_star,
        j_star,
        iterations,
        trajectory: best,
        config: *config,
        initialization: "Y^k_l ~ U[0, y^0_l], ChaCha8 seeded by seed, stream (branch id << 32) | iteration"
            .into(),
    })
}

/// Searches every branch in parallel and sorts by best cost, then branch id.
pub fn rank_branches(
    network: &PowerNetwork,
    injections: &[f64],
    config: &SearchConfig,
) -> Result<Vec<SearchResult>> {
    config.validate(network)?;
    let mut results = (0..network.branch_count())
        .into_par_iter()
        .map(|l| iterative_search(network, l, injections, config))
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| a.j_star.total_cmp(&b.j_star).then(a.branch.cmp(&b.branch)));
    Ok(results)
}
