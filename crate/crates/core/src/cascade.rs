//! Smooth line-state function and the cascade recursion
//! `y^{k+1} = diag(g(P^k)) y^k + e_{i0} u_k` (or `... y^0 ...` with reclosing).

use std::f64::consts::FRAC_PI_2;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::gridlinalg::{check_len, IslandDecomposition, Topology};
use crate::network::PowerNetwork;
use crate::powerflow::{solve_power_flow, BranchFlows, PhaseAngles, PowerFlowSolution};

/// Per-branch susceptances at one cascade step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AdmittanceVector(pub Vec<f64>);

impl Deref for AdmittanceVector {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for AdmittanceVector {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

impl From<Vec<f64>> for AdmittanceVector {
    fn from(v: Vec<f64>) -> Self {
        AdmittanceVector(v)
    }
}

/// Line-state values `g ∈ [0, 1]`, one per branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LineState(pub Vec<f64>);

impl Deref for LineState {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

/// Width of the transition band in `p² − c²`.
pub fn band_half_width(sigma: f64) -> f64 {
    FRAC_PI_2 / sigma
}

/// `1` below the band, `0` above it, `(1 − sin σ(p²−c²))/2` inside.
pub fn line_state(p: f64, c: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !(c > 0.0) || c * c <= band_half_width(sigma) {
        return Err(ModelError::EmptyHealthyRegime {
            branch: 0,
            threshold: c,
            sigma,
        });
    }
    Ok(line_state_unchecked(p, c, sigma))
}

pub(crate) fn line_state_unchecked(p: f64, c: f64, sigma: f64) -> f64 {
    let z = p * p - c * c;
    let w = band_half_width(sigma);
    if z >= w {
        0.0
    } else if z <= -w {
        1.0
    } else {
        0.5 * (1.0 - (sigma * z).sin())
    }
}

/// Rejects `σ` for which some branch has an empty healthy regime.
pub fn check_sharpness(network: &PowerNetwork, sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(ModelError::InvalidConfig(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    for br in network.branches() {
        if br.threshold * br.threshold <= band_half_width(sigma) {
            return Err(ModelError::EmptyHealthyRegime {
                branch: br.id,
                threshold: br.threshold,
                sigma,
            });
        }
    }
    Ok(())
}

/// A scalar control sequence on a single target branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbancePlan {
    /// Zero-based branch index.
    pub target: usize,
    /// `u_0 .. u_{m−1}`.
    pub controls: Vec<f64>,
    pub horizon: usize,
}

impl DisturbancePlan {
    /// `u_0` at the first step only, horizon 1.
    pub fn initial(target: usize, u0: f64, steps: usize) -> Self {
        let mut controls = vec![0.0; steps];
        if steps > 0 {
            controls[0] = u0;
        }
        DisturbancePlan {
            target,
            controls,
            horizon: 1,
        }
    }

    pub fn none(target: usize, steps: usize) -> Self {
        Self::initial(target, 0.0, steps)
    }

    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn control(&self, k: usize) -> f64 {
        self.controls.get(k).copied().unwrap_or(0.0)
    }

    /// Fails if some `u_k` with `k ≥ horizon` is nonzero.
    pub fn check_horizon(&self) -> Result<()> {
        match self
            .controls
            .iter()
            .enumerate()
            .skip(self.horizon)
            .find(|(_, u)| **u != 0.0)
        {
            Some((step, &value)) => Err(ModelError::ControlOutsideHorizon { step, value }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub sigma: f64,
    pub steps: usize,
    pub reclosing: bool,
    pub topology: Topology,
}

impl CascadeConfig {
    pub fn new(sigma: f64, steps: usize) -> Self {
        CascadeConfig {
            sigma,
            steps,
            reclosing: false,
            topology: Topology::default(),
        }
    }
}

/// Power flow and line states at one admittance vector.
#[derive(Debug, Clone)]
pub struct StepEvaluation {
    pub solution: PowerFlowSolution,
    pub line_state: Vec<f64>,
}

/// The cascade map for a fixed network, injection vector and configuration.
#[derive(Debug, Clone)]
pub struct CascadeModel<'a> {
    pub network: &'a PowerNetwork,
    pub injections: Vec<f64>,
    pub sigma: f64,
    pub reclosing: bool,
    pub topology: Topology,
    pub nominal: Vec<f64>,
}

impl<'a> CascadeModel<'a> {
    pub fn new(network: &'a PowerNetwork, config: &CascadeConfig) -> Result<Self> {
        Self::with_injections(network, network.injections(), config)
    }

    pub fn with_injections(
        network: &'a PowerNetwork,
        injections: Vec<f64>,
        config: &CascadeConfig,
    ) -> Result<Self> {
        check_len(network.bus_count(), injections.len())?;
        check_sharpness(network, config.sigma)?;
        Ok(CascadeModel {
            network,
            injections,
            sigma: config.sigma,
            reclosing: config.reclosing,
            topology: config.topology,
            nominal: network.nominal_susceptances(),
        })
    }

    pub fn evaluate(&self, y: &[f64]) -> Result<StepEvaluation> {
        let solution = solve_power_flow(self.network, y, &self.injections, &self.topology)?;
        let line_state = self
            .network
            .branches()
            .iter()
            .zip(&solution.flows.flows)
            .map(|(br, &p)| line_state_unchecked(p, br.threshold, self.sigma))
            .collect();
        Ok(StepEvaluation {
            solution,
            line_state,
        })
    }

    /// `G y^k` (or `G y^0`) before the control is added.
    pub fn propagate(&self, y: &[f64], g: &[f64]) -> Vec<f64> {
        let base = if self.reclosing { &self.nominal[..] } else { y };
        base.iter().zip(g).map(|(v, gl)| gl * v).collect()
    }

    pub fn step(&self, y: &[f64], target: usize, control: f64) -> Result<Vec<f64>> {
        let eval = self.evaluate(y)?;
        let mut next = self.propagate(y, &eval.line_state);
        next[target] += control;
        Ok(next)
    }
}

/// One cascade step with explicit arguments.
#[allow(clippy::too_many_arguments)]
pub fn cascade_step(
    network: &PowerNetwork,
    y_k: &[f64],
    target: usize,
    u_k: f64,
    injections: &[f64],
    sigma: f64,
    reclosing: bool,
    y_0: &[f64],
    topology: &Topology,
) -> Result<AdmittanceVector> {
    check_len(network.branch_count(), y_0.len())?;
    if target >= network.branch_count() {
        return Err(ModelError::UnknownBranch(target + 1));
    }
    let config = CascadeConfig {
        sigma,
        steps: 1,
        reclosing,
        topology: *topology,
    };
    let mut model = CascadeModel::with_injections(network, injections.to_vec(), &config)?;
    model.nominal = y_0.to_vec();
    model.step(y_k, target, u_k).map(AdmittanceVector)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub y: AdmittanceVector,
    pub angles: PhaseAngles,
    pub flows: BranchFlows,
    pub line_state: LineState,
    pub islands: IslandDecomposition,
    /// Zero-based indices of branches that are out at this step.
    pub dead: Vec<usize>,
    /// Branches that went out between the previous step and this one.
    pub outages: Vec<usize>,
    /// Branches back in service since the previous step (reclosing only).
    pub restorations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeTrajectory {
    pub plan: DisturbancePlan,
    pub config: CascadeConfig,
    /// `m + 1` records for `k = 0..=m`.
    pub steps: Vec<StepRecord>,
    /// First `k` from which `y` no longer changes and no control remains.
    pub steady_state_step: Option<usize>,
}

impl CascadeTrajectory {
    pub fn final_step(&self) -> &StepRecord {
        self.steps.last().expect("a trajectory holds at least y^0")
    }

    pub fn admittances(&self) -> Vec<&[f64]> {
        self.steps.iter().map(|s| &s.y[..]).collect()
    }

    /// Last `k` at which the set of dead branches changed (0 if never).
    pub fn last_outage_step(&self) -> usize {
        self.steps
            .iter()
            .rev()
            .find(|s| !s.outages.is_empty() || !s.restorations.is_empty())
            .map_or(0, |s| s.k)
    }

    /// One-based ids of the branches out at each step.
    pub fn outage_events(&self, network: &PowerNetwork) -> Vec<Vec<usize>> {
        self.steps
            .iter()
            .map(|s| s.outages.iter().map(|&l| network.branch(l).id).collect())
            .collect()
    }
}

/// Runs the cascade for `config.steps` steps from the nominal susceptances.
pub fn simulate(
    network: &PowerNetwork,
    plan: &DisturbancePlan,
    config: &CascadeConfig,
) -> Result<CascadeTrajectory> {
    let model = CascadeModel::new(network, config)?;
    simulate_with(&model, plan, config.steps)
}

pub fn simulate_with(
    model: &CascadeModel<'_>,
    plan: &DisturbancePlan,
    steps: usize,
) -> Result<CascadeTrajectory> {
    let network = model.network;
    if plan.target >= network.branch_count() {
        return Err(ModelError::UnknownBranch(plan.target + 1));
    }
    if steps > network.branch_count() && !model.reclosing {
        log::warn!(
            "{steps} cascade steps exceed the branch count {}; later steps cannot add outages",
            network.branch_count()
        );
    }

    let mut records: Vec<StepRecord> = Vec::with_capacity(steps + 1);
    let mut y = model.nominal.clone();
    let mut prev_dead: Option<Vec<bool>> = None;
    for k in 0..=steps {
        let eval = model.evaluate(&y).map_err(|e| e.at_step(k))?;
        let dead_mask: Vec<bool> = eval.solution.live.iter().map(|l| !l).collect();
        let (outages, restorations) = match &prev_dead {
            None => (Vec::new(), Vec::new()),
            Some(before) => (
                changed(before, &dead_mask, false),
                changed(before, &dead_mask, true),
            ),
        };
        let next = (k < steps).then(|| {
            let mut n = model.propagate(&y, &eval.line_state);
            n[plan.target] += plan.control(k);
            n
        });
        records.push(StepRecord {
            k,
            y: AdmittanceVector(y.clone()),
            angles: eval.solution.angles,
            flows: eval.solution.flows,
            line_state: LineState(eval.line_state),
            islands: eval.solution.admittance.decomposition,
            dead: (0..dead_mask.len()).filter(|&l| dead_mask[l]).collect(),
            outages,
            restorations,
        });
        prev_dead = Some(dead_mask);
        if let Some(n) = next {
            y = n;
        }
    }

    let last_control = plan
        .controls
        .iter()
        .take(steps)
        .rposition(|u| *u != 0.0)
        .map_or(0, |k| k + 1);
    let final_y = &records[steps].y;
    let mut settled = steps;
    while settled > last_control && records[settled - 1].y == *final_y {
        settled -= 1;
    }
    let steady_state_step = (steps == 0 || settled < steps).then_some(settled);

    Ok(CascadeTrajectory {
        plan: plan.clone(),
        config: CascadeConfig {
            sigma: model.sigma,
            steps,
            reclosing: model.reclosing,
            topology: model.topology,
        },
        steps: records,
        steady_state_step,
    })
}

fn changed(before: &[bool], after: &[bool], restored: bool) -> Vec<usize> {
    before
        .iter()
        .zip(after)
        .enumerate()
        .filter(|(_, (b, a))| if restored { **b && !**a } else { !**b && **a })
        .map(|(l, _)| l)
        .collect()
}
