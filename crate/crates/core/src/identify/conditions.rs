use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeModel, CascadeTrajectory, DisturbancePlan, StepEvaluation};
use crate::error::{ModelError, Result};
use crate::gridlinalg::check_len;
use crate::sensitivity::step_jacobian_with;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// `½‖Y^m‖²`.
    pub terminal: f64,
    /// `ε Σ_{k<ι} u_k² / (ι − k)`.
    pub control_energy: f64,
    pub total: f64,
}

pub fn terminal_cost(y: &[f64]) -> f64 {
    0.5 * y.iter().map(|v| v * v).sum::<f64>()
}

/// Cost of a trajectory under its recorded plan. Controls at or beyond the
/// horizon must be zero.
pub fn cost(trajectory: &CascadeTrajectory, epsilon: f64) -> Result<CostBreakdown> {
    let plan = &trajectory.plan;
    plan.check_horizon()?;
    let terminal = terminal_cost(&trajectory.final_step().y);
    let control_energy = epsilon
        * plan
            .controls
            .iter()
            .take(plan.horizon)
            .enumerate()
            .map(|(k, u)| u * u / (plan.horizon - k) as f64)
            .sum::<f64>();
    Ok(CostBreakdown {
        terminal,
        control_energy,
        total: terminal + control_energy,
    })
}

/// `λ_1 .. λ_m`; `lambdas[k]` holds `λ_{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostateSequence {
    pub lambdas: Vec<Vec<f64>>,
}

impl CostateSequence {
    /// `λ_k` for `1 ≤ k ≤ m`.
    pub fn lambda(&self, k: usize) -> &[f64] {
        &self.lambdas[k - 1]
    }
}

/// `u_k = −((ι − k) / 2ε) λ_{k+1}(i0)` for `k < ι`, zero afterwards.
pub fn control_from_costate(
    costates: &CostateSequence,
    target: usize,
    epsilon: f64,
    iota: usize,
) -> Vec<f64> {
    (0..costates.lambdas.len())
        .map(|k| {
            if k < iota {
                -((iota - k) as f64) / (2.0 * epsilon) * costates.lambdas[k][target]
            } else {
                0.0
            }
        })
        .collect()
}

/// The stacked algebraic system in the unknowns `Y^1..Y^m`.
#[derive(Debug, Clone)]
pub struct NecessaryConditions<'a> {
    pub model: CascadeModel<'a>,
    pub target: usize,
    pub epsilon: f64,
    pub iota: usize,
    pub steps: usize,
}

/// `J^T λ` with each output entry summed from smallest to largest term.
fn transpose_apply(jac: &nalgebra::DMatrix<f64>, lambda: &[f64]) -> Vec<f64> {
    let mut terms = Vec::with_capacity(lambda.len());
    (0..jac.ncols())
        .map(|s| {
            terms.clear();
            terms.extend((0..jac.nrows()).map(|l| jac[(l, s)] * lambda[l]));
            terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
            terms.iter().sum()
        })
        .collect()
}

impl<'a> NecessaryConditions<'a> {
    pub fn dim(&self) -> usize {
        self.model.network.branch_count() * self.steps
    }

    /// `[Y^0, Y^1, .., Y^m]` from the stacked unknowns.
    pub fn unstack(&self, stacked: &[f64]) -> Vec<Vec<f64>> {
        let n = self.model.network.branch_count();
        std::iter::once(self.model.nominal.clone())
            .chain(stacked.chunks(n).map(<[f64]>::to_vec))
            .collect()
    }

    fn evaluate_all(&self, ys: &[Vec<f64>]) -> Result<Vec<StepEvaluation>> {
        (0..self.steps)
            .map(|k| self.model.evaluate(&ys[k]).map_err(|e| e.at_step(k)))
            .collect()
    }

    fn costates_from(&self, ys: &[Vec<f64>], evals: &[StepEvaluation]) -> CostateSequence {
        let m = self.steps;
        let mut lambdas = vec![Vec::new(); m];
        lambdas[m - 1] = ys[m].clone();
        // only λ_1..λ_ι feed the controls, but the chain has to start at λ_m
        for k in (1..m).rev() {
            let jac = step_jacobian_with(&self.model, &ys[k], &evals[k]);
            lambdas[k - 1] = transpose_apply(&jac, &lambdas[k]);
        }
        CostateSequence { lambdas }
    }

    pub fn costates(&self, stacked: &[f64]) -> Result<CostateSequence> {
        check_len(self.dim(), stacked.len())?;
        let ys = self.unstack(stacked);
        let evals = self.evaluate_all(&ys)?;
        Ok(self.costates_from(&ys, &evals))
    }

    pub fn residual_with_costates(&self, stacked: &[f64]) -> Result<(Vec<f64>, CostateSequence)> {
        check_len(self.dim(), stacked.len())?;
        let n = self.model.network.branch_count();
        let ys = self.unstack(stacked);
        let evals = self.evaluate_all(&ys)?;
        let costates = self.costates_from(&ys, &evals);
        let mut out = Vec::with_capacity(self.dim());
        for k in 0..self.steps {
            let propagated = self.model.propagate(&ys[k], &evals[k].line_state);
            let start = out.len();
            out.extend(ys[k + 1].iter().zip(&propagated).map(|(a, b)| a - b));
            if k < self.iota {
                let weight = (self.iota - k) as f64 / (2.0 * self.epsilon);
                out[start + self.target] += weight * costates.lambdas[k][self.target];
            }
            debug_assert_eq!(out.len(), start + n);
        }
        Ok((out, costates))
    }

    pub fn residual(&self, stacked: &[f64]) -> Result<Vec<f64>> {
        self.residual_with_costates(stacked).map(|(r, _)| r)
    }

    pub fn controls(&self, stacked: &[f64]) -> Result<Vec<f64>> {
        let costates = self.costates(stacked)?;
        Ok(control_from_costate(&costates, self.target, self.epsilon, self.iota))
    }

    pub fn plan(&self, controls: Vec<f64>) -> DisturbancePlan {
        DisturbancePlan {
            target: self.target,
            controls,
            horizon: self.iota,
        }
    }

    /// Forward cascade under `controls`, stacked as `Y^1..Y^m`.
    pub fn forward(&self, controls: &[f64]) -> Result<Vec<f64>> {
        if controls.len() != self.steps {
            return Err(ModelError::DimensionMismatch {
                expected: self.steps,
                actual: controls.len(),
            });
        }
        let mut y = self.model.nominal.clone();
        let mut out = Vec::with_capacity(self.dim());
        for (k, &u) in controls.iter().enumerate() {
            y = self.model.step(&y, self.target, u).map_err(|e| e.at_step(k))?;
            out.extend_from_slice(&y);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{simulate, CascadeConfig};
    use crate::network::cases;

    fn inf_norm(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    #[test]
    fn nominal_terminal_cost() {
        let net = cases::ieee9();
        let traj = simulate(&net, &DisturbancePlan::none(0, 9), &CascadeConfig::new(5e4, 9)).unwrap();
        let c = cost(&traj, 1e-4).unwrap();
        let oracle: f64 = net.branches().iter().map(|b| 0.5 / (b.reactance * b.reactance)).sum();
        assert!((c.total - oracle).abs() < 1e-9);
        assert!((c.total - 728.6).abs() < 0.1);
        assert_eq!(c.control_energy, 0.0);
    }

    #[test]
    fn empty_grid_cost_is_control_energy() {
        let net = cases::two_bus();
        let mut traj =
            simulate(&net, &DisturbancePlan::initial(0, -2.0, 2), &CascadeConfig::new(5e4, 2)).unwrap();
        for s in &mut traj.steps {
            s.y.0 = vec![0.0];
        }
        let c = cost(&traj, 1e-4).unwrap();
        assert_eq!(c.total, 1e-4 * 4.0);
        traj.plan.controls[1] = 1.0;
        assert!(matches!(
            cost(&traj, 1e-4),
            Err(ModelError::ControlOutsideHorizon { step: 1, .. })
        ));
    }

    #[test]
    fn control_recovery() {
        let cs = CostateSequence {
            lambdas: vec![vec![2.0, 3.0], vec![5.0, 7.0], vec![1.0, 1.0]],
        };
        assert_eq!(control_from_costate(&cs, 1, 0.5, 1), vec![-3.0, 0.0, 0.0]);
        assert_eq!(control_from_costate(&cs, 0, 0.5, 2), vec![-4.0, -5.0, 0.0]);
    }

    #[test]
    fn forward_trajectory_of_recovered_control_is_a_root() {
        // fixed point iteration z -> forward(controls(z)) on the two-bus case
        let net = cases::two_bus();
        let model = CascadeModel::new(&net, &CascadeConfig::new(5e4, 3)).unwrap();
        let nc = NecessaryConditions {
            model,
            target: 0,
            epsilon: 1e-4,
            iota: 1,
            steps: 3,
        };
        let u = -10000.0 / 5001.0;
        let z = nc.forward(&[u, 0.0, 0.0]).unwrap();
        let r = nc.residual(&z).unwrap();
        assert!(inf_norm(&r) < 1e-9, "{r:?}");
        let back = nc.controls(&z).unwrap();
        assert!((back[0] - u).abs() < 1e-9);
    }

    #[test]
    fn last_block_has_no_costate_term() {
        let net = cases::ieee9();
        let model = CascadeModel::new(&net, &CascadeConfig::new(5e4, 4)).unwrap();
        let nc = NecessaryConditions {
            model,
            target: 1,
            epsilon: 1e-4,
            iota: 1,
            steps: 4,
        };
        let y0 = net.nominal_susceptances();
        let z: Vec<f64> = (0..4).flat_map(|_| y0.iter().map(|v| 0.9 * v)).collect();
        let r = nc.residual(&z).unwrap();
        let ys = nc.unstack(&z);
        let eval = nc.model.evaluate(&ys[3]).unwrap();
        let prop = nc.model.propagate(&ys[3], &eval.line_state);
        for l in 0..9 {
            assert_eq!(r[27 + l], ys[4][l] - prop[l]);
        }
    }
}
