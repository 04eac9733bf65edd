use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Target infinity norm of the residual.
    pub tol: f64,
    pub max_iterations: usize,
    /// Relative forward-difference step for the Jacobian columns.
    pub fd_step: f64,
    /// Smallest line-search step before giving up on a decrease.
    pub min_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-8,
            max_iterations: 50,
            fd_step: 1e-7,
            min_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SolverStatus {
    Converged,
    MaxIterations,
    /// The residual could not be evaluated at the iterate.
    EvaluationFailed(String),
    /// The Newton system produced a non-finite direction.
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub iterations: usize,
    /// Infinity norm of the residual at the returned point.
    pub residual_norm: f64,
}

impl SolverReport {
    pub fn converged(&self) -> bool {
        self.status == SolverStatus::Converged
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn finite_or_inf(r: Result<Vec<f64>>) -> Option<Vec<f64>> {
    r.ok().filter(|v| v.iter().all(|x| x.is_finite()))
}

/// Damped Newton iteration with a forward-difference Jacobian and Armijo
/// backtracking on `‖r‖₂`.
///
/// `accept` is asked whether a point that meets the tolerance really is a
/// solution; if it says no the iteration carries on.
pub fn newton_solve<F, A>(
    residual: F,
    start: Vec<f64>,
    options: &NewtonOptions,
    mut accept: A,
) -> (Vec<f64>, SolverReport)
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
    A: FnMut(&[f64]) -> bool,
{
    let mut z = start;
    let mut r = match residual(&z) {
        Ok(r) => r,
        Err(e) => {
            let report = SolverReport {
                status: SolverStatus::EvaluationFailed(e.to_string()),
                iterations: 0,
                residual_norm: f64::INFINITY,
            };
            return (z, report);
        }
    };
    let dim = z.len();
    let report = |status, iterations, r: &[f64]| SolverReport {
        status,
        iterations,
        residual_norm: inf_norm(r),
    };

    for iteration in 0..=options.max_iterations {
        if inf_norm(&r) <= options.tol && accept(&z) {
            return (z, report(SolverStatus::Converged, iteration, &r));
        }
        if iteration == options.max_iterations {
            break;
        }

        let mut jac = DMatrix::zeros(r.len(), dim);
        let mut probe = z.clone();
        for j in 0..dim {
            let h = options.fd_step * z[j].abs().max(1.0);
            probe[j] = z[j] + h;
            let col = match finite_or_inf(residual(&probe)) {
                Some(rp) => rp.iter().zip(&r).map(|(a, b)| (a - b) / h).collect::<Vec<_>>(),
                None => {
                    probe[j] = z[j] - h;
                    match finite_or_inf(residual(&probe)) {
                        Some(rm) => r.iter().zip(&rm).map(|(a, b)| (a - b) / h).collect(),
                        None => {
                            let status = SolverStatus::EvaluationFailed(format!(
                                "residual undefined around unknown {j}"
                            ));
                            return (z, report(status, iteration, &r));
                        }
                    }
                }
            };
            probe[j] = z[j];
            jac.column_mut(j).copy_from_slice(&col);
        }

        let rhs = -DVector::from_column_slice(&r);
        let direction = jac
            .clone()
            .lu()
            .solve(&rhs)
            .filter(|d| d.iter().all(|v| v.is_finite()))
            .or_else(|| {
                jac.svd(true, true)
                    .solve(&rhs, 1e-14)
                    .ok()
                    .filter(|d| d.iter().all(|v| v.is_finite()))
            });
        let Some(direction) = direction else {
            return (z, report(SolverStatus::Singular, iteration, &r));
        };

        let norm = two_norm(&r);
        let trial = |alpha: f64| -> Vec<f64> {
            z.iter().zip(direction.iter()).map(|(a, d)| a + alpha * d).collect()
        };
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= options.min_step {
            let zt = trial(alpha);
            if let Some(rt) = finite_or_inf(residual(&zt)) {
                if two_norm(&rt) <= (1.0 - 1e-4 * alpha) * norm {
                    accepted = Some((zt, rt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let (zn, rn) = match accepted {
            Some(pair) => pair,
            None => {
                let zt = trial(1.0);
                match finite_or_inf(residual(&zt)) {
                    Some(rt) => (zt, rt),
                    None => {
                        let status = SolverStatus::EvaluationFailed(
                            "residual undefined along the Newton direction".into(),
                        );
                        return (z, report(status, iteration, &r));
                    }
                }
            }
        };
        z = zn;
        r = rn;
    }
    let iterations = options.max_iterations;
    (z, report(SolverStatus::MaxIterations, iterations, &r))
}
