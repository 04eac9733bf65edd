//! Analytic derivatives of the reduced inverse, branch flows, line states and
//! the full cascade step.
//!
//! Open branches are treated as absent: their susceptance is masked to zero
//! in the power flow, so derivatives with respect to them vanish.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cascade::{band_half_width, line_state_unchecked, AdmittanceVector, CascadeModel, StepEvaluation};
use crate::error::{ModelError, Result};
use crate::gridlinalg::{
    build_nodal_admittance, check_len, inv_star, inv_star_with, star_with, weighted_laplacian,
    Topology,
};
use crate::network::PowerNetwork;
use crate::powerflow::{solve_power_flow, PowerFlowSolution};

/// `∂g/∂p`: `−p σ cos σ(p² − c²)` inside the band, 0 outside.
pub fn d_line_state(p: f64, c: f64, sigma: f64) -> f64 {
    let z = p * p - c * c;
    if z.abs() >= band_half_width(sigma) {
        0.0
    } else {
        -p * sigma * (sigma * z).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvStarDerivative {
    pub matrix: DMatrix<f64>,
    /// False when branch `s` joins two different islands, so perturbing it
    /// would change the island structure the formula was taken at.
    pub topology_consistent: bool,
}

fn unit_laplacian(network: &PowerNetwork, s: usize) -> DMatrix<f64> {
    let mut e = vec![0.0; network.branch_count()];
    e[s] = 1.0;
    weighted_laplacian(network, &e)
}

fn check_branch(network: &PowerNetwork, s: usize) -> Result<()> {
    if s < network.branch_count() {
        Ok(())
    } else {
        Err(ModelError::UnknownBranch(s + 1))
    }
}

/// `−X (A^T diag(e_s) A)^* X` with `X = inv_star(A^T diag(y) A)`, all on the
/// island structure of `y`.
pub fn d_inv_star(
    network: &PowerNetwork,
    y: &[f64],
    s: usize,
    topology: &Topology,
) -> Result<InvStarDerivative> {
    check_branch(network, s)?;
    let adm = build_nodal_admittance(network, y, topology)?;
    let x = inv_star(&adm)?;
    let es = star_with(&unit_laplacian(network, s), &adm.decomposition);
    let (i, j) = network.branch(s).endpoints();
    let d = &adm.decomposition;
    Ok(InvStarDerivative {
        matrix: -(&x * es * &x),
        topology_consistent: d.island_of(i) == d.island_of(j),
    })
}

/// `∂P_l/∂y_s` for the physical flow `P_l = y_l (e_i − e_j)^T X P`:
/// a direct term `δ_ls Δθ_l` plus `y_l (e_i − e_j)^T (∂X/∂y_s) P`.
pub fn d_branch_flow(
    network: &PowerNetwork,
    y: &[f64],
    injections: &[f64],
    l: usize,
    s: usize,
    topology: &Topology,
) -> Result<f64> {
    check_branch(network, l)?;
    check_branch(network, s)?;
    check_len(network.bus_count(), injections.len())?;
    let live = topology.live_mask(network, y);
    if !live[l] || !live[s] {
        return Ok(0.0);
    }
    let dx = d_inv_star(network, y, s, topology)?.matrix;
    let theta = solve_power_flow(network, y, injections, topology)?.angles.theta;
    let (i, j) = network.branch(l).endpoints();
    let direct = if l == s { theta[i] - theta[j] } else { 0.0 };
    let sens: f64 = (0..injections.len())
        .map(|b| (dx[(i, b)] - dx[(j, b)]) * injections[b])
        .sum();
    Ok(direct + y[l] * sens)
}

fn sum_small_to_large<const N: usize>(mut terms: [f64; N]) -> f64 {
    terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    terms.iter().sum()
}

/// Full `∂P/∂y` matrix from one power-flow solution, using
/// `∂P_l/∂y_s = δ_ls Δθ_l − y_l (a_l^T X a_s) Δθ_s`.
pub fn flow_sensitivity(network: &PowerNetwork, y: &[f64], sol: &PowerFlowSolution) -> DMatrix<f64> {
    let n = network.branch_count();
    let x = &sol.reduced_inverse;
    let theta = &sol.angles.theta;
    let ends: Vec<(usize, usize)> = network.branches().iter().map(|b| b.endpoints()).collect();
    let dtheta: Vec<f64> = ends.iter().map(|&(i, j)| theta[i] - theta[j]).collect();
    let mut out = DMatrix::zeros(n, n);
    for l in (0..n).filter(|&l| sol.live[l]) {
        let (il, jl) = ends[l];
        for s in (0..n).filter(|&s| sol.live[s]) {
            let (is, js) = ends[s];
            let coupling =
                sum_small_to_large([x[(il, is)], -x[(il, js)], -x[(jl, is)], x[(jl, js)]]);
            let mut v = -y[l] * coupling * dtheta[s];
            if l == s {
                v += dtheta[l];
            }
            out[(l, s)] = v;
        }
    }
    out
}

/// `∂y^{k+1}/∂y^k` together with the point it was taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct StepJacobian {
    pub matrix: DMatrix<f64>,
    pub evaluated_at: AdmittanceVector,
}

/// Entry `(l, s)` is `g'(P_l) ∂P_l/∂y_s · y_l + g_l δ_ls`, with `y^0_l` in
/// place of `y_l` and no diagonal term under reclosing.
pub fn step_jacobian_with(model: &CascadeModel<'_>, y: &[f64], eval: &StepEvaluation) -> DMatrix<f64> {
    let network = model.network;
    let n = network.branch_count();
    let flows = &eval.solution.flows.flows;
    let slopes: Vec<f64> = network
        .branches()
        .iter()
        .zip(flows)
        .map(|(br, &p)| d_line_state(p, br.threshold, model.sigma))
        .collect();
    let mut out = if slopes.iter().any(|d| *d != 0.0) {
        let mut sens = flow_sensitivity(network, y, &eval.solution);
        let base = if model.reclosing { &model.nominal[..] } else { y };
        for l in 0..n {
            let w = slopes[l] * base[l];
            for s in 0..n {
                sens[(l, s)] *= w;
            }
        }
        sens
    } else {
        DMatrix::zeros(n, n)
    };
    if !model.reclosing {
        for l in 0..n {
            out[(l, l)] += eval.line_state[l];
        }
    }
    out
}

pub fn step_jacobian(model: &CascadeModel<'_>, y: &[f64]) -> Result<StepJacobian> {
    check_len(model.network.branch_count(), y.len())?;
    let eval = model.evaluate(y)?;
    Ok(StepJacobian {
        matrix: step_jacobian_with(model, y, &eval),
        evaluated_at: AdmittanceVector(y.to_vec()),
    })
}

/// Largest entrywise gap between two matrices, relative to the largest
/// entry of the reference.
pub fn relative_error(analytic: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    let gap = (analytic - reference).amax();
    if gap == 0.0 {
        0.0
    } else {
        gap / reference.amax().max(f64::MIN_POSITIVE)
    }
}

/// Worst relative errors of each analytic derivative against central
/// differences at one admittance vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub d_line_state: f64,
    pub d_inv_star: f64,
    pub d_branch_flow: f64,
    pub step_jacobian: f64,
    /// Branches whose flow sits within `10 h` of a band edge; their rows are
    /// skipped because the central difference straddles a kink.
    pub skipped_rows: usize,
}

pub fn check_gradients(model: &CascadeModel<'_>, y: &[f64], h: f64) -> Result<GradientCheck> {
    let network = model.network;
    let n = network.branch_count();
    let topo = &model.topology;
    let eval = model.evaluate(y)?;
    let flows = &eval.solution.flows.flows;
    let live = &eval.solution.live;
    let w = band_half_width(model.sigma);

    let near_edge: Vec<bool> = network
        .branches()
        .iter()
        .zip(flows)
        .map(|(br, &p)| {
            let c = br.threshold;
            let lo = (c * c - w).sqrt();
            let hi = (c * c + w).sqrt();
            let a = p.abs();
            (a - lo).abs() < 10.0 * h || (a - hi).abs() < 10.0 * h
        })
        .collect();
    // perturbations must not flip liveness
    let movable: Vec<bool> = (0..n)
        .map(|s| live[s] && topo.is_live(network.branch(s), y[s] - h))
        .collect();

    let mut g_err: f64 = 0.0;
    for (br, &p) in network.branches().iter().zip(flows) {
        if (p.abs() - (br.threshold.powi(2) - w).sqrt()).abs() < 10.0 * h
            || (p.abs() - (br.threshold.powi(2) + w).sqrt()).abs() < 10.0 * h
        {
            continue;
        }
        let fd = (line_state_unchecked(p + h, br.threshold, model.sigma)
            - line_state_unchecked(p - h, br.threshold, model.sigma))
            / (2.0 * h);
        let an = d_line_state(p, br.threshold, model.sigma);
        if an != fd {
            g_err = g_err.max((an - fd).abs() / fd.abs().max(f64::MIN_POSITIVE));
        }
    }

    let decomposition = &eval.solution.admittance.decomposition;
    let mut inv_err: f64 = 0.0;
    let mut flow_an = DMatrix::zeros(n, n);
    let mut flow_fd = DMatrix::zeros(n, n);
    let mut jac_fd = DMatrix::zeros(n, n);
    let eff = topo.effective(network, y);
    for s in (0..n).filter(|&s| movable[s]) {
        let an = d_inv_star(network, y, s, topo)?.matrix;
        let mut plus = eff.clone();
        let mut minus = eff.clone();
        plus[s] += h;
        minus[s] -= h;
        let xp = inv_star_with(&weighted_laplacian(network, &plus), decomposition)?;
        let xm = inv_star_with(&weighted_laplacian(network, &minus), decomposition)?;
        inv_err = inv_err.max(relative_error(&an, &((xp - xm) / (2.0 * h))));

        let mut yp = y.to_vec();
        let mut ym = y.to_vec();
        yp[s] += h;
        ym[s] -= h;
        let fp = solve_power_flow(network, &yp, &model.injections, topo)?.flows.flows;
        let fm = solve_power_flow(network, &ym, &model.injections, topo)?.flows.flows;
        let sp = model.step(&yp, 0, 0.0)?;
        let sm = model.step(&ym, 0, 0.0)?;
        for l in 0..n {
            flow_fd[(l, s)] = (fp[l] - fm[l]) / (2.0 * h);
            flow_an[(l, s)] = d_branch_flow(network, y, &model.injections, l, s, topo)?;
            jac_fd[(l, s)] = (sp[l] - sm[l]) / (2.0 * h);
        }
    }
    let mut jac_an = step_jacobian_with(model, y, &eval);
    let mut skipped_rows = 0;
    for l in 0..n {
        if near_edge[l] {
            skipped_rows += 1;
            jac_an.row_mut(l).fill(0.0);
            jac_fd.row_mut(l).fill(0.0);
        }
    }
    for s in (0..n).filter(|&s| !movable[s]) {
        jac_an.column_mut(s).fill(0.0);
    }

    Ok(GradientCheck {
        d_line_state: g_err,
        d_inv_star: inv_err,
        d_branch_flow: relative_error(&flow_an, &flow_fd),
        step_jacobian: relative_error(&jac_an, &jac_fd),
        skipped_rows,
    })
}
