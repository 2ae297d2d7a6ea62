use std::sync::Arc;

use serde::Serialize;

use super::curvature::{conformal_factor, curvature_from_f, gauss_bonnet_integral, CurvatureSpec, CRITICAL_BETA_TOL};
use super::paneitz::{nirenberg_residual, NirenbergResidual};
use crate::error::{Error, Result};
use crate::geometry::{Domain, QuadratureGrid};
use crate::hamiltonian::ExternalField;
use crate::meanfield::{
    caloric_curve, epsilon_infinity, solve_canonical, solve_microcanonical, CaloricCurve, MeanFieldSolution,
    SolverOptions, WarmStart,
};

/// Tolerance on `|β(ε*) + 2n|` for the refined crossing.
const BETA_TOL: f64 = 1e-9;
const MAX_REFINE: usize = 60;

/// Energy `ε*` with `β(ε*) = -2n` and the associated conformal data.
#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub eps_star: f64,
    pub beta: f64,
    /// `f ≡ 0`: `β = -2n` on a whole energy interval.
    pub degenerate: bool,
    pub refine_iterations: usize,
    /// `n = 2` only.
    pub residual: Option<NirenbergResidual>,
    /// `∫ Q e^{nu}`.
    pub gauss_bonnet: f64,
    pub u: Vec<f64>,
    #[serde(skip)]
    pub q: CurvatureSpec,
    #[serde(skip)]
    pub solution: MeanFieldSolution,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub target_beta: f64,
    /// Range of converged `β` on the window.
    pub beta_min: Option<f64>,
    pub beta_max: Option<f64>,
    pub result: Option<ScanResult>,
    #[serde(skip)]
    pub curve: Option<CaloricCurve>,
}

fn emit(
    sol: MeanFieldSolution,
    field: &ExternalField,
    grid: &Arc<QuadratureGrid>,
    degenerate: bool,
    refine_iterations: usize,
) -> Result<ScanResult> {
    let u = conformal_factor(&sol, field)?;
    let q = curvature_from_f(field, grid)?;
    let residual = if q.n == 2 { Some(nirenberg_residual(&u, &q)?) } else { None };
    Ok(ScanResult {
        eps_star: sol.energy,
        beta: sol.beta,
        degenerate,
        refine_iterations,
        residual,
        gauss_bonnet: gauss_bonnet_integral(&q, &u),
        u,
        q,
        solution: sol,
    })
}

/// Find `ε*` in the window `eps` where the caloric curve crosses `β = -2n`.
pub fn scan_beta_target(
    field: &ExternalField,
    eps: &[f64],
    grid: &Arc<QuadratureGrid>,
    opts: &SolverOptions,
) -> Result<ScanReport> {
    let n = match grid.domain() {
        Domain::Sphere { n } => n,
        other => return Err(Error::Unsupported(format!("scan needs a sphere grid, got {other:?}"))),
    };
    let target = -2.0 * n as f64;
    if field.is_zero() {
        let mut o = opts.clone();
        o.warm_start = None;
        let sol = solve_canonical(target, field, grid, &o)?;
        let mut res = emit(sol, field, grid, true, 0)?;
        res.eps_star = epsilon_infinity(field, grid);
        return Ok(ScanReport {
            target_beta: target,
            beta_min: Some(target),
            beta_max: Some(target),
            result: Some(res),
            curve: None,
        });
    }
    let curve = caloric_curve(field, eps, grid, opts)?;
    let pts: Vec<usize> = (0..curve.points.len()).filter(|&i| curve.points[i].converged).collect();
    let betas: Vec<f64> = pts.iter().map(|&i| curve.points[i].beta_solver).collect();
    let beta_min = betas.iter().cloned().reduce(f64::min);
    let beta_max = betas.iter().cloned().reduce(f64::max);
    let crossing = pts.windows(2).find(|w| {
        let a = curve.points[w[0]].beta_solver - target;
        let b = curve.points[w[1]].beta_solver - target;
        a == 0.0 || a * b < 0.0
    });
    let Some(w) = crossing else {
        return Ok(ScanReport {
            target_beta: target,
            beta_min,
            beta_max,
            result: None,
            curve: Some(curve),
        });
    };
    let (i, j) = (w[0], w[1]);
    let mut lo = (curve.points[i].eps, curve.points[i].beta_solver - target, curve.solutions[i].clone());
    let mut hi = (curve.points[j].eps, curve.points[j].beta_solver - target, curve.solutions[j].clone());
    let mut best = if lo.1.abs() <= hi.1.abs() { lo.2.clone() } else { hi.2.clone() };
    let mut iterations = 0;
    let mut side = 0i8;
    while (best.beta - target).abs() >= BETA_TOL && iterations < MAX_REFINE {
        iterations += 1;
        // Illinois variant of regula falsi.
        let e = (lo.0 * hi.1 - hi.0 * lo.1) / (hi.1 - lo.1);
        let e = if e > lo.0.min(hi.0) && e < lo.0.max(hi.0) { e } else { 0.5 * (lo.0 + hi.0) };
        let mut o = opts.clone();
        let near = if (e - lo.0).abs() < (e - hi.0).abs() { &lo.2 } else { &hi.2 };
        o.warm_start = Some(WarmStart::from_solution(near));
        let sol = match solve_microcanonical(e, field, grid, &o) {
            Ok(s) if s.converged => s,
            _ => break,
        };
        let g = sol.beta - target;
        if (g.abs()) < (best.beta - target).abs() {
            best = sol.clone();
        }
        if g * lo.1 > 0.0 {
            lo = (e, g, sol);
            if side == -1 {
                hi.1 *= 0.5;
            }
            side = -1;
        } else {
            hi = (e, g, sol);
            if side == 1 {
                lo.1 *= 0.5;
            }
            side = 1;
        }
    }
    if (best.beta - target).abs() >= CRITICAL_BETA_TOL {
        let mut o = opts.clone();
        o.warm_start = Some(WarmStart::from_solution(&best));
        best = solve_canonical(target, field, grid, &o)?;
    }
    let res = emit(best, field, grid, false, iterations)?;
    Ok(ScanReport {
        target_beta: target,
        beta_min,
        beta_max,
        result: Some(res),
        curve: Some(curve),
    })
}
