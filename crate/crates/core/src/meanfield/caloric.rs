use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::solvers::solve_microcanonical;
use super::{MeanFieldSolution, SolverOptions, WarmStart};
use crate::error::{invalid, Result};
use crate::geometry::QuadratureGrid;
use crate::hamiltonian::ExternalField;

/// One energy of a caloric curve.
#[derive(Debug, Clone, Serialize)]
pub struct CaloricPoint {
    pub eps: f64,
    pub s: f64,
    pub beta_solver: f64,
    /// Finite-difference `∂s/∂ε` (centered, one-sided at the ends).
    pub beta_fd: f64,
    pub residual: f64,
    pub converged: bool,
    /// Solver and finite-difference `β` disagree beyond the error estimate.
    pub flagged: bool,
}

/// `s(ε)` and `β(ε)` over an increasing energy grid.
#[derive(Debug, Clone, Serialize)]
pub struct CaloricCurve {
    pub points: Vec<CaloricPoint>,
    /// Energies whose solve failed, with the error message.
    pub failures: Vec<(f64, String)>,
    pub field: String,
    pub grid: String,
    #[serde(skip)]
    pub solutions: Vec<MeanFieldSolution>,
}

impl CaloricCurve {
    pub fn min_beta(&self) -> Option<f64> {
        self.points.iter().map(|p| p.beta_solver).min_by(f64::total_cmp)
    }
}

/// Sequential warm-started sweep over `eps`, then parallel re-solves from
/// the sweep's solutions at the requested tolerance.
pub fn caloric_curve(
    field: &ExternalField,
    eps: &[f64],
    grid: &Arc<QuadratureGrid>,
    opts: &SolverOptions,
) -> Result<CaloricCurve> {
    if eps.windows(2).any(|w| w[1] <= w[0]) || eps.iter().any(|e| !e.is_finite()) {
        return Err(invalid("eps", "must be finite and strictly increasing"));
    }
    let mut sweep_opts = opts.clone();
    sweep_opts.tol = opts.tol.max(1e-6);
    sweep_opts.energy_tol = opts.energy_tol.max(1e-8);
    if sweep_opts.eps0.is_none() {
        sweep_opts.eps0 = Some(super::ground_state_energy(field, grid)?.eps0);
    }
    let mut warm: Vec<Option<WarmStart>> = Vec::with_capacity(eps.len());
    let mut prev: Option<WarmStart> = None;
    for &e in eps {
        let mut o = sweep_opts.clone();
        o.warm_start = prev.clone();
        let start = match solve_microcanonical(e, field, grid, &o) {
            Ok(s) if s.converged => Some(WarmStart::from_solution(&s)),
            _ => None,
        };
        if start.is_some() {
            prev = start.clone();
        }
        warm.push(start);
    }
    let results: Vec<Result<MeanFieldSolution>> = eps
        .par_iter()
        .zip(warm.par_iter())
        .map(|(&e, w)| {
            let mut o = opts.clone();
            o.eps0 = sweep_opts.eps0;
            o.warm_start = w.clone();
            solve_microcanonical(e, field, grid, &o)
        })
        .collect();
    let mut solutions = Vec::new();
    let mut failures = Vec::new();
    for (&e, r) in eps.iter().zip(results) {
        match r {
            Ok(s) if s.entropy.is_finite() => solutions.push(s),
            Ok(_) => failures.push((e, "non-finite entropy".to_string())),
            Err(err) => failures.push((e, err.to_string())),
        }
    }
    let points = finite_differences(&solutions);
    Ok(CaloricCurve {
        points,
        failures,
        field: format!("{:?}", field),
        grid: grid.descriptor(),
        solutions,
    })
}

fn finite_differences(sols: &[MeanFieldSolution]) -> Vec<CaloricPoint> {
    let e: Vec<f64> = sols.iter().map(|s| s.energy).collect();
    let s: Vec<f64> = sols.iter().map(|s| s.entropy).collect();
    let b: Vec<f64> = sols.iter().map(|s| s.beta).collect();
    let n = sols.len();
    (0..n)
        .map(|i| {
            let beta_fd = if n < 2 {
                f64::NAN
            } else if i == 0 {
                (s[1] - s[0]) / (e[1] - e[0])
            } else if i == n - 1 {
                (s[i] - s[i - 1]) / (e[i] - e[i - 1])
            } else {
                (s[i + 1] - s[i - 1]) / (e[i + 1] - e[i - 1])
            };
            let truncation = if n < 2 {
                0.0
            } else if i == 0 {
                (b[1] - b[0]).abs() / 2.0
            } else if i == n - 1 {
                (b[i] - b[i - 1]).abs() / 2.0
            } else {
                (b[i + 1] - 2.0 * b[i] + b[i - 1]).abs() / 6.0
            };
            let floor = 1e-6 * (1.0 + b[i].abs());
            let flagged = beta_fd.is_finite() && (beta_fd - b[i]).abs() > 5.0 * (truncation + floor);
            CaloricPoint {
                eps: e[i],
                s: s[i],
                beta_solver: b[i],
                beta_fd,
                residual: sols[i].residual,
                converged: sols[i].converged,
                flagged,
            }
        })
        .collect()
}
