//! Newton–Krylov with exact Jacobian products for the mean-field Euler–Lagrange system.
//!
//! Unknowns are `v_s = ln ρ_s` (and `β` when the energy is prescribed). The
//! residual is `v_s + β c_s φ + ln Z_s`, weighted by `sqrt(wᵢ/|Λ|)`, plus
//! `λ (E - ε)` for the energy row.

use super::system::System;

const ENERGY_WEIGHT: f64 = 10.0;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Constraint {
    FixedBeta(f64),
    Energy(f64),
    /// `E - ε = β σ²`, the stationarity condition of the penalized entropy.
    Penalized { eps: f64, sigma: f64 },
}

impl Constraint {
    fn energy_defect(&self, energy: f64, beta: f64) -> f64 {
        match *self {
            Constraint::FixedBeta(_) => 0.0,
            Constraint::Energy(eps) => energy - eps,
            Constraint::Penalized { eps, sigma } => energy - eps - beta * sigma * sigma,
        }
    }
}

pub(crate) struct NewtonResult {
    pub rhos: Vec<Vec<f64>>,
    pub beta: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct NewtonOptions {
    pub tol: f64,
    pub energy_tol: f64,
    pub max_iter: usize,
    pub beta_cap: f64,
}

struct Layout {
    n: usize,
    species: usize,
    constraint: Constraint,
}

impl Layout {
    fn beta(&self, x: &[f64]) -> f64 {
        match self.constraint {
            Constraint::FixedBeta(b) => b,
            Constraint::Energy(_) | Constraint::Penalized { .. } => x[self.n * self.species],
        }
    }

    fn densities(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.species)
            .map(|s| x[s * self.n..(s + 1) * self.n].iter().map(|v| v.exp()).collect())
            .collect()
    }
}

fn residual(sys: &System, lay: &Layout, x: &[f64], scale: &[f64]) -> Vec<f64> {
    let rhos = lay.densities(x);
    let beta = lay.beta(x);
    let ev = sys.eval(&rhos);
    let phi = sys.phi(&ev.psi);
    let mut out = Vec::with_capacity(x.len());
    for (s, &c) in sys.signs.iter().enumerate() {
        let a = -beta * c;
        let m = phi.iter().map(|p| a * p).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = sys.weights().iter().zip(&phi).map(|(w, p)| w * (a * p - m).exp()).sum();
        let ln_z = m + z.ln();
        let v = &x[s * lay.n..(s + 1) * lay.n];
        out.extend(v.iter().zip(&phi).zip(scale).map(|((vi, p), sc)| sc * (vi - a * p + ln_z)));
    }
    if !matches!(lay.constraint, Constraint::FixedBeta(_)) {
        out.push(ENERGY_WEIGHT * lay.constraint.energy_defect(ev.energy, beta));
    }
    out
}

/// Quantities at a Newton iterate needed for exact Jacobian products.
struct Linearization {
    rhos: Vec<Vec<f64>>,
    phi: Vec<f64>,
    /// Gibbs weights `wᵢ exp(a φᵢ)/Z` per species.
    probs: Vec<Vec<f64>>,
    beta: f64,
}

impl Linearization {
    fn new(sys: &System, lay: &Layout, x: &[f64]) -> Self {
        let rhos = lay.densities(x);
        let beta = lay.beta(x);
        let phi = sys.phi(&sys.eval(&rhos).psi);
        let probs = sys
            .signs
            .iter()
            .map(|&c| {
                let (rho, _) = sys.gibbs(beta, c, &phi);
                rho.iter().zip(sys.weights()).map(|(r, w)| r * w).collect()
            })
            .collect();
        Linearization { rhos, phi, probs, beta }
    }

    fn apply(&self, sys: &System, lay: &Layout, scale: &[f64], d: &[f64]) -> Vec<f64> {
        let n = lay.n;
        let dbeta = match lay.constraint {
            Constraint::FixedBeta(_) => 0.0,
            _ => d[n * lay.species],
        };
        let mut domega = vec![0.0; n];
        for (s, &c) in sys.signs.iter().enumerate() {
            for i in 0..n {
                domega[i] += c * self.rhos[s][i] * d[s * n + i];
            }
        }
        let dphi = sys.op.apply(&domega);
        let mut out = Vec::with_capacity(d.len());
        for (s, &c) in sys.signs.iter().enumerate() {
            let a = -self.beta * c;
            // d(a φ) = -c dβ φ + a dφ
            let dap: Vec<f64> = self.phi.iter().zip(&dphi).map(|(p, dp)| -c * dbeta * p + a * dp).collect();
            let dlnz: f64 = self.probs[s].iter().zip(&dap).map(|(q, v)| q * v).sum();
            out.extend((0..n).map(|i| scale[i] * (d[s * n + i] - dap[i] + dlnz)));
        }
        if !matches!(lay.constraint, Constraint::FixedBeta(_)) {
            let de: f64 = sys.weights().iter().zip(&domega).zip(&self.phi).map(|((w, o), p)| w * o * p).sum();
            let dpen = match lay.constraint {
                Constraint::Penalized { sigma, .. } => sigma * sigma * dbeta,
                _ => 0.0,
            };
            out.push(ENERGY_WEIGHT * (de - dpen));
        }
        out
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Restarted GMRES for `A x = b` from `x = 0`.
fn gmres(mut apply: impl FnMut(&[f64]) -> Vec<f64>, b: &[f64], rtol: f64, restart: usize, max_iter: usize) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return x;
    }
    let mut total = 0;
    while total < max_iter {
        let ax = if total == 0 { vec![0.0; n] } else { apply(&x) };
        let r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        let beta = norm(&r);
        if beta <= rtol * bnorm {
            break;
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|a| a / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            total += 1;
            let mut w = apply(&v[k]);
            for (j, vj) in v.iter().enumerate() {
                let hj: f64 = w.iter().zip(vj).map(|(a, c)| a * c).sum();
                h[j][k] = hj;
                w.iter_mut().zip(vj).for_each(|(a, c)| *a -= hj * c);
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if d == 0.0 {
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= rtol * bnorm || hn == 0.0 || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|a| a / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            x.iter_mut().zip(&v[i]).for_each(|(a, c)| *a += yi * c);
        }
        if g[k_used].abs() <= rtol * bnorm {
            break;
        }
    }
    x
}

pub(crate) fn newton_solve(
    sys: &System,
    rhos0: &[Vec<f64>],
    beta0: f64,
    constraint: Constraint,
    opts: &NewtonOptions,
) -> NewtonResult {
    let n = sys.len();
    let lay = Layout {
        n,
        species: sys.species(),
        constraint,
    };
    let scale: Vec<f64> = sys.weights().iter().map(|w| (w / sys.volume).sqrt()).collect();
    let floor = 1e-300f64.ln();
    let mut x: Vec<f64> = rhos0
        .iter()
        .flat_map(|r| r.iter().map(|&v| if v > 0.0 { v.ln() } else { floor }.max(-690.0)))
        .collect();
    if !matches!(constraint, Constraint::FixedBeta(_)) {
        x.push(beta0);
    }
    let mut fx = residual(sys, &lay, &x, &scale);
    let mut fnorm = norm(&fx);
    let status = |x: &[f64]| -> (Vec<Vec<f64>>, f64, f64, f64) {
        let mut rhos = lay.densities(x);
        rhos.iter_mut().for_each(|r| sys.normalize(r));
        let beta = lay.beta(x);
        let ev = sys.eval(&rhos);
        let res = sys.el_residual(&rhos, beta, &ev.psi);
        let defect = constraint.energy_defect(ev.energy, beta).abs();
        (rhos, beta, res, defect)
    };
    let mut it = 0;
    loop {
        let (rhos, beta, res, defect) = status(&x);
        let done = res < opts.tol && defect < opts.energy_tol;
        if done || it >= opts.max_iter || beta.abs() > opts.beta_cap || !fnorm.is_finite() {
            return NewtonResult {
                rhos,
                beta,
                residual: res,
                iterations: it,
                converged: done && beta.abs() <= opts.beta_cap,
            };
        }
        it += 1;
        let lin = Linearization::new(sys, &lay, &x);
        let rhs: Vec<f64> = fx.iter().map(|v| -v).collect();
        let eta = (0.1f64).min(fnorm.sqrt()).max(1e-6);
        let dx = gmres(|d: &[f64]| lin.apply(sys, &lay, &scale, d), &rhs, eta, 40, 200);
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-4 {
            let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + lambda * b).collect();
            let ft = residual(sys, &lay, &xt, &scale);
            let nt = norm(&ft);
            if nt.is_finite() && nt < (1.0 - 1e-4 * lambda) * fnorm {
                x = xt;
                fx = ft;
                fnorm = nt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            let (rhos, beta, res, _) = status(&x);
            return NewtonResult {
                rhos,
                beta,
                residual: res,
                iterations: it,
                converged: false,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, Domain};
    use crate::hamiltonian::ExternalField;
    use std::sync::Arc;

    #[test]
    fn jacobian_product_matches_finite_differences() {
        let g = Arc::new(build_grid(Domain::Disk2d, &[6, 12]).unwrap());
        let sys = System::new(&g, &ExternalField::zero(), vec![1.0, -1.0]);
        let n = sys.len();
        let lay = Layout {
            n,
            species: 2,
            constraint: Constraint::Penalized { eps: 0.01, sigma: 0.3 },
        };
        let scale: Vec<f64> = sys.weights().iter().map(|w| (w / sys.volume).sqrt()).collect();
        let mut x: Vec<f64> = (0..2 * n).map(|i| (0.37 * i as f64).sin() * 0.5 - 1.0).collect();
        x.push(-2.5);
        let d: Vec<f64> = (0..=2 * n).map(|i| (1.3 * i as f64).cos()).collect();
        let exact = Linearization::new(&sys, &lay, &x).apply(&sys, &lay, &scale, &d);
        let h = 1e-6;
        let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - h * b).collect();
        let (fp, fm) = (residual(&sys, &lay, &xp, &scale), residual(&sys, &lay, &xm, &scale));
        for i in 0..exact.len() {
            let fd = (fp[i] - fm[i]) / (2.0 * h);
            assert!((fd - exact[i]).abs() < 1e-7 * (1.0 + fd.abs()), "{i}: {fd} vs {}", exact[i]);
        }
    }

    #[test]
    fn gmres_solves_small_system() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, -1.0], [0.0, -1.0, 2.0]];
        let b = [1.0, 2.0, 3.0];
        let x = gmres(
            |v| (0..3).map(|i| (0..3).map(|j| a[i][j] * v[j]).sum()).collect(),
            &b,
            1e-12,
            2,
            50,
        );
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i][j] * x[j]).sum::<f64>() - b[i];
            assert!(r.abs() < 1e-10);
        }
    }
}
