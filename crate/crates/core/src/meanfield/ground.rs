use std::sync::Arc;

use crate::error::Result;
use crate::geometry::{KernelOperator, QuadratureGrid};
use crate::hamiltonian::{meanfield_energy, DensityField, ExternalField};

/// Minimizer of the mean-field energy over probability densities.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub eps0: f64,
    pub rho: DensityField,
    /// Frank–Wolfe duality gap at termination.
    pub gap: f64,
    pub iterations: usize,
}

/// Energy of the uniform density.
pub fn epsilon_infinity(field: &ExternalField, grid: &Arc<QuadratureGrid>) -> f64 {
    meanfield_energy(&DensityField::uniform(grid.clone()), field)
}

const GAP_TOL: f64 = 1e-8;
const MAX_ITER: usize = 400_000;
const POLISH_EVERY: usize = 5000;

/// Potential `A p` of cell masses `p`.
fn mass_potential(op: &KernelOperator, w: &[f64], p: &[f64]) -> Vec<f64> {
    let rho: Vec<f64> = p.iter().zip(w).map(|(a, b)| a / b).collect();
    op.apply(&rho)
}

/// Projected conjugate gradients on the current support `{pᵢ > 0}` with
/// `Σ pᵢ = 1` held fixed, followed by a ratio test that keeps `p ≥ 0`.
fn polish(op: &KernelOperator, w: &[f64], f: &[f64], p: &mut [f64]) {
    let support: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
    let m = support.len() as f64;
    let project = |v: &mut Vec<f64>| {
        let mean = support.iter().map(|&i| v[i]).sum::<f64>() / m;
        for (i, x) in v.iter_mut().enumerate() {
            *x = if p[i] > 0.0 { *x - mean } else { 0.0 };
        }
    };
    let mut r: Vec<f64> = mass_potential(op, w, p).iter().zip(f).map(|(a, b)| -a - b).collect();
    project(&mut r);
    let mut d = r.clone();
    let mut step = vec![0.0; p.len()];
    let mut rr: f64 = r.iter().map(|a| a * a).sum();
    let r0 = rr.sqrt();
    for _ in 0..200 {
        if rr.sqrt() <= 1e-13 * (1.0 + r0) {
            break;
        }
        let mut ad = mass_potential(op, w, &d);
        project(&mut ad);
        let curv: f64 = d.iter().zip(&ad).map(|(a, b)| a * b).sum();
        if curv <= 0.0 {
            break;
        }
        let alpha = rr / curv;
        step.iter_mut().zip(&d).for_each(|(x, di)| *x += alpha * di);
        r.iter_mut().zip(&ad).for_each(|(x, a)| *x -= alpha * a);
        let rr_new: f64 = r.iter().map(|a| a * a).sum();
        let b = rr_new / rr;
        rr = rr_new;
        d.iter_mut().zip(&r).for_each(|(x, ri)| *x = ri + b * *x);
    }
    let t = support
        .iter()
        .filter(|&&i| step[i] < 0.0)
        .map(|&i| -p[i] / step[i])
        .fold(1.0f64, f64::min);
    for &i in &support {
        p[i] = (p[i] + t * step[i]).max(0.0);
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
}

/// Pairwise Frank–Wolfe on cell masses `pᵢ = wᵢ ρᵢ`, with periodic
/// Newton polishing on the active set.
///
/// The energy `½ pᵀA p + fᵀp` is convex on the simplex, so the gap
/// `Σ pᵢ gᵢ - min g` bounds the distance to the optimum.
pub fn ground_state_energy(field: &ExternalField, grid: &Arc<QuadratureGrid>) -> Result<GroundState> {
    let op = grid.operator();
    let w = grid.weights();
    let n = grid.len();
    let f = field.values_on(grid);
    let volume = grid.measure();
    let mut p: Vec<f64> = w.iter().map(|wi| wi / volume).collect();
    let mut psi = mass_potential(&op, w, &p);
    let mut gap = f64::INFINITY;
    let mut it = 0;
    while it < MAX_ITER {
        if it % POLISH_EVERY == POLISH_EVERY - 1 {
            polish(&op, w, &f, &mut p);
        }
        if it % 1000 == 999 || it % POLISH_EVERY == POLISH_EVERY - 1 {
            psi = mass_potential(&op, w, &p);
        }
        let g: Vec<f64> = psi.iter().zip(&f).map(|(a, b)| a + b).collect();
        let (mut s, mut a) = (0, usize::MAX);
        for i in 0..n {
            if g[i] < g[s] {
                s = i;
            }
            if p[i] > 0.0 && (a == usize::MAX || g[i] > g[a]) {
                a = i;
            }
        }
        gap = p.iter().zip(&g).map(|(pi, gi)| pi * gi).sum::<f64>() - g[s];
        if gap < GAP_TOL || s == a {
            break;
        }
        let col_s = op.column(s);
        let col_a = op.column(a);
        let curvature = col_s[s] + col_a[a] - 2.0 * col_s[a];
        let slope = g[s] - g[a];
        let step = if curvature > 0.0 { (-slope / curvature).min(p[a]) } else { p[a] };
        p[s] += step;
        p[a] -= step;
        if p[a] < 1e-300 {
            p[a] = 0.0;
        }
        for i in 0..n {
            psi[i] += step * (col_s[i] - col_a[i]);
        }
        it += 1;
    }
    let rho = DensityField::normalized(grid.clone(), p.iter().zip(w).map(|(a, b)| a / b).collect())?;
    let eps0 = meanfield_energy(&rho, field);
    Ok(GroundState {
        eps0,
        rho,
        gap,
        iterations: it,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, Domain};
    use std::f64::consts::LN_2;

    #[test]
    fn flat_field_ground_state_is_uniform() {
        let g = Arc::new(build_grid(Domain::sphere(2), &[16, 32]).unwrap());
        let gs = ground_state_energy(&ExternalField::zero(), &g).unwrap();
        assert!(gs.gap < 1e-8);
        assert!((gs.eps0 - (1.0 - 2.0 * LN_2) / 4.0).abs() < 1e-10);
        assert!((gs.eps0 - epsilon_infinity(&ExternalField::zero(), &g)).abs() < 1e-14);
    }

    #[test]
    fn bump_field_lowers_ground_state() {
        let g = Arc::new(build_grid(Domain::sphere(2), &[16, 32]).unwrap());
        let f = ExternalField::two_antipodal_bumps(1.0, 5.0, &g);
        let gs = ground_state_energy(&f, &g).unwrap();
        assert!(gs.gap < 1e-8, "{}", gs.gap);
        assert!(gs.eps0 < epsilon_infinity(&f, &g));
    }

    #[test]
    fn epsilon_infinity_on_circle() {
        // ∫ -ln|2 sin(θ/2)| dθ = 0, and the grid sum converges at first order
        let mut prev = f64::INFINITY;
        for m in [32, 64, 128] {
            let g = Arc::new(build_grid(Domain::sphere(1), &[m]).unwrap());
            let e = epsilon_infinity(&ExternalField::zero(), &g);
            assert!(e.abs() < prev / 1.9);
            prev = e.abs();
        }
        assert!(prev < 0.01);
    }
}
