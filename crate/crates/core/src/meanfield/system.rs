//! Shared machinery for one- and two-species mean-field problems.
//!
//! A state is a list of species densities `ρ_s` with signs `c_s`; the
//! vorticity is `ω = Σ c_s ρ_s`, the potential `φ = K ω + f`, the energy
//! `E = Σ wᵢ ωᵢ (½ (Kω)ᵢ + fᵢ)`, and the Gibbs map
//! `T_s(ρ) = exp(-β c_s φ) / Z_s`.

use std::sync::Arc;

use crate::geometry::{KernelOperator, QuadratureGrid};
use crate::hamiltonian::ExternalField;

pub(crate) struct System {
    pub grid: Arc<QuadratureGrid>,
    pub op: Arc<KernelOperator>,
    pub f: Vec<f64>,
    pub signs: Vec<f64>,
    pub volume: f64,
}

/// Densities plus derived potential and energy.
#[derive(Clone)]
pub(crate) struct Eval {
    pub psi: Vec<f64>,
    pub energy: f64,
}

impl System {
    pub fn new(grid: &Arc<QuadratureGrid>, field: &ExternalField, signs: Vec<f64>) -> Self {
        System {
            grid: grid.clone(),
            op: grid.operator(),
            f: field.values_on(grid),
            signs,
            volume: grid.measure(),
        }
    }

    pub fn species(&self) -> usize {
        self.signs.len()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn weights(&self) -> &[f64] {
        self.grid.weights()
    }

    pub fn omega(&self, rhos: &[Vec<f64>]) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        for (r, &c) in rhos.iter().zip(&self.signs) {
            for (a, b) in w.iter_mut().zip(r) {
                *a += c * b;
            }
        }
        w
    }

    pub fn eval(&self, rhos: &[Vec<f64>]) -> Eval {
        let omega = self.omega(rhos);
        let psi = self.op.apply(&omega);
        let energy = self.energy_of(&omega, &psi);
        Eval { psi, energy }
    }

    pub fn energy_of(&self, omega: &[f64], psi: &[f64]) -> f64 {
        self.weights()
            .iter()
            .zip(omega)
            .zip(psi.iter().zip(&self.f))
            .map(|((w, o), (p, f))| w * o * (0.5 * p + f))
            .sum()
    }

    /// `φ = Kω + f`.
    pub fn phi(&self, psi: &[f64]) -> Vec<f64> {
        psi.iter().zip(&self.f).map(|(p, f)| p + f).collect()
    }

    pub fn entropy_one(&self, rho: &[f64]) -> f64 {
        self.weights()
            .iter()
            .zip(rho)
            .map(|(w, &r)| if r > 0.0 { -w * r * (self.volume * r).ln() } else { 0.0 })
            .sum()
    }

    pub fn entropy(&self, rhos: &[Vec<f64>]) -> f64 {
        rhos.iter().map(|r| self.entropy_one(r)).sum()
    }

    /// `exp(-β c φ) / Z` and `ln Z`.
    pub fn gibbs(&self, beta: f64, c: f64, phi: &[f64]) -> (Vec<f64>, f64) {
        let a = -beta * c;
        let m = phi.iter().map(|p| a * p).fold(f64::NEG_INFINITY, f64::max);
        let mut rho: Vec<f64> = phi.iter().map(|p| (a * p - m).exp()).collect();
        let z: f64 = self.weights().iter().zip(&rho).map(|(w, r)| w * r).sum();
        rho.iter_mut().for_each(|r| *r /= z);
        (rho, m + z.ln())
    }

    pub fn gibbs_all(&self, beta: f64, phi: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.signs.iter().map(|&c| self.gibbs(beta, c, phi)).unzip()
    }

    /// Sup-norm defect `|ρ - exp(-β c φ - ln Z)| / (1 + ρ)` at each node.
    pub fn el_residual(&self, rhos: &[Vec<f64>], beta: f64, psi: &[f64]) -> f64 {
        let phi = self.phi(psi);
        let (targets, _) = self.gibbs_all(beta, &phi);
        rhos.iter()
            .zip(&targets)
            .flat_map(|(r, t)| r.iter().zip(t).map(|(a, b)| (a - b).abs() / (1.0 + a)))
            .fold(0.0, f64::max)
    }

    pub fn normalize(&self, rho: &mut [f64]) {
        let m: f64 = self.weights().iter().zip(rho.iter()).map(|(w, r)| w * r).sum();
        rho.iter_mut().for_each(|r| *r /= m);
    }

    pub fn uniform(&self) -> Vec<Vec<f64>> {
        vec![vec![1.0 / self.volume; self.len()]; self.species()]
    }

    /// Densities `∝ exp(c_s · a · ⟨x, dir⟩)`, a mild symmetry-breaking start.
    pub fn tilted(&self, a: f64, dir: &[f64]) -> Vec<Vec<f64>> {
        self.signs
            .iter()
            .map(|&c| {
                let mut r = self.grid.map_nodes(|x| (c * a * x.iter().zip(dir).map(|(p, q)| p * q).sum::<f64>()).exp());
                self.normalize(&mut r);
                r
            })
            .collect()
    }

    pub fn max_cell_mass(&self, rhos: &[Vec<f64>]) -> f64 {
        rhos.iter()
            .flat_map(|r| self.weights().iter().zip(r).map(|(w, v)| w * v))
            .fold(0.0, f64::max)
    }
}

/// A generic direction for symmetry-breaking starts, fixed for reproducibility.
pub(crate) fn generic_direction(dim: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..dim).map(|k| [0.31, -0.17, 0.93, 0.11, -0.05][k % 5]).collect();
    let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.iter().map(|v| v / n).collect()
}
