//! Mean-field entropy maximization.
//!
//! Densities solve the self-consistent Gibbs relation
//! `ρ = exp(β[μ_ch - Ψ_ρ - f])`. The canonical solver fixes `β`; the
//! microcanonical solvers fix the energy `ε` and treat `β` as the Lagrange
//! multiplier, either through the penalized functional
//! `R = S - (ε - E)²/(2σ²)` or the exact constraint.

mod caloric;
mod ground;
mod newton;
mod solvers;
mod system;

use std::sync::Arc;

use serde::Serialize;

use crate::geometry::QuadratureGrid;
use crate::hamiltonian::{potential, DensityField, ExternalField};

pub use caloric::{caloric_curve, CaloricCurve, CaloricPoint};
pub use ground::{epsilon_infinity, ground_state_energy, GroundState};
pub use solvers::{
    multi_start, solve_canonical, solve_microcanonical, solve_microcanonical_penalized, solve_two_species,
    TwoSpeciesTarget,
};

/// Tolerances and schedules shared by the solvers.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Sup-norm Euler–Lagrange defect at convergence.
    pub tol: f64,
    /// `|E[ρ] - ε|` at convergence of constrained solves.
    pub energy_tol: f64,
    pub max_iter: usize,
    /// Initial damping of fixed-point iterations.
    pub damping: f64,
    /// Penalty widths used before the constrained polish.
    pub sigma_schedule: Vec<f64>,
    /// Iteration cap per penalized stage of the continuation.
    pub stage_iterations: usize,
    pub newton_iterations: usize,
    /// `β` beyond which the solver reports proximity to the ground state.
    pub beta_cap: f64,
    pub warm_start: Option<WarmStart>,
    /// Known ground-state energy, to skip recomputing it.
    pub eps0: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            energy_tol: 1e-10,
            max_iter: 5000,
            damping: 0.5,
            sigma_schedule: vec![0.4, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005],
            stage_iterations: 300,
            newton_iterations: 60,
            beta_cap: 1e4,
            warm_start: None,
            eps0: None,
        }
    }
}

/// Starting point for a solve: species densities and `β`.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub densities: Vec<Vec<f64>>,
    pub beta: f64,
}

impl WarmStart {
    pub fn from_solution(s: &MeanFieldSolution) -> Self {
        let mut densities = vec![s.rho.values().to_vec()];
        if let Some(m) = &s.rho_minus {
            densities.push(m.values().to_vec());
        }
        WarmStart { densities, beta: s.beta }
    }
}

/// A stationary point of the mean-field problem.
#[derive(Debug, Clone)]
pub struct MeanFieldSolution {
    /// Density (positive species for two-species problems).
    pub rho: DensityField,
    pub rho_minus: Option<DensityField>,
    pub beta: f64,
    /// `μ_ch = -ln Z / β`; zero when `β = 0`.
    pub mu_ch: f64,
    pub mu_ch_minus: Option<f64>,
    /// `ln Z` per species, so that `ρ = exp(-β c φ - ln Z)`.
    pub log_partition: Vec<f64>,
    pub energy: f64,
    pub entropy: f64,
    /// Attained `R_{ε,σ}` for penalized solves.
    pub objective: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `β` hit the cap; the density is the nearby ground state.
    pub beta_capped: bool,
    /// Description of the starting point.
    pub start: String,
    /// Objective after each accepted penalized iteration.
    pub history: Vec<f64>,
}

impl MeanFieldSolution {
    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        self.rho.grid()
    }

    /// Node-wise `|ρ - exp(β[μ_ch - Ψ - f])| / (1 + ρ)`, maximized over nodes.
    pub fn euler_lagrange_defect(&self, field: &ExternalField) -> f64 {
        let grid = self.grid();
        let f = field.values_on(grid);
        let omega: Vec<f64> = match &self.rho_minus {
            Some(m) => self.rho.values().iter().zip(m.values()).map(|(a, b)| a - b).collect(),
            None => self.rho.values().to_vec(),
        };
        let psi = grid.operator().apply(&omega);
        let mut worst: f64 = 0.0;
        let species: Vec<(&DensityField, f64, f64)> = match &self.rho_minus {
            Some(m) => vec![(&self.rho, 1.0, self.log_partition[0]), (m, -1.0, self.log_partition[1])],
            None => vec![(&self.rho, 1.0, self.log_partition[0])],
        };
        for (rho, c, ln_z) in species {
            for ((r, p), fi) in rho.values().iter().zip(&psi).zip(&f) {
                let target = (-self.beta * c * (p + fi) - ln_z).exp();
                worst = worst.max((r - target).abs() / (1.0 + r));
            }
        }
        worst
    }

    /// Metadata for JSON export.
    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            beta: self.beta,
            mu_ch: self.mu_ch,
            mu_ch_minus: self.mu_ch_minus,
            eps: self.energy,
            s: self.entropy,
            objective: self.objective,
            residual: self.residual,
            iterations: self.iterations,
            converged: self.converged,
            beta_capped: self.beta_capped,
            start: self.start.clone(),
            grid: self.grid().descriptor(),
        }
    }
}

/// Serializable scalar part of a [`MeanFieldSolution`].
#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary {
    pub beta: f64,
    pub mu_ch: f64,
    pub mu_ch_minus: Option<f64>,
    pub eps: f64,
    pub s: f64,
    pub objective: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub beta_capped: bool,
    pub start: String,
    pub grid: String,
}

/// Potential of a solution's (signed) density, with the field added.
pub fn total_potential(sol: &MeanFieldSolution, field: &ExternalField) -> Vec<f64> {
    let psi = match &sol.rho_minus {
        Some(m) => {
            let omega: Vec<f64> = sol.rho.values().iter().zip(m.values()).map(|(a, b)| a - b).collect();
            sol.grid().operator().apply(&omega)
        }
        None => potential(&sol.rho),
    };
    psi.iter().zip(field.values_on(sol.grid())).map(|(p, f)| p + f).collect()
}
