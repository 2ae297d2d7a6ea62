//! Metropolis sampling of the canonical and regularized microcanonical
//! measures, Wang–Landau density-of-states estimation, and the empirical
//! one-particle observables built from stored chains.

mod ensemble;
mod mcmc;
mod proposal;
mod wang_landau;

pub use ensemble::{log_acceptance, weight_log, EnsembleKind, EnsembleSpec, SystemSpec};
pub use mcmc::{
    empirical_density, integrated_autocorrelation, lln_observable, mcmc_run, mcmc_run_chains, mcmc_run_with,
    mean_and_error, ChainResult, McmcOptions, SpeciesFilter,
};
pub use wang_landau::{default_window, wang_landau, DosResult, WangLandauOptions};
