use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Domain;
use crate::hamiltonian::{total_energy, ExternalField, ParticleConfiguration};

/// Which measure a chain targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EnsembleKind {
    /// `exp(-β H / N)`.
    Canonical { beta: f64 },
    /// `exp(-N (ε - H/N²)² / (2σ²))`.
    MicrocanonicalRegularized { eps: f64, sigma: f64 },
}

/// Particle system without a temperature: domain, circulations, external field.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub domain: Domain,
    pub circulations: Vec<f64>,
    pub field: ExternalField,
    /// `F = field_scale · f` in the Hamiltonian.
    pub field_scale: f64,
}

impl SystemSpec {
    /// Uses the ensemble convention `F = N f`.
    pub fn new(domain: Domain, circulations: Vec<f64>, field: ExternalField) -> Result<Self> {
        let n = circulations.len() as f64;
        Self::with_field_scale(domain, circulations, field, n)
    }

    pub fn with_field_scale(
        domain: Domain,
        circulations: Vec<f64>,
        field: ExternalField,
        field_scale: f64,
    ) -> Result<Self> {
        if circulations.is_empty() {
            return Err(invalid("n", "need at least one particle"));
        }
        if circulations.iter().any(|c| !c.is_finite()) {
            return Err(invalid("circulations", "must be finite"));
        }
        if domain.measure().is_none() {
            return Err(Error::Unsupported(format!("sampling on {domain}: no finite reference measure")));
        }
        Ok(SystemSpec {
            domain,
            circulations,
            field,
            field_scale,
        })
    }

    /// `N` particles, all with circulation `+1`.
    pub fn single_species(domain: Domain, n: usize, field: ExternalField) -> Result<Self> {
        Self::new(domain, vec![1.0; n], field)
    }

    /// `N` particles alternating `+1, -1`; `N` must be even.
    pub fn neutral_pair(domain: Domain, n: usize) -> Result<Self> {
        if !n.is_multiple_of(2) {
            return Err(invalid("n", "a neutral two-species system needs even N"));
        }
        let c = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        Self::new(domain, c, ExternalField::zero())
    }

    pub fn n(&self) -> usize {
        self.circulations.len()
    }

    pub fn energy(&self, config: &ParticleConfiguration) -> Result<f64> {
        total_energy(config, &self.field, self.field_scale)
    }

    pub(crate) fn check(&self, config: &ParticleConfiguration) -> Result<()> {
        if config.domain() != self.domain || config.circulations() != self.circulations.as_slice() {
            return Err(invalid("config", "does not match the ensemble"));
        }
        Ok(())
    }
}

/// A target measure for Metropolis sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub system: SystemSpec,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, system: SystemSpec) -> Result<Self> {
        match kind {
            EnsembleKind::Canonical { beta } if !beta.is_finite() => Err(invalid("beta", "must be finite")),
            EnsembleKind::MicrocanonicalRegularized { sigma, .. } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(invalid("sigma", "must be positive"))
            }
            EnsembleKind::MicrocanonicalRegularized { eps, .. } if !eps.is_finite() => {
                Err(invalid("eps", "must be finite"))
            }
            _ => Ok(EnsembleSpec { kind, system }),
        }
    }

    pub fn n(&self) -> usize {
        self.system.n()
    }

    /// Log weight of a configuration with energy `h`.
    #[inline]
    pub fn log_weight_of_energy(&self, h: f64) -> f64 {
        let n = self.n() as f64;
        match self.kind {
            EnsembleKind::Canonical { beta } => {
                if beta == 0.0 {
                    0.0
                } else {
                    -beta * h / n
                }
            }
            EnsembleKind::MicrocanonicalRegularized { eps, sigma } => {
                let d = eps - h / (n * n);
                -n * d * d / (2.0 * sigma * sigma)
            }
        }
    }
}

/// Log of the unnormalized density w.r.t. the uniform reference measure.
pub fn weight_log(spec: &EnsembleSpec, config: &ParticleConfiguration) -> Result<f64> {
    spec.system.check(config)?;
    Ok(spec.log_weight_of_energy(spec.system.energy(config)?))
}

/// Metropolis–Hastings log acceptance `min(0, to - from)`, where each side
/// carries the target log weight plus the log density of the reverse proposal.
#[inline]
pub fn log_acceptance(log_from: f64, log_to: f64) -> f64 {
    (log_to - log_from).min(0.0)
}
