use crate::error::{invalid, Error, Result};
use crate::geometry::Domain;

/// Positions and circulations of `N` point vortices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfiguration {
    domain: Domain,
    dim: usize,
    positions: Vec<f64>,
    circulations: Vec<f64>,
}

impl ParticleConfiguration {
    /// `positions` is flattened, `N × ambient_dim`.
    pub fn new(domain: Domain, positions: Vec<f64>, circulations: Vec<f64>) -> Result<Self> {
        let dim = domain.ambient_dim();
        if circulations.is_empty() {
            return Err(invalid("circulations", "need at least one particle"));
        }
        if positions.len() != dim * circulations.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * circulations.len(),
                got: positions.len(),
            });
        }
        for x in positions.chunks_exact(dim) {
            domain.check_point(x)?;
        }
        Ok(ParticleConfiguration {
            domain,
            dim,
            positions,
            circulations,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.circulations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.circulations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn circulations(&self) -> &[f64] {
        &self.circulations
    }

    /// Overwrite position `i` without validation.
    pub(crate) fn set_position(&mut self, i: usize, x: &[f64]) {
        self.positions[i * self.dim..(i + 1) * self.dim].copy_from_slice(x);
    }

    /// Validated move of particle `i`.
    pub fn moved(&self, i: usize, x: &[f64]) -> Result<Self> {
        if i >= self.len() {
            return Err(invalid("i", format!("index {i} out of range for N = {}", self.len())));
        }
        self.domain.check_point(x)?;
        let mut out = self.clone();
        out.set_position(i, x);
        Ok(out)
    }

    /// Reorder particles: the new `k`-th particle is the old `perm[k]`-th.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if perm.len() != self.len() || perm.iter().any(|&p| p >= self.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(invalid("perm", "not a permutation"));
        }
        let positions = perm.iter().flat_map(|&p| self.position(p).to_vec()).collect();
        let circulations = perm.iter().map(|&p| self.circulations[p]).collect();
        Ok(ParticleConfiguration {
            positions,
            circulations,
            ..*self
        })
    }
}
