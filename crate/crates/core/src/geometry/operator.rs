use std::f64::consts::{LN_2, PI};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use super::kernel::{cell_self_kernel, kernel_unchecked};
use super::quadrature::legendre_all;
use super::{dist, GridLayout, QuadratureGrid, SphereTransform};

/// Discrete potential operator `Ψ(xᵢ) = ∫ G(xᵢ, y) ρ(y) dy` on a grid.
///
/// Band-limited S² grids use the exact harmonic multipliers of the chordal
/// log kernel; every other grid uses a dense double sum with the cell-averaged
/// diagonal from [`cell_self_kernel`].
pub enum KernelOperator {
    Spectral {
        transform: Arc<SphereTransform>,
        multipliers: Vec<f64>,
        rings: RingColumns,
    },
    Dense {
        n: usize,
        /// Row-major `G(xᵢ, xⱼ)` with corrected diagonal.
        matrix: Vec<f64>,
        weights: Vec<f64>,
    },
}

/// Lazily computed zonal kernel columns, one per latitude ring.
pub struct RingColumns {
    n_theta: usize,
    n_phi: usize,
    cos_nodes: Vec<f64>,
    cache: OnceLock<Vec<Vec<f64>>>,
}

/// Harmonic coefficients of `-ln|x - y|` on S²: `4π(½ - ln 2)` for `l = 0`
/// and `2π / (l(l+1))` otherwise.
pub fn log_kernel_multiplier(l: usize) -> f64 {
    if l == 0 {
        4.0 * PI * (0.5 - LN_2)
    } else {
        2.0 * PI / (l as f64 * (l as f64 + 1.0))
    }
}

impl KernelOperator {
    pub fn for_grid(grid: &QuadratureGrid) -> Self {
        if let (Some(transform), GridLayout::SphereRings { n_theta, n_phi, cos_nodes, .. }) =
            (grid.transform(), grid.layout())
        {
            let multipliers = (0..=transform.lmax()).map(log_kernel_multiplier).collect();
            return KernelOperator::Spectral {
                transform,
                multipliers,
                rings: RingColumns {
                    n_theta: *n_theta,
                    n_phi: *n_phi,
                    cos_nodes: cos_nodes.clone(),
                    cache: OnceLock::new(),
                },
            };
        }
        Self::dense(grid)
    }

    /// Dense double-sum operator for any grid.
    pub fn dense(grid: &QuadratureGrid) -> Self {
        let n = grid.len();
        let domain = grid.domain();
        let mut matrix = vec![0.0; n * n];
        matrix.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let xi = grid.node(i);
            for (j, g) in row.iter_mut().enumerate() {
                *g = if i == j {
                    cell_self_kernel(&domain, xi, grid.cell_radius()[i])
                } else {
                    let xj = grid.node(j);
                    kernel_unchecked(&domain, xi, xj, dist(xi, xj))
                };
            }
        });
        KernelOperator::Dense {
            n,
            matrix,
            weights: grid.weights().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            KernelOperator::Spectral { transform, .. } => transform.len(),
            KernelOperator::Dense { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Potential of a density given by its node values.
    pub fn apply(&self, rho: &[f64]) -> Vec<f64> {
        match self {
            KernelOperator::Spectral {
                transform,
                multipliers,
                ..
            } => transform.apply_multiplier(rho, |l| multipliers[l]),
            KernelOperator::Dense { n, matrix, weights } => {
                let mass: Vec<f64> = rho.iter().zip(weights).map(|(r, w)| r * w).collect();
                matrix
                    .par_chunks(*n)
                    .map(|row| row.iter().zip(&mass).map(|(g, m)| g * m).sum())
                    .collect()
            }
        }
    }

    /// Potential generated by a unit point mass at node `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        match self {
            KernelOperator::Spectral {
                transform,
                multipliers,
                rings,
            } => rings.column(j, transform.lmax(), multipliers),
            KernelOperator::Dense { n, matrix, .. } => matrix[j * n..(j + 1) * n].to_vec(),
        }
    }

    /// `G̃(xⱼ, xⱼ)`: self-potential of a unit point mass at node `j`.
    pub fn diagonal(&self, j: usize) -> f64 {
        match self {
            KernelOperator::Dense { n, matrix, .. } => matrix[j * n + j],
            KernelOperator::Spectral { multipliers, .. } => (0..multipliers.len())
                .map(|l| multipliers[l] * (2.0 * l as f64 + 1.0) / (4.0 * PI))
                .sum(),
        }
    }
}

impl RingColumns {
    fn column(&self, j: usize, lmax: usize, multipliers: &[f64]) -> Vec<f64> {
        let cache = self.cache.get_or_init(|| {
            (0..self.n_theta)
                .into_par_iter()
                .map(|ring| self.zonal_column(ring, lmax, multipliers))
                .collect()
        });
        let ring = j / self.n_phi;
        let shift = j % self.n_phi;
        let base = &cache[ring];
        let mut out = vec![0.0; base.len()];
        for jr in 0..self.n_theta {
            let src = &base[jr * self.n_phi..(jr + 1) * self.n_phi];
            let dst = &mut out[jr * self.n_phi..(jr + 1) * self.n_phi];
            for k in 0..self.n_phi {
                dst[(k + shift) % self.n_phi] = src[k];
            }
        }
        out
    }

    fn zonal_column(&self, ring: usize, lmax: usize, multipliers: &[f64]) -> Vec<f64> {
        let coef: Vec<f64> = (0..=lmax)
            .map(|l| multipliers[l] * (2.0 * l as f64 + 1.0) / (4.0 * PI))
            .collect();
        let t0 = self.cos_nodes[ring];
        let s0 = (1.0 - t0 * t0).sqrt();
        let mut out = Vec::with_capacity(self.n_theta * self.n_phi);
        for jr in 0..self.n_theta {
            let t = self.cos_nodes[jr];
            let s = (1.0 - t * t).sqrt();
            for k in 0..self.n_phi {
                let phi = 2.0 * PI * k as f64 / self.n_phi as f64;
                let c = (t * t0 + s * s0 * phi.cos()).clamp(-1.0, 1.0);
                let p = legendre_all(lmax, c);
                out.push(coef.iter().zip(&p).map(|(a, b)| a * b).sum());
            }
        }
        out
    }
}
