//! Domains, log kernels, quadrature grids and uniform sampling.
//!
//! Points are plain `&[f64]` slices in the embedding space: unit vectors of
//! `R^{n+1}` for `Sⁿ`, and pairs `(x, y)` for the disk and the plane.

mod grid;
pub(crate) mod kernel;
mod operator;
mod quadrature;
pub(crate) mod sampling;
mod spectral;

pub use grid::{build_grid, GridLayout, QuadratureGrid};
pub use kernel::{kernel_log, self_energy_disk, cell_self_kernel};
pub use operator::KernelOperator;
pub use quadrature::gauss_legendre;
pub use sampling::sample_uniform;
pub use spectral::{Coefficients, SphereTransform};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Tolerance on `|x| = 1` for points of `Sⁿ`.
pub const SPHERE_TOL: f64 = 1e-12;

/// The geometric arena carrying the particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// Unit sphere `Sⁿ ⊂ R^{n+1}` with the chordal log kernel.
    Sphere { n: usize },
    /// Unit disk with the Dirichlet Green's function.
    Disk2d,
    /// The whole plane with the free kernel `-ln|x - y|`.
    Plane2d,
}

impl Domain {
    pub fn sphere(n: usize) -> Self {
        Domain::Sphere { n }
    }

    /// Number of coordinates of a point.
    pub fn ambient_dim(&self) -> usize {
        match *self {
            Domain::Sphere { n } => n + 1,
            Domain::Disk2d | Domain::Plane2d => 2,
        }
    }

    /// Dimension of the manifold itself.
    pub fn intrinsic_dim(&self) -> usize {
        match *self {
            Domain::Sphere { n } => n,
            Domain::Disk2d | Domain::Plane2d => 2,
        }
    }

    /// Total surface measure; `None` for the plane.
    pub fn measure(&self) -> Option<f64> {
        match *self {
            Domain::Sphere { n } => Some(sphere_area(n)),
            Domain::Disk2d => Some(PI),
            Domain::Plane2d => None,
        }
    }

    pub fn sphere_dim(&self) -> Option<usize> {
        match *self {
            Domain::Sphere { n } => Some(n),
            _ => None,
        }
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: x.len(),
            });
        }
        match self {
            Domain::Sphere { .. } => {
                let r = norm(x);
                if (r - 1.0).abs() > 1e-9 {
                    return Err(Error::OutsideDomain(format!("|x| = {r} on the sphere")));
                }
            }
            Domain::Disk2d => {
                let r = norm(x);
                if r >= 1.0 {
                    return Err(Error::OutsideDomain(format!("|x| = {r} in the unit disk")));
                }
            }
            Domain::Plane2d => {}
        }
        Ok(())
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Domain::Sphere { n } => write!(f, "S^{n}"),
            Domain::Disk2d => write!(f, "disk2d"),
            Domain::Plane2d => write!(f, "plane2d"),
        }
    }
}

/// `|Sⁿ| = 2 π^{(n+1)/2} / Γ((n+1)/2)`, via the two-step recursion.
pub fn sphere_area(n: usize) -> f64 {
    let mut area = if n.is_multiple_of(2) { 2.0 } else { 2.0 * PI };
    let mut k = if n.is_multiple_of(2) { 0 } else { 1 };
    while k < n {
        k += 2;
        area *= 2.0 * PI / (k as f64 - 1.0);
    }
    area
}

/// Volume of the unit ball in `R^d`.
pub fn ball_volume(d: usize) -> f64 {
    if d == 0 {
        return 1.0;
    }
    sphere_area(d - 1) / d as f64
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Euclidean length of the chord between two points of `Sⁿ`.
pub fn chordal_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(dist(x, y).min(2.0))
}

/// Rotation of `R³` about the unit `axis` by `angle` (Rodrigues).
pub fn rotation_matrix(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let n = norm(&axis);
    let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

pub fn rotate(m: &[[f64; 3]; 3], x: &[f64]) -> [f64; 3] {
    [
        m[0][0] * x[0] + m[0][1] * x[1] + m[0][2] * x[2],
        m[1][0] * x[0] + m[1][1] * x[1] + m[1][2] * x[2],
        m[2][0] * x[0] + m[2][1] * x[1] + m[2][2] * x[2],
    ]
}
