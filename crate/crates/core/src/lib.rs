//! Statistical mechanics of logarithmic gases on the disk, the plane and the
//! spheres `Sⁿ`, and its use for prescribed curvature problems.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: domains, Green's kernels, quadrature grids, harmonic transforms.
//! * [`hamiltonian`]: the N-body energy and the mean-field energy/entropy functionals.
//! * [`sampler`]: Metropolis sampling of canonical and regularized microcanonical
//!   ensembles, Wang–Landau density of states.
//! * [`meanfield`]: canonical, penalized and constrained entropy maximization.
//! * [`conformal`]: curvature maps, the Paneitz operator on S², radial Liouville
//!   solutions and the critical-temperature scanner.

pub mod conformal;
pub mod error;
pub mod geometry;
pub mod hamiltonian;
pub mod meanfield;
pub mod sampler;

pub use error::{Error, Result};
pub use geometry::{build_grid, Domain, QuadratureGrid};
pub use hamiltonian::{DensityField, ExternalField, ParticleConfiguration};
