//! N-body Hamiltonian of a logarithmic gas and the mean-field energy and
//! entropy functionals on a quadrature grid.

mod configuration;
mod density;
mod energy;
mod field;

pub use configuration::ParticleConfiguration;
pub use density::DensityField;
pub use energy::{
    meanfield_energy, meanfield_energy_pair, meanfield_entropy, move_delta, potential, total_energy,
    COINCIDENCE_RADIUS,
};
pub use field::{Bump, ExternalField};
