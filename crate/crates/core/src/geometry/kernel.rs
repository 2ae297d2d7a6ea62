use super::{ball_volume, dist, dot, Domain};
use crate::error::{Error, Result};

/// Green's kernel `G(x, y)` of the domain.
///
/// Sphere and plane use `-ln|x - y|`. The disk uses the Dirichlet Green's
/// function built from the image charge `y* = y/|y|²`, written in the
/// symmetric form `½ ln(1 - 2x·y + |x|²|y|²) - ln|x - y|` which stays finite
/// as `|y| → 0`.
pub fn kernel_log(domain: &Domain, x: &[f64], y: &[f64]) -> Result<f64> {
    domain.check_point(x)?;
    domain.check_point(y)?;
    let r = dist(x, y);
    if r == 0.0 {
        return Err(Error::SingularKernel);
    }
    Ok(kernel_unchecked(domain, x, y, r))
}

#[inline]
pub(crate) fn kernel_unchecked(domain: &Domain, x: &[f64], y: &[f64], r: f64) -> f64 {
    match domain {
        Domain::Disk2d => {
            let xx = dot(x, x);
            let yy = dot(y, y);
            let img = 1.0 - 2.0 * dot(x, y) + xx * yy;
            0.5 * img.ln() - r.ln()
        }
        _ => -r.ln(),
    }
}

/// Renormalized diagonal `G*(x, x) = ln(1 - |x|²)` of the disk kernel.
pub fn self_energy_disk(x: &[f64]) -> Result<f64> {
    Domain::Disk2d.check_point(x)?;
    Ok((1.0 - dot(x, x)).ln())
}

/// Replacement for the singular diagonal entry `G(xᵢ, xᵢ)` in grid sums.
///
/// The log singularity is averaged over a ball of radius `cell_radius` in the
/// intrinsic dimension `d`, which gives `-ln a + 1/d`; on the disk the regular
/// image part `ln(1 - |x|²)` is added.
pub fn cell_self_kernel(domain: &Domain, x: &[f64], cell_radius: f64) -> f64 {
    let d = domain.intrinsic_dim() as f64;
    let singular = -cell_radius.ln() + 1.0 / d;
    match domain {
        Domain::Disk2d => singular + (1.0 - dot(x, x)).ln(),
        _ => singular,
    }
}

/// Radius of the `d`-ball whose volume equals `weight`.
pub(crate) fn equivalent_radius(d: usize, weight: f64) -> f64 {
    (weight / ball_volume(d)).powf(1.0 / d as f64)
}
