use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Domain;
use crate::error::{invalid, Error, Result};

/// `count` i.i.d. points uniform w.r.t. the surface (area) measure, flattened.
pub fn sample_uniform(domain: Domain, count: usize, seed: u64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count * domain.ambient_dim());
    for _ in 0..count {
        out.extend_from_slice(&uniform_point(&domain, &mut rng)?);
    }
    Ok(out)
}

pub(crate) fn uniform_point<R: Rng + ?Sized>(domain: &Domain, rng: &mut R) -> Result<Vec<f64>> {
    match *domain {
        Domain::Sphere { n } => loop {
            let mut x: Vec<f64> = (0..=n).map(|_| rng.sample(StandardNormal)).collect();
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r > 1e-12 {
                x.iter_mut().for_each(|v| *v /= r);
                return Ok(x);
            }
        },
        Domain::Disk2d => {
            let r = rng.random::<f64>().sqrt();
            let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            Ok(vec![r * phi.cos(), r * phi.sin()])
        }
        Domain::Plane2d => Err(Error::Unsupported("uniform measure on the unbounded plane".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_mean_is_small() {
        let pts = sample_uniform(Domain::sphere(2), 100_000, 7).unwrap();
        let mut m = [0.0; 3];
        for x in pts.chunks_exact(3) {
            for d in 0..3 {
                m[d] += x[d] / 100_000.0;
            }
        }
        let norm = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
        assert!(norm < 0.02, "{norm}");
    }

    #[test]
    fn disk_second_moment() {
        let pts = sample_uniform(Domain::Disk2d, 100_000, 11).unwrap();
        let m2: f64 = pts.chunks_exact(2).map(|x| x[0] * x[0] + x[1] * x[1]).sum::<f64>() / 100_000.0;
        assert!((m2 - 0.5).abs() < 0.01, "{m2}");
    }

    #[test]
    fn deterministic_given_seed() {
        let a = sample_uniform(Domain::sphere(3), 50, 3).unwrap();
        let b = sample_uniform(Domain::sphere(3), 50, 3).unwrap();
        assert_eq!(a, b);
        assert!(sample_uniform(Domain::Disk2d, 0, 1).is_err());
    }
}
