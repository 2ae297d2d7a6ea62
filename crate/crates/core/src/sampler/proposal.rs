use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{dot, Domain};

/// Single-particle random-walk proposal.
///
/// On `Sⁿ` a Gaussian step in the tangent plane is projected back to the
/// sphere; the kernel depends only on the angle between the two points and
/// is symmetric. On the disk a Gaussian step that leaves the disk is
/// reflected radially (`r ↦ 2 - r`); this kernel is not symmetric, so the
/// Hastings ratio is returned with each proposal. The step length is drawn
/// from a fixed mixture of scales.
#[derive(Debug, Clone)]
pub(crate) struct Proposal {
    scales: Vec<f64>,
}

impl Proposal {
    pub fn new(scale: f64) -> Self {
        Proposal { scales: vec![scale] }
    }

    pub fn mixture(scales: Vec<f64>) -> Self {
        Proposal { scales }
    }

    pub fn scale(&self) -> f64 {
        self.scales[0]
    }

    pub fn set_scale(&mut self, s: f64) {
        self.scales = vec![s];
    }

    /// New point and `ln q(y → x) - ln q(x → y)`, or `None` if the step is
    /// rejected outright.
    pub fn propose<R: Rng + ?Sized>(&self, domain: &Domain, x: &[f64], rng: &mut R) -> Option<(Vec<f64>, f64)> {
        let s = if self.scales.len() == 1 {
            self.scales[0]
        } else {
            self.scales[rng.random_range(0..self.scales.len())]
        };
        match domain {
            Domain::Sphere { .. } => {
                let mut xi: Vec<f64> = x.iter().map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let p = dot(&xi, x);
                let mut y: Vec<f64> = x
                    .iter()
                    .zip(xi.iter_mut())
                    .map(|(xc, v)| {
                        *v -= p * xc;
                        xc + s * *v
                    })
                    .collect();
                let r = dot(&y, &y).sqrt();
                y.iter_mut().for_each(|v| *v /= r);
                Some((y, 0.0))
            }
            Domain::Disk2d => {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                let mut y = vec![x[0] + s * a, x[1] + s * b];
                let r = dot(&y, &y).sqrt();
                if r >= 2.0 {
                    return None;
                }
                if r >= 1.0 {
                    let r_new = 2.0 - r;
                    if r_new >= 1.0 || r_new <= 0.0 {
                        return None;
                    }
                    y.iter_mut().for_each(|v| *v *= r_new / r);
                }
                let ratio = self.log_density_disk(&y, x) - self.log_density_disk(x, &y);
                Some((y, ratio))
            }
            Domain::Plane2d => None,
        }
    }

    /// `ln q(x → y)` of the reflected Gaussian mixture on the disk.
    fn log_density_disk(&self, x: &[f64], y: &[f64]) -> f64 {
        let ry = dot(y, y).sqrt();
        let mut terms = Vec::with_capacity(2 * self.scales.len());
        let w = -(self.scales.len() as f64).ln();
        for &s in &self.scales {
            let norm = w - (2.0 * std::f64::consts::PI * s * s).ln();
            let d2 = (y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2);
            terms.push(norm - d2 / (2.0 * s * s));
            if ry > 0.0 {
                // preimage outside the disk at radius 2 - |y|
                let rz = 2.0 - ry;
                let z = [y[0] * rz / ry, y[1] * rz / ry];
                let d2 = (z[0] - x[0]).powi(2) + (z[1] - x[1]).powi(2);
                terms.push(norm - d2 / (2.0 * s * s) + (rz / ry).ln());
            }
        }
        log_sum_exp(&terms)
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sphere_proposals_stay_on_sphere() {
        let p = Proposal::new(0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = [0.0, 0.6, 0.8];
        for _ in 0..100 {
            let (y, r) = p.propose(&Domain::sphere(2), &x, &mut rng).unwrap();
            assert!((dot(&y, &y) - 1.0).abs() < 1e-14);
            assert_eq!(r, 0.0);
        }
    }

    #[test]
    fn disk_kernel_normalizes() {
        // ∫ q(x → y) dy over the disk equals the probability of not being rejected
        let p = Proposal::mixture(vec![0.3, 0.1]);
        let x = [0.5, 0.2];
        let (t, w) = crate::geometry::gauss_legendre(200);
        let mut acc = 0.0;
        for (ti, wi) in t.iter().zip(&w) {
            let r2 = 0.5 * (ti + 1.0);
            for k in 0..400 {
                let phi = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / 400.0;
                let y = [r2.sqrt() * phi.cos(), r2.sqrt() * phi.sin()];
                acc += 0.5 * wi * std::f64::consts::PI / 400.0 * p.log_density_disk(&x, &y).exp();
            }
        }
        // mass escaping beyond radius 2 is negligible at these scales
        assert!((acc - 1.0).abs() < 1e-4, "{acc}");
    }

    /// With a flat target the corrected walk keeps the uniform measure, so
    /// `E|x|²` stays at 1/2.
    #[test]
    fn reflected_walk_preserves_uniform_measure() {
        let p = Proposal::new(0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = vec![0.0, 0.0];
        let mut m2 = 0.0;
        let n = 400_000;
        for _ in 0..n {
            if let Some((y, lq)) = p.propose(&Domain::Disk2d, &x, &mut rng) {
                if rng.random::<f64>().ln() < lq.min(0.0) {
                    x = y;
                }
            }
            m2 += dot(&x, &x);
        }
        assert!((m2 / n as f64 - 0.5).abs() < 0.01);
    }
}
