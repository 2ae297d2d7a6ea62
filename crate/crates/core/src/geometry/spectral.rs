//! Spherical-harmonic transform on the Gauss–Legendre × equispaced grid of S².
//!
//! Complex harmonics `Y_lm = λ_l|m|(cos θ) e^{imφ}` with orthonormal
//! associated Legendre functions `λ_lm`; real fields keep only `m ≥ 0`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Harmonic coefficients `a_lm`, `0 ≤ m ≤ l ≤ lmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    lmax: usize,
    data: Vec<Complex64>,
}

impl Coefficients {
    pub fn zeros(lmax: usize) -> Self {
        Coefficients {
            lmax,
            data: vec![Complex64::new(0.0, 0.0); tri_len(lmax)],
        }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn get(&self, l: usize, m: usize) -> Complex64 {
        self.data[tri_index(self.lmax, l, m)]
    }

    pub fn set(&mut self, l: usize, m: usize, v: Complex64) {
        let i = tri_index(self.lmax, l, m);
        self.data[i] = v;
    }

    /// Multiply every degree-`l` block by `mult(l)`.
    pub fn scale_by_degree(&mut self, mult: impl Fn(usize) -> f64) {
        for m in 0..=self.lmax {
            for l in m..=self.lmax {
                let i = tri_index(self.lmax, l, m);
                self.data[i] *= mult(l);
            }
        }
    }

    /// Power `Σ_m |a_lm|²` (counting ±m) in degree `l`.
    pub fn degree_power(&self, l: usize) -> f64 {
        let mut p = self.get(l, 0).norm_sqr();
        for m in 1..=l {
            p += 2.0 * self.get(l, m).norm_sqr();
        }
        p
    }
}

fn tri_len(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 2) / 2
}

// m-major packing: block m holds l = m..=lmax, offset Σ_{m'<m} (lmax + 1 - m')
fn tri_index(lmax: usize, l: usize, m: usize) -> usize {
    debug_assert!(m <= l && l <= lmax);
    m * (lmax + 1) - m * m.saturating_sub(1) / 2 + (l - m)
}

/// Orthonormal associated Legendre functions `λ_lm(t)` packed like [`Coefficients`].
pub(crate) fn normalized_legendre(lmax: usize, t: f64) -> Vec<f64> {
    let mut out = vec![0.0; tri_len(lmax)];
    let s = (1.0 - t * t).max(0.0).sqrt();
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            pmm *= ((2.0 * m as f64 + 1.0) / (2.0 * m as f64)).sqrt() * s;
        }
        out[tri_index(lmax, m, m)] = pmm;
        if m == lmax {
            break;
        }
        let mut p_prev = pmm;
        let mut p = (2.0 * m as f64 + 3.0).sqrt() * t * pmm;
        out[tri_index(lmax, m + 1, m)] = p;
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            let next = a * (t * p - b * p_prev);
            p_prev = p;
            p = next;
            out[tri_index(lmax, l, m)] = p;
        }
    }
    out
}

/// Forward and inverse harmonic transforms for a fixed grid.
pub struct SphereTransform {
    n_theta: usize,
    n_phi: usize,
    lmax: usize,
    cos_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
    legendre: Vec<Vec<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SphereTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SphereTransform")
            .field("n_theta", &self.n_theta)
            .field("n_phi", &self.n_phi)
            .field("lmax", &self.lmax)
            .finish()
    }
}

impl SphereTransform {
    pub fn new(cos_nodes: &[f64], gl_weights: &[f64], n_phi: usize, lmax: usize) -> Result<Self> {
        let n_theta = cos_nodes.len();
        if lmax + 1 > n_theta || n_phi < 2 * lmax + 1 {
            return Err(Error::Unsupported(format!(
                "band limit {lmax} needs N_theta > {lmax} and N_phi >= {}",
                2 * lmax + 1
            )));
        }
        let legendre = cos_nodes.iter().map(|&t| normalized_legendre(lmax, t)).collect();
        let mut planner = FftPlanner::new();
        Ok(SphereTransform {
            n_theta,
            n_phi,
            lmax,
            cos_nodes: cos_nodes.to_vec(),
            gl_weights: gl_weights.to_vec(),
            legendre,
            forward: planner.plan_fft_forward(n_phi),
            inverse: planner.plan_fft_inverse(n_phi),
        })
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Project grid values onto harmonics up to `lmax`.
    pub fn analysis(&self, values: &[f64]) -> Coefficients {
        assert_eq!(values.len(), self.len());
        let mut coeffs = Coefficients::zeros(self.lmax);
        let dphi = 2.0 * PI / self.n_phi as f64;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_phi];
        for j in 0..self.n_theta {
            for (b, &v) in buf.iter_mut().zip(&values[j * self.n_phi..(j + 1) * self.n_phi]) {
                *b = Complex64::new(v, 0.0);
            }
            self.forward.process(&mut buf);
            let w = self.gl_weights[j] * dphi;
            let leg = &self.legendre[j];
            for m in 0..=self.lmax {
                let fm = buf[m] * w;
                for l in m..=self.lmax {
                    let i = tri_index(self.lmax, l, m);
                    coeffs.data[i] += fm * leg[i];
                }
            }
        }
        coeffs
    }

    /// Evaluate a harmonic expansion on the grid.
    pub fn synthesis(&self, coeffs: &Coefficients) -> Vec<f64> {
        let lmax = coeffs.lmax.min(self.lmax);
        let mut out = vec![0.0; self.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_phi];
        for j in 0..self.n_theta {
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            let leg = &self.legendre[j];
            for m in 0..=lmax {
                let mut g = Complex64::new(0.0, 0.0);
                for l in m..=lmax {
                    g += coeffs.get(l, m) * leg[tri_index(self.lmax, l, m)];
                }
                buf[m] = if m == 0 { g } else { g * 2.0 };
            }
            self.inverse.process(&mut buf);
            for (o, b) in out[j * self.n_phi..(j + 1) * self.n_phi].iter_mut().zip(&buf) {
                *o = b.re;
            }
        }
        out
    }

    /// Band-limited projection followed by a degree-wise multiplier.
    pub fn apply_multiplier(&self, values: &[f64], mult: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut c = self.analysis(values);
        c.scale_by_degree(mult);
        self.synthesis(&c)
    }

    /// Evaluate an expansion at an arbitrary unit vector.
    pub fn evaluate(coeffs: &Coefficients, x: &[f64]) -> f64 {
        let lmax = coeffs.lmax;
        let t = x[2].clamp(-1.0, 1.0);
        let phi = x[1].atan2(x[0]);
        let leg = normalized_legendre(lmax, t);
        let mut acc = 0.0;
        for m in 0..=lmax {
            let e = Complex64::from_polar(1.0, m as f64 * phi);
            let mut g = Complex64::new(0.0, 0.0);
            for l in m..=lmax {
                let i = tri_index(lmax, l, m);
                g += coeffs.data[i] * leg[i];
            }
            let term = (g * e).re;
            acc += if m == 0 { term } else { 2.0 * term };
        }
        acc
    }

    /// Degree components `f_l(x)`, `l = 0..=lmax`, of an expansion at `x`.
    pub fn evaluate_by_degree(coeffs: &Coefficients, x: &[f64]) -> Vec<f64> {
        let lmax = coeffs.lmax;
        let t = x[2].clamp(-1.0, 1.0);
        let phi = x[1].atan2(x[0]);
        let leg = normalized_legendre(lmax, t);
        let mut out = vec![0.0; lmax + 1];
        for m in 0..=lmax {
            let e = Complex64::from_polar(1.0, m as f64 * phi);
            let factor = if m == 0 { 1.0 } else { 2.0 };
            for (l, o) in out.iter_mut().enumerate().skip(m) {
                let i = tri_index(lmax, l, m);
                *o += factor * (coeffs.data[i] * leg[i] * e).re;
            }
        }
        out
    }

    pub fn cos_nodes(&self) -> &[f64] {
        &self.cos_nodes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::gauss_legendre;
    use approx::assert_relative_eq;

    fn transform(nt: usize, np: usize) -> SphereTransform {
        let (t, w) = gauss_legendre(nt);
        let lmax = (nt - 1).min((np - 1) / 2);
        SphereTransform::new(&t, &w, np, lmax).unwrap()
    }

    #[test]
    fn packing_is_dense_and_unique() {
        let lmax = 7;
        let mut seen = vec![false; tri_len(lmax)];
        for m in 0..=lmax {
            for l in m..=lmax {
                let i = tri_index(lmax, l, m);
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn legendre_matches_closed_forms() {
        let t: f64 = 0.3;
        let p = normalized_legendre(3, t);
        let c = (1.0 / (4.0 * PI)).sqrt();
        assert_relative_eq!(p[tri_index(3, 0, 0)], c, epsilon = 1e-15);
        assert_relative_eq!(p[tri_index(3, 1, 0)], c * 3f64.sqrt() * t, epsilon = 1e-15);
        assert_relative_eq!(
            p[tri_index(3, 2, 0)],
            c * 5f64.sqrt() * 0.5 * (3.0 * t * t - 1.0),
            epsilon = 1e-15
        );
        // |Y_11|: sqrt(3/(8π)) sin θ
        assert_relative_eq!(
            p[tri_index(3, 1, 1)],
            (3.0 / (8.0 * PI)).sqrt() * (1.0 - t * t).sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn round_trip_of_band_limited_field() {
        let tr = transform(12, 24);
        let mut c = Coefficients::zeros(tr.lmax());
        c.set(0, 0, Complex64::new(1.3, 0.0));
        c.set(3, 2, Complex64::new(0.2, -0.7));
        c.set(11, 11, Complex64::new(-0.4, 0.1));
        c.set(7, 0, Complex64::new(0.5, 0.0));
        let v = tr.synthesis(&c);
        let back = tr.analysis(&v);
        for m in 0..=tr.lmax() {
            for l in m..=tr.lmax() {
                assert!((back.get(l, m) - c.get(l, m)).norm() < 1e-13, "l={l} m={m}");
            }
        }
    }

    #[test]
    fn evaluate_agrees_with_synthesis() {
        let (t, w) = gauss_legendre(8);
        let tr = SphereTransform::new(&t, &w, 16, 7).unwrap();
        let mut c = Coefficients::zeros(7);
        c.set(2, 1, Complex64::new(0.3, 0.4));
        c.set(5, 3, Complex64::new(-0.2, 0.1));
        let v = tr.synthesis(&c);
        let j = 3;
        let k = 5;
        let phi = 2.0 * PI * k as f64 / 16.0;
        let s = (1.0 - t[j] * t[j]).sqrt();
        let x = [s * phi.cos(), s * phi.sin(), t[j]];
        assert_relative_eq!(SphereTransform::evaluate(&c, &x), v[j * 16 + k], epsilon = 1e-13);
    }

    #[test]
    fn rejects_aliasing_band_limit() {
        let (t, w) = gauss_legendre(8);
        assert!(SphereTransform::new(&t, &w, 10, 7).is_err());
    }
}
