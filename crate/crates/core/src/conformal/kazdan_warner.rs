use std::f64::consts::PI;

use serde::Serialize;

use super::curvature::CurvatureSpec;
use crate::error::{Error, Result};
use crate::geometry::{Coefficients, SphereTransform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KazdanWarnerVerdict {
    /// Not excluded by the obstruction.
    Pass,
    /// Axially symmetric, monotone along the axis and non-constant.
    Obstructed,
    Constant,
}

#[derive(Debug, Clone, Serialize)]
pub struct KazdanWarnerReport {
    pub verdict: KazdanWarnerVerdict,
    /// Best symmetry axis found.
    pub axis: [f64; 3],
    /// Mean-square deviation from the axial average.
    pub asymmetry: f64,
    pub axially_symmetric: bool,
    pub monotone: bool,
}

const SYMMETRY_TOL: f64 = 1e-8;
const MONOTONE_TOL: f64 = 1e-8;
const AXIS_SAMPLES: usize = 312;
const PROFILE_POINTS: usize = 401;

fn fibonacci_sphere(count: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [s * phi.cos(), s * phi.sin(), z]
        })
        .collect()
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Degree components at the axis and the non-axial power.
fn asymmetry(coeffs: &Coefficients, power: &[f64], axis: &[f64; 3]) -> (f64, Vec<f64>) {
    let at_axis = SphereTransform::evaluate_by_degree(coeffs, axis);
    let mut off = 0.0;
    for l in 1..=coeffs.lmax() {
        off += power[l] - 4.0 * PI / (2 * l + 1) as f64 * at_axis[l] * at_axis[l];
    }
    (off.max(0.0) / (4.0 * PI), at_axis)
}

fn refine(coeffs: &Coefficients, power: &[f64], start: [f64; 3]) -> ([f64; 3], f64) {
    let mut axis = start;
    let mut best = asymmetry(coeffs, power, &axis).0;
    let mut step = 0.1;
    while step > 1e-10 {
        // Tangent basis at the current axis.
        let helper = if axis[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
        let e1 = normalize(cross(&axis, &helper));
        let e2 = cross(&axis, &e1);
        let mut improved = false;
        for (a, b) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let cand = normalize([
                axis[0] + step * (a * e1[0] + b * e2[0]),
                axis[1] + step * (a * e1[1] + b * e2[1]),
                axis[2] + step * (a * e1[2] + b * e2[2]),
            ]);
            let v = asymmetry(coeffs, power, &cand).0;
            if v < best {
                best = v;
                axis = cand;
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (axis, best)
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn legendre_all(lmax: usize, t: f64) -> Vec<f64> {
    let mut p = vec![1.0; lmax + 1];
    if lmax >= 1 {
        p[1] = t;
    }
    for l in 2..=lmax {
        p[l] = ((2 * l - 1) as f64 * t * p[l - 1] - (l - 1) as f64 * p[l - 2]) / l as f64;
    }
    p
}

/// Check a curvature candidate on S² against the Kazdan–Warner obstruction.
pub fn kazdan_warner_check(k: &CurvatureSpec) -> Result<KazdanWarnerReport> {
    if k.n != 2 {
        return Err(Error::Unsupported(format!("Kazdan–Warner check on S^{}", k.n)));
    }
    let (lo, hi) = k
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo < 1e-8 * (1.0 + hi.abs()) {
        return Ok(KazdanWarnerReport {
            verdict: KazdanWarnerVerdict::Constant,
            axis: [0.0, 0.0, 1.0],
            asymmetry: 0.0,
            axially_symmetric: true,
            monotone: true,
        });
    }
    let tr = k
        .grid
        .transform()
        .ok_or_else(|| Error::Unsupported(format!("no harmonic transform on {}", k.grid.descriptor())))?;
    let coeffs = tr.analysis(&k.values);
    let power: Vec<f64> = (0..=coeffs.lmax()).map(|l| coeffs.degree_power(l)).collect();
    let start = fibonacci_sphere(AXIS_SAMPLES)
        .into_iter()
        .min_by(|a, b| {
            asymmetry(&coeffs, &power, a)
                .0
                .total_cmp(&asymmetry(&coeffs, &power, b).0)
        })
        .expect("nonempty axis sample");
    let (axis, asym) = refine(&coeffs, &power, start);
    let (_, at_axis) = asymmetry(&coeffs, &power, &axis);
    let symmetric = asym < SYMMETRY_TOL;
    let profile: Vec<f64> = (0..PROFILE_POINTS)
        .map(|i| {
            let t = -1.0 + 2.0 * i as f64 / (PROFILE_POINTS - 1) as f64;
            legendre_all(coeffs.lmax(), t)
                .iter()
                .zip(&at_axis)
                .map(|(p, c)| p * c)
                .sum()
        })
        .collect();
    let up = profile.windows(2).all(|w| w[1] >= w[0] - MONOTONE_TOL);
    let down = profile.windows(2).all(|w| w[1] <= w[0] + MONOTONE_TOL);
    let monotone = up || down;
    let verdict = if symmetric && monotone {
        KazdanWarnerVerdict::Obstructed
    } else {
        KazdanWarnerVerdict::Pass
    };
    Ok(KazdanWarnerReport {
        verdict,
        axis,
        asymmetry: asym,
        axially_symmetric: symmetric,
        monotone,
    })
}
