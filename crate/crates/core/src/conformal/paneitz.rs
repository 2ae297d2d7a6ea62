use serde::Serialize;

use super::curvature::CurvatureSpec;
use crate::error::{Error, Result};
use crate::geometry::{Coefficients, QuadratureGrid};

fn check_even(n: usize) -> Result<()> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::Unsupported(format!(
            "Paneitz operator on S^{n}: only even dimensions have a differential multiplier"
        )));
    }
    Ok(())
}

/// Eigenvalue of `P_n` on degree-`l` harmonics of `Sⁿ`:
/// `Π_{k=0}^{(n-2)/2} (l(l+n-1) + k(n-k-1))`.
pub fn paneitz_multiplier(n: usize, l: usize) -> Result<f64> {
    check_even(n)?;
    let lambda = (l * (l + n - 1)) as f64;
    Ok((0..n / 2).map(|k| lambda + (k * (n - k - 1)) as f64).product())
}

pub fn paneitz_multipliers(n: usize, lmax: usize) -> Result<Vec<f64>> {
    (0..=lmax).map(|l| paneitz_multiplier(n, l)).collect()
}

/// Apply `P_n` to harmonic coefficients.
pub fn paneitz_apply_coefficients(coeffs: &Coefficients, n: usize) -> Result<Coefficients> {
    let table = paneitz_multipliers(n, coeffs.lmax())?;
    let mut out = coeffs.clone();
    out.scale_by_degree(|l| table[l]);
    Ok(out)
}

/// Apply `P_n` to grid values of a band-limited function on a grid with a
/// harmonic transform (S² only).
pub fn paneitz_apply(values: &[f64], grid: &QuadratureGrid, n: usize) -> Result<Vec<f64>> {
    check_even(n)?;
    if grid.domain().intrinsic_dim() != n {
        return Err(Error::Unsupported(format!("P_{n} on a {} grid", grid.descriptor())));
    }
    let tr = grid
        .transform()
        .ok_or_else(|| Error::Unsupported(format!("no harmonic transform on {}", grid.descriptor())))?;
    if values.len() != tr.len() {
        return Err(Error::DimensionMismatch {
            expected: tr.len(),
            got: values.len(),
        });
    }
    let table = paneitz_multipliers(n, tr.lmax())?;
    Ok(tr.apply_multiplier(values, |l| table[l]))
}

/// Norms of `-Δu - (Q e^{2u} - 1)` on S².
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NirenbergResidual {
    pub sup: f64,
    pub l2: f64,
}

pub fn nirenberg_residual(u: &[f64], q: &CurvatureSpec) -> Result<NirenbergResidual> {
    if q.n != 2 {
        return Err(Error::Unsupported(format!("Nirenberg residual needs n = 2, got {}", q.n)));
    }
    let lap = paneitz_apply(u, &q.grid, 2)?;
    let r: Vec<f64> = lap
        .iter()
        .zip(u)
        .zip(&q.values)
        .map(|((l, ui), qi)| l - (qi * (2.0 * ui).exp() - 1.0))
        .collect();
    let sup = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let l2 = q.grid.integrate(&r.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
    Ok(NirenbergResidual { sup, l2 })
}
