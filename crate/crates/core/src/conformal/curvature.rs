use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{sphere_area, Domain, QuadratureGrid};
use crate::hamiltonian::{potential, ExternalField};
use crate::meanfield::MeanFieldSolution;

/// Sign of a curvature function as a whole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureSign {
    /// `K ≥ 0` and `K ≢ 0`.
    Positive,
    /// `K ≤ 0` and `K ≢ 0`.
    Negative,
    /// `K ≡ 0`.
    Zero,
    /// `K` changes sign.
    Undefined,
}

impl CurvatureSign {
    pub fn classify(values: &[f64]) -> Self {
        let pos = values.iter().any(|&v| v > 0.0);
        let neg = values.iter().any(|&v| v < 0.0);
        match (pos, neg) {
            (true, false) => CurvatureSign::Positive,
            (false, true) => CurvatureSign::Negative,
            (false, false) => CurvatureSign::Zero,
            (true, true) => CurvatureSign::Undefined,
        }
    }

    /// `+1`, `-1`, `0`, or `None` when undefined.
    pub fn as_int(self) -> Option<i8> {
        match self {
            CurvatureSign::Positive => Some(1),
            CurvatureSign::Negative => Some(-1),
            CurvatureSign::Zero => Some(0),
            CurvatureSign::Undefined => None,
        }
    }
}

/// Curvature values (`K` or `Q`) on the nodes of a grid.
#[derive(Debug, Clone)]
pub struct CurvatureSpec {
    pub n: usize,
    pub values: Vec<f64>,
    pub grid: Arc<QuadratureGrid>,
}

impl CurvatureSpec {
    pub fn new(n: usize, values: Vec<f64>, grid: Arc<QuadratureGrid>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "curvature must be finite"));
        }
        Ok(CurvatureSpec { n, values, grid })
    }

    pub fn sign(&self) -> CurvatureSign {
        CurvatureSign::classify(&self.values)
    }

    /// Node index of the maximum.
    pub fn argmax(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W, u: Option<&[f64]>) -> std::io::Result<()> {
        let dim = self.grid.dim();
        let coords: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
        write!(out, "{},weight,Q", coords.join(","))?;
        if u.is_some() {
            write!(out, ",u")?;
        }
        writeln!(out)?;
        for (i, q) in self.values.iter().enumerate() {
            let x: Vec<String> = self.grid.node(i).iter().map(|c| format!("{c:.17e}")).collect();
            write!(out, "{},{:.17e},{:.17e}", x.join(","), self.grid.weights()[i], q)?;
            if let Some(u) = u {
                write!(out, ",{:.17e}", u[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// `(n-1)! |Sⁿ|`, the total Q-curvature of the round sphere.
pub fn critical_total_curvature(n: usize) -> f64 {
    let fact: f64 = (1..n).map(|k| k as f64).product();
    fact * sphere_area(n)
}

fn sphere_dim(grid: &QuadratureGrid) -> Result<usize> {
    match grid.domain() {
        Domain::Sphere { n } => Ok(n),
        other => Err(Error::Unsupported(format!("curvature maps need a sphere grid, got {other:?}"))),
    }
}

/// `Q = (n-1)! |Sⁿ| exp(2n f)` on the grid nodes.
pub fn curvature_from_f(field: &ExternalField, grid: &Arc<QuadratureGrid>) -> Result<CurvatureSpec> {
    let n = sphere_dim(grid)?;
    let c = critical_total_curvature(n);
    let values = field
        .values_on(grid)
        .iter()
        .map(|f| c * (2.0 * n as f64 * f).exp())
        .collect();
    CurvatureSpec::new(n, values, grid.clone())
}

/// Largest `|β + 2n|` accepted by [`conformal_factor`].
pub const CRITICAL_BETA_TOL: f64 = 1e-6;

/// Conformal factor `u = 2Ψ_ρ - ln Z / n` of a solution at `β = -2n`.
///
/// With `Q` from [`curvature_from_f`], `Q e^{nu} = (n-1)!|Sⁿ| ρ`. The
/// normalization `ln Z` is recomputed from `Ψ_ρ` and `f` so that the total
/// curvature is exact on the grid.
pub fn conformal_factor(solution: &MeanFieldSolution, field: &ExternalField) -> Result<Vec<f64>> {
    let grid = solution.grid();
    let n = sphere_dim(grid)?;
    let expected = -2.0 * n as f64;
    if (solution.beta - expected).abs() >= CRITICAL_BETA_TOL {
        return Err(Error::NotCritical {
            beta: solution.beta,
            expected,
        });
    }
    if solution.rho_minus.is_some() {
        return Err(Error::Unsupported("conformal factor of a two-species solution".into()));
    }
    let psi = potential(&solution.rho);
    let f = field.values_on(grid);
    let nf = n as f64;
    let exponent: Vec<f64> = psi.iter().zip(&f).map(|(p, fi)| 2.0 * nf * (p + fi)).collect();
    let top = exponent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = exponent.iter().zip(grid.weights()).map(|(e, w)| w * (e - top).exp()).sum();
    let ln_z = top + z.ln();
    Ok(psi.iter().map(|p| 2.0 * p - ln_z / nf).collect())
}

/// `∫ Q e^{nu}` over the grid.
pub fn gauss_bonnet_integral(q: &CurvatureSpec, u: &[f64]) -> f64 {
    let n = q.n as f64;
    q.values
        .iter()
        .zip(u)
        .zip(q.grid.weights())
        .map(|((qi, ui), w)| w * qi * (n * ui).exp())
        .sum()
}
