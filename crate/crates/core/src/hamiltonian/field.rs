use serde::{Deserialize, Serialize};

use crate::geometry::{dist, QuadratureGrid};

/// One Gaussian bump `a · exp(-(κ/2)|x - c|²)`.
///
/// On `Sⁿ`, `|x - c|² = 2 - 2⟨x, c⟩`, so this is `exp(κ⟨x, c⟩)` rescaled to
/// peak height `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: Vec<f64>,
    pub amplitude: f64,
    pub concentration: f64,
}

/// External stream function `f`, evaluated pointwise.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExternalField {
    bumps: Vec<Bump>,
    /// Subtracted constant; makes the grid mean vanish on `Sⁿ`.
    offset: f64,
}

impl ExternalField {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn bump_sum(bumps: Vec<Bump>) -> Self {
        ExternalField { bumps, offset: 0.0 }
    }

    /// Two bumps at the poles `±e_z` of `S²`, mean-zero on `grid`.
    pub fn two_antipodal_bumps(amplitude: f64, concentration: f64, grid: &QuadratureGrid) -> Self {
        let bumps = [1.0, -1.0]
            .iter()
            .map(|&s| Bump {
                center: vec![0.0, 0.0, s],
                amplitude,
                concentration,
            })
            .collect();
        Self::bump_sum(bumps).centered_on(grid)
    }

    /// Shift so that `Σ wᵢ f(xᵢ) = 0`.
    pub fn centered_on(mut self, grid: &QuadratureGrid) -> Self {
        self.offset = 0.0;
        self.offset = grid.integrate_fn(|x| self.raw(x)) / grid.weights().iter().sum::<f64>();
        self
    }

    pub fn is_zero(&self) -> bool {
        self.offset == 0.0 && self.bumps.iter().all(|b| b.amplitude == 0.0)
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    fn raw(&self, x: &[f64]) -> f64 {
        self.bumps
            .iter()
            .map(|b| {
                let d = dist(x, &b.center);
                b.amplitude * (-0.5 * b.concentration * d * d).exp()
            })
            .sum()
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        if self.bumps.is_empty() {
            return -self.offset;
        }
        self.raw(x) - self.offset
    }

    pub fn values_on(&self, grid: &QuadratureGrid) -> Vec<f64> {
        grid.map_nodes(|x| self.value(x))
    }

    /// Apply a map to every bump center (e.g. a rotation).
    pub fn map_centers(&self, g: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        ExternalField {
            bumps: self
                .bumps
                .iter()
                .map(|b| Bump {
                    center: g(&b.center),
                    ..b.clone()
                })
                .collect(),
            offset: self.offset,
        }
    }
}
