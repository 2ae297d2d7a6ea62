use std::io::Write;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::geometry::QuadratureGrid;

/// A probability density w.r.t. surface measure, sampled on grid nodes.
#[derive(Debug, Clone)]
pub struct DensityField {
    grid: Arc<QuadratureGrid>,
    values: Vec<f64>,
}

impl DensityField {
    /// Wrap node values; they must be nonnegative and integrate to 1.
    pub fn new(grid: Arc<QuadratureGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid("values", "length differs from the grid"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("values", "must be finite and nonnegative"));
        }
        let mass = grid.integrate(&values);
        if (mass - 1.0).abs() > 1e-10 {
            return Err(invalid("values", format!("integrates to {mass}, not 1")));
        }
        Ok(DensityField { grid, values })
    }

    /// Rescale nonnegative node values to unit mass.
    pub fn normalized(grid: Arc<QuadratureGrid>, mut values: Vec<f64>) -> Result<Self> {
        let mass = grid.integrate(&values);
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(invalid("values", "mass must be positive and finite"));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Self::new(grid, values)
    }

    pub fn uniform(grid: Arc<QuadratureGrid>) -> Self {
        let total: f64 = grid.weights().iter().sum();
        let values = vec![1.0 / total; grid.len()];
        DensityField { grid, values }
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    /// `∫ g ρ dx`.
    pub fn expectation(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        self.grid
            .nodes()
            .zip(self.grid.weights())
            .zip(&self.values)
            .map(|((x, w), r)| w * r * g(x))
            .sum()
    }

    /// `∫ |ρ - σ| dx` on the common grid.
    pub fn l1_distance(&self, other: &DensityField) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| w * (a - b).abs())
            .sum()
    }

    /// Largest single-cell mass `wᵢ ρᵢ`.
    pub fn max_cell_mass(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, r)| w * r)
            .fold(0.0, f64::max)
    }

    /// CSV with columns `node,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "node,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{i},{v:e}")?;
        }
        Ok(())
    }
}
