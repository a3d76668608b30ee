use crate::error::{Error, Result};

/// Piecewise-constant function on the n uniform cells
/// A_i = [i/n, (i+1)/n), i = 0..n-1.
///
/// This is the common representation for densities (h, h_delta), test
/// functions fed to the transfer operators, and Monte Carlo histograms.
/// The L1 pairing is (1/n) Σ values, so a probability density has
/// nonnegative values with (1/n) Σ values = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    n: usize,
    values: Vec<f64>,
}

impl GridDensity {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Structural("grid function needs at least one cell".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Structural(format!("non-finite cell value {v}")));
        }
        Ok(Self { n: values.len(), values })
    }

    pub fn uniform(n: usize) -> Self {
        Self { n, values: vec![1.0; n] }
    }

    /// Samples `f` at cell midpoints.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..n).map(|i| f((i as f64 + 0.5) / n as f64)).collect();
        Self { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// ∫ f dm = (1/n) Σ f_i.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n as f64
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() / self.n as f64
    }

    pub fn is_probability_density(&self, tol: f64) -> bool {
        self.values.iter().all(|&v| v >= 0.0) && (self.integral() - 1.0).abs() <= tol
    }

    /// Rescales to ∫ = 1.
    pub fn normalize(&mut self) -> Result<()> {
        let s = self.integral();
        if s <= 0.0 || !s.is_finite() {
            return Err(Error::Parameter(format!("cannot normalize: integral = {s}")));
        }
        for v in &mut self.values {
            *v /= s;
        }
        Ok(())
    }

    /// Index of the cell containing x ∈ [0, 1] (x = 1 goes to the last cell).
    pub fn cell_of(&self, x: f64) -> usize {
        ((x * self.n as f64) as usize).min(self.n - 1)
    }
}

/// L1 distance (1/n) Σ |f_i - g_i| of two grid functions on the same grid.
pub fn l1_distance(f: &GridDensity, g: &GridDensity) -> Result<f64> {
    if f.n != g.n {
        return Err(Error::Dimension(format!("grids differ: {} vs {}", f.n, g.n)));
    }
    Ok(f.values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / f.n as f64)
}
