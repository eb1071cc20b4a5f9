use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic 2D grid; axis 0 is `s₁`, axis 1 is `s₂`.
///
/// Point `i` on axis `a` sits at `min[a] + i·ds[a]`, so `max[a]` is one
/// spacing past the last point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub n: [usize; 2],
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub ds: [f64; 2],
}

impl Grid2D {
    pub fn new(n: [usize; 2], min: [f64; 2], max: [f64; 2]) -> Result<Self> {
        for a in 0..2 {
            if n[a] < 8 || !n[a].is_power_of_two() {
                return Err(Error::InvalidInput(format!("grid size {} must be a power of two ≥ 8", n[a])));
            }
            if !(max[a] > min[a]) || !min[a].is_finite() || !max[a].is_finite() {
                return Err(Error::InvalidInput(format!("empty grid extent [{}, {}]", min[a], max[a])));
            }
        }
        let ds = [(max[0] - min[0]) / n[0] as f64, (max[1] - min[1]) / n[1] as f64];
        Ok(Self { n, min, max, ds })
    }

    /// Grid centred on the origin with the given half-widths.
    pub fn centered(n: [usize; 2], half_width: [f64; 2]) -> Result<Self> {
        Self::new(n, [-half_width[0], -half_width[1]], half_width)
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.min[axis] + i as f64 * self.ds[axis]
    }

    pub fn coords(&self, axis: usize) -> Vec<f64> {
        (0..self.n[axis]).map(|i| self.coord(axis, i)).collect()
    }

    pub fn cell_area(&self) -> f64 {
        self.ds[0] * self.ds[1]
    }

    /// Momentum spacing `2πħ/(N·ds)`.
    pub fn dp(&self, axis: usize, hbar: f64) -> f64 {
        2.0 * std::f64::consts::PI * hbar / (self.n[axis] as f64 * self.ds[axis])
    }

    /// Momenta in discrete-Fourier order (non-negative first).
    pub fn momenta(&self, axis: usize, hbar: f64) -> Vec<f64> {
        let n = self.n[axis];
        let dp = self.dp(axis, hbar);
        (0..n).map(|j| if j < n / 2 { j as f64 } else { j as f64 - n as f64 } * dp).collect()
    }

    /// Largest representable momentum magnitude on an axis.
    pub fn p_max(&self, axis: usize, hbar: f64) -> f64 {
        0.5 * self.n[axis] as f64 * self.dp(axis, hbar)
    }

    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.n[1] + i2
    }

    /// Same extent with the point counts scaled by `factor` (a power of two).
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new([self.n[0] * factor, self.n[1] * factor], self.min, self.max)
    }
}
