use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::Grid2D;

/// Complex amplitudes on a [`Grid2D`], stored `s₁`-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction2D {
    pub grid: Grid2D,
    pub amplitudes: Vec<Complex64>,
    /// `∑|ψ|²·ds₁ds₂` as of the last [`Wavefunction2D::refresh_norm`].
    pub norm: f64,
}

impl Wavefunction2D {
    /// Normalised product Gaussian.
    pub fn gaussian(grid: Grid2D, center: [f64; 2], sigma: [f64; 2]) -> Self {
        let x1 = grid.coords(0);
        let x2 = grid.coords(1);
        let g1: Vec<f64> = x1.iter().map(|x| (-0.25 * ((x - center[0]) / sigma[0]).powi(2)).exp()).collect();
        let g2: Vec<f64> = x2.iter().map(|x| (-0.25 * ((x - center[1]) / sigma[1]).powi(2)).exp()).collect();
        let mut amplitudes = Vec::with_capacity(grid.len());
        for a in &g1 {
            amplitudes.extend(g2.iter().map(|b| Complex64::new(a * b, 0.0)));
        }
        let mut psi = Self { grid, amplitudes, norm: 0.0 };
        psi.normalize();
        psi
    }

    pub fn compute_norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn refresh_norm(&mut self) -> f64 {
        self.norm = self.compute_norm();
        self.norm
    }

    pub fn normalize(&mut self) {
        let n = self.compute_norm();
        let s = n.sqrt().recip();
        self.amplitudes.iter_mut().for_each(|z| *z *= s);
        self.norm = 1.0;
    }

    /// `⟨s₁⟩`, `⟨s₂⟩` in grid coordinates.
    pub fn mean_position(&self) -> [f64; 2] {
        let [n1, n2] = self.grid.n;
        let mut m = [0.0; 2];
        let mut total = 0.0;
        for i in 0..n1 {
            let x1 = self.grid.coord(0, i);
            for j in 0..n2 {
                let p = self.amplitudes[i * n2 + j].norm_sqr();
                total += p;
                m[0] += p * x1;
                m[1] += p * self.grid.coord(1, j);
            }
        }
        [m[0] / total, m[1] / total]
    }

    /// Probability on the outermost `rows` rows and columns.
    pub fn edge_probability(&self, rows: usize) -> f64 {
        let [n1, n2] = self.grid.n;
        let mut acc = 0.0;
        for i in 0..n1 {
            let edge_row = i < rows || i >= n1 - rows;
            for j in 0..n2 {
                if edge_row || j < rows || j >= n2 - rows {
                    acc += self.amplitudes[i * n2 + j].norm_sqr();
                }
            }
        }
        acc * self.grid.cell_area()
    }

    /// Probability where `inside(y₁, y₂)` holds.
    pub fn probability_where<F: Fn(f64, f64) -> bool>(&self, inside: F) -> f64 {
        let [n1, n2] = self.grid.n;
        let mut acc = 0.0;
        for i in 0..n1 {
            let y1 = self.grid.coord(0, i);
            for j in 0..n2 {
                if inside(y1, self.grid.coord(1, j)) {
                    acc += self.amplitudes[i * n2 + j].norm_sqr();
                }
            }
        }
        acc * self.grid.cell_area()
    }

    /// `‖ψ − φ‖` on the grid.
    pub fn distance(&self, other: &Self) -> f64 {
        let s: f64 = self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| (a - b).norm_sqr()).sum();
        (s * self.grid.cell_area()).sqrt()
    }
}

/// Momentum-space expectation values of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumMoments {
    pub mean: [f64; 2],
    pub kinetic: f64,
}

/// 2D FFT that leaves the spectrum in transposed (`k₂`-major) order, which
/// saves the second transpose on the way to momentum space.
pub(crate) struct Spectral {
    n: [usize; 2],
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    /// Spectrum in transposed layout.
    pub work: Vec<Complex64>,
    /// `p₁²/2m₁ + p₂²/2m₂`, transposed layout.
    pub kinetic: Vec<f64>,
    pub momenta: [Vec<f64>; 2],
}

impl Spectral {
    pub fn new(grid: &Grid2D, masses: [f64; 2], hbar: f64) -> Self {
        let mut planner = FftPlanner::new();
        let [n1, n2] = grid.n;
        let row_fwd = planner.plan_fft_forward(n2);
        let row_inv = planner.plan_fft_inverse(n2);
        let col_fwd = planner.plan_fft_forward(n1);
        let col_inv = planner.plan_fft_inverse(n1);
        let scratch_len = [&row_fwd, &row_inv, &col_fwd, &col_inv]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let momenta = [grid.momenta(0, hbar), grid.momenta(1, hbar)];
        let mut kinetic = Vec::with_capacity(grid.len());
        for p2 in &momenta[1] {
            let t2 = p2 * p2 / (2.0 * masses[1]);
            kinetic.extend(momenta[0].iter().map(|p1| p1 * p1 / (2.0 * masses[0]) + t2));
        }
        Self {
            n: grid.n,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            scratch: vec![Complex64::default(); scratch_len],
            work: vec![Complex64::default(); grid.len()],
            kinetic,
            momenta,
        }
    }

    pub fn max_kinetic(&self) -> f64 {
        self.kinetic.iter().copied().fold(0.0, f64::max)
    }

    /// Unnormalised forward transform of `data` into `self.work`; `data` is
    /// clobbered.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        let [n1, n2] = self.n;
        self.row_fwd.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.work, n1, n2);
        self.col_fwd.process_with_scratch(&mut self.work, &mut self.scratch);
    }

    /// Unnormalised inverse transform of `self.work` into `data`.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        let [n1, n2] = self.n;
        self.col_inv.process_with_scratch(&mut self.work, &mut self.scratch);
        transpose(&self.work, data, n2, n1);
        self.row_inv.process_with_scratch(data, &mut self.scratch);
    }

    /// Multiplies by a transposed-layout kinetic propagator between the
    /// transforms.
    pub fn apply(&mut self, data: &mut [Complex64], propagator: &[Complex64]) {
        self.forward(data);
        self.work.iter_mut().zip(propagator).for_each(|(w, p)| *w *= p);
        self.inverse(data);
    }

    pub fn moments(&mut self, psi: &Wavefunction2D) -> MomentumMoments {
        let mut buf = psi.amplitudes.clone();
        self.forward(&mut buf);
        let [n1, n2] = self.n;
        let mut total = 0.0;
        let mut mean = [0.0; 2];
        let mut kinetic = 0.0;
        for k2 in 0..n2 {
            let p2 = self.momenta[1][k2];
            for k1 in 0..n1 {
                let idx = k2 * n1 + k1;
                let w = self.work[idx].norm_sqr();
                total += w;
                mean[0] += w * self.momenta[0][k1];
                mean[1] += w * p2;
                kinetic += w * self.kinetic[idx];
            }
        }
        MomentumMoments { mean: [mean[0] / total, mean[1] / total], kinetic: kinetic / total }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments() {
        let g = Grid2D::centered([64, 128], [1.0, 2.0]).unwrap();
        let psi = Wavefunction2D::gaussian(g, [0.1, -0.2], [0.1, 0.15]);
        assert!((psi.compute_norm() - 1.0).abs() < 1e-13);
        let m = psi.mean_position();
        assert!((m[0] - 0.1).abs() < 1e-12 && (m[1] + 0.2).abs() < 1e-12);
        assert!(psi.edge_probability(2) < 1e-15);
    }

    #[test]
    fn round_trip_and_kinetic_energy() {
        let g = Grid2D::centered([32, 64], [1.0, 1.5]).unwrap();
        let masses = [2.0, 3.0];
        let hbar = 0.5;
        let mut sp = Spectral::new(&g, masses, hbar);
        let psi = Wavefunction2D::gaussian(g, [0.0, 0.1], [0.1, 0.12]);
        let mut data = psi.amplitudes.clone();
        let scale = 1.0 / g.len() as f64;
        let ident = vec![Complex64::new(scale, 0.0); g.len()];
        sp.apply(&mut data, &ident);
        let err: f64 = data.iter().zip(&psi.amplitudes).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);
        let mm = sp.moments(&psi);
        let expected = hbar * hbar / 8.0 * (1.0 / (0.01 * masses[0]) + 1.0 / (0.0144 * masses[1]));
        assert!(((mm.kinetic - expected) / expected).abs() < 1e-10);
        assert!(mm.mean[0].abs() < 1e-12 && mm.mean[1].abs() < 1e-12);
    }

    #[test]
    fn momentum_boost_is_detected() {
        let g = Grid2D::centered([64, 64], [1.0, 1.0]).unwrap();
        let hbar = 1.0;
        let mut psi = Wavefunction2D::gaussian(g, [0.0, 0.0], [0.1, 0.1]);
        let p = g.dp(0, hbar) * 3.0;
        for i in 0..64 {
            let x = g.coord(0, i);
            for j in 0..64 {
                psi.amplitudes[i * 64 + j] *= Complex64::from_polar(1.0, p * x / hbar);
            }
        }
        let mut sp = Spectral::new(&g, [1.0, 1.0], hbar);
        let mm = sp.moments(&psi);
        assert!((mm.mean[0] - p).abs() < 1e-10 && mm.mean[1].abs() < 1e-10);
    }
}
