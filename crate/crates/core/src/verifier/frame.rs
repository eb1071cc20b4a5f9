use crate::chain::{equilibrium_numeric, Matrix2};
use crate::error::{Error, Result};
use crate::ode::{DenseSolution, Dopri5};
use crate::units::hbar;

use super::potential::PotentialModel;

/// Classical two-ion trajectory that carries the co-moving grid.
#[derive(Debug, Clone)]
pub struct ClassicalFrame {
    solution: DenseSolution<4>,
    pub t_f: f64,
}

impl ClassicalFrame {
    /// Positions and momenta at `t`.
    pub fn at(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let y = self.solution.at(t);
        ([y[0], y[1]], [y[2], y[3]])
    }

    pub fn end(&self) -> ([f64; 2], [f64; 2]) {
        let y = self.solution.y_end;
        ([y[0], y[1]], [y[2], y[3]])
    }

    /// Frame held fixed at `x` (for time-independent potentials).
    pub fn fixed(x: [f64; 2], t_f: f64) -> Self {
        let solution = DenseSolution { steps: Vec::new(), y_end: [x[0], x[1], 0.0, 0.0], t_end: t_f, evaluations: 0 };
        Self { solution, t_f }
    }
}

/// Integrates Newton's equations in the rotating-frame potential.
pub fn classical_frame(
    model: &PotentialModel,
    x0: [f64; 2],
    p0: [f64; 2],
    t_f: f64,
    ode: &Dopri5,
) -> Result<ClassicalFrame> {
    let m = model.ions.masses();
    let rhs = |t: f64, y: &[f64; 4]| {
        let g = model.state_at(t).gradient([y[0], y[1]]);
        [y[2] / m[0], y[3] / m[1], -g[0], -g[1]]
    };
    let solution = ode.solve(rhs, 0.0, [x0[0], x0[1], p0[0], p0[1]], t_f)?;
    Ok(ClassicalFrame { solution, t_f })
}

/// Minimum of the potential at `t = 0`, refined from the model's guess.
pub fn initial_equilibrium(model: &PotentialModel) -> Result<[f64; 2]> {
    let st = model.state_at(0.0);
    equilibrium_numeric(|x| (st.gradient(x), st.hessian(x)), model.equilibrium_guess, 1e-15)
}

/// Energy gained by the classical pair that starts at rest in the initial
/// equilibrium, measured in the potential at `t_f` with the rotation off.
pub fn classical_excess(model: &PotentialModel, t_f: f64, ode: &Dopri5) -> Result<f64> {
    let x0 = initial_equilibrium(model)?;
    let (x, p) = classical_frame(model, x0, [0.0, 0.0], t_f, ode)?.end();
    let m = model.ions.masses();
    let kinetic = p[0] * p[0] / (2.0 * m[0]) + p[1] * p[1] / (2.0 * m[1]);
    Ok(kinetic + model.lab_state_at(t_f).difference(x0, x))
}

/// [`classical_excess`] plus the excitation of the ground-state Gaussian
/// carried along the classical path by the linearised dynamics. Exact for
/// quadratic potentials.
pub fn gaussian_excess(model: &PotentialModel, t_f: f64, ode: &Dopri5) -> Result<f64> {
    let x0 = initial_equilibrium(model)?;
    let m = model.ions.masses();
    let h0 = model.state_at(0.0).hessian(x0);
    let (sxx, spp) = ground_covariance(&h0, m)?;
    let zero_point = width_energy(&h0, m, &sxx, &spp);

    let mut y0 = [0.0; 20];
    y0[0] = x0[0];
    y0[1] = x0[1];
    for k in 0..4 {
        y0[4 + 5 * k] = 1.0;
    }
    let rhs = |t: f64, y: &[f64; 20]| {
        let st = model.state_at(t);
        let x = [y[0], y[1]];
        let g = st.gradient(x);
        let h = st.hessian(x);
        let mut dy = [0.0; 20];
        dy[0] = y[2] / m[0];
        dy[1] = y[3] / m[1];
        dy[2] = -g[0];
        dy[3] = -g[1];
        // monodromy rows (x1, x2, p1, p2), row-major after the phase point
        for c in 0..4 {
            let col = |r: usize| y[4 + 4 * r + c];
            dy[4 + c] = col(2) / m[0];
            dy[4 + 4 + c] = col(3) / m[1];
            dy[4 + 8 + c] = -(h[0][0] * col(0) + h[0][1] * col(1));
            dy[4 + 12 + c] = -(h[1][0] * col(0) + h[1][1] * col(1));
        }
        dy
    };
    let y = ode.solve(rhs, 0.0, y0, t_f)?.y_end;
    let mono = |r: usize, c: usize| y[4 + 4 * r + c];
    let mut sigma0 = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            sigma0[i][j] = sxx[i][j];
            sigma0[2 + i][2 + j] = spp[i][j];
        }
    }
    let mut sigma = [[0.0; 4]; 4];
    for (r, row) in sigma.iter_mut().enumerate() {
        for (c, out) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    acc += mono(r, a) * sigma0[a][b] * mono(c, b);
                }
            }
            *out = acc;
        }
    }
    let x = [y[0], y[1]];
    let lab = model.lab_state_at(t_f);
    let fxx = [[sigma[0][0], sigma[0][1]], [sigma[1][0], sigma[1][1]]];
    let fpp = [[sigma[2][2], sigma[2][3]], [sigma[3][2], sigma[3][3]]];
    let width = width_energy(&lab.hessian(x), m, &fxx, &fpp);
    let kinetic = y[2] * y[2] / (2.0 * m[0]) + y[3] * y[3] / (2.0 * m[1]);
    Ok(kinetic + lab.difference(x0, x) + width - zero_point)
}

/// Position and momentum covariances of the harmonic ground state.
fn ground_covariance(h: &Matrix2, m: [f64; 2]) -> Result<(Matrix2, Matrix2)> {
    let sq = [m[0].sqrt(), m[1].sqrt()];
    let k = [
        [h[0][0] / m[0], h[0][1] / (sq[0] * sq[1])],
        [h[1][0] / (sq[0] * sq[1]), h[1][1] / m[1]],
    ];
    let phi = 0.5 * (2.0 * k[0][1]).atan2(k[0][0] - k[1][1]);
    let (s, c) = phi.sin_cos();
    let vecs = [[c, s], [-s, c]];
    let mut sxx = [[0.0; 2]; 2];
    let mut spp = [[0.0; 2]; 2];
    for v in vecs {
        let lam = k[0][0] * v[0] * v[0] + 2.0 * k[0][1] * v[0] * v[1] + k[1][1] * v[1] * v[1];
        if !(lam > 0.0) {
            return Err(Error::EquilibriumUndefined(format!("initial potential is not confining (curvature {lam})")));
        }
        let w = lam.sqrt();
        for i in 0..2 {
            for j in 0..2 {
                sxx[i][j] += 0.5 * hbar() / w * v[i] * v[j] / (sq[i] * sq[j]);
                spp[i][j] += 0.5 * hbar() * w * v[i] * v[j] * sq[i] * sq[j];
            }
        }
    }
    Ok((sxx, spp))
}

fn width_energy(h: &Matrix2, m: [f64; 2], sxx: &Matrix2, spp: &Matrix2) -> f64 {
    let mut e = 0.5 * (spp[0][0] / m[0] + spp[1][1] / m[1]);
    for i in 0..2 {
        for j in 0..2 {
            e += 0.5 * h[i][j] * sxx[i][j];
        }
    }
    e
}
