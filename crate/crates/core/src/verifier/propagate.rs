use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{symmetric_eigenvalues, Matrix2};
use crate::error::{Error, Result};
use crate::ode::Dopri5;
use crate::units::hbar;

use super::frame::{classical_frame, initial_equilibrium, ClassicalFrame};
use super::grid::Grid2D;
use super::potential::{PotentialModel, TrapState};
use super::wavefunction::{Spectral, Wavefunction2D};

/// Co-moving wavefunction: the lab state is `e^{iP·(s−X)/ħ} φ(s − X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FramedState {
    pub psi: Wavefunction2D,
    pub x: [f64; 2],
    pub p: [f64; 2],
}

impl FramedState {
    /// Lab-frame amplitudes on the shifted grid `X + y`.
    pub fn lab_amplitudes(&self) -> Vec<Complex64> {
        let g = &self.psi.grid;
        let hb = hbar();
        let mut out = Vec::with_capacity(g.len());
        for i in 0..g.n[0] {
            let a = self.p[0] * g.coord(0, i) / hb;
            for j in 0..g.n[1] {
                let phase = a + self.p[1] * g.coord(1, j) / hb;
                out.push(self.psi.amplitudes[g.index(i, j)] * Complex64::from_polar(1.0, phase));
            }
        }
        out
    }

    /// Lab-frame `⟨s₁⟩, ⟨s₂⟩`.
    pub fn mean_position(&self) -> [f64; 2] {
        let m = self.psi.mean_position();
        [self.x[0] + m[0], self.x[1] + m[1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n: [usize; 2],
    /// Half-width of the co-moving grid in ground-state widths.
    pub half_width_sigmas: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: [256, 256], half_width_sigmas: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateOptions {
    /// Imaginary time step; `None` means `0.02/ω` with `ω` the softest mode.
    pub dtau: Option<f64>,
    /// Converged when the energy changes by less than this fraction of the
    /// zero-point energy per step.
    pub tolerance: f64,
    pub max_steps: usize,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        Self { dtau: None, tolerance: 1e-12, max_steps: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationOptions {
    /// Fixed step; `None` applies the default step policy.
    pub dt: Option<f64>,
    /// Observables are recorded this many times (plus the endpoints).
    pub samples: usize,
    /// Leak and norm checks run every this many steps.
    pub check_every: usize,
    pub edge_threshold: f64,
    pub norm_drift_per_1000: f64,
    pub frame_rtol: f64,
    pub frame_atol: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            dt: None,
            samples: 100,
            check_every: 200,
            edge_threshold: 1e-8,
            norm_drift_per_1000: 1e-8,
            frame_rtol: 1e-12,
            frame_atol: 1e-13,
        }
    }
}

/// Lab energy split into the classical frame energy and a small remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub t: f64,
    pub x: [f64; 2],
    pub p: [f64; 2],
    pub trap: TrapState,
    /// `∑Pᵢ⟨pᵢ⟩/mᵢ + ∇V(X)·⟨y⟩ + ⟨T⟩ + ⟨W⟩`.
    pub frame: f64,
    pub masses: [f64; 2],
}

impl EnergyParts {
    pub fn classical_kinetic(&self) -> f64 {
        self.p[0] * self.p[0] / (2.0 * self.masses[0]) + self.p[1] * self.p[1] / (2.0 * self.masses[1])
    }

    pub fn total(&self) -> f64 {
        self.classical_kinetic() + self.trap.potential(self.x) + self.frame
    }

    /// `E(self) − E(earlier)` without forming the large absolute energies.
    pub fn minus(&self, earlier: &EnergyParts) -> f64 {
        let dv = self.trap.difference(earlier.x, self.x) + self.trap.potential(earlier.x)
            - earlier.trap.potential(earlier.x);
        self.classical_kinetic() - earlier.classical_kinetic() + dv + self.frame - earlier.frame
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: f64,
    pub norm: f64,
    pub energy: f64,
    pub mean_s: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub state: FramedState,
    pub energy: f64,
    pub parts: EnergyParts,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub observations: Vec<Observation>,
    pub initial: EnergyParts,
    pub final_parts: EnergyParts,
    pub final_state: FramedState,
    pub dt: f64,
    pub steps: usize,
    pub t_f: f64,
    pub max_edge_probability: f64,
    pub max_clamp_probability: f64,
}

/// Mass-weighted Hessian `M^{-1/2} H M^{-1/2}`.
fn mass_weighted(h: &Matrix2, m: [f64; 2]) -> Matrix2 {
    let r = [m[0].sqrt(), m[1].sqrt()];
    [[h[0][0] / m[0], h[0][1] / (r[0] * r[1])], [h[1][0] / (r[0] * r[1]), h[1][1] / m[1]]]
}

/// Position standard deviations of the harmonic ground state of `trap`
/// around `x`, and the normal-mode angular frequencies.
pub fn ground_widths(trap: &TrapState, x: [f64; 2], masses: [f64; 2]) -> Result<([f64; 2], [f64; 2])> {
    let k = mass_weighted(&trap.hessian(x), masses);
    let ev = symmetric_eigenvalues(&k);
    if !(ev[0] > 0.0 && ev[1] > 0.0) {
        return Err(Error::EquilibriumUndefined(format!("potential is not confining at {x:?} (eigenvalues {ev:?})")));
    }
    // eigenvectors of the symmetric 2×2 matrix via its rotation angle
    let phi = 0.5 * (2.0 * k[0][1]).atan2(k[0][0] - k[1][1]);
    let (s, c) = phi.sin_cos();
    let vecs = [[c, s], [-s, c]];
    let lam = [
        k[0][0] * c * c + 2.0 * k[0][1] * s * c + k[1][1] * s * s,
        k[0][0] * s * s - 2.0 * k[0][1] * s * c + k[1][1] * c * c,
    ];
    let hb = hbar();
    let mut var = [0.0; 2];
    for (v, l) in vecs.iter().zip(lam) {
        let w = l.sqrt();
        for i in 0..2 {
            var[i] += hb / (2.0 * w) * v[i] * v[i] / masses[i];
        }
    }
    Ok(([var[0].sqrt(), var[1].sqrt()], [ev[0].sqrt(), ev[1].sqrt()]))
}

/// Co-moving grid for `model`, sized from the ground-state widths at `t = 0`.
pub fn frame_grid(model: &PotentialModel, config: &GridConfig) -> Result<Grid2D> {
    let x0 = initial_equilibrium(model)?;
    let (sigma, _) = ground_widths(&model.state_at(0.0), x0, model.ions.masses())?;
    let k = config.half_width_sigmas;
    Grid2D::centered(config.n, [k * sigma[0], k * sigma[1]])
}

/// Per-axis and pairwise pieces of the co-moving potential `W(y)`.
struct FramePotential {
    axis: [Vec<f64>; 2],
    y: [Vec<f64>; 2],
    trap: TrapState,
    r0: f64,
}

impl FramePotential {
    fn new(grid: &Grid2D, trap: TrapState, x: [f64; 2]) -> Self {
        let y = [grid.coords(0), grid.coords(1)];
        let axis = [0, 1].map(|i| {
            y[i].iter()
                .map(|&v| {
                    let v2 = v * v;
                    0.5 * trap.u[i] * v2 + trap.beta * v2 * (6.0 * x[i] * x[i] + 4.0 * x[i] * v + v2)
                })
                .collect()
        });
        Self { axis, y, trap, r0: x[1] - x[0] }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.axis[0][i] + self.axis[1][j] + self.trap.coulomb_remainder(self.r0, self.y[1][j] - self.y[0][i])
    }
}

fn energy_parts(
    spectral: &mut Spectral,
    psi: &Wavefunction2D,
    trap: TrapState,
    x: [f64; 2],
    p: [f64; 2],
    t: f64,
    masses: [f64; 2],
) -> EnergyParts {
    let g = &psi.grid;
    let w = FramePotential::new(g, trap, x);
    let mut norm = 0.0;
    let mut mean = [0.0; 2];
    let mut pot = 0.0;
    for i in 0..g.n[0] {
        for j in 0..g.n[1] {
            let d = psi.amplitudes[g.index(i, j)].norm_sqr();
            norm += d;
            mean[0] += d * w.y[0][i];
            mean[1] += d * w.y[1][j];
            pot += d * w.at(i, j);
        }
    }
    let mm = spectral.moments(psi);
    let grad = trap.gradient(x);
    let frame = p[0] * mm.mean[0] / masses[0]
        + p[1] * mm.mean[1] / masses[1]
        + (grad[0] * mean[0] + grad[1] * mean[1] + pot) / norm
        + mm.kinetic;
    EnergyParts { t, x, p, trap, frame, masses }
}

/// Imaginary-time relaxation into the lowest state of the `t = 0` potential.
pub fn ground_state(model: &PotentialModel, grid: &Grid2D, opts: &GroundStateOptions) -> Result<GroundState> {
    let masses = model.ions.masses();
    let x0 = initial_equilibrium(model)?;
    let trap = model.state_at(0.0);
    let (sigma, freqs) = ground_widths(&trap, x0, masses)?;
    let hb = hbar();
    let dtau = opts.dtau.unwrap_or(0.02 / freqs[0].min(freqs[1]));
    let zero_point = 0.5 * hb * (freqs[0] + freqs[1]);

    let mut spectral = Spectral::new(grid, masses, hb);
    let scale = 1.0 / grid.len() as f64;
    let kinetic: Vec<Complex64> =
        spectral.kinetic.iter().map(|t| Complex64::new(scale * (-t * dtau / hb).exp(), 0.0)).collect();
    let w = FramePotential::new(grid, trap, x0);
    let mut half = Vec::with_capacity(grid.len());
    for i in 0..grid.n[0] {
        for j in 0..grid.n[1] {
            half.push((-0.5 * w.at(i, j) * dtau / hb).exp());
        }
    }

    let mut psi = Wavefunction2D::gaussian(*grid, [0.0, 0.0], sigma);
    let mut last = energy_parts(&mut spectral, &psi, trap, x0, [0.0; 2], 0.0, masses);
    let mut history = vec![last.frame];
    let check = 10;
    for step in 1..=opts.max_steps {
        psi.amplitudes.iter_mut().zip(&half).for_each(|(z, h)| *z *= h);
        spectral.apply(&mut psi.amplitudes, &kinetic);
        psi.amplitudes.iter_mut().zip(&half).for_each(|(z, h)| *z *= h);
        psi.normalize();
        if step % check == 0 {
            let parts = energy_parts(&mut spectral, &psi, trap, x0, [0.0; 2], 0.0, masses);
            let change = (parts.frame - last.frame).abs() / check as f64;
            history.push(parts.frame);
            last = parts;
            if !change.is_finite() {
                break;
            }
            if change < opts.tolerance * zero_point {
                let state = FramedState { psi, x: x0, p: [0.0; 2] };
                return Ok(GroundState { energy: last.total(), parts: last, state, steps: step });
            }
        }
    }
    let tail = history.len().saturating_sub(5);
    Err(Error::GroundStateNotConverged { steps: opts.max_steps, last_energies: history[tail..].to_vec() })
}

/// Time step from the default policy for the protocol carried by `frame`.
pub fn default_time_step(model: &PotentialModel, frame: &ClassicalFrame, grid: &Grid2D) -> Result<f64> {
    let masses = model.ions.masses();
    let t_f = frame.t_f;
    let mut omega_max: f64 = 0.0;
    for k in 0..=200 {
        let t = t_f * k as f64 / 200.0;
        let (x, _) = frame.at(t);
        let ev = symmetric_eigenvalues(&mass_weighted(&model.state_at(t).hessian(x), masses));
        omega_max = omega_max.max(ev[0].abs().sqrt()).max(ev[1].abs().sqrt());
    }
    let spectral = Spectral::new(grid, masses, hbar());
    let t_max = spectral.max_kinetic();
    let dt = (t_f / 4000.0)
        .min(2.0 * std::f64::consts::PI / (100.0 * omega_max))
        .min(hbar() * std::f64::consts::PI / (4.0 * t_max));
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("no admissible time step for t_f = {t_f}")));
    }
    Ok(dt)
}

/// Strang-split real-time evolution from `initial` over `[0, t_f]`.
pub fn propagate(
    model: &PotentialModel,
    initial: &FramedState,
    t_f: f64,
    opts: &PropagationOptions,
) -> Result<Trajectory> {
    if !(t_f > 0.0) {
        return Err(Error::InvalidInput(format!("final time must be positive, got {t_f}")));
    }
    let masses = model.ions.masses();
    let grid = initial.psi.grid;
    let hb = hbar();
    let ode = Dopri5::new(opts.frame_rtol, opts.frame_atol);
    let frame = classical_frame(model, initial.x, initial.p, t_f, &ode)?;
    let dt_target = match opts.dt {
        Some(dt) => dt,
        None => default_time_step(model, &frame, &grid)?,
    };
    let steps = (t_f / dt_target).ceil().max(1.0) as usize;
    let dt = t_f / steps as f64;

    let mut spectral = Spectral::new(&grid, masses, hb);
    let scale = 1.0 / grid.len() as f64;
    let kinetic: Vec<Complex64> =
        spectral.kinetic.iter().map(|t| Complex64::from_polar(scale, -t * dt / hb)).collect();

    let mut psi = initial.psi.clone();
    let norm0 = psi.refresh_norm();
    let initial_parts = energy_parts(&mut spectral, &psi, model.state_at(0.0), initial.x, initial.p, 0.0, masses);
    let mut observations = vec![Observation {
        t: 0.0,
        norm: norm0,
        energy: initial_parts.total(),
        mean_s: initial.mean_position(),
    }];
    let sample_every = (steps / opts.samples.max(1)).max(1);
    let mut half = vec![Complex64::default(); grid.len()];
    let mut max_edge: f64 = 0.0;
    let mut max_clamp: f64 = 0.0;

    for step in 0..steps {
        let t_mid = (step as f64 + 0.5) * dt;
        let (x, _) = frame.at(t_mid);
        let w = FramePotential::new(&grid, model.state_at(t_mid), x);
        let c = -0.5 * dt / hb;
        for i in 0..grid.n[0] {
            let row = &mut half[i * grid.n[1]..(i + 1) * grid.n[1]];
            for (j, h) in row.iter_mut().enumerate() {
                *h = Complex64::cis(c * w.at(i, j));
            }
        }
        psi.amplitudes.iter_mut().zip(&half).for_each(|(z, h)| *z *= h);
        spectral.apply(&mut psi.amplitudes, &kinetic);
        psi.amplitudes.iter_mut().zip(&half).for_each(|(z, h)| *z *= h);

        let done = step + 1;
        let t = done as f64 * dt;
        if done % opts.check_every.max(1) == 0 || done == steps {
            let (x, _) = frame.at(t);
            let (edge, band) = leak_checks(&psi, x, model.clamp);
            max_edge = max_edge.max(edge);
            max_clamp = max_clamp.max(band);
            if edge > opts.edge_threshold {
                return Err(Error::Resolution(format!(
                    "edge band holds probability {edge:.3e} at t = {t:.6} (grid too small)"
                )));
            }
            if band > opts.edge_threshold {
                return Err(Error::Resolution(format!(
                    "Coulomb clamp band holds probability {band:.3e} at t = {t:.6}"
                )));
            }
            let norm = psi.refresh_norm();
            let allowed = opts.norm_drift_per_1000 * (done as f64 / 1000.0).max(1.0);
            if (norm - norm0).abs() > allowed {
                return Err(Error::Resolution(format!("norm drifted by {:.3e} after {done} steps", norm - norm0)));
            }
        }
        if done % sample_every == 0 && done != steps {
            let (x, p) = frame.at(t);
            let parts = energy_parts(&mut spectral, &psi, model.state_at(t), x, p, t, masses);
            let m = psi.mean_position();
            observations.push(Observation {
                t,
                norm: psi.refresh_norm(),
                energy: parts.total(),
                mean_s: [x[0] + m[0], x[1] + m[1]],
            });
        }
    }

    let (x, p) = frame.end();
    let final_parts = energy_parts(&mut spectral, &psi, model.lab_state_at(t_f), x, p, t_f, masses);
    let m = psi.mean_position();
    observations.push(Observation {
        t: t_f,
        norm: psi.refresh_norm(),
        energy: final_parts.total(),
        mean_s: [x[0] + m[0], x[1] + m[1]],
    });
    Ok(Trajectory {
        observations,
        initial: initial_parts,
        final_parts,
        final_state: FramedState { psi, x, p },
        dt,
        steps,
        t_f,
        max_edge_probability: max_edge,
        max_clamp_probability: max_clamp,
    })
}

fn leak_checks(psi: &Wavefunction2D, x: [f64; 2], clamp: f64) -> (f64, f64) {
    let r0 = x[1] - x[0];
    let band = psi.probability_where(|y1, y2| r0 + y2 - y1 < clamp);
    (psi.edge_probability(2), band)
}

/// Final minus initial energy, with the final Hamiltonian taken without
/// rotation.
pub fn excess_energy(trajectory: &Trajectory) -> f64 {
    trajectory.final_parts.minus(&trajectory.initial)
}
