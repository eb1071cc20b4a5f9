//! Invariant-based design of rotation protocols for separable normal modes.
//!
//! Each dynamical normal mode is a driven oscillator
//! `H'' = p²/2 + Ω²(t)/2·(s − ṗ₀/Ω²)²` in mass-weighted coordinates. Its
//! Lewis–Riesenfeld invariant is parametrised by the Ermakov scaling `b` and
//! the classical reference trajectory `α`, and the final excitation of the
//! mode follows from `b, ḃ, α, α̇` at `t_f`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ansatz::{RotationAnsatz, MAX_FREE};
use crate::chain::{IonPair, RigidHarmonicTrap};
use crate::error::{Error, Result};
use crate::nelder_mead::{self, NelderMeadOptions};
use crate::ode::{DenseSolution, Dopri5};
use crate::units::{coulomb_coupling, hbar};
use crate::verifier::{
    excess_energy, gaussian_excess, frame_grid, ground_state, propagate, GridConfig, GroundState, GroundStateOptions, PotentialModel,
    PropagationOptions,
};

pub type DriveFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Auxiliary functions of one mode at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    pub b: f64,
    pub b_dot: f64,
    pub alpha: f64,
    pub alpha_dot: f64,
}

impl ModeState {
    pub const INITIAL: ModeState = ModeState { b: 1.0, b_dot: 0.0, alpha: 0.0, alpha_dot: 0.0 };

    fn from_array(y: [f64; 4]) -> Self {
        Self { b: y[0], b_dot: y[1], alpha: y[2], alpha_dot: y[3] }
    }

    fn to_array(self) -> [f64; 4] {
        [self.b, self.b_dot, self.alpha, self.alpha_dot]
    }
}

/// Time-dependent squared frequency and force of one mode.
#[derive(Clone)]
pub struct ModeDrive {
    pub omega_sq: DriveFn,
    pub p0_dot: DriveFn,
    /// `Ω²(0)`, the reference frequency of the invariant.
    pub omega0_sq: f64,
}

impl std::fmt::Debug for ModeDrive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModeDrive").field("omega0_sq", &self.omega0_sq).finish_non_exhaustive()
    }
}

impl ModeDrive {
    pub fn new<W, P>(omega_sq: W, p0_dot: P) -> Self
    where
        W: Fn(f64) -> f64 + Send + Sync + 'static,
        P: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let omega0_sq = omega_sq(0.0);
        Self { omega_sq: Arc::new(omega_sq), p0_dot: Arc::new(p0_dot), omega0_sq }
    }

    pub fn with_reference(mut self, omega0_sq: f64) -> Self {
        self.omega0_sq = omega0_sq;
        self
    }

    pub fn constant(omega_sq: f64) -> Self {
        Self::new(move |_| omega_sq, |_| 0.0)
    }

    pub fn omega0(&self) -> f64 {
        self.omega0_sq.sqrt()
    }

    /// Same drive with time reversed about `t_f / 2`.
    pub fn reversed(&self, t_f: f64) -> Self {
        let w = self.omega_sq.clone();
        let p = self.p0_dot.clone();
        Self {
            omega_sq: Arc::new(move |t| w(t_f - t)),
            p0_dot: Arc::new(move |t| p(t_f - t)),
            omega0_sq: self.omega0_sq,
        }
    }
}

/// Dense solution of the Ermakov and Newton equations.
#[derive(Debug, Clone)]
pub struct AuxiliaryTrajectory {
    solution: DenseSolution<4>,
    pub t_start: f64,
    pub t_end: f64,
}

impl AuxiliaryTrajectory {
    pub fn state_at(&self, t: f64) -> ModeState {
        ModeState::from_array(self.solution.at(t))
    }

    pub fn final_state(&self) -> ModeState {
        ModeState::from_array(self.solution.y_end)
    }

    pub fn sample(&self, times: &[f64]) -> Vec<ModeState> {
        times.iter().map(|&t| self.state_at(t)).collect()
    }

    pub fn steps(&self) -> usize {
        self.solution.steps.len()
    }
}

/// Integrates `b̈ + Ω²b = Ω₀²/b³`, `α̈ + Ω²α = ṗ₀` from the static initial
/// conditions at `t = 0` to `t_f`.
pub fn solve_auxiliary(drive: &ModeDrive, t_f: f64, ode: &Dopri5) -> Result<AuxiliaryTrajectory> {
    solve_auxiliary_from(drive, 0.0, ModeState::INITIAL, t_f, ode)
}

/// Like [`solve_auxiliary`] but from an arbitrary state and start time,
/// integrating forwards or backwards.
pub fn solve_auxiliary_from(
    drive: &ModeDrive,
    t0: f64,
    state: ModeState,
    t1: f64,
    ode: &Dopri5,
) -> Result<AuxiliaryTrajectory> {
    let w0sq = drive.omega0_sq;
    let rhs = |t: f64, y: &[f64; 4]| {
        let w = (drive.omega_sq)(t);
        let b = y[0];
        [y[1], -w * b + w0sq / (b * b * b), y[3], -w * y[2] + (drive.p0_dot)(t)]
    };
    let solution = ode.solve(rhs, t0, state.to_array(), t1)?;
    if solution.y_end[0] <= 0.0 {
        return Err(Error::Integrator { t: solution.t_end, reason: "scaling factor b reached zero".into() });
    }
    Ok(AuxiliaryTrajectory { solution, t_start: t0, t_end: t1 })
}

/// `⟨ψ''ₙ|H''|ψ''ₙ⟩` for the elementary solution with quantum number `n`.
pub fn mode_energy(n: u32, state: &ModeState, omega0_sq: f64, omega_sq: f64, p0_dot: f64) -> f64 {
    let omega0 = omega0_sq.sqrt();
    let ModeState { b, b_dot, alpha, alpha_dot } = *state;
    let width = (2 * n + 1) as f64 * hbar() / (4.0 * omega0)
        * (b_dot * b_dot + omega_sq * b * b + omega0_sq / (b * b));
    let displacement = if omega_sq.abs() < 1e-12 * omega0_sq {
        let singular = if p0_dot != 0.0 { p0_dot * p0_dot / (2.0 * omega_sq) } else { 0.0 };
        0.5 * omega_sq * alpha * alpha - alpha * p0_dot + singular
    } else {
        let shifted = alpha - p0_dot / omega_sq;
        0.5 * omega_sq * shifted * shifted
    };
    width + 0.5 * alpha_dot * alpha_dot + displacement
}

/// Excess of [`mode_energy`] over the ground energy `ħΩ₀/2`.
pub fn mode_excess(n: u32, state: &ModeState, omega0_sq: f64, omega_sq: f64, p0_dot: f64) -> f64 {
    mode_energy(n, state, omega0_sq, omega_sq, p0_dot) - 0.5 * hbar() * omega0_sq.sqrt()
}

/// Lewis–Riesenfeld invariant of one mode for a classical sample `(s, p)`.
pub fn invariant_value(state: &ModeState, omega0_sq: f64, s: f64, p: f64) -> f64 {
    let ModeState { b, b_dot, alpha, alpha_dot } = *state;
    let x = s - alpha;
    let q = b * (p - alpha_dot) - b_dot * x;
    0.5 * q * q + 0.5 * omega0_sq * (x / b) * (x / b)
}

/// Normalised Hermite functions `h₀..h_n` at `x`.
fn hermite_function(n: u32, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
    for k in 0..n {
        let k = k as f64;
        let next = (2.0 / (k + 1.0)).sqrt() * x * cur - (k / (k + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Elementary solution `ψ''ₙ(s, t)` on a uniform 1D grid of the mode
/// coordinate, normalised on the grid.
pub fn build_elementary_solution(n: u32, state: &ModeState, omega0_sq: f64, grid: &[f64]) -> Result<Vec<Complex64>> {
    if state.b <= 0.0 {
        return Err(Error::InvalidInput(format!("scaling factor b = {} must be positive", state.b)));
    }
    if grid.len() < 2 {
        return Err(Error::Resolution("grid needs at least two points".into()));
    }
    let hb = hbar();
    let ds = grid[1] - grid[0];
    let scale = (omega0_sq.sqrt() / hb).sqrt();
    let ModeState { b, b_dot, alpha, alpha_dot } = *state;
    let mut psi: Vec<Complex64> = grid
        .iter()
        .map(|&s| {
            let phase = (b_dot * s * s / (2.0 * b) + (alpha_dot * b - alpha * b_dot) * s / b) / hb;
            let sigma = (s - alpha) / b;
            let amp = scale.sqrt() * hermite_function(n, sigma * scale) / b.sqrt();
            Complex64::from_polar(amp, phase)
        })
        .collect();
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * ds;
    if (1.0 - norm).abs() > 1e-6 {
        return Err(Error::Resolution(format!("elementary solution norm on grid is {norm}")));
    }
    let inv = norm.sqrt().recip();
    psi.iter_mut().for_each(|z| *z *= inv);
    Ok(psi)
}

/// Stretch (+) and centre-of-mass (−) drives for two equal ions in a rigid
/// trap of frequency `omega0` rotated by `ansatz`.
///
/// The force `ṗ₀₊ = −√(m/2)·ẍ₀` uses exact derivatives of the equilibrium
/// separation `x₀ = (2C/(mω²))^{1/3}` with `ω² = ω₀² − θ̇²`.
pub fn equal_ion_drives(mass: f64, omega0: f64, ansatz: &RotationAnsatz) -> [ModeDrive; 2] {
    let w0sq = omega0 * omega0;
    let a = *ansatz;
    let stretch_sq = move |t: f64| {
        let d = a.eval(t);
        3.0 * (w0sq - d.dot * d.dot)
    };
    let com_sq = move |t: f64| {
        let d = a.eval(t);
        w0sq - d.dot * d.dot
    };
    let cc = coulomb_coupling();
    let force = move |t: f64| {
        let d = a.eval(t);
        let w = w0sq - d.dot * d.dot;
        let w1 = -2.0 * d.dot * d.ddot;
        let w2 = -2.0 * (d.ddot * d.ddot + d.dot * d.dddot);
        let x0 = (2.0 * cc / (mass * w)).cbrt();
        let x0_dot = -x0 * w1 / (3.0 * w);
        let x0_ddot = -(x0_dot * w1 / w + x0 * (w2 / w - (w1 / w) * (w1 / w))) / 3.0;
        -(0.5 * mass).sqrt() * x0_ddot
    };
    [
        ModeDrive { omega_sq: Arc::new(stretch_sq), p0_dot: Arc::new(force), omega0_sq: 3.0 * w0sq },
        ModeDrive { omega_sq: Arc::new(com_sq), p0_dot: Arc::new(|_| 0.0), omega0_sq: w0sq },
    ]
}

/// Final-time excitation of a set of independent modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeObjective {
    /// `Σ_ν [E''₀ν(t_f) − ħΩ₀ν/2]`.
    pub total: f64,
    /// Final `E''₀ν` per mode.
    pub energies: Vec<f64>,
    pub final_states: Vec<ModeState>,
}

pub fn modes_objective(drives: &[ModeDrive], t_f: f64, ode: &Dopri5) -> Result<ModeObjective> {
    let mut total = 0.0;
    let mut energies = Vec::with_capacity(drives.len());
    let mut final_states = Vec::with_capacity(drives.len());
    for drive in drives {
        let end = solve_auxiliary(drive, t_f, ode)?.final_state();
        let e = mode_energy(0, &end, drive.omega0_sq, (drive.omega_sq)(t_f), (drive.p0_dot)(t_f));
        total += e - 0.5 * hbar() * drive.omega0();
        energies.push(e);
        final_states.push(end);
    }
    Ok(ModeObjective { total, energies, final_states })
}

/// Normal-mode objective of an equal-ion protocol. Fails when the
/// effective trap loses confinement (`|θ̇| ≥ ω₀`) somewhere.
pub fn equal_ion_objective(mass: f64, omega0: f64, ansatz: &RotationAnsatz, ode: &Dopri5) -> Result<ModeObjective> {
    if ansatz.max_abs_theta_dot() >= omega0 {
        return Err(Error::InfeasibleConfiguration(format!(
            "rotation speed reaches {} ≥ trap frequency {omega0}",
            ansatz.max_abs_theta_dot()
        )));
    }
    modes_objective(&equal_ion_drives(mass, omega0, ansatz), ansatz.t_f, ode)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOptions {
    pub max_iterations: usize,
    /// Perturbed Nelder–Mead restarts after the first run.
    pub restarts: usize,
    pub seed: u64,
    /// Initial simplex offset; `None` picks the mode-specific default.
    pub initial_step: Option<f64>,
    /// Simplex spread tolerance in units of `ħω₀`.
    pub tolerance_quanta: f64,
    /// Starting coefficients; `None` starts from `c = 0`.
    pub initial_guess: Option<Vec<f64>>,
    pub ode: Dopri5,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            restarts: 0,
            seed: 0,
            initial_step: None,
            tolerance_quanta: 1e-12,
            initial_guess: None,
            ode: Dopri5::default(),
        }
    }
}

impl DesignOptions {
    pub(crate) fn start(&self, n_free: usize) -> Result<Vec<f64>> {
        match &self.initial_guess {
            None => Ok(vec![0.0; n_free]),
            Some(g) if g.len() == n_free => Ok(g.clone()),
            Some(g) => Err(Error::InvalidInput(format!("initial guess has {} entries, expected {n_free}", g.len()))),
        }
    }

    pub(crate) fn nelder_mead(&self, default_step: f64, energy_unit: f64) -> NelderMeadOptions {
        NelderMeadOptions {
            initial_step: self.initial_step.unwrap_or(default_step),
            f_tolerance: self.tolerance_quanta * energy_unit,
            max_iterations: self.max_iterations,
            restarts: self.restarts,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub ansatz: RotationAnsatz,
    pub coefficients: [f64; MAX_FREE],
    /// Final excitation energy (internal units).
    pub objective: f64,
    /// Objective divided by the reference quantum `ħω₀`.
    pub objective_quanta: f64,
    /// Final mode energies (stretch, centre of mass); empty in direct mode.
    pub mode_energies_final: Vec<f64>,
    /// Best objective after every optimizer iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    /// False when the iteration cap was hit first.
    pub converged: bool,
}

/// Optimises the free ansatz coefficients of an equal-ion rotation so the
/// summed final normal-mode excitation is minimal.
pub fn design_equal_ions(
    ions: &IonPair,
    omega0: f64,
    t_f: f64,
    theta_f: f64,
    n_free: usize,
    opts: &DesignOptions,
) -> Result<DesignResult> {
    if !ions.is_equal_mass() {
        return Err(Error::InvalidInput("equal-ion design needs equal masses".into()));
    }
    if !(omega0 > 0.0) {
        return Err(Error::InvalidInput(format!("trap frequency must be positive, got {omega0}")));
    }
    let base = RotationAnsatz::new(theta_f, t_f, &vec![0.0; n_free])?;
    let mass = ions.m1;
    let quantum = hbar() * omega0;

    let evaluate = |x: &[f64]| -> f64 {
        match base.with_free(x).and_then(|a| equal_ion_objective(mass, omega0, &a, &opts.ode)) {
            Ok(o) => o.total,
            Err(_) => f64::INFINITY,
        }
    };
    let nm = nelder_mead::minimize(evaluate, &opts.start(n_free)?, &opts.nelder_mead(1e-3, quantum));
    if !nm.converged {
        log::warn!("equal-ion design hit the iteration cap ({} iterations) at t_f = {t_f}", nm.iterations);
    }
    let ansatz = base.with_free(&nm.x)?;
    let best = equal_ion_objective(mass, omega0, &ansatz, &opts.ode)?;
    Ok(DesignResult {
        ansatz,
        coefficients: ansatz.coefficients(),
        objective: best.total,
        objective_quanta: best.total / quantum,
        mode_energies_final: best.energies,
        trace: nm.trace,
        iterations: nm.iterations,
        evaluations: nm.evaluations,
        converged: nm.converged,
    })
}

/// Simulation settings for [`design_direct`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectConfig {
    pub grid: GridConfig,
    pub ground: GroundStateOptions,
    pub propagation: PropagationOptions,
    /// Minimise the linearised (Gaussian) excitation first and start the
    /// exact search from there.
    pub presolve: bool,
    /// Perturbed restarts of the linearised stage.
    pub presolve_restarts: usize,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            ground: GroundStateOptions::default(),
            propagation: PropagationOptions::default(),
            presolve: true,
            presolve_restarts: 3,
        }
    }
}

/// Minimises the excitation of a Gaussian packet following the classical ion
/// pair, starting from `x0`.
pub fn presolve_gaussian(
    model: &PotentialModel,
    base: &RotationAnsatz,
    x0: &[f64],
    config: &DirectConfig,
    opts: &DesignOptions,
    energy_unit: f64,
) -> nelder_mead::NelderMeadResult {
    let ode = Dopri5::new(config.propagation.frame_rtol, config.propagation.frame_atol);
    let evaluate = |x: &[f64]| -> f64 {
        base.with_free(x)
            .and_then(|a| gaussian_excess(&model.with_protocol(&a), a.t_f, &ode))
            .unwrap_or(f64::INFINITY)
    };
    let nm_opts = NelderMeadOptions {
        restarts: config.presolve_restarts,
        ..opts.nelder_mead(1e-2, energy_unit)
    };
    nelder_mead::minimize(evaluate, x0, &nm_opts)
}

/// Final minus initial energy of the full two-ion simulation for one
/// protocol, starting from a precomputed ground state.
pub fn direct_excess(
    model: &PotentialModel,
    ground: &GroundState,
    ansatz: &RotationAnsatz,
    config: &DirectConfig,
) -> Result<f64> {
    let driven = model.with_protocol(ansatz);
    let trajectory = propagate(&driven, &ground.state, ansatz.t_f, &config.propagation)?;
    Ok(excess_energy(&trajectory))
}

/// Optimises the free coefficients against the exact excitation energy of
/// the two-ion simulation in a rigid trap. The objective is reported in
/// quanta of the first ion's trap frequency.
pub fn design_direct(
    ions: &IonPair,
    trap: &RigidHarmonicTrap,
    t_f: f64,
    theta_f: f64,
    n_free: usize,
    config: &DirectConfig,
    opts: &DesignOptions,
) -> Result<DesignResult> {
    let model = PotentialModel::rigid_harmonic(*ions, *trap, None)?;
    let grid = frame_grid(&model, &config.grid)?;
    let ground = ground_state(&model, &grid, &config.ground)?;
    let base = RotationAnsatz::new(theta_f, t_f, &vec![0.0; n_free])?;
    let quantum = hbar() * trap.frequency(ions.m1);

    let evaluate = |x: &[f64]| -> f64 {
        match base.with_free(x).and_then(|a| direct_excess(&model, &ground, &a, config)) {
            Ok(e) => e,
            Err(err) => {
                log::debug!("direct objective rejected {x:?}: {err}");
                f64::INFINITY
            }
        }
    };
    let mut start = opts.start(n_free)?;
    let mut step = 1e-2;
    if config.presolve && n_free > 0 {
        let pre = presolve_gaussian(&model, &base, &start, config, opts, quantum);
        if pre.f.is_finite() {
            log::info!("linearised presolve at t_f = {t_f}: {} quanta after {} evaluations", pre.f / quantum, pre.evaluations);
            start = pre.x;
            step = 1e-3;
        }
    }
    let nm = nelder_mead::minimize(evaluate, &start, &opts.nelder_mead(step, quantum));
    if !nm.converged {
        log::warn!("direct design hit the iteration cap ({} iterations) at t_f = {t_f}", nm.iterations);
    }
    if !nm.f.is_finite() {
        return Err(Error::InfeasibleConfiguration(format!(
            "no protocol in the explored simplex could be simulated at t_f = {t_f}"
        )));
    }
    let ansatz = base.with_free(&nm.x)?;
    let objective = direct_excess(&model, &ground, &ansatz, config)?;
    Ok(DesignResult {
        ansatz,
        coefficients: ansatz.coefficients(),
        objective,
        objective_quanta: objective / quantum,
        mode_energies_final: Vec::new(),
        trace: nm.trace,
        iterations: nm.iterations,
        evaluations: nm.evaluations,
        converged: nm.converged,
    })
}
