//! Separable rotation of two different ions in a tilted double well
//! `V = γ(s₁+s₂) + ½u₁s₁² + ½u₂s₂² + β(s₁⁴+s₂⁴) + Cc/(s₂−s₁)`.
//!
//! The external curvature `mᵢωᵢ²` is common and negative. The linear force
//! `γ(t)` is chosen at every instant so that the equilibrium separation makes
//! the mass-weighted Hessian diagonal degenerate, which fixes the tilt angle
//! at `π/4` and decouples the two dynamical modes.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ansatz::RotationAnsatz;
use crate::chain::{symmetric_eigenvalues, IonPair, Matrix2};
use crate::error::{Error, Result};
use crate::nelder_mead;
use crate::sta::{mode_energy, modes_objective, solve_auxiliary, DesignOptions, DesignResult, ModeDrive};
use crate::units::{coulomb_coupling, hbar, to_internal, Dimension};
use crate::verifier::TrapState;

/// Geometry samples along a protocol unless stated otherwise.
pub const DEFAULT_SAMPLES: usize = 2000;

/// Largest `|v₁₁ − v₂₂| / |v₁₂|` accepted when building mode drives.
pub const DECOUPLING_TOL: f64 = 1e-6;

/// Largest relative jump of `d` or `γ` between neighbouring samples.
pub const CONTINUITY_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleWellConfig {
    /// `m₁ω₁² = m₂ω₂²`, negative (force/length).
    pub curvature: f64,
    /// Quartic coefficient (force/length³).
    pub beta: f64,
}

impl DoubleWellConfig {
    pub fn new(curvature: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidInput(format!("quartic coefficient must be positive, got {beta}")));
        }
        if !curvature.is_finite() {
            return Err(Error::InvalidInput(format!("curvature must be finite, got {curvature}")));
        }
        Ok(Self { curvature, beta })
    }

    /// From SI values in N/m and N/m³.
    pub fn from_si(curvature: f64, beta: f64) -> Result<Self> {
        Self::new(
            to_internal(curvature, Dimension::SpringConstant),
            to_internal(beta, Dimension::QuarticCoefficient),
        )
    }

    /// −4.7 pN/m and 0.52 mN/m³.
    pub fn reference() -> Self {
        Self::from_si(-4.7e-12, 0.52e-3).expect("reference constants are valid")
    }

    /// Effective springs `mᵢωᵢ² − mᵢθ̇²`.
    pub fn springs(&self, ions: &IonPair, theta_dot: f64) -> [f64; 2] {
        let w = theta_dot * theta_dot;
        [self.curvature - ions.m1 * w, self.curvature - ions.m2 * w]
    }

    /// Separation scale used to bracket the constraint: the distance between
    /// the two external wells, or the harmonic separation when the external
    /// curvature confines.
    pub fn separation_guess(&self, ions: &IonPair, theta_dot: f64) -> f64 {
        let u = self.springs(ions, theta_dot);
        if u[0] < 0.0 && u[1] < 0.0 {
            u.iter().map(|ui| (-ui / (4.0 * self.beta)).sqrt()).sum()
        } else {
            (coulomb_coupling() * (1.0 / u[0].abs() + 1.0 / u[1].abs())).cbrt()
        }
    }
}

/// Equilibrium of the decoupled double well at one rotation speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparableGeometry {
    pub theta_dot: f64,
    pub d: f64,
    pub s0: f64,
    /// Signed square root entering the closed forms for `s₀` and `γ`.
    pub a: f64,
    pub gamma: f64,
}

impl SeparableGeometry {
    pub fn positions(&self) -> [f64; 2] {
        [self.s0 - 0.5 * self.d, self.s0 + 0.5 * self.d]
    }

    pub fn trap_state(&self, config: &DoubleWellConfig, ions: &IonPair) -> TrapState {
        TrapState {
            u: config.springs(ions, self.theta_dot),
            beta: config.beta,
            gamma: self.gamma,
            coulomb: coulomb_coupling(),
            clamp: 0.0,
        }
    }

    /// Mass-weighted Hessian at the equilibrium.
    pub fn hessian(&self, config: &DoubleWellConfig, ions: &IonPair) -> Matrix2 {
        let h = self.trap_state(config, ions).hessian(self.positions());
        let m = ions.masses();
        let off = h[0][1] / (m[0] * m[1]).sqrt();
        [[h[0][0] / m[0], off], [off, h[1][1] / m[1]]]
    }

    /// `|v₁₁ − v₂₂| / |v₁₂|`.
    pub fn decoupling_defect(&self, config: &DoubleWellConfig, ions: &IonPair) -> f64 {
        let v = self.hessian(config, ions);
        (v[0][0] - v[1][1]).abs() / v[0][1].abs()
    }

    /// Largest force component at the equilibrium positions.
    pub fn gradient_residual(&self, config: &DoubleWellConfig, ions: &IonPair) -> f64 {
        let g = self.trap_state(config, ions).gradient(self.positions());
        g[0].abs().max(g[1].abs())
    }

    /// `(Ω₊², Ω₋²)`: the centre-of-mass-like mode along `(1, 1)/√2` and the
    /// stretch along `(1, −1)/√2` in mass-weighted coordinates.
    pub fn mode_frequencies_sq(&self, config: &DoubleWellConfig, ions: &IonPair) -> [f64; 2] {
        let v = self.hessian(config, ions);
        let [lo, hi] = symmetric_eigenvalues(&v);
        if v[0][1] <= 0.0 {
            [lo, hi]
        } else {
            [hi, lo]
        }
    }
}

/// Terms of the decoupling constraint at separation `d`, or `None` where the
/// radicand is negative. `h` holds half the effective springs.
struct Constraint {
    residual: f64,
    scale: f64,
    a: f64,
}

fn constraint(d: f64, h: [f64; 2], beta: f64, masses: [f64; 2], sign: f64) -> Option<Constraint> {
    let cc = coulomb_coupling();
    let [m1, m2] = masses;
    let dh = h[0] - h[1];
    let rad = d.powi(3) * (24.0 * beta * cc - 12.0 * beta * beta * d.powi(5) - 12.0 * beta * d.powi(3) * (h[0] + h[1]) + d * dh * dh);
    if !(rad >= 0.0) {
        return None;
    }
    let a = sign * rad.sqrt();
    let dm = m1 - m2;
    let terms = [
        a * dm * dh,
        d * d * 6.0 * a * beta * (m1 + m2),
        d * d * dm * dh * dh,
        24.0 * beta * cc * d * dm,
        12.0 * beta * beta * d.powi(6) * dm,
    ];
    Some(Constraint {
        residual: terms.iter().sum(),
        scale: terms.iter().map(|x| x.abs()).sum(),
        a,
    })
}

fn closed_form(d: f64, a: f64, h: [f64; 2], beta: f64, theta_dot: f64) -> SeparableGeometry {
    let cc = coulomb_coupling();
    let dh = h[0] - h[1];
    let s0 = (a + d * d * dh) / (12.0 * beta * d.powi(3));
    let gamma = (18.0 * beta * cc * d * d * (-dh) - 24.0 * beta * beta * d.powi(5) * a - d * dh * dh * a
        - 6.0 * beta * cc * a
        + 36.0 * beta * beta * d.powi(7) * dh
        + d.powi(3) * (-6.0 * beta * a * (h[0] + h[1]) - dh.powi(3)))
        / (108.0 * beta * beta * d.powi(6));
    SeparableGeometry { theta_dot, d, s0, a, gamma }
}

/// Root of the constraint in `[lo, hi]` by safeguarded secant steps.
fn refine<F: Fn(f64) -> Option<f64>>(f: F, mut lo: f64, mut hi: f64, mut flo: f64, mut fhi: f64) -> f64 {
    for i in 0..200 {
        let secant = hi - fhi * (hi - lo) / (fhi - flo);
        let mid = 0.5 * (lo + hi);
        let x = if i % 2 == 1 && secant > lo && secant < hi { secant } else { mid };
        let fx = match f(x) {
            Some(v) => v,
            None => return mid,
        };
        if fx == 0.0 {
            return x;
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    if flo.abs() < fhi.abs() {
        lo
    } else {
        hi
    }
}

/// All sign changes of the constraint on a logarithmic scan of `[lo, hi]`.
fn roots_in<F: Fn(f64) -> Option<f64>>(f: &F, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let ratio = (hi / lo).powf(1.0 / (points - 1) as f64);
    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    let mut x = lo;
    for _ in 0..points {
        match f(x) {
            Some(v) => {
                if let Some((xp, vp)) = prev {
                    if v == 0.0 {
                        roots.push(x);
                    } else if vp != 0.0 && v.signum() != vp.signum() {
                        roots.push(refine(f, xp, x, vp, v));
                    }
                }
                prev = Some((x, v));
            }
            None => prev = None,
        }
        x *= ratio;
    }
    roots
}

/// Solves the decoupling constraint for `d` at rotation speed `theta_dot`,
/// then evaluates the midpoint and the linear force. A warm start keeps the
/// root on the branch of a neighbouring sample.
pub fn solve_separation(
    config: &DoubleWellConfig,
    ions: &IonPair,
    theta_dot: f64,
    warm_start: Option<f64>,
) -> Result<SeparableGeometry> {
    if ions.is_equal_mass() {
        return Err(Error::DegenerateConstraint);
    }
    let u = config.springs(ions, theta_dot);
    let h = [0.5 * u[0], 0.5 * u[1]];
    let masses = ions.masses();
    let sign = -(ions.m1 - ions.m2).signum();
    let f = |d: f64| constraint(d, h, config.beta, masses, sign).map(|c| c.residual);

    let d = match warm_start.map(|d_prev| (d_prev, roots_in(&f, 0.9 * d_prev, 1.1 * d_prev, 41))) {
        Some((d_prev, roots)) if !roots.is_empty() => nearest(&roots, d_prev),
        _ => {
            let guess = config.separation_guess(ions, theta_dot);
            let roots = roots_in(&f, 0.1 * guess, 10.0 * guess, 4000);
            if roots.is_empty() {
                return Err(Error::InfeasibleConfiguration(format!(
                    "no separation in [{}, {}] decouples the modes at θ̇ = {theta_dot}",
                    0.1 * guess,
                    10.0 * guess
                )));
            }
            nearest(&roots, warm_start.unwrap_or(guess))
        }
    };
    let c = constraint(d, h, config.beta, masses, sign)
        .ok_or_else(|| Error::InfeasibleConfiguration(format!("negative radicand at d = {d}")))?;
    Ok(closed_form(d, c.a, h, config.beta, theta_dot))
}

fn nearest(roots: &[f64], target: f64) -> f64 {
    roots
        .iter()
        .copied()
        .min_by(|a, b| (a / target).ln().abs().total_cmp(&(b / target).ln().abs()))
        .expect("non-empty")
}

/// Relative residual of the decoupling constraint for a geometry.
pub fn constraint_residual(config: &DoubleWellConfig, ions: &IonPair, g: &SeparableGeometry) -> f64 {
    let u = config.springs(ions, g.theta_dot);
    let sign = -(ions.m1 - ions.m2).signum();
    match constraint(g.d, [0.5 * u[0], 0.5 * u[1]], config.beta, ions.masses(), sign) {
        Some(c) => c.residual.abs() / c.scale,
        None => f64::INFINITY,
    }
}

/// Equilibrium `(s₁, s₂, γ)` as a function of `w = θ̇²`: force balance on both
/// ions plus equal mass-weighted curvatures.
struct Balance<'a> {
    config: &'a DoubleWellConfig,
    masses: [f64; 2],
}

impl Balance<'_> {
    fn springs(&self, w: f64) -> [f64; 2] {
        [self.config.curvature - self.masses[0] * w, self.config.curvature - self.masses[1] * w]
    }

    fn residual(&self, x: [f64; 3], w: f64) -> [f64; 3] {
        let (b, cc) = (self.config.beta, coulomb_coupling());
        let u = self.springs(w);
        let [m1, m2] = self.masses;
        let r = x[1] - x[0];
        let c3 = 2.0 * cc / r.powi(3);
        [
            x[2] + u[0] * x[0] + 4.0 * b * x[0].powi(3) + cc / (r * r),
            x[2] + u[1] * x[1] + 4.0 * b * x[1].powi(3) - cc / (r * r),
            (u[0] + 12.0 * b * x[0] * x[0] + c3) / m1 - (u[1] + 12.0 * b * x[1] * x[1] + c3) / m2,
        ]
    }

    fn jacobian(&self, x: [f64; 3], w: f64) -> [[f64; 3]; 3] {
        let (b, cc) = (self.config.beta, coulomb_coupling());
        let u = self.springs(w);
        let [m1, m2] = self.masses;
        let r = x[1] - x[0];
        let c3 = 2.0 * cc / r.powi(3);
        let c4 = 6.0 * cc / r.powi(4);
        [
            [u[0] + 12.0 * b * x[0] * x[0] + c3, -c3, 1.0],
            [-c3, u[1] + 12.0 * b * x[1] * x[1] + c3, 1.0],
            [(24.0 * b * x[0] + c4) / m1 - c4 / m2, -c4 / m1 - (24.0 * b * x[1] - c4) / m2, 0.0],
        ]
    }

    /// Second directional derivative `F_xx[v, v]`.
    fn curvature(&self, x: [f64; 3], v: [f64; 3]) -> [f64; 3] {
        let (b, cc) = (self.config.beta, coulomb_coupling());
        let [m1, m2] = self.masses;
        let r = x[1] - x[0];
        let c4 = 6.0 * cc / r.powi(4);
        let c5 = 24.0 * cc / r.powi(5);
        let dl = v[1] - v[0];
        [
            24.0 * b * x[0] * v[0] * v[0] + c4 * dl * dl,
            24.0 * b * x[1] * v[1] * v[1] - c4 * dl * dl,
            (24.0 * b * v[0] * v[0] + c5 * dl * dl) / m1 - (24.0 * b * v[1] * v[1] + c5 * dl * dl) / m2,
        ]
    }

    fn newton(&self, mut x: [f64; 3], w: f64) -> Result<[f64; 3]> {
        for _ in 0..50 {
            let f = self.residual(x, w);
            let dx = solve3(self.jacobian(x, w), f)?;
            for i in 0..3 {
                x[i] -= dx[i];
            }
            let size = x[0].abs().max(x[1].abs());
            if dx[0].abs().max(dx[1].abs()) <= 1e-14 * size && dx[2].abs() <= 1e-14 * x[2].abs().max(1.0) {
                return Ok(x);
            }
        }
        Err(Error::InconsistentGeometry(format!("equilibrium update did not settle at θ̇² = {w}")))
    }

    /// First and second derivatives of `(s₁, s₂, γ)` with respect to `w`.
    fn derivatives(&self, x: [f64; 3], w: f64) -> Result<([f64; 3], [f64; 3])> {
        let j = self.jacobian(x, w);
        let fw = [-self.masses[0] * x[0], -self.masses[1] * x[1], 0.0];
        let d1 = solve3(j, fw)?.map(|v| -v);
        let xx = self.curvature(x, d1);
        let rhs = [
            xx[0] - 2.0 * self.masses[0] * d1[0],
            xx[1] - 2.0 * self.masses[1] * d1[1],
            xx[2],
        ];
        let d2 = solve3(j, rhs)?.map(|v| -v);
        Ok((d1, d2))
    }
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Result<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    if d == 0.0 || !d.is_finite() {
        return Err(Error::InconsistentGeometry("singular equilibrium Jacobian".into()));
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for i in 0..3 {
            m[i][k] = b[i];
        }
        *o = det(&m) / d;
    }
    Ok(out)
}

/// Decoupled geometry sampled on a uniform time grid of a protocol.
#[derive(Debug, Clone)]
pub struct GeometryTrajectory {
    pub config: DoubleWellConfig,
    pub ions: IonPair,
    pub ansatz: RotationAnsatz,
    pub times: Vec<f64>,
    pub samples: Vec<SeparableGeometry>,
}

/// Solves the constraint at `samples + 1` equally spaced times, each
/// warm-started from the previous one.
pub fn geometry_trajectory(
    config: &DoubleWellConfig,
    ions: &IonPair,
    ansatz: &RotationAnsatz,
    samples: usize,
) -> Result<GeometryTrajectory> {
    if samples == 0 {
        return Err(Error::InvalidInput("need at least one geometry sample".into()));
    }
    let t_f = ansatz.t_f;
    let times: Vec<f64> = (0..=samples).map(|k| t_f * k as f64 / samples as f64).collect();
    let mut out: Vec<SeparableGeometry> = Vec::with_capacity(times.len());
    for &t in &times {
        let warm = out.last().map(|g| g.d);
        let g = solve_separation(config, ions, ansatz.eval(t).dot, warm)?;
        if let Some(prev) = out.last() {
            let jump_d = (g.d - prev.d).abs() / prev.d;
            let jump_g = (g.gamma - prev.gamma).abs() / prev.gamma.abs().max(g.gamma.abs());
            if jump_d > CONTINUITY_TOL || jump_g > CONTINUITY_TOL {
                return Err(Error::InconsistentGeometry(format!(
                    "geometry jumps at t = {t}: d {} → {}, γ {} → {}",
                    prev.d, g.d, prev.gamma, g.gamma
                )));
            }
        }
        out.push(g);
    }
    Ok(GeometryTrajectory { config: *config, ions: *ions, ansatz: *ansatz, times, samples: out })
}

impl GeometryTrajectory {
    /// Geometry at any `t`, refined from the nearest sample.
    pub fn at(&self, t: f64) -> Result<SeparableGeometry> {
        Ok(self.local(t)?.0)
    }

    fn local(&self, t: f64) -> Result<(SeparableGeometry, [f64; 3])> {
        let n = self.samples.len() - 1;
        let k = ((t / self.ansatz.t_f) * n as f64).round().clamp(0.0, n as f64) as usize;
        let seed = self.samples[k];
        let theta_dot = self.ansatz.eval(t).dot;
        let balance = Balance { config: &self.config, masses: self.ions.masses() };
        let p = seed.positions();
        let x = balance.newton([p[0], p[1], seed.gamma], theta_dot * theta_dot)?;
        let d = x[1] - x[0];
        let g = SeparableGeometry { theta_dot, d, s0: 0.5 * (x[0] + x[1]), a: seed.a, gamma: x[2] };
        Ok((g, x))
    }

    /// `d²sᵢ/dt²` at `t` by the chain rule through `θ̇²`.
    pub fn accelerations(&self, t: f64) -> Result<[f64; 2]> {
        let (_, x) = self.local(t)?;
        let e = self.ansatz.eval(t);
        let w = e.dot * e.dot;
        let w_dot = 2.0 * e.dot * e.ddot;
        let w_ddot = 2.0 * (e.ddot * e.ddot + e.dot * e.dddot);
        let balance = Balance { config: &self.config, masses: self.ions.masses() };
        let (d1, d2) = balance.derivatives(x, w)?;
        Ok([d2[0] * w_dot * w_dot + d1[0] * w_ddot, d2[1] * w_dot * w_dot + d1[1] * w_ddot])
    }

    /// `dsᵢ/dt` at `t`.
    pub fn velocities(&self, t: f64) -> Result<[f64; 2]> {
        let (_, x) = self.local(t)?;
        let e = self.ansatz.eval(t);
        let balance = Balance { config: &self.config, masses: self.ions.masses() };
        let (d1, _) = balance.derivatives(x, e.dot * e.dot)?;
        let w_dot = 2.0 * e.dot * e.ddot;
        Ok([d1[0] * w_dot, d1[1] * w_dot])
    }

    /// Largest decoupling defect and force residual over the samples.
    pub fn worst_sample(&self) -> (f64, f64) {
        self.samples.iter().fold((0.0f64, 0.0f64), |(dc, gr), g| {
            (dc.max(g.decoupling_defect(&self.config, &self.ions)), gr.max(g.gradient_residual(&self.config, &self.ions)))
        })
    }
}

/// `(ṗ₀₊, ṗ₀₋)` from the equilibrium accelerations: projections of the
/// mass-weighted motion on `(1, 1)/√2` and `(−1, 1)/√2`.
pub fn momentum_shift_rates(ions: &IonPair, accelerations: [f64; 2]) -> [f64; 2] {
    let q = [ions.m1.sqrt() * accelerations[0], ions.m2.sqrt() * accelerations[1]];
    [FRAC_1_SQRT_2 * (q[0] + q[1]), FRAC_1_SQRT_2 * (q[1] - q[0])]
}

/// Mode drives `(+, −)` along a geometry trajectory.
pub fn mode_drives_doublewell(trajectory: &GeometryTrajectory) -> Result<[ModeDrive; 2]> {
    let (cfg, ions) = (&trajectory.config, &trajectory.ions);
    for (t, g) in trajectory.times.iter().zip(&trajectory.samples) {
        let defect = g.decoupling_defect(cfg, ions);
        if !(defect <= DECOUPLING_TOL) {
            return Err(Error::InconsistentGeometry(format!("modes couple at t = {t}: |v11 − v22|/|v12| = {defect}")));
        }
    }
    let first = trajectory.samples[0].mode_frequencies_sq(cfg, ions);
    let shared = Arc::new(trajectory.clone());
    let drive = |mode: usize| {
        let (tw, tp) = (shared.clone(), shared.clone());
        ModeDrive {
            omega_sq: Arc::new(move |t| match tw.at(t) {
                Ok(g) => g.mode_frequencies_sq(&tw.config, &tw.ions)[mode],
                Err(_) => f64::NAN,
            }),
            p0_dot: Arc::new(move |t| match tp.accelerations(t) {
                Ok(acc) => momentum_shift_rates(&tp.ions, acc)[mode],
                Err(_) => f64::NAN,
            }),
            omega0_sq: first[mode],
        }
    };
    Ok([drive(0), drive(1)])
}

/// Normal-mode excitation of one protocol relative to the initial energy.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleWellObjective {
    /// `E(t_f) − E(0)` with `E = E''₀₊ + E''₀₋`.
    pub excess: f64,
    pub initial_energy: f64,
    pub energies: [f64; 2],
}

impl DoubleWellObjective {
    pub fn relative(&self) -> f64 {
        self.excess / self.initial_energy
    }
}

pub fn doublewell_objective(
    config: &DoubleWellConfig,
    ions: &IonPair,
    ansatz: &RotationAnsatz,
    samples: usize,
    opts: &DesignOptions,
) -> Result<DoubleWellObjective> {
    let traj = geometry_trajectory(config, ions, ansatz, samples)?;
    let drives = mode_drives_doublewell(&traj)?;
    let o = modes_objective(&drives, ansatz.t_f, &opts.ode)?;
    if !o.total.is_finite() {
        return Err(Error::InconsistentGeometry("mode drive left the solvable geometry".into()));
    }
    let initial_energy = 0.5 * hbar() * (drives[0].omega0() + drives[1].omega0());
    Ok(DoubleWellObjective { excess: o.total, initial_energy, energies: [o.energies[0], o.energies[1]] })
}

/// One row of the double-well protocol time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleWellSample {
    pub t: f64,
    pub d: f64,
    pub s0: f64,
    pub gamma: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// `(E(t) − E(0)) / E(0)` of the normal modes.
    pub relative_excitation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleWellDesign {
    /// Objective fields are `ΔE` (internal units) and `ΔE/E₀`.
    pub result: DesignResult,
    pub initial_energy: f64,
    pub series: Vec<DoubleWellSample>,
}

/// Time series of geometry, mode frequencies and instantaneous excitation.
pub fn doublewell_series(
    config: &DoubleWellConfig,
    ions: &IonPair,
    ansatz: &RotationAnsatz,
    samples: usize,
    opts: &DesignOptions,
) -> Result<Vec<DoubleWellSample>> {
    let traj = geometry_trajectory(config, ions, ansatz, samples)?;
    let drives = mode_drives_doublewell(&traj)?;
    let aux = [solve_auxiliary(&drives[0], ansatz.t_f, &opts.ode)?, solve_auxiliary(&drives[1], ansatz.t_f, &opts.ode)?];
    let e0 = 0.5 * hbar() * (drives[0].omega0() + drives[1].omega0());
    let mut out = Vec::with_capacity(traj.times.len());
    for &t in &traj.times {
        let g = traj.at(t)?;
        let w = g.mode_frequencies_sq(config, ions);
        let e: f64 = (0..2)
            .map(|k| mode_energy(0, &aux[k].state_at(t), drives[k].omega0_sq, w[k], (drives[k].p0_dot)(t)))
            .sum();
        out.push(DoubleWellSample {
            t,
            d: g.d,
            s0: g.s0,
            gamma: g.gamma,
            omega_plus: w[0].sqrt(),
            omega_minus: w[1].sqrt(),
            relative_excitation: (e - e0) / e0,
        });
    }
    Ok(out)
}

/// Optimises the free coefficients so the final normal-mode excitation of
/// the double-well protocol is minimal. The geometry is re-solved for every
/// trial protocol.
pub fn design_doublewell(
    ions: &IonPair,
    config: &DoubleWellConfig,
    t_f: f64,
    theta_f: f64,
    n_free: usize,
    opts: &DesignOptions,
) -> Result<DoubleWellDesign> {
    if ions.is_equal_mass() {
        return Err(Error::DegenerateConstraint);
    }
    let base = RotationAnsatz::new(theta_f, t_f, &vec![0.0; n_free])?;
    let evaluate = |x: &[f64]| -> f64 {
        match base.with_free(x).and_then(|a| doublewell_objective(config, ions, &a, DEFAULT_SAMPLES, opts)) {
            Ok(o) => o.relative(),
            Err(err) => {
                log::debug!("double-well objective rejected {x:?}: {err}");
                f64::INFINITY
            }
        }
    };
    let nm = nelder_mead::minimize(evaluate, &opts.start(n_free)?, &opts.nelder_mead(1e-3, 1.0));
    if !nm.converged {
        log::warn!("double-well design hit the iteration cap ({} iterations) at t_f = {t_f}", nm.iterations);
    }
    if !nm.f.is_finite() {
        let start = base.with_free(&opts.start(n_free)?)?;
        doublewell_objective(config, ions, &start, DEFAULT_SAMPLES, opts)?;
        return Err(Error::InfeasibleConfiguration(format!(
            "no trial protocol admits a decoupled geometry at t_f = {t_f}"
        )));
    }
    let ansatz = base.with_free(&nm.x)?;
    let best = doublewell_objective(config, ions, &ansatz, DEFAULT_SAMPLES, opts)?;
    let series = doublewell_series(config, ions, &ansatz, DEFAULT_SAMPLES, opts)?;
    Ok(DoubleWellDesign {
        result: DesignResult {
            ansatz,
            coefficients: ansatz.coefficients(),
            objective: best.excess,
            objective_quanta: best.relative(),
            mode_energies_final: best.energies.to_vec(),
            trace: nm.trace,
            iterations: nm.iterations,
            evaluations: nm.evaluations,
            converged: nm.converged,
        },
        initial_energy: best.initial_energy,
        series,
    })
}
