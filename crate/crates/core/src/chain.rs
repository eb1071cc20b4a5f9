//! Mechanics of a two-ion chain on a rotating line: effective springs,
//! equilibrium positions, the mass-weighted Hessian and its normal modes.
//!
//! Ion 1 always sits at the smaller coordinate (`s1 < s2`). The potential in
//! the rotating frame of a rigid harmonic trap is
//! `V = u1 s1²/2 + u2 s2²/2 + Cc/(s2 - s1)` with `u_i = k - m_i θ̇²`.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{self, CONSTANTS};

pub type Matrix2 = [[f64; 2]; 2];

/// Relative size of `|v11 - v22|` against `|v12|` below which the Hessian
/// diagonal is treated as degenerate.
pub const EQUAL_DIAGONAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonPair {
    pub m1: f64,
    pub m2: f64,
}

impl IonPair {
    pub fn new(m1: f64, m2: f64) -> Result<Self> {
        if !(m1 > 0.0 && m2 > 0.0) || !m1.is_finite() || !m2.is_finite() {
            return Err(Error::InvalidInput(format!("ion masses must be positive, got {m1} and {m2}")));
        }
        Ok(Self { m1, m2 })
    }

    pub fn calcium_pair() -> Self {
        Self { m1: 40.0, m2: 40.0 }
    }

    pub fn calcium_beryllium() -> Self {
        Self { m1: 40.0, m2: 9.0 }
    }

    pub fn masses(&self) -> [f64; 2] {
        [self.m1, self.m2]
    }

    pub fn is_equal_mass(&self) -> bool {
        self.m1 == self.m2
    }

    /// Mirror image: ion 2 becomes ion 1.
    pub fn swapped(&self) -> Self {
        Self { m1: self.m2, m2: self.m1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidHarmonicTrap {
    pub k: f64,
}

impl RigidHarmonicTrap {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::InvalidInput(format!("spring constant must be positive, got {k}")));
        }
        Ok(Self { k })
    }

    /// Trap whose frequency for an ion of `mass` is `omega`.
    pub fn from_frequency(mass: f64, omega: f64) -> Result<Self> {
        Self::new(mass * omega * omega)
    }

    pub fn frequency(&self, mass: f64) -> f64 {
        (self.k / mass).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveSprings {
    pub u1: f64,
    pub u2: f64,
}

impl EffectiveSprings {
    pub fn is_confining(&self) -> bool {
        self.u1 > 0.0 && self.u2 > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainGeometry {
    pub s1_eq: f64,
    pub s2_eq: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeDecomposition {
    /// Tilt angle of the potential in mass-weighted configuration space.
    pub mu: f64,
    pub omega_plus_sq: f64,
    pub omega_minus_sq: f64,
    pub hessian: Matrix2,
    pub p0_plus: f64,
    pub p0_minus: f64,
}

/// `u_i = k - m_i θ̇²`.
pub fn effective_springs(trap: &RigidHarmonicTrap, ions: &IonPair, theta_dot: f64) -> EffectiveSprings {
    let w = theta_dot * theta_dot;
    EffectiveSprings { u1: trap.k - ions.m1 * w, u2: trap.k - ions.m2 * w }
}

/// Closed-form equilibrium of `u1 s1²/2 + u2 s2²/2 + Cc/(s2 - s1)`.
pub fn equilibrium_harmonic(springs: &EffectiveSprings) -> Result<ChainGeometry> {
    let EffectiveSprings { u1, u2 } = *springs;
    if !springs.is_confining() {
        return Err(Error::EquilibriumUndefined(format!(
            "non-confining effective springs u1 = {u1}, u2 = {u2}"
        )));
    }
    let cc = units::coulomb_coupling();
    let d = (cc * (u1 + u2) / (u1 * u2)).cbrt();
    let s1 = -(cc * u2 * u2 / (u1 * (u1 + u2).powi(2))).cbrt();
    let s2 = (cc * u1 * u1 / (u2 * (u1 + u2).powi(2))).cbrt();
    Ok(ChainGeometry { s1_eq: s1, s2_eq: s2, d })
}

/// Potential energy of the rotating rigid harmonic trap.
pub fn harmonic_potential(springs: &EffectiveSprings, s1: f64, s2: f64) -> f64 {
    0.5 * springs.u1 * s1 * s1 + 0.5 * springs.u2 * s2 * s2 + units::coulomb_coupling() / (s2 - s1)
}

pub fn harmonic_gradient(springs: &EffectiveSprings, s1: f64, s2: f64) -> [f64; 2] {
    let f = units::coulomb_coupling() / (s2 - s1).powi(2);
    [springs.u1 * s1 + f, springs.u2 * s2 - f]
}

/// Mass-weighted Hessian `v_ij = (∂²V/∂s_i∂s_j)/√(m_i m_j)` at the equilibrium.
pub fn hessian_harmonic(springs: &EffectiveSprings, ions: &IonPair, geometry: &ChainGeometry) -> Result<Matrix2> {
    coulomb_hessian(ions, geometry.d, [springs.u1, springs.u2])
}

/// Mass-weighted Hessian of an external potential with local curvatures
/// `curvature[i]` plus the Coulomb term at separation `d`.
pub fn coulomb_hessian(ions: &IonPair, d: f64, curvature: [f64; 2]) -> Result<Matrix2> {
    if !(d > 0.0) {
        return Err(Error::DegenerateGeometry(format!("ion separation must be positive, got {d}")));
    }
    let c = 2.0 * units::coulomb_coupling() / d.powi(3);
    let off = -c / (ions.m1 * ions.m2).sqrt();
    Ok([[(c + curvature[0]) / ions.m1, off], [off, (c + curvature[1]) / ions.m2]])
}

/// Tilt angle on the principal branch `2μ ∈ (-π/2, π/2]`; a degenerate
/// diagonal gives `μ = -π/4`.
pub fn tilt_angle(v: &Matrix2) -> f64 {
    let diff = v[0][0] - v[1][1];
    if diff.abs() <= EQUAL_DIAGONAL_TOL * v[0][1].abs() {
        return -FRAC_PI_4;
    }
    0.5 * (2.0 * v[0][1] / diff).atan()
}

/// Shifts `mu` by a multiple of π/2 to land closest to `previous`.
pub fn unwrap_tilt(previous: f64, mu: f64) -> f64 {
    let q = std::f64::consts::FRAC_PI_2;
    mu + ((previous - mu) / q).round() * q
}

/// Rotates `hessian` onto its normal modes and projects the equilibrium
/// velocities `ds_eq_dt` (lab coordinates) onto them.
pub fn mode_decomposition(hessian: &Matrix2, ions: &IonPair, ds_eq_dt: [f64; 2]) -> ModeDecomposition {
    let mu = tilt_angle(hessian);
    decompose_at(hessian, ions, ds_eq_dt, mu)
}

/// As [`mode_decomposition`] with an externally fixed tilt angle.
pub fn decompose_at(hessian: &Matrix2, ions: &IonPair, ds_eq_dt: [f64; 2], mu: f64) -> ModeDecomposition {
    let [[v11, v12], [_, v22]] = *hessian;
    let (s, c) = mu.sin_cos();
    let s2mu = (2.0 * mu).sin();
    let q1 = ions.m1.sqrt() * ds_eq_dt[0];
    let q2 = ions.m2.sqrt() * ds_eq_dt[1];
    ModeDecomposition {
        mu,
        omega_plus_sq: v11 * c * c + v22 * s * s + v12 * s2mu,
        omega_minus_sq: v11 * s * s + v22 * c * c - v12 * s2mu,
        hessian: *hessian,
        p0_plus: q1 * c + q2 * s,
        p0_minus: -q1 * s + q2 * c,
    }
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn symmetric_eigenvalues(v: &Matrix2) -> [f64; 2] {
    let mean = 0.5 * (v[0][0] + v[1][1]);
    let half = 0.5 * (v[0][0] - v[1][1]);
    let r = half.hypot(v[0][1]);
    [mean - r, mean + r]
}

/// Rates `d s_i^(0)/dt` of the harmonic equilibrium, by the chain rule
/// through `θ̇` and `θ̈`.
pub fn equilibrium_rates(trap: &RigidHarmonicTrap, ions: &IonPair, theta_dot: f64, theta_ddot: f64) -> Result<[f64; 2]> {
    let springs = effective_springs(trap, ions, theta_dot);
    let geo = equilibrium_harmonic(&springs)?;
    let wdot = 2.0 * theta_dot * theta_ddot;
    let (u1, u2) = (springs.u1, springs.u2);
    let (du1, du2) = (-ions.m1 * wdot, -ions.m2 * wdot);
    let dlog_d = ((du1 + du2) / (u1 + u2) - du1 / u1 - du2 / u2) / 3.0;
    Ok([geo.s1_eq * (-du1 / u1 - 2.0 * dlog_d), geo.s2_eq * (-du2 / u2 - 2.0 * dlog_d)])
}

/// Tilt angle of the rigid harmonic trap for each rotation speed.
pub fn separability_drift(trap: &RigidHarmonicTrap, ions: &IonPair, theta_dot_samples: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(theta_dot_samples.len());
    let mut prev: Option<f64> = None;
    for &w in theta_dot_samples {
        let springs = effective_springs(trap, ions, w);
        let geo = equilibrium_harmonic(&springs)?;
        let v = hessian_harmonic(&springs, ions, &geo)?;
        let mut mu = tilt_angle(&v);
        if let Some(p) = prev {
            mu = unwrap_tilt(p, mu);
        }
        prev = Some(mu);
        out.push(mu);
    }
    Ok(out)
}

/// Ratio of the magnetic to the Coulomb force between the two ions,
/// `r²θ̇²/(4c²)`, for separation `r` in metres and rotation speed in rad/s.
pub fn magnetic_electric_ratio(r: f64, theta_dot: f64) -> f64 {
    let c = CONSTANTS.speed_of_light;
    (r * theta_dot).powi(2) / (4.0 * c * c)
}

/// Newton iteration on `∇V = 0` with step halving whenever the gradient norm
/// does not decrease. `grad_hess` returns the plain (not mass-weighted)
/// gradient and Hessian.
pub fn equilibrium_numeric<F>(mut grad_hess: F, guess: [f64; 2], tol: f64) -> Result<[f64; 2]>
where
    F: FnMut([f64; 2]) -> ([f64; 2], Matrix2),
{
    let mut x = guess;
    let (mut g, mut h) = grad_hess(x);
    for _ in 0..200 {
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::EquilibriumUndefined("singular Hessian in Newton solve".into()));
        }
        let dx = [
            -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
            -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
        ];
        let norm0 = g[0].hypot(g[1]);
        let mut lambda = 1.0;
        loop {
            let trial = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            let (gt, ht) = grad_hess(trial);
            if (gt[0].hypot(gt[1]) < norm0 && trial[1] > trial[0]) || lambda < 1e-12 {
                x = trial;
                g = gt;
                h = ht;
                break;
            }
            lambda *= 0.5;
        }
        let step = lambda * dx[0].hypot(dx[1]);
        if step <= tol * x[0].abs().max(x[1].abs()).max(1.0) {
            return Ok(x);
        }
    }
    Err(Error::EquilibriumUndefined("Newton solve did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{angular_from_mhz, coulomb_coupling};
    use approx::assert_relative_eq;

    fn ca_trap() -> RigidHarmonicTrap {
        RigidHarmonicTrap::from_frequency(40.0, angular_from_mhz(1.41)).unwrap()
    }

    #[test]
    fn springs_at_rest_and_in_rotation() {
        let trap = ca_trap();
        let s = effective_springs(&trap, &IonPair::calcium_beryllium(), 0.0);
        assert_eq!((s.u1, s.u2), (trap.k, trap.k));

        let w1 = angular_from_mhz(1.41);
        let s = effective_springs(&trap, &IonPair::calcium_beryllium(), 0.5 * w1);
        assert_relative_eq!(s.u1, 0.75 * trap.k, max_relative = 1e-14);
        assert_relative_eq!(s.u2, trap.k * (1.0 - 9.0 / 40.0 * 0.25), max_relative = 1e-14);

        let s = effective_springs(&trap, &IonPair::calcium_pair(), w1);
        assert!(s.u1.abs() < 1e-9 * trap.k && s.u2.abs() < 1e-9 * trap.k);
    }

    #[test]
    fn equal_springs_are_symmetric() {
        let u = 1234.5;
        let g = equilibrium_harmonic(&EffectiveSprings { u1: u, u2: u }).unwrap();
        let d = (2.0 * coulomb_coupling() / u).cbrt();
        assert_relative_eq!(g.d, d, max_relative = 1e-14);
        assert_relative_eq!(g.s1_eq, -d / 2.0, max_relative = 1e-14);
        assert_relative_eq!(g.s2_eq, d / 2.0, max_relative = 1e-14);
    }

    /// Golden-section search of V along the stretch direction (the centre of
    /// mass sits at 0 for equal ions) gives an independent separation.
    #[test]
    fn calcium_separation_matches_direct_minimisation() {
        let trap = ca_trap();
        let springs = effective_springs(&trap, &IonPair::calcium_pair(), 0.0);
        let f = |d: f64| harmonic_potential(&springs, -d / 2.0, d / 2.0);
        let (mut a, mut b) = (1.0, 10.0);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = b - g * (b - a);
            let e = a + g * (b - a);
            if f(c) < f(e) {
                b = e;
            } else {
                a = c;
            }
        }
        let d_min = 0.5 * (a + b);
        assert!((d_min - 4.46).abs() < 0.01, "d = {d_min}");
        let geo = equilibrium_harmonic(&springs).unwrap();
        assert_relative_eq!(geo.d, d_min, max_relative = 1e-6);

        let mixed = equilibrium_harmonic(&effective_springs(&trap, &IonPair::calcium_beryllium(), 0.0)).unwrap();
        assert_eq!(mixed.d, geo.d);
    }

    #[test]
    fn non_confining_springs_are_rejected() {
        let err = equilibrium_harmonic(&EffectiveSprings { u1: -1.0, u2: 2.0 });
        assert!(matches!(err, Err(Error::EquilibriumUndefined(_))));
    }

    #[test]
    fn gradient_vanishes_at_equilibrium() {
        let trap = ca_trap();
        for w in [0.0, 2.0, 5.0] {
            let springs = effective_springs(&trap, &IonPair::calcium_beryllium(), w);
            let g = equilibrium_harmonic(&springs).unwrap();
            let scale = coulomb_coupling() / (g.d * g.d);
            let grad = harmonic_gradient(&springs, g.s1_eq, g.s2_eq);
            assert!(grad[0].abs() < 1e-10 * scale && grad[1].abs() < 1e-10 * scale, "{grad:?}");
            assert!(g.s1_eq < g.s2_eq);
            assert_relative_eq!(g.d, g.s2_eq - g.s1_eq, max_relative = 1e-13);
        }
    }

    #[test]
    fn equal_ion_mode_frequencies() {
        let trap = ca_trap();
        let ions = IonPair::calcium_pair();
        let springs = effective_springs(&trap, &ions, 0.0);
        let geo = equilibrium_harmonic(&springs).unwrap();
        let v = hessian_harmonic(&springs, &ions, &geo).unwrap();
        assert_eq!(v[0][0], v[1][1]);
        assert_relative_eq!(v[0][1], -2.0 * coulomb_coupling() / (geo.d.powi(3) * 40.0), max_relative = 1e-14);
        let w2 = trap.k / 40.0;
        let ev = symmetric_eigenvalues(&v);
        assert_relative_eq!(ev[0], w2, max_relative = 1e-12);
        assert_relative_eq!(ev[1], 3.0 * w2, max_relative = 1e-12);
        let modes = mode_decomposition(&v, &ions, [0.0, 0.0]);
        assert_eq!(modes.mu, -FRAC_PI_4);
        assert_relative_eq!(modes.omega_plus_sq, 3.0 * w2, max_relative = 1e-12);
        assert_relative_eq!(modes.omega_minus_sq, w2, max_relative = 1e-12);
    }

    /// Central second differences of V at the equilibrium.
    #[test]
    fn hessian_matches_finite_differences() {
        let trap = ca_trap();
        let ions = IonPair::calcium_beryllium();
        let springs = effective_springs(&trap, &ions, 0.0);
        let g = equilibrium_harmonic(&springs).unwrap();
        let v = hessian_harmonic(&springs, &ions, &g).unwrap();
        let h = 1e-3;
        let f = |a: f64, b: f64| harmonic_potential(&springs, g.s1_eq + a, g.s2_eq + b);
        let d11 = (f(h, 0.0) - 2.0 * f(0.0, 0.0) + f(-h, 0.0)) / (h * h);
        let d22 = (f(0.0, h) - 2.0 * f(0.0, 0.0) + f(0.0, -h)) / (h * h);
        let d12 = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
        let m = ions.masses();
        assert_relative_eq!(v[0][0], d11 / m[0], max_relative = 1e-6);
        assert_relative_eq!(v[1][1], d22 / m[1], max_relative = 1e-6);
        assert_relative_eq!(v[0][1], d12 / (m[0] * m[1]).sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn calcium_beryllium_tilt() {
        let trap = ca_trap();
        let ions = IonPair::calcium_beryllium();
        let springs = effective_springs(&trap, &ions, 0.0);
        let g = equilibrium_harmonic(&springs).unwrap();
        let v = hessian_harmonic(&springs, &ions, &g).unwrap();
        let modes = mode_decomposition(&v, &ions, [0.0, 0.0]);
        let expected = 0.5 * (360f64.sqrt() / 31.0).atan();
        assert_relative_eq!((2.0 * modes.mu).tan(), 360f64.sqrt() / 31.0, max_relative = 1e-12);
        assert_relative_eq!(modes.mu, expected, max_relative = 1e-12);
        assert!((modes.mu - 0.2746).abs() < 1e-4);
        // invariants of the rotation
        let ev = symmetric_eigenvalues(&v);
        let tr = v[0][0] + v[1][1];
        let det = v[0][0] * v[1][1] - v[0][1] * v[1][0];
        assert_relative_eq!(modes.omega_plus_sq + modes.omega_minus_sq, tr, max_relative = 1e-12);
        assert_relative_eq!(modes.omega_plus_sq * modes.omega_minus_sq, det, max_relative = 1e-12);
        let mut got = [modes.omega_minus_sq, modes.omega_plus_sq];
        got.sort_by(f64::total_cmp);
        assert_relative_eq!(got[0], ev[0], max_relative = 1e-12);
        assert_relative_eq!(got[1], ev[1], max_relative = 1e-12);
    }

    #[test]
    fn equal_ion_momentum_shifts() {
        let ions = IonPair::calcium_pair();
        let v = [[2.0, -1.0], [-1.0, 2.0]];
        let xdot = 0.37;
        let modes = mode_decomposition(&v, &ions, [-xdot / 2.0, xdot / 2.0]);
        assert_relative_eq!(modes.p0_plus, -(20f64).sqrt() * xdot, max_relative = 1e-14);
        assert!(modes.p0_minus.abs() < 1e-15);
    }

    #[test]
    fn equilibrium_rates_match_finite_differences() {
        let trap = ca_trap();
        let ions = IonPair::calcium_beryllium();
        // θ̇(t) = a t + b t² locally
        let (a, b) = (1.3, 0.7);
        let t = 0.9;
        let pos = |t: f64| {
            let g = equilibrium_harmonic(&effective_springs(&trap, &ions, a * t + b * t * t)).unwrap();
            [g.s1_eq, g.s2_eq]
        };
        let h = 1e-5;
        let rates = equilibrium_rates(&trap, &ions, a * t + b * t * t, a + 2.0 * b * t).unwrap();
        for i in 0..2 {
            let fd = (pos(t + h)[i] - pos(t - h)[i]) / (2.0 * h);
            assert_relative_eq!(rates[i], fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn separability_drift_cases() {
        let trap = ca_trap();
        let w1 = angular_from_mhz(1.41);
        let mus = separability_drift(&trap, &IonPair::calcium_pair(), &[0.0, 1.0, 3.0, 0.5 * w1]).unwrap();
        assert!(mus.iter().all(|&m| m == -FRAC_PI_4));

        let mus = separability_drift(&trap, &IonPair::calcium_beryllium(), &[0.0, 0.3 * w1]).unwrap();
        assert!((mus[0] - mus[1]).abs() > 1e-3, "{mus:?}");

        // θ̇² = a k keeps d³k, and with it μ, fixed
        let a = 0.3 * w1 * w1 / trap.k;
        let ions = IonPair::calcium_beryllium();
        let reference = separability_drift(&trap, &ions, &[(a * trap.k).sqrt()]).unwrap()[0];
        for scale in [0.5, 2.0, 3.7] {
            let t = RigidHarmonicTrap::new(scale * trap.k).unwrap();
            let mu = separability_drift(&t, &ions, &[(a * t.k).sqrt()]).unwrap()[0];
            assert_relative_eq!(mu, reference, max_relative = 1e-12);
        }
    }

    #[test]
    fn magnetic_ratio() {
        let r = magnetic_electric_ratio(5.5e-6, 5e6);
        let c = 299_792_458.0_f64;
        assert_relative_eq!(r, (5.5e-6_f64 * 5e6).powi(2) / (4.0 * c * c), max_relative = 1e-12);
        assert!((r - 2.1e-15).abs() < 0.01e-15);
        assert_eq!(magnetic_electric_ratio(3e-6, 0.0), 0.0);
        assert_relative_eq!(magnetic_electric_ratio(2e-6, 3e6), magnetic_electric_ratio(4e-6, 1.5e6), max_relative = 1e-15);
    }

    #[test]
    fn unwrap_keeps_continuity() {
        let q = std::f64::consts::FRAC_PI_2;
        assert_relative_eq!(unwrap_tilt(0.7, 0.7 - q), 0.7, max_relative = 1e-15);
        assert_relative_eq!(unwrap_tilt(-0.78, 0.78), 0.78 - q, max_relative = 1e-15);
    }

    #[test]
    fn numeric_equilibrium_agrees_with_closed_form() {
        let trap = ca_trap();
        let ions = IonPair::calcium_beryllium();
        let springs = effective_springs(&trap, &ions, 3.0);
        let cc = coulomb_coupling();
        let x = equilibrium_numeric(
            |x| {
                let d = x[1] - x[0];
                let c = 2.0 * cc / d.powi(3);
                (harmonic_gradient(&springs, x[0], x[1]), [[springs.u1 + c, -c], [-c, springs.u2 + c]])
            },
            [-2.0, 2.5],
            1e-13,
        )
        .unwrap();
        let g = equilibrium_harmonic(&springs).unwrap();
        assert_relative_eq!(x[0], g.s1_eq, max_relative = 1e-12);
        assert_relative_eq!(x[1], g.s2_eq, max_relative = 1e-12);
    }
}
