use std::sync::Arc;

use crate::ansatz::RotationAnsatz;
use crate::chain::{self, ChainGeometry, IonPair, Matrix2, RigidHarmonicTrap};
use crate::error::{Error, Result};
use crate::sta::DriveFn;
use crate::units::coulomb_coupling;

/// External confinement in the rotating frame.
#[derive(Clone)]
pub enum TrapKind {
    /// Isotropic rigid trap with spring constant `k` for both ions.
    RigidHarmonic { k: f64 },
    /// `γ(t)(s₁+s₂) + ½κᵢsᵢ² + β(s₁⁴+s₂⁴)` with static springs `κᵢ`.
    TiltedDoubleWell { spring: [f64; 2], beta: f64, gamma: DriveFn },
}

impl std::fmt::Debug for TrapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrapKind::RigidHarmonic { k } => f.debug_struct("RigidHarmonic").field("k", k).finish(),
            TrapKind::TiltedDoubleWell { spring, beta, .. } => f
                .debug_struct("TiltedDoubleWell")
                .field("spring", spring)
                .field("beta", beta)
                .finish_non_exhaustive(),
        }
    }
}

/// Two-ion potential along the rotating trap axis, including the
/// centrifugal term `−½mᵢθ̇²sᵢ²`.
#[derive(Clone)]
pub struct PotentialModel {
    pub ions: IonPair,
    pub kind: TrapKind,
    pub theta_dot: DriveFn,
    /// Minimum separation used in the Coulomb denominator.
    pub clamp: f64,
    pub coulomb: f64,
    /// Starting point for the equilibrium search at `t = 0`.
    pub equilibrium_guess: [f64; 2],
}

impl std::fmt::Debug for PotentialModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PotentialModel")
            .field("ions", &self.ions)
            .field("kind", &self.kind)
            .field("clamp", &self.clamp)
            .field("equilibrium_guess", &self.equilibrium_guess)
            .finish_non_exhaustive()
    }
}

/// Frozen potential parameters at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapState {
    pub u: [f64; 2],
    pub beta: f64,
    pub gamma: f64,
    pub coulomb: f64,
    pub clamp: f64,
}

fn no_rotation() -> DriveFn {
    Arc::new(|_| 0.0)
}

impl PotentialModel {
    pub fn rigid_harmonic(ions: IonPair, trap: RigidHarmonicTrap, protocol: Option<&RotationAnsatz>) -> Result<Self> {
        let springs = chain::effective_springs(&trap, &ions, 0.0);
        let geometry = chain::equilibrium_harmonic(&springs)?;
        let theta_dot = match protocol {
            Some(a) => angle_rate(a),
            None => no_rotation(),
        };
        Ok(Self {
            ions,
            kind: TrapKind::RigidHarmonic { k: trap.k },
            theta_dot,
            clamp: geometry.d / 50.0,
            coulomb: coulomb_coupling(),
            equilibrium_guess: [geometry.s1_eq, geometry.s2_eq],
        })
    }

    pub fn tilted_double_well(
        ions: IonPair,
        spring: [f64; 2],
        beta: f64,
        gamma: DriveFn,
        theta_dot: DriveFn,
        equilibrium_guess: ChainGeometry,
    ) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidInput(format!("quartic coefficient must be positive, got {beta}")));
        }
        if !(equilibrium_guess.d > 0.0) {
            return Err(Error::InvalidInput("ions must be ordered s₁ < s₂".into()));
        }
        Ok(Self {
            ions,
            kind: TrapKind::TiltedDoubleWell { spring, beta, gamma },
            theta_dot,
            clamp: equilibrium_guess.d / 50.0,
            coulomb: coulomb_coupling(),
            equilibrium_guess: [equilibrium_guess.s1_eq, equilibrium_guess.s2_eq],
        })
    }

    /// Same trap driven by a different rotation protocol. Only meaningful
    /// for the rigid trap, whose other parameters do not depend on it.
    pub fn with_protocol(&self, protocol: &RotationAnsatz) -> Self {
        Self { theta_dot: angle_rate(protocol), ..self.clone() }
    }

    pub fn static_copy(&self) -> Self {
        let mut out = self.clone();
        out.theta_dot = no_rotation();
        if let TrapKind::TiltedDoubleWell { gamma, .. } = &self.kind {
            let g0 = gamma(0.0);
            if let TrapKind::TiltedDoubleWell { gamma, .. } = &mut out.kind {
                *gamma = Arc::new(move |_| g0);
            }
        }
        out
    }

    fn state_with(&self, t: f64, theta_dot: f64) -> TrapState {
        let m = self.ions.masses();
        let w2 = theta_dot * theta_dot;
        let (base, beta, gamma) = match &self.kind {
            TrapKind::RigidHarmonic { k } => ([*k, *k], 0.0, 0.0),
            TrapKind::TiltedDoubleWell { spring, beta, gamma } => (*spring, *beta, gamma(t)),
        };
        TrapState {
            u: [base[0] - m[0] * w2, base[1] - m[1] * w2],
            beta,
            gamma,
            coulomb: self.coulomb,
            clamp: self.clamp,
        }
    }

    pub fn state_at(&self, t: f64) -> TrapState {
        self.state_with(t, (self.theta_dot)(t))
    }

    /// Parameters at `t` with the rotation switched off.
    pub fn lab_state_at(&self, t: f64) -> TrapState {
        self.state_with(t, 0.0)
    }

    pub fn potential_at(&self, s1: f64, s2: f64, t: f64) -> f64 {
        self.state_at(t).potential([s1, s2])
    }
}

fn angle_rate(a: &RotationAnsatz) -> DriveFn {
    let a = *a;
    Arc::new(move |t| a.eval(t).dot)
}

impl TrapState {
    pub fn potential(&self, s: [f64; 2]) -> f64 {
        let mut v = self.coulomb / (s[1] - s[0]).max(self.clamp);
        for i in 0..2 {
            let x2 = s[i] * s[i];
            v += 0.5 * self.u[i] * x2 + self.gamma * s[i] + self.beta * x2 * x2;
        }
        v
    }

    pub fn gradient(&self, s: [f64; 2]) -> [f64; 2] {
        let r = s[1] - s[0];
        let f = if r > self.clamp { self.coulomb / (r * r) } else { 0.0 };
        let ext = |i: usize| self.u[i] * s[i] + self.gamma + 4.0 * self.beta * s[i].powi(3);
        [ext(0) + f, ext(1) - f]
    }

    pub fn hessian(&self, s: [f64; 2]) -> Matrix2 {
        let r = s[1] - s[0];
        let c = if r > self.clamp { 2.0 * self.coulomb / r.powi(3) } else { 0.0 };
        let diag = |i: usize| self.u[i] + 12.0 * self.beta * s[i] * s[i] + c;
        [[diag(0), -c], [-c, diag(1)]]
    }

    /// `V(x+y) − V(x) − ∇V(x)·y` evaluated without cancellation. The
    /// clamp applies to the full separation `x₂−x₁+y₂−y₁`.
    pub fn remainder(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        let mut w = 0.0;
        for i in 0..2 {
            let yi2 = y[i] * y[i];
            w += 0.5 * self.u[i] * yi2 + self.beta * yi2 * (6.0 * x[i] * x[i] + 4.0 * x[i] * y[i] + yi2);
        }
        w + self.coulomb_remainder(x[1] - x[0], y[1] - y[0])
    }

    /// Coulomb part of [`TrapState::remainder`] for base separation `r0`
    /// and separation change `delta`.
    pub fn coulomb_remainder(&self, r0: f64, delta: f64) -> f64 {
        let r = r0 + delta;
        if r >= self.clamp {
            self.coulomb * delta * delta / (r0 * r0 * r)
        } else {
            self.coulomb * (1.0 / self.clamp - 1.0 / r0 + delta / (r0 * r0))
        }
    }

    /// `V(b) − V(a)` without cancellation (unclamped separations).
    pub fn difference(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let mut dv = 0.0;
        for i in 0..2 {
            let (sum, diff) = (a[i] + b[i], b[i] - a[i]);
            dv += diff * (0.5 * self.u[i] * sum + self.gamma + self.beta * sum * (a[i] * a[i] + b[i] * b[i]));
        }
        let (ra, rb) = (a[1] - a[0], b[1] - b[0]);
        dv + self.coulomb * (ra - rb) / (ra * rb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::angular_from_mhz;

    fn ca_model() -> PotentialModel {
        let ions = IonPair::calcium_pair();
        let trap = RigidHarmonicTrap::from_frequency(ions.m1, angular_from_mhz(1.41)).unwrap();
        PotentialModel::rigid_harmonic(ions, trap, None).unwrap()
    }

    #[test]
    fn symmetric_configuration_value() {
        let m = ca_model();
        let k = match m.kind {
            TrapKind::RigidHarmonic { k } => k,
            _ => unreachable!(),
        };
        let d = 4.0;
        let v = m.potential_at(-d / 2.0, d / 2.0, 0.0);
        assert!((v - (k * d * d / 4.0 + m.coulomb / d)).abs() < 1e-9 * v);
    }

    #[test]
    fn equilibrium_gradient_vanishes() {
        let m = ca_model();
        let g = m.state_at(0.0).gradient(m.equilibrium_guess);
        assert!(g[0].abs() < 1e-10 && g[1].abs() < 1e-10, "{g:?}");
    }

    #[test]
    fn clamp_keeps_coalescence_finite() {
        let m = ca_model();
        let st = m.state_at(0.0);
        let v = st.potential([0.1, 0.1 + 1e-300]);
        assert!((v - (m.coulomb / m.clamp + 0.5 * st.u[0] * 0.01 + 0.5 * st.u[1] * 0.01)).abs() < 1e-9 * v);
    }

    #[test]
    fn remainder_and_difference_agree_with_direct_evaluation() {
        let st = TrapState { u: [-2830.0, -2830.0], beta: 0.31, gamma: 4.5e4, coulomb: coulomb_coupling(), clamp: 1.0 };
        let x = [-54.0, 35.2];
        let y = [0.013, -0.021];
        let direct = st.potential([x[0] + y[0], x[1] + y[1]]) - st.potential(x);
        let g = st.gradient(x);
        let w = st.remainder(x, y);
        assert!((w - (direct - g[0] * y[0] - g[1] * y[1])).abs() < 1e-6 * w.abs().max(1e-3));
        let b = [x[0] + y[0], x[1] + y[1]];
        assert!((st.difference(x, b) - direct).abs() < 1e-7 * direct.abs().max(1.0));
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let st = TrapState { u: [-2830.0, -2830.0], beta: 0.31, gamma: 0.0, coulomb: coulomb_coupling(), clamp: 1.0 };
        let x = [-54.0, 35.2];
        let h = st.hessian(x);
        let e = 1e-4;
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += e;
            xm[j] -= e;
            let (gp, gm) = (st.gradient(xp), st.gradient(xm));
            for i in 0..2 {
                let fd = (gp[i] - gm[i]) / (2.0 * e);
                assert!((fd - h[i][j]).abs() < 1e-6 * (1.0 + h[i][j].abs()));
            }
        }
    }

    #[test]
    fn centrifugal_term_softens_the_trap() {
        let a = RotationAnsatz::plain(std::f64::consts::PI, 2.0).unwrap();
        let m = ca_model().with_protocol(&a);
        let st = m.state_at(1.0);
        let lab = m.lab_state_at(1.0);
        let w = a.eval(1.0).dot;
        assert!((lab.u[0] - st.u[0] - m.ions.m1 * w * w).abs() < 1e-9);
    }
}
