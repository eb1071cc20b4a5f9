//! Six-harmonic rotation-angle trajectory.
//!
//! `θ(t) = a₁cos(πt/t_f) + a₃cos(3πt/t_f) + c₃cos(5πt/t_f) + … + c₆cos(11πt/t_f) + θ_f/2`
//! where `a₁` and `a₃` are fixed by the free coefficients so that
//! `θ(0) = 0`, `θ(t_f) = θ_f` and both `θ̇` and `θ̈` vanish at the ends.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_FREE: usize = 4;

/// Harmonic orders multiplying `πt/t_f`.
const ORDERS: [f64; 6] = [1.0, 3.0, 5.0, 7.0, 9.0, 11.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationAnsatz {
    pub theta_f: f64,
    pub t_f: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub n_free: usize,
}

/// θ and its first three time derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AngleDerivatives {
    pub theta: f64,
    pub dot: f64,
    pub ddot: f64,
    pub dddot: f64,
}

impl RotationAnsatz {
    /// Ansatz with `free.len()` free coefficients; the remaining ones are 0.
    pub fn new(theta_f: f64, t_f: f64, free: &[f64]) -> Result<Self> {
        if !(t_f > 0.0) || !t_f.is_finite() {
            return Err(Error::InvalidInput(format!("protocol duration must be positive, got {t_f}")));
        }
        if !theta_f.is_finite() {
            return Err(Error::InvalidInput("final angle must be finite".into()));
        }
        if free.len() > MAX_FREE {
            return Err(Error::InvalidInput(format!("at most {MAX_FREE} free coefficients, got {}", free.len())));
        }
        let mut c = [0.0; MAX_FREE];
        c[..free.len()].copy_from_slice(free);
        Ok(Self { theta_f, t_f, c3: c[0], c4: c[1], c5: c[2], c6: c[3], n_free: free.len() })
    }

    /// The unoptimised protocol (`c₃ = … = c₆ = 0`).
    pub fn plain(theta_f: f64, t_f: f64) -> Result<Self> {
        Self::new(theta_f, t_f, &[])
    }

    pub fn coefficients(&self) -> [f64; MAX_FREE] {
        [self.c3, self.c4, self.c5, self.c6]
    }

    pub fn free_coefficients(&self) -> Vec<f64> {
        self.coefficients()[..self.n_free].to_vec()
    }

    /// Replaces the free coefficients, keeping `θ_f` and `t_f`.
    pub fn with_free(&self, free: &[f64]) -> Result<Self> {
        Self::new(self.theta_f, self.t_f, free)
    }

    /// Same coefficients over a different duration.
    pub fn with_duration(&self, t_f: f64) -> Result<Self> {
        let mut a = *self;
        if !(t_f > 0.0) {
            return Err(Error::InvalidInput(format!("protocol duration must be positive, got {t_f}")));
        }
        a.t_f = t_f;
        Ok(a)
    }

    /// Cosine amplitudes for orders 1, 3, 5, 7, 9, 11.
    pub fn amplitudes(&self) -> [f64; 6] {
        let [c3, c4, c5, c6] = self.coefficients();
        let tf = self.theta_f;
        [
            (32.0 * c3 + 80.0 * c4 + 144.0 * c5 + 224.0 * c6 - 9.0 * tf) / 16.0,
            -(48.0 * c3 + 96.0 * c4 + 160.0 * c5 + 240.0 * c6 - tf) / 16.0,
            c3,
            c4,
            c5,
            c6,
        ]
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.t_f;
        if t < -slack || t > self.t_f + slack || t.is_nan() {
            return Err(Error::Domain { t, t_f: self.t_f });
        }
        Ok(())
    }

    /// θ and derivatives without the domain check.
    pub fn eval(&self, t: f64) -> AngleDerivatives {
        let w = PI / self.t_f;
        let turns = t / self.t_f;
        let mut out = AngleDerivatives { theta: 0.5 * self.theta_f, ..Default::default() };
        for (a, n) in self.amplitudes().into_iter().zip(ORDERS) {
            if a == 0.0 {
                continue;
            }
            let k = n * w;
            let (s, c) = sin_cos_pi(n * turns);
            out.theta += a * c;
            out.dot -= a * k * s;
            out.ddot -= a * k * k * c;
            out.dddot += a * k * k * k * s;
        }
        out
    }

    pub fn theta(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.eval(t).theta)
    }

    pub fn theta_dot(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.eval(t).dot)
    }

    pub fn theta_ddot(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.eval(t).ddot)
    }

    /// `ω₀² - θ̇²`; negative when the rotation outruns the trap.
    pub fn effective_frequency_sq(&self, omega0: f64, t: f64) -> Result<f64> {
        let dot = self.theta_dot(t)?;
        Ok(omega0 * omega0 - dot * dot)
    }

    /// Largest `|θ̇|` over the protocol, from a dense scan refined by
    /// golden-section search around the best sample.
    pub fn max_abs_theta_dot(&self) -> f64 {
        let n = 2000;
        let h = self.t_f / n as f64;
        let f = |t: f64| self.eval(t).dot.abs();
        let best = (0..=n).max_by(|&a, &b| f(a as f64 * h).total_cmp(&f(b as f64 * h))).unwrap_or(0);
        let (mut a, mut b) = (((best as f64) - 1.0).max(0.0) * h, ((best as f64) + 1.0).min(n as f64) * h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        f(0.5 * (a + b)).max(f(best as f64 * h))
    }
}

/// `(sin πx, cos πx)` with exact values at integers and half-integers.
fn sin_cos_pi(x: f64) -> (f64, f64) {
    let n = x.round();
    let (s, c) = (PI * (x - n)).sin_cos();
    if n.rem_euclid(2.0) == 0.0 {
        (s, c)
    } else {
        (-s, -c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fourth_order_fd(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
        (-f(t + 2.0 * h) + 8.0 * f(t + h) - 8.0 * f(t - h) + f(t - 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn midpoint_is_half_angle() {
        for c in [[0.0; 4], [0.3, -0.2, 0.1, 0.05]] {
            let a = RotationAnsatz::new(PI, 2.0, &c).unwrap();
            assert!((a.theta(1.0).unwrap() - PI / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn plain_protocol_peak_speed() {
        let a = RotationAnsatz::plain(PI, 1.5).unwrap();
        let mid = a.theta_dot(0.75).unwrap();
        assert_relative_eq!(mid, 0.75 * PI * PI / 1.5, max_relative = 1e-14);
        let fd = fourth_order_fd(|t| a.eval(t).theta, 0.75, 1e-3);
        assert_relative_eq!(mid, fd, max_relative = 1e-8);
        assert_relative_eq!(a.max_abs_theta_dot(), mid, max_relative = 1e-9);
    }

    #[test]
    fn duration_scaling_halves_speed() {
        let a = RotationAnsatz::new(PI, 1.0, &[0.01, -0.02, 0.003, 0.0]).unwrap();
        let b = a.with_duration(2.0).unwrap();
        for frac in [0.1, 0.33, 0.5, 0.8] {
            assert_relative_eq!(b.theta_dot(2.0 * frac).unwrap(), 0.5 * a.theta_dot(frac).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn effective_frequency() {
        let w0 = 8.859;
        let a = RotationAnsatz::new(PI, 0.5, &[0.1]).unwrap();
        assert_eq!(a.effective_frequency_sq(w0, 0.0).unwrap(), w0 * w0);
        assert!((a.effective_frequency_sq(w0, 0.5).unwrap() - w0 * w0).abs() < 1e-9);
        let null = RotationAnsatz::plain(0.0, 0.5).unwrap();
        for t in [0.0, 0.1, 0.25, 0.4] {
            assert_eq!(null.effective_frequency_sq(w0, t).unwrap(), w0 * w0);
        }
        // 0.75π²/t_f exceeds ω₀ once t_f < 0.75π²/ω₀ ≈ 0.836 μs
        let fast = RotationAnsatz::plain(PI, 0.6).unwrap();
        assert!(fast.max_abs_theta_dot() > w0);
        assert!(fast.effective_frequency_sq(w0, 0.3).unwrap() < 0.0);
        let slow = RotationAnsatz::plain(PI, 1.0).unwrap();
        assert!(slow.effective_frequency_sq(w0, 0.5).unwrap() > 0.0);
    }

    #[test]
    fn domain_errors() {
        let a = RotationAnsatz::plain(PI, 1.0).unwrap();
        assert!(matches!(a.theta(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(a.theta_dot(1.2), Err(Error::Domain { .. })));
        assert!(matches!(a.theta_ddot(f64::NAN), Err(Error::Domain { .. })));
        assert!(RotationAnsatz::new(PI, 1.0, &[0.0; 5]).is_err());
        assert!(RotationAnsatz::new(PI, 0.0, &[]).is_err());
    }

    #[test]
    fn trailing_coefficients_are_pinned() {
        let a = RotationAnsatz::new(PI, 1.0, &[0.2, 0.1]).unwrap();
        assert_eq!(a.coefficients(), [0.2, 0.1, 0.0, 0.0]);
        assert_eq!(a.free_coefficients(), vec![0.2, 0.1]);
    }

    proptest! {
        #[test]
        fn boundary_identities(c in proptest::array::uniform4(-1.0f64..1.0), tf in 0.2f64..5.0, thf in -4.0f64..4.0) {
            let a = RotationAnsatz::new(thf, tf, &c).unwrap();
            let s = a.eval(0.0);
            let e = a.eval(tf);
            prop_assert!(s.theta.abs() < 1e-12);
            prop_assert!((e.theta - thf).abs() < 1e-12);
            for v in [s.dot, e.dot] { prop_assert!(v.abs() < 1e-12); }
            // θ̈ sums terms of size (11π/t_f)²·|c|, so scale the tolerance with it
            let scale = (11.0 * PI / tf).powi(2);
            for v in [s.ddot, e.ddot] { prop_assert!(v.abs() < 1e-12 * scale.max(1.0)); }
        }

        #[test]
        fn point_symmetry(c in proptest::array::uniform4(-1.0f64..1.0), frac in 0.0f64..1.0) {
            let a = RotationAnsatz::new(PI, 1.7, &c).unwrap();
            let t = frac * 1.7;
            prop_assert!((a.eval(t).theta + a.eval(1.7 - t).theta - PI).abs() < 1e-12);
        }

        #[test]
        fn derivatives_match_finite_differences(c in proptest::array::uniform4(-0.05f64..0.05), frac in 0.05f64..0.95) {
            let a = RotationAnsatz::new(PI, 2.0, &c).unwrap();
            let t = frac * 2.0;
            let h = 1e-3;
            let d = a.eval(t);
            let fd1 = fourth_order_fd(|x| a.eval(x).theta, t, h);
            let fd2 = fourth_order_fd(|x| a.eval(x).dot, t, h);
            let fd3 = fourth_order_fd(|x| a.eval(x).ddot, t, h);
            let tol = |x: f64, scale: f64| 1e-8 * x.abs().max(scale);
            prop_assert!((d.dot - fd1).abs() < tol(d.dot, 1.0));
            prop_assert!((d.ddot - fd2).abs() < tol(d.ddot, 10.0));
            prop_assert!((d.dddot - fd3).abs() < tol(d.dddot, 100.0));
        }
    }
}
