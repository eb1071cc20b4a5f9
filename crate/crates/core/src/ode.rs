//! Adaptive Dormand–Prince 5(4) integrator with continuous output.
//!
//! Coefficients and the dense-output polynomial follow Hairer, Nørsett and
//! Wanner's `dopri5`. The state is a fixed-size array so the hot loops stay
//! allocation-free.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Largest step; 0 means the whole interval.
    pub h_max: f64,
    /// Steps below `h_min_rel · |t|` count as underflow.
    pub h_min_rel: f64,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 1_000_000, h_max: 0.0, h_min_rel: 1e-14 }
    }
}

/// One accepted step with its interpolation polynomial.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = self.r[0][i]
                + th * (self.r[1][i] + th1 * (self.r[2][i] + th * (self.r[3][i] + th1 * self.r[4][i])));
        }
        y
    }
}

/// Full continuous solution over the integration interval.
#[derive(Debug, Clone)]
pub struct DenseSolution<const N: usize> {
    pub steps: Vec<DenseStep<N>>,
    pub y_end: [f64; N],
    pub t_end: f64,
    pub evaluations: usize,
}

impl<const N: usize> DenseSolution<N> {
    /// Interpolated state at `t`; clamps to the covered interval.
    pub fn at(&self, t: f64) -> [f64; N] {
        if self.steps.is_empty() {
            return self.y_end;
        }
        let forward = self.steps[0].h > 0.0;
        // binary search on step start times (monotone in the direction of integration)
        let idx = self
            .steps
            .partition_point(|s| if forward { s.t0 <= t } else { s.t0 >= t })
            .saturating_sub(1);
        self.steps[idx].eval(t)
    }
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Default::default() }
    }

    fn error_norm<const N: usize>(&self, y: &[f64; N], y_new: &[f64; N], err: &[f64; N]) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
            acc += (err[i] / sc).powi(2);
        }
        (acc / N as f64).sqrt()
    }

    fn initial_step<const N: usize, F>(&self, f: &mut F, t0: f64, y0: &[f64; N], k1: &[f64; N], span: f64) -> f64
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let dir = span.signum();
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sc = self.atol + self.rtol * y0[i].abs();
            d0 += (y0[i] / sc).powi(2);
            d1 += (k1[i] / sc).powi(2);
        }
        d0 = (d0 / N as f64).sqrt();
        d1 = (d1 / N as f64).sqrt();
        let mut h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span.abs());
        let y1 = axpy(y0, dir * h0, &[(1.0, k1)]);
        let k2 = f(t0 + dir * h0, &y1);
        let mut d2 = 0.0;
        for i in 0..N {
            let sc = self.atol + self.rtol * y0[i].abs();
            d2 += ((k2[i] - k1[i]) / sc).powi(2);
        }
        d2 = (d2 / N as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(span.abs())
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction),
    /// keeping the dense output of every accepted step.
    pub fn solve<const N: usize, F>(&self, mut f: F, t0: f64, y0: [f64; N], t1: f64) -> Result<DenseSolution<N>>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let span = t1 - t0;
        let mut steps = Vec::new();
        if span == 0.0 {
            return Ok(DenseSolution { steps, y_end: y0, t_end: t0, evaluations: 0 });
        }
        let dir = span.signum();
        let h_max = if self.h_max > 0.0 { self.h_max } else { span.abs() };
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        let mut evals = 1;
        check_finite(t, &k1)?;
        let mut h = self.initial_step(&mut f, t, &y, &k1, span).min(h_max);
        evals += 1;
        let mut rejected_last = false;

        for _ in 0..self.max_steps {
            if (t1 - t) * dir <= 0.0 {
                break;
            }
            if (t + dir * h - t1) * dir > 0.0 || (t1 - t - dir * h).abs() < 1e-12 * span.abs() {
                h = (t1 - t).abs();
            }
            if h <= self.h_min_rel * t.abs().max(span.abs()) {
                return Err(Error::Integrator { t, reason: format!("step size underflow (h = {h:e})") });
            }
            let hs = dir * h;
            let y2 = axpy(&y, hs, &[(A21, &k1)]);
            let k2 = f(t + C2 * hs, &y2);
            let y3 = axpy(&y, hs, &[(A31, &k1), (A32, &k2)]);
            let k3 = f(t + C3 * hs, &y3);
            let y4 = axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            let k4 = f(t + C4 * hs, &y4);
            let y5 = axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            let k5 = f(t + C5 * hs, &y5);
            let y6 = axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            let k6 = f(t + hs, &y6);
            let y_new = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(t + hs, &y_new);
            evals += 6;

            let finite = y_new.iter().chain(k7.iter()).all(|v| v.is_finite());
            let err_vec = {
                let mut e = [0.0; N];
                for i in 0..N {
                    e[i] = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                }
                e
            };
            let err = if finite { self.error_norm(&y, &y_new, &err_vec) } else { f64::INFINITY };

            if err <= 1.0 {
                let mut r = [[0.0; N]; 5];
                for i in 0..N {
                    let dy = y_new[i] - y[i];
                    let bspl = hs * k1[i] - dy;
                    r[0][i] = y[i];
                    r[1][i] = dy;
                    r[2][i] = bspl;
                    r[3][i] = dy - hs * k7[i] - bspl;
                    r[4][i] = hs
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                steps.push(DenseStep { t0: t, h: hs, r });
                t += hs;
                y = y_new;
                k1 = k7;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = if rejected_last { h * fac.min(1.0) } else { h * fac }.min(h_max);
                rejected_last = false;
            } else {
                if !finite && h <= self.h_min_rel * 1e3 * t.abs().max(span.abs()) {
                    return Err(Error::Integrator { t, reason: "non-finite derivative".into() });
                }
                let fac = if finite { (0.9 * err.powf(-0.2)).clamp(0.1, 1.0) } else { 0.1 };
                h *= fac;
                rejected_last = true;
            }
        }
        if (t1 - t) * dir > 1e-12 * span.abs() {
            return Err(Error::Integrator { t, reason: format!("step budget of {} exhausted", self.max_steps) });
        }
        Ok(DenseSolution { steps, y_end: y, t_end: t1, evaluations: evals })
    }
}

fn check_finite<const N: usize>(t: f64, v: &[f64; N]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Integrator { t, reason: "non-finite derivative".into() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_decay() {
        let sol = Dopri5::new(1e-12, 1e-14).solve(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 3.0).unwrap();
        assert_relative_eq!(sol.y_end[0], (-3.0f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn dense_output_tracks_oscillator() {
        let w = 2.5;
        let sol = Dopri5::default().solve(|_, y: &[f64; 2]| [y[1], -w * w * y[0]], 0.0, [1.0, 0.0], 10.0).unwrap();
        for i in 0..=100 {
            let t = 0.1 * i as f64;
            let y = sol.at(t);
            assert!((y[0] - (w * t).cos()).abs() < 1e-8, "t = {t}");
            assert!((y[1] + w * (w * t).sin()).abs() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn backwards_integration() {
        let sol = Dopri5::default().solve(|_, y: &[f64; 2]| [y[1], -y[0]], 2.0, [2f64.cos(), -2f64.sin()], 0.0).unwrap();
        assert!((sol.y_end[0] - 1.0).abs() < 1e-9 && sol.y_end[1].abs() < 1e-9);
        assert!((sol.at(1.0)[0] - 1f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn blow_up_reports_time() {
        // y' = y² from y(0) = 1 blows up at t = 1
        let err = Dopri5::default().solve(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, [1.0], 2.0).unwrap_err();
        match err {
            Error::Integrator { t, .. } => assert!((t - 1.0).abs() < 1e-3, "t = {t}"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn nan_derivative_is_an_error() {
        let err = Dopri5::default().solve(|t, y: &[f64; 1]| [if t > 0.5 { f64::NAN } else { y[0] }], 0.0, [1.0], 1.0);
        assert!(matches!(err, Err(Error::Integrator { .. })));
    }
}
