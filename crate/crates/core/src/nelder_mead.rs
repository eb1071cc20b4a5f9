//! Derivative-free simplex minimisation.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Per-coordinate offsets of the initial simplex vertices.
    pub initial_step: f64,
    /// Stop once `max f - min f` over the simplex falls below this.
    pub f_tolerance: f64,
    pub max_iterations: usize,
    /// Extra runs from randomly perturbed starting points.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_step: 1e-3,
            f_tolerance: 1e-12,
            max_iterations: 2000,
            restarts: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective after each iteration (all runs concatenated).
    pub trace: Vec<f64>,
}

/// Minimises `f` starting from a simplex around `x0`. Non-finite objective
/// values are treated as `+∞`, which lets the objective reject infeasible
/// points.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut best = run(&mut f, x0, opts);
    if x0.is_empty() {
        return best;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let start: Vec<f64> = best
            .x
            .iter()
            .map(|&xi| xi + opts.initial_step * rng.gen_range(-1.0..1.0))
            .collect();
        let r = run(&mut f, &start, opts);
        let mut trace = std::mem::take(&mut best.trace);
        let floor = best.f;
        trace.extend(r.trace.iter().map(|&v| v.min(floor)));
        let evaluations = best.evaluations + r.evaluations;
        let iterations = best.iterations + r.iterations;
        if r.f < best.f {
            best = r;
        }
        best.trace = trace;
        best.evaluations = evaluations;
        best.iterations = iterations;
    }
    best
}

fn run<F>(f: &mut F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    if n == 0 {
        let v = eval(x0);
        return NelderMeadResult { x: vec![], f: v, iterations: 0, evaluations: 1, converged: true, trace: vec![v] };
    }

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    let mut evaluations = n + 1;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        // order ascending by objective; ties keep insertion order
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if values[n] - values[0] < opts.f_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |coef: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + coef * (c - w)).collect()
        };

        let xr = along(opts.reflection);
        let fr = eval(&xr);
        evaluations += 1;
        if fr < values[0] {
            let xe = along(opts.reflection * opts.expansion);
            let fe = eval(&xe);
            evaluations += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(opts.reflection * opts.contraction);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-opts.contraction);
                let fc = eval(&xc);
                (xc, fc)
            };
            evaluations += 1;
            if fc < fr.min(values[n]) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> =
                        simplex[0].iter().zip(&simplex[i]).map(|(b, v)| b + opts.shrink * (v - b)).collect();
                    values[i] = eval(&shrunk);
                    simplex[i] = shrunk;
                }
                evaluations += n;
            }
        }
        let current = values.iter().copied().fold(f64::INFINITY, f64::min);
        let prev = trace.last().copied().unwrap_or(f64::INFINITY);
        trace.push(current.min(prev));
    }

    let (ib, _) = values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    NelderMeadResult { x: simplex[ib].clone(), f: values[ib], iterations, evaluations, converged, trace }
}
