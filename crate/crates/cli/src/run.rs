use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ionrot_core::chain::magnetic_electric_ratio;
use ionrot_core::doublewell::{design_doublewell, doublewell_objective, doublewell_series};
use ionrot_core::sta::{design_direct, design_equal_ions, direct_excess, equal_ion_objective, DirectConfig};
use ionrot_core::units::hbar;
use ionrot_core::verifier::{frame_grid, ground_state, propagate, GridConfig, GroundState, PotentialModel};
use ionrot_core::{DesignOptions, DoubleWellConfig, RotationAnsatz};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{validate, Command, ConfigError, Diagnostic, RawConfig, RunConfig, Severity, SweepMethod};
use crate::output::{col, sha256_hex, Bundle, Column};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: ionrot_core::Error,
    },
    #[error("writing results: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical { .. } | RunError::Io(_) => 3,
        }
    }
}

trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, RunError>;
}

impl<T> Context<T> for ionrot_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, RunError> {
        self.map_err(|source| RunError::Numerical { context: what(), source })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
}

/// Parses and validates config text. Errors only when a diagnostic is an error.
pub fn load(text: &str, overrides: &Overrides) -> Result<(RunConfig, Vec<Diagnostic>), ConfigError> {
    let raw = RawConfig::parse(text)?;
    let (config, diags) = validate(&raw);
    match config {
        Some(mut c) => {
            if let Some(seed) = overrides.seed {
                c.seed = seed;
            }
            Ok((c, diags))
        }
        None => Err(ConfigError::Invalid(diags.into_iter().filter(|d| d.severity == Severity::Error).collect())),
    }
}

/// Runs `config` and writes its bundle to `out`.
pub fn run(config_text: &str, config: &RunConfig, diags: &[Diagnostic], out: &Path, workers: usize) -> Result<(), RunError> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let mut bundle = Bundle::create(out)?;
    let summary = match config.command {
        Command::DesignNm => design_nm(config, &mut bundle)?,
        Command::DesignDirect => design_direct_cmd(config, &mut bundle)?,
        Command::Verify => verify(config, &mut bundle)?,
        Command::Doublewell => doublewell(config, &mut bundle)?,
        Command::Ratio => ratio(config),
        Command::Sweep => sweep(config, &mut bundle, workers)?,
    };
    bundle.json("summary.json", &summary)?;

    let manifest = json!({
        "tool": "ionrot",
        "version": env!("CARGO_PKG_VERSION"),
        "command": config.command,
        "seed": config.seed,
        "config_sha256": sha256_hex(config_text.as_bytes()),
        "config_text": config_text,
        "resolved_config": config,
        "diagnostics": diags,
        "artifacts": bundle.artifacts,
        "started_unix": started,
        "elapsed_s": clock.elapsed().as_secs_f64(),
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)? + "\n";
    std::fs::write(out.join("manifest.json"), text)?;
    Ok(())
}

fn options(config: &RunConfig) -> DesignOptions {
    DesignOptions {
        max_iterations: config.max_iterations,
        restarts: config.restarts,
        seed: config.seed,
        ..Default::default()
    }
}

fn direct_config(config: &RunConfig) -> DirectConfig {
    let mut c = DirectConfig {
        grid: GridConfig { n: [config.sim.grid; 2], half_width_sigmas: config.sim.half_width },
        ..Default::default()
    };
    c.propagation.dt = config.sim.dt;
    c.propagation.samples = config.sim.samples;
    c
}

fn single_t_f(config: &RunConfig) -> f64 {
    config.protocol.t_f[0]
}

fn fixed_ansatz(config: &RunConfig) -> Result<Option<RotationAnsatz>, RunError> {
    let Some(c) = &config.protocol.coefficients else {
        return Ok(None);
    };
    RotationAnsatz::new(config.protocol.theta_f, single_t_f(config), c)
        .map(Some)
        .context(|| "building the protocol".into())
}

fn theta_columns() -> [Column; 5] {
    [
        col("t", "us", "ansatz"),
        col("theta", "rad", "ansatz"),
        col("theta_dot", "rad/us", "ansatz"),
        col("theta_ddot", "rad/us^2", "ansatz"),
        col("theta_dddot", "rad/us^3", "ansatz"),
    ]
}

fn write_theta(bundle: &mut Bundle, ansatz: &RotationAnsatz, samples: usize) -> std::io::Result<()> {
    let n = samples.max(1);
    let rows: Vec<Vec<f64>> = (0..=n)
        .map(|k| {
            let t = ansatz.t_f * k as f64 / n as f64;
            let d = ansatz.eval(t);
            vec![t, d.theta, d.dot, d.ddot, d.dddot]
        })
        .collect();
    bundle.csv("theta.csv", &theta_columns(), &rows)
}

fn protocol_json(ansatz: &RotationAnsatz) -> Value {
    json!({
        "theta_f_rad": ansatz.theta_f,
        "t_f_us": ansatz.t_f,
        "coefficients": ansatz.free_coefficients(),
    })
}

fn trap_frequency(config: &RunConfig) -> f64 {
    config.trap_frequency.expect("trap frequency checked in validate")
}

fn design_nm(config: &RunConfig, bundle: &mut Bundle) -> Result<Value, RunError> {
    let ions = config.ions();
    let w = trap_frequency(config);
    let unit = hbar() * w;
    let t_f = single_t_f(config);
    let summary = match fixed_ansatz(config)? {
        Some(ansatz) => {
            let o = equal_ion_objective(ions.m1, w, &ansatz, &DesignOptions::default().ode)
                .context(|| "evaluating the normal-mode objective".into())?;
            write_theta(bundle, &ansatz, config.output_samples)?;
            json!({
                "protocol": protocol_json(&ansatz),
                "optimised": false,
                "objective_hbar_omega0": o.total / unit,
                "mode_energies_hbar_omega0": o.energies.iter().map(|e| e / unit).collect::<Vec<_>>(),
            })
        }
        None => {
            let n = config.protocol.n_free[0];
            let r = design_equal_ions(&ions, w, t_f, config.protocol.theta_f, n, &options(config))
                .context(|| format!("normal-mode design at t_f = {t_f} us"))?;
            write_theta(bundle, &r.ansatz, config.output_samples)?;
            json!({
                "protocol": protocol_json(&r.ansatz),
                "optimised": true,
                "objective_hbar_omega0": r.objective_quanta,
                "mode_energies_hbar_omega0": r.mode_energies_final.iter().map(|e| e / unit).collect::<Vec<_>>(),
                "iterations": r.iterations,
                "evaluations": r.evaluations,
                "converged": r.converged,
            })
        }
    };
    Ok(summary)
}

fn design_direct_cmd(config: &RunConfig, bundle: &mut Bundle) -> Result<Value, RunError> {
    let ions = config.ions();
    let trap = config.trap().expect("trap checked in validate");
    let t_f = single_t_f(config);
    let n = config.protocol.n_free[0];
    let mut opts = options(config);
    opts.initial_guess = config.protocol.coefficients.clone();
    let r = design_direct(&ions, &trap, t_f, config.protocol.theta_f, n, &direct_config(config), &opts)
        .context(|| format!("direct design at t_f = {t_f} us"))?;
    write_theta(bundle, &r.ansatz, config.output_samples)?;
    Ok(json!({
        "protocol": protocol_json(&r.ansatz),
        "excess_quanta": r.objective_quanta,
        "iterations": r.iterations,
        "evaluations": r.evaluations,
        "converged": r.converged,
    }))
}

fn rigid_ground(config: &RunConfig) -> Result<(PotentialModel, GroundState), RunError> {
    let trap = config.trap().expect("trap checked in validate");
    let model = PotentialModel::rigid_harmonic(config.ions(), trap, None).context(|| "building the potential".into())?;
    let dc = direct_config(config);
    let grid = frame_grid(&model, &dc.grid).context(|| "sizing the grid".into())?;
    let ground = ground_state(&model, &grid, &dc.ground).context(|| "imaginary-time ground state".into())?;
    Ok((model, ground))
}

fn verify(config: &RunConfig, bundle: &mut Bundle) -> Result<Value, RunError> {
    let ansatz = match fixed_ansatz(config)? {
        Some(a) => a,
        None => RotationAnsatz::plain(config.protocol.theta_f, single_t_f(config))
            .context(|| "building the protocol".into())?,
    };
    let (model, ground) = rigid_ground(config)?;
    let unit = hbar() * trap_frequency(config);
    let tr = propagate(&model.with_protocol(&ansatz), &ground.state, ansatz.t_f, &direct_config(config).propagation)
        .context(|| "split-operator propagation".into())?;
    let rows: Vec<Vec<f64>> = tr
        .observations
        .iter()
        .map(|o| vec![o.t, o.energy / unit, o.mean_s[0], o.mean_s[1], o.norm])
        .collect();
    bundle.csv(
        "trajectory.csv",
        &[
            col("t", "us", "verifier"),
            col("energy", "hbar omega1", "verifier"),
            col("mean_s1", "um", "verifier"),
            col("mean_s2", "um", "verifier"),
            col("norm", "1", "verifier"),
        ],
        &rows,
    )?;
    write_theta(bundle, &ansatz, config.output_samples)?;
    Ok(json!({
        "protocol": protocol_json(&ansatz),
        "excess_quanta": (tr.final_parts.minus(&tr.initial)) / unit,
        "ground_energy_quanta": ground.energy / unit,
        "steps": tr.steps,
        "dt_us": tr.dt,
        "max_edge_probability": tr.max_edge_probability,
    }))
}

fn doublewell(config: &RunConfig, bundle: &mut Bundle) -> Result<Value, RunError> {
    let ions = config.ions();
    let spec = config.doublewell.expect("double-well constants checked in validate");
    let cfg = DoubleWellConfig::new(spec.curvature, spec.beta).context(|| "double-well constants".into())?;
    let t_f = single_t_f(config);
    let opts = options(config);
    let (ansatz, optimised) = match fixed_ansatz(config)? {
        Some(a) => (a, false),
        None => {
            let n = config.protocol.n_free[0];
            let d = design_doublewell(&ions, &cfg, t_f, config.protocol.theta_f, n, &opts)
                .context(|| format!("double-well design at t_f = {t_f} us"))?;
            (d.result.ansatz, n > 0)
        }
    };
    let objective = doublewell_objective(&cfg, &ions, &ansatz, spec.samples, &opts)
        .context(|| "double-well normal modes".into())?;
    let series =
        doublewell_series(&cfg, &ions, &ansatz, spec.samples, &opts).context(|| "double-well time series".into())?;
    let rows: Vec<Vec<f64>> = series
        .iter()
        .map(|s| vec![s.t, s.d, s.s0, s.gamma, s.omega_plus, s.omega_minus, s.relative_excitation])
        .collect();
    bundle.csv(
        "doublewell.csv",
        &[
            col("t", "us", "ansatz"),
            col("d", "um", "doublewell"),
            col("s0", "um", "doublewell"),
            col("gamma", "u um/us^2", "doublewell"),
            col("omega_plus", "rad/us", "doublewell"),
            col("omega_minus", "rad/us", "doublewell"),
            col("relative_excitation", "1", "doublewell"),
        ],
        &rows,
    )?;
    write_theta(bundle, &ansatz, config.output_samples)?;
    Ok(json!({
        "protocol": protocol_json(&ansatz),
        "optimised": optimised,
        "relative_excitation": objective.relative(),
        "initial_energy": objective.initial_energy,
    }))
}

fn ratio(config: &RunConfig) -> Value {
    let (r, theta_dot) = config.ratio.expect("ratio inputs checked in validate");
    let value = magnetic_electric_ratio(r * 1e-6, theta_dot * 1e6);
    json!({ "r_um": r, "theta_dot_rad_per_s": theta_dot * 1e6, "magnetic_to_electric": value })
}

#[derive(Debug, Clone)]
struct SweepPoint {
    t_f: f64,
    n_free: usize,
    objective: f64,
    exact: Option<f64>,
    coefficients: [f64; 4],
}

/// Maps `jobs` over a pool of `workers` threads, keeping results in job order.
fn pool_map<J, R, F>(jobs: &[J], workers: usize, f: F) -> Vec<R>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> R + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let r = f(job);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("pool finished").into_iter().map(|r| r.expect("every job ran")).collect()
}

fn sweep(config: &RunConfig, bundle: &mut Bundle, workers: usize) -> Result<Value, RunError> {
    let ions = config.ions();
    let w = trap_frequency(config);
    let trap = config.trap().expect("trap checked in validate");
    let unit = hbar() * w;
    let theta_f = config.protocol.theta_f;
    let opts = options(config);
    let dc = direct_config(config);
    let verify = config.sweep_method == SweepMethod::Nm && config.sweep_verify;
    let reference = if verify { Some(rigid_ground(config)?) } else { None };

    let jobs: Vec<(f64, usize)> = config
        .protocol
        .t_f
        .iter()
        .flat_map(|&t| config.protocol.n_free.iter().map(move |&n| (t, n)))
        .collect();
    let results = pool_map(&jobs, workers, |&(t_f, n_free)| -> Result<SweepPoint, RunError> {
        let r = match config.sweep_method {
            SweepMethod::Nm => design_equal_ions(&ions, w, t_f, theta_f, n_free, &opts),
            SweepMethod::Direct => design_direct(&ions, &trap, t_f, theta_f, n_free, &dc, &opts),
        }
        .context(|| format!("design at t_f = {t_f} us, n_free = {n_free}"))?;
        let exact = match &reference {
            Some((model, ground)) => Some(
                direct_excess(model, ground, &r.ansatz, &dc).context(|| format!("verification at t_f = {t_f} us"))? / unit,
            ),
            None => None,
        };
        Ok(SweepPoint { t_f, n_free, objective: r.objective_quanta, exact, coefficients: r.coefficients })
    });
    let points = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let source = match (config.sweep_method, verify) {
        (SweepMethod::Nm, false) => "sta",
        _ => "verifier",
    };
    let mut columns = vec![col("t_f", "us", "cli")];
    columns.extend(config.protocol.n_free.iter().map(|n| col(format!("excitation_n{n}"), "hbar omega1", source)));
    let per_t = config.protocol.n_free.len();
    let table: Vec<Vec<f64>> = points
        .chunks(per_t)
        .map(|chunk| {
            let mut row = vec![chunk[0].t_f];
            row.extend(chunk.iter().map(|p| p.exact.unwrap_or(p.objective)));
            row
        })
        .collect();
    bundle.csv("sweep.csv", &columns, &table)?;

    let detail: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            let mut row = vec![p.t_f, p.n_free as f64, p.objective, p.exact.unwrap_or(f64::NAN)];
            row.extend(p.coefficients);
            row
        })
        .collect();
    let objective_source = if config.sweep_method == SweepMethod::Nm { "sta" } else { "verifier" };
    bundle.csv(
        "sweep_protocols.csv",
        &[
            col("t_f", "us", "cli"),
            col("n_free", "1", "cli"),
            col("objective", "hbar omega1", objective_source),
            col("exact_excess", "hbar omega1", "verifier"),
            col("c3", "1", "ansatz"),
            col("c4", "1", "ansatz"),
            col("c5", "1", "ansatz"),
            col("c6", "1", "ansatz"),
        ],
        &detail,
    )?;
    Ok(json!({
        "method": config.sweep_method,
        "verified": verify,
        "points": points.len(),
        "t_f_us": config.protocol.t_f,
        "n_free": config.protocol.n_free,
    }))
}

/// Keeps only the warnings, for printing alongside a successful run.
pub fn warnings(diags: &[Diagnostic]) -> impl Iterator<Item = &Diagnostic> {
    diags.iter().filter(|d| d.severity == Severity::Warning)
}
