//! Flat `key = value` run configurations.
//!
//! Keys use dotted sections (`trap.frequency`). Physical values carry a unit
//! suffix (`1.41 MHz`, `2 us`, `180 deg`); lists share one suffix at the end
//! (`t_f = 1, 1.5, 2 us`). Everything is converted to internal units here.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ionrot_core::units::{to_internal, Dimension};
use ionrot_core::{IonPair, RigidHarmonicTrap, RotationAnsatz};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid configuration:\n{}", render(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

fn render(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Config key the message refers to, if any.
    pub field: Option<String>,
    pub message: String,
}

impl Diagnostic {
    fn error(field: &str, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, field: Some(field.to_string()), message: message.into() }
    }

    fn warning(field: Option<&str>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, field: field.map(str::to_string), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match &self.field {
            Some(k) => write!(f, "{level}: {k}: {}", self.message),
            None => write!(f, "{level}: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    DesignNm,
    DesignDirect,
    Verify,
    Doublewell,
    Ratio,
    Sweep,
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "design-nm" => Command::DesignNm,
            "design-direct" => Command::DesignDirect,
            "verify" => Command::Verify,
            "doublewell" => Command::Doublewell,
            "ratio" => Command::Ratio,
            "sweep" => Command::Sweep,
            _ => return Err(format!("unknown command `{s}`")),
        })
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::DesignNm => "design-nm",
            Command::DesignDirect => "design-direct",
            Command::Verify => "verify",
            Command::Doublewell => "doublewell",
            Command::Ratio => "ratio",
            Command::Sweep => "sweep",
        })
    }
}

/// How `sweep` designs each protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMethod {
    Nm,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Text,
    Integer,
    IntegerList,
    Number,
    NumberList,
    Flag,
    Quantity(Unit),
    QuantityList(Unit),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Unit {
    Mass,
    Frequency,
    Spring,
    Quartic,
    Angle,
    Time,
    Length,
    AngularVelocity,
}

const FIELDS: &[(&str, Kind)] = &[
    ("command", Kind::Text),
    ("seed", Kind::Integer),
    ("ions.m1", Kind::Quantity(Unit::Mass)),
    ("ions.m2", Kind::Quantity(Unit::Mass)),
    ("trap.frequency", Kind::Quantity(Unit::Frequency)),
    ("trap.spring", Kind::Quantity(Unit::Spring)),
    ("doublewell.curvature", Kind::Quantity(Unit::Spring)),
    ("doublewell.beta", Kind::Quantity(Unit::Quartic)),
    ("doublewell.samples", Kind::Integer),
    ("protocol.theta_f", Kind::Quantity(Unit::Angle)),
    ("protocol.t_f", Kind::QuantityList(Unit::Time)),
    ("protocol.n_free", Kind::IntegerList),
    ("protocol.coefficients", Kind::NumberList),
    ("sim.grid", Kind::Integer),
    ("sim.half_width", Kind::Number),
    ("sim.dt", Kind::Quantity(Unit::Time)),
    ("sim.samples", Kind::Integer),
    ("design.max_iterations", Kind::Integer),
    ("design.restarts", Kind::Integer),
    ("sweep.method", Kind::Text),
    ("sweep.verify", Kind::Flag),
    ("ratio.r", Kind::Quantity(Unit::Length)),
    ("ratio.theta_dot", Kind::Quantity(Unit::AngularVelocity)),
    ("output.samples", Kind::Integer),
];

/// Factor that takes a value with this suffix to internal units.
fn unit_scale(unit: Unit, suffix: &str) -> Option<f64> {
    let si = |v: f64, d: Dimension| to_internal(v, d);
    Some(match (unit, suffix) {
        (Unit::Mass, "u" | "amu" | "Da") => 1.0,
        (Unit::Mass, "kg") => si(1.0, Dimension::Mass),
        (Unit::Frequency, "Hz") => 2.0 * PI * 1e-6,
        (Unit::Frequency, "kHz") => 2.0 * PI * 1e-3,
        (Unit::Frequency, "MHz") => 2.0 * PI,
        (Unit::Frequency | Unit::AngularVelocity, "rad/us") => 1.0,
        (Unit::Frequency | Unit::AngularVelocity, "rad/s" | "1/s" | "s^-1") => 1e-6,
        (Unit::Spring, "N/m") => si(1.0, Dimension::SpringConstant),
        (Unit::Spring, "pN/m") => si(1e-12, Dimension::SpringConstant),
        (Unit::Quartic, "N/m^3") => si(1.0, Dimension::QuarticCoefficient),
        (Unit::Quartic, "mN/m^3") => si(1e-3, Dimension::QuarticCoefficient),
        (Unit::Angle, "rad") => 1.0,
        (Unit::Angle, "deg") => PI / 180.0,
        (Unit::Angle, "pi") => PI,
        (Unit::Time, "us") => 1.0,
        (Unit::Time, "ns") => 1e-3,
        (Unit::Time, "s") => 1e6,
        (Unit::Length, "um") => 1.0,
        (Unit::Length, "nm") => 1e-3,
        (Unit::Length, "m") => 1e6,
        _ => return None,
    })
}

fn unit_names(unit: Unit) -> &'static str {
    match unit {
        Unit::Mass => "u, amu, Da, kg",
        Unit::Frequency => "Hz, kHz, MHz, rad/us, rad/s",
        Unit::Spring => "N/m, pN/m",
        Unit::Quartic => "N/m^3, mN/m^3",
        Unit::Angle => "rad, deg, pi",
        Unit::Time => "us, ns, s",
        Unit::Length => "um, nm, m",
        Unit::AngularVelocity => "rad/us, rad/s, 1/s",
    }
}

/// Raw `key = value` pairs keyed by name, with line numbers.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: line_no, message: "empty key".into() });
            }
            if entries.insert(key.clone(), (line_no, value.trim().to_string())).is_some() {
                return Err(ConfigError::Syntax { line: line_no, message: format!("duplicate key `{key}`") });
            }
        }
        Ok(Self { entries })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtocolSpec {
    pub theta_f: f64,
    pub t_f: Vec<f64>,
    pub n_free: Vec<usize>,
    pub coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimSpec {
    pub grid: usize,
    pub half_width: f64,
    pub dt: Option<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DoubleWellSpec {
    /// Internal spring units.
    pub curvature: f64,
    pub beta: f64,
    pub samples: usize,
}

/// A validated run, all values in internal units (u, μm, μs).
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub masses: [f64; 2],
    /// Angular trap frequency of ion 1 in rad/μs.
    pub trap_frequency: Option<f64>,
    pub doublewell: Option<DoubleWellSpec>,
    pub protocol: ProtocolSpec,
    pub sim: SimSpec,
    pub max_iterations: usize,
    pub restarts: usize,
    pub sweep_method: SweepMethod,
    pub sweep_verify: bool,
    /// Separation in μm and rotation speed in rad/μs.
    pub ratio: Option<(f64, f64)>,
    pub output_samples: usize,
}

impl RunConfig {
    pub fn ions(&self) -> IonPair {
        IonPair::new(self.masses[0], self.masses[1]).expect("masses checked in validate")
    }

    pub fn trap(&self) -> Option<RigidHarmonicTrap> {
        self.trap_frequency.and_then(|w| RigidHarmonicTrap::from_frequency(self.masses[0], w).ok())
    }
}

enum Value {
    Text(String),
    Integers(Vec<u64>),
    Numbers(Vec<f64>),
    Flag(bool),
}

fn parse_number(token: &str) -> Option<f64> {
    let t = token.trim();
    let v: f64 = t.parse().ok()?;
    v.is_finite().then_some(v)
}

fn parse_value(kind: Kind, raw: &str) -> Result<Value, String> {
    let list = |s: &str| -> Result<Vec<f64>, String> {
        s.split(',')
            .map(|t| parse_number(t).ok_or_else(|| format!("`{}` is not a number", t.trim())))
            .collect()
    };
    match kind {
        Kind::Text => Ok(Value::Text(raw.to_string())),
        Kind::Flag => match raw {
            "true" => Ok(Value::Flag(true)),
            "false" => Ok(Value::Flag(false)),
            _ => Err(format!("expected true or false, got `{raw}`")),
        },
        Kind::Integer | Kind::IntegerList => {
            let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
            if kind == Kind::Integer && parts.len() != 1 {
                return Err("expected a single integer".into());
            }
            parts
                .iter()
                .map(|p| p.parse::<u64>().map_err(|_| format!("`{p}` is not a non-negative integer")))
                .collect::<Result<Vec<_>, _>>()
                .map(Value::Integers)
        }
        Kind::Number | Kind::NumberList => {
            let v = list(raw)?;
            if kind == Kind::Number && v.len() != 1 {
                return Err("expected a single number".into());
            }
            Ok(Value::Numbers(v))
        }
        Kind::Quantity(unit) | Kind::QuantityList(unit) => {
            let (numbers, suffix) = match raw.rsplit_once(char::is_whitespace) {
                Some((n, s)) if parse_number(s).is_none() => (n.trim_end_matches(',').trim(), s),
                _ => return Err(format!("missing unit suffix (one of {})", unit_names(unit))),
            };
            let scale = unit_scale(unit, suffix)
                .ok_or_else(|| format!("unit `{suffix}` not accepted here (one of {})", unit_names(unit)))?;
            let v = list(numbers)?;
            if matches!(kind, Kind::Quantity(_)) && v.len() != 1 {
                return Err("expected a single value".into());
            }
            Ok(Value::Numbers(v.into_iter().map(|x| x * scale).collect()))
        }
    }
}

/// Parses and checks every field; returns the config together with all
/// diagnostics. The config is `None` when any diagnostic is an error.
pub fn validate(raw: &RawConfig) -> (Option<RunConfig>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let mut values: BTreeMap<&str, Value> = BTreeMap::new();
    for (key, (_, text)) in &raw.entries {
        match FIELDS.iter().find(|(k, _)| k == key) {
            None => diags.push(Diagnostic::error(key, "unknown key")),
            Some((k, kind)) => match parse_value(*kind, text) {
                Ok(v) => {
                    values.insert(k, v);
                }
                Err(msg) => diags.push(Diagnostic::error(key, msg)),
            },
        }
    }

    let text = |k: &str| match values.get(k) {
        Some(Value::Text(s)) => Some(s.clone()),
        _ => None,
    };
    let one = |k: &str| match values.get(k) {
        Some(Value::Numbers(v)) => v.first().copied(),
        _ => None,
    };
    let many = |k: &str| match values.get(k) {
        Some(Value::Numbers(v)) => Some(v.clone()),
        _ => None,
    };
    let int = |k: &str| match values.get(k) {
        Some(Value::Integers(v)) => v.first().copied(),
        _ => None,
    };
    let ints = |k: &str| match values.get(k) {
        Some(Value::Integers(v)) => Some(v.clone()),
        _ => None,
    };
    let flag = |k: &str| match values.get(k) {
        Some(Value::Flag(b)) => Some(*b),
        _ => None,
    };
    let present = |k: &str| raw.entries.contains_key(k);

    let command = match text("command") {
        None if !present("command") => {
            diags.push(Diagnostic::error("command", "missing"));
            None
        }
        None => None,
        Some(s) => match s.parse::<Command>() {
            Ok(c) => Some(c),
            Err(e) => {
                diags.push(Diagnostic::error("command", e));
                None
            }
        },
    };
    let Some(command) = command else {
        return (None, diags);
    };

    let require = |k: &str, diags: &mut Vec<Diagnostic>| {
        if !present(k) {
            diags.push(Diagnostic::error(k, format!("required by `{command}`")));
        }
    };

    let needs_ions = command != Command::Ratio;
    if needs_ions {
        require("ions.m1", &mut diags);
        require("ions.m2", &mut diags);
        require("protocol.theta_f", &mut diags);
        require("protocol.t_f", &mut diags);
    }
    let masses = [one("ions.m1").unwrap_or(f64::NAN), one("ions.m2").unwrap_or(f64::NAN)];
    for (k, m) in [("ions.m1", masses[0]), ("ions.m2", masses[1])] {
        if present(k) && m.is_finite() && m <= 0.0 {
            diags.push(Diagnostic::error(k, "mass must be positive"));
        }
    }

    let mut trap_frequency = one("trap.frequency");
    if let Some(k) = one("trap.spring") {
        if trap_frequency.is_some() {
            diags.push(Diagnostic::error("trap.spring", "give either trap.frequency or trap.spring, not both"));
        } else if k > 0.0 && masses[0] > 0.0 {
            trap_frequency = Some((k / masses[0]).sqrt());
        } else {
            diags.push(Diagnostic::error("trap.spring", "spring constant must be positive"));
        }
    }
    if let Some(w) = trap_frequency {
        if w <= 0.0 {
            diags.push(Diagnostic::error("trap.frequency", "frequency must be positive"));
        }
    }
    if matches!(command, Command::DesignNm | Command::DesignDirect | Command::Verify | Command::Sweep)
        && trap_frequency.is_none()
        && !present("trap.spring")
    {
        diags.push(Diagnostic::error("trap.frequency", format!("required by `{command}`")));
    }

    let doublewell = if command == Command::Doublewell {
        require("doublewell.curvature", &mut diags);
        require("doublewell.beta", &mut diags);
        match (one("doublewell.curvature"), one("doublewell.beta")) {
            (Some(curvature), Some(beta)) => {
                if beta <= 0.0 {
                    diags.push(Diagnostic::error("doublewell.beta", "quartic coefficient must be positive"));
                }
                Some(DoubleWellSpec { curvature, beta, samples: int("doublewell.samples").unwrap_or(2000) as usize })
            }
            _ => None,
        }
    } else {
        None
    };

    let t_f = many("protocol.t_f").unwrap_or_default();
    if t_f.iter().any(|&t| t <= 0.0) {
        diags.push(Diagnostic::error("protocol.t_f", "durations must be positive"));
    }
    if command != Command::Sweep && t_f.len() > 1 {
        diags.push(Diagnostic::error("protocol.t_f", format!("`{command}` takes a single duration")));
    }
    let coefficients = many("protocol.coefficients");
    let n_free: Vec<usize> = ints("protocol.n_free")
        .map(|v| v.into_iter().map(|n| n as usize).collect())
        .unwrap_or_else(|| vec![coefficients.as_ref().map_or(0, Vec::len)]);
    if n_free.iter().any(|&n| n > ionrot_core::ansatz::MAX_FREE) {
        diags.push(Diagnostic::error("protocol.n_free", format!("at most {} free coefficients", ionrot_core::ansatz::MAX_FREE)));
    }
    if command != Command::Sweep && n_free.len() > 1 {
        diags.push(Diagnostic::error("protocol.n_free", format!("`{command}` takes a single value")));
    }
    if let Some(c) = &coefficients {
        if c.len() > ionrot_core::ansatz::MAX_FREE {
            diags.push(Diagnostic::error("protocol.coefficients", "at most 4 coefficients"));
        } else if present("protocol.n_free") && n_free != [c.len()] {
            diags.push(Diagnostic::error("protocol.coefficients", "length does not match protocol.n_free"));
        }
        if command == Command::Sweep {
            diags.push(Diagnostic::error("protocol.coefficients", "`sweep` designs its own coefficients"));
        }
    }
    if command == Command::Verify && coefficients.is_none() && n_free.first().is_some_and(|&n| n > 0) {
        diags.push(Diagnostic::error("protocol.coefficients", "`verify` needs fixed coefficients when n_free > 0"));
    }

    let equal = (masses[0] - masses[1]).abs() <= 1e-12 * masses[0].abs();
    let nm_sweep = command == Command::Sweep && text("sweep.method").as_deref().unwrap_or("nm") == "nm";
    if (command == Command::DesignNm || nm_sweep) && masses.iter().all(|m| m.is_finite()) && !equal {
        diags.push(Diagnostic::error("ions.m2", "normal-mode design needs two ions of equal mass"));
    }

    let sweep_method = match text("sweep.method").as_deref() {
        None | Some("nm") => SweepMethod::Nm,
        Some("direct") => SweepMethod::Direct,
        Some(other) => {
            diags.push(Diagnostic::error("sweep.method", format!("expected nm or direct, got `{other}`")));
            SweepMethod::Nm
        }
    };

    let ratio = if command == Command::Ratio {
        require("ratio.r", &mut diags);
        require("ratio.theta_dot", &mut diags);
        one("ratio.r").zip(one("ratio.theta_dot"))
    } else {
        None
    };

    let sim = SimSpec {
        grid: int("sim.grid").unwrap_or(256) as usize,
        half_width: one("sim.half_width").unwrap_or(20.0),
        dt: one("sim.dt"),
        samples: int("sim.samples").unwrap_or(100) as usize,
    };
    if present("sim.grid") && (sim.grid < 8 || !sim.grid.is_power_of_two()) {
        diags.push(Diagnostic::error("sim.grid", "grid size must be a power of two, at least 8"));
    }
    if sim.half_width < 6.0 {
        diags.push(Diagnostic::error(
            "sim.half_width",
            format!("grid half-width {} is below the 6 ground-state-width margin", sim.half_width),
        ));
    } else if 2.0 * sim.half_width / sim.grid as f64 > 0.5 {
        diags.push(Diagnostic::warning(
            Some("sim.grid"),
            "fewer than two grid points per ground-state width",
        ));
    }
    if sim.dt.is_some_and(|dt| dt <= 0.0) {
        diags.push(Diagnostic::error("sim.dt", "time step must be positive"));
    }

    if diags.iter().any(|d| d.severity == Severity::Error) {
        return (None, diags);
    }

    let config = RunConfig {
        command,
        seed: int("seed").unwrap_or(0),
        masses,
        trap_frequency,
        doublewell,
        protocol: ProtocolSpec {
            theta_f: one("protocol.theta_f").unwrap_or(0.0),
            t_f,
            n_free,
            coefficients,
        },
        sim,
        max_iterations: int("design.max_iterations").unwrap_or(2000) as usize,
        restarts: int("design.restarts").unwrap_or(0) as usize,
        sweep_method,
        sweep_verify: flag("sweep.verify").unwrap_or(false),
        ratio,
        output_samples: int("output.samples").unwrap_or(200) as usize,
    };
    diags.extend(regime_warnings(&config));
    (Some(config), diags)
}

/// Flags protocols whose plain (`c = 0`) form spins faster than the softest
/// ion's trap frequency, where an effective spring turns repulsive.
fn regime_warnings(config: &RunConfig) -> Vec<Diagnostic> {
    let Some(w1) = config.trap_frequency else {
        return Vec::new();
    };
    let softest = w1 * (config.masses[0] / config.masses[0].max(config.masses[1])).sqrt();
    let mut out = Vec::new();
    for &t_f in &config.protocol.t_f {
        let Ok(plain) = RotationAnsatz::plain(config.protocol.theta_f, t_f) else {
            continue;
        };
        let peak = plain.max_abs_theta_dot();
        if peak > softest {
            out.push(Diagnostic::warning(
                Some("protocol.t_f"),
                format!(
                    "inverted effective potential interval: at t_f = {t_f} us the plain protocol peaks at {peak:.3} rad/us, above the softest trap frequency {softest:.3} rad/us"
                ),
            ));
        }
    }
    out
}
