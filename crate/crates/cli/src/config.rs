//! Scenario files: flat `key = value` lines grouped under `[section]`
//! headers. `#` starts a comment. Keys outside any section belong to the top
//! level. Unknown sections or keys are errors.
//!
//! ```text
//! mode = simulate
//! seed = 7
//!
//! [grid]
//! n = 64
//!
//! [time]
//! t = 4.0
//! dt = 0.002
//!
//! [initial]
//! preset = gaussian
//! mu = 0.2
//! sigma = 0.15
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use slosh::chebyshev::DEFAULT_SIZE;
use slosh::control::DEFAULT_MAX_ITER;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Eigen,
    Control,
    Verify,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Eigen => "eigen",
            Mode::Control => "control",
            Mode::Verify => "verify",
        }
    }

    fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "simulate" => Ok(Mode::Simulate),
            "eigen" => Ok(Mode::Eigen),
            "control" => Ok(Mode::Control),
            "verify" => Ok(Mode::Verify),
            other => err(format!("unknown mode {other:?}")),
        }
    }
}

/// Initial displacement. Velocity is always given as coefficients (default 0).
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Zero,
    Eigenmode(usize),
    Gaussian { mu: f64, sigma: f64 },
    Coeffs(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhsKind {
    Zero,
    Linear(f64),
    Sine(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Zero,
    /// `(e_n, 0)`.
    Eigenmode(usize),
    Coeffs {
        g0: Vec<f64>,
        g1: Vec<f64>,
    },
    /// Forward image of a seeded smooth control, so exactly reachable.
    Manufactured,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    pub lo: f64,
    pub hi: f64,
    pub eps: f64,
    pub reg: f64,
    pub max_iter: usize,
    pub target: TargetSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub mode: Option<Mode>,
    pub seed: u64,
    pub n: usize,
    pub t: f64,
    pub dt: f64,
    pub initial: InitialData,
    pub velocity: Vec<f64>,
    pub rhs: RhsKind,
    pub modes: usize,
    pub control: ControlConfig,
    pub out: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "mode",
    "seed",
    "grid.n",
    "time.t",
    "time.dt",
    "initial.preset",
    "initial.n",
    "initial.mu",
    "initial.sigma",
    "initial.coeffs",
    "initial.velocity",
    "rhs.kind",
    "rhs.c",
    "eigen.count",
    "control.lo",
    "control.hi",
    "control.eps",
    "control.reg",
    "control.max_iter",
    "control.target",
    "control.target_n",
    "control.g0",
    "control.g1",
    "output.dir",
];

/// Raw `section.key → value` pairs with line numbers for messages.
fn tokenize(text: &str) -> Result<BTreeMap<String, (usize, String)>, ConfigError> {
    let mut section = String::new();
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError(format!("line {line_no}: unterminated section header")))?
                .trim();
            if !KEYS.iter().any(|k| k.starts_with(&format!("{name}."))) {
                return err(format!("line {line_no}: unknown section [{name}]"));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {line_no}: expected key = value")))?;
        let key = key.trim();
        let full = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        if !KEYS.contains(&full.as_str()) {
            return err(format!("line {line_no}: unknown key {full:?}"));
        }
        if map
            .insert(full.clone(), (line_no, value.trim().to_string()))
            .is_some()
        {
            return err(format!("line {line_no}: duplicate key {full:?}"));
        }
    }
    Ok(map)
}

struct Fields(BTreeMap<String, (usize, String)>);

impl Fields {
    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        self.0.get(key)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|e| ConfigError(format!("line {line}: {key} = {v:?}: {e}"))),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((_, v)) if v.is_empty() => Ok(Some(Vec::new())),
            Some((line, v)) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| ConfigError(format!("line {line}: {key}: {s:?}: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        err(format!("{name} must be positive, got {v}"))
    }
}

fn finite_list(name: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        err(format!("{name} has non-finite entries"))
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let f = Fields(tokenize(text)?);

        let mode = f.raw("mode").map(|(_, v)| Mode::parse(v)).transpose()?;
        let seed = f.parse("seed")?.unwrap_or(0);
        let n: usize = f.parse("grid.n")?.unwrap_or(DEFAULT_SIZE);
        if n < 2 {
            return err(format!("grid.n must be at least 2, got {n}"));
        }
        let t = positive("time.t", f.parse("time.t")?.unwrap_or(1.0))?;
        let dt = positive("time.dt", f.parse("time.dt")?.unwrap_or(t / 2000.0))?;

        let preset: String = f.parse("initial.preset")?.unwrap_or_else(|| "zero".into());
        let initial = match preset.as_str() {
            "zero" => InitialData::Zero,
            "eigenmode" => {
                let k: usize = f.parse("initial.n")?.unwrap_or(1);
                if k >= n {
                    return err(format!("initial.n = {k} must be below grid.n = {n}"));
                }
                InitialData::Eigenmode(k)
            }
            "gaussian" => {
                let mu: f64 = f.parse("initial.mu")?.unwrap_or(0.0);
                let sigma = positive("initial.sigma", f.parse("initial.sigma")?.unwrap_or(0.2))?;
                if !(mu.is_finite() && mu.abs() < 1.0) {
                    return err(format!("initial.mu must lie in (-1, 1), got {mu}"));
                }
                InitialData::Gaussian { mu, sigma }
            }
            "coeffs" => {
                let c = f.list("initial.coeffs")?.ok_or_else(|| {
                    ConfigError("initial.preset = coeffs needs initial.coeffs".into())
                })?;
                finite_list("initial.coeffs", &c)?;
                if c.len() > n {
                    return err(format!(
                        "initial.coeffs has {} entries, grid.n = {n}",
                        c.len()
                    ));
                }
                InitialData::Coeffs(c)
            }
            other => return err(format!("unknown initial.preset {other:?}")),
        };
        let velocity = f.list("initial.velocity")?.unwrap_or_default();
        finite_list("initial.velocity", &velocity)?;
        if velocity.len() > n {
            return err(format!(
                "initial.velocity has {} entries, grid.n = {n}",
                velocity.len()
            ));
        }

        let kind: String = f.parse("rhs.kind")?.unwrap_or_else(|| "zero".into());
        let c: f64 = f.parse("rhs.c")?.unwrap_or(0.5);
        let rhs = match kind.as_str() {
            "zero" => RhsKind::Zero,
            "linear" => RhsKind::Linear(positive("rhs.c", c)?),
            "sine" => RhsKind::Sine(positive("rhs.c", c)?),
            other => return err(format!("unknown rhs.kind {other:?}")),
        };

        let modes: usize = f.parse("eigen.count")?.unwrap_or(8);
        if modes == 0 || modes > n {
            return err(format!("eigen.count must be in 1..={n}, got {modes}"));
        }

        let lo: f64 = f.parse("control.lo")?.unwrap_or(-0.6);
        let hi: f64 = f.parse("control.hi")?.unwrap_or(-0.1);
        if !(-1.0 < lo && lo < hi && hi < 1.0) {
            return err(format!(
                "control window ({lo}, {hi}) must satisfy -1 < lo < hi < 1"
            ));
        }
        let eps = positive("control.eps", f.parse("control.eps")?.unwrap_or(1e-6))?;
        let reg: f64 = f.parse("control.reg")?.unwrap_or(0.0);
        if !(reg.is_finite() && reg >= 0.0) {
            return err(format!("control.reg must be non-negative, got {reg}"));
        }
        let max_iter: usize = f.parse("control.max_iter")?.unwrap_or(DEFAULT_MAX_ITER);
        if max_iter == 0 {
            return err("control.max_iter must be positive");
        }
        let target_kind: String = f
            .parse("control.target")?
            .unwrap_or_else(|| "manufactured".into());
        let target = match target_kind.as_str() {
            "zero" => TargetSpec::Zero,
            "manufactured" => TargetSpec::Manufactured,
            "eigenmode" => {
                let k: usize = f.parse("control.target_n")?.unwrap_or(1);
                if k >= n {
                    return err(format!("control.target_n = {k} must be below grid.n = {n}"));
                }
                TargetSpec::Eigenmode(k)
            }
            "coeffs" => {
                let g0 = f.list("control.g0")?.unwrap_or_default();
                let g1 = f.list("control.g1")?.unwrap_or_default();
                finite_list("control.g0", &g0)?;
                finite_list("control.g1", &g1)?;
                if g0.len() > n || g1.len() > n {
                    return err(format!(
                        "control target has more than grid.n = {n} coefficients"
                    ));
                }
                TargetSpec::Coeffs { g0, g1 }
            }
            other => return err(format!("unknown control.target {other:?}")),
        };

        let out = f.raw("output.dir").map(|(_, v)| PathBuf::from(v));

        Ok(Self {
            mode,
            seed,
            n,
            t,
            dt,
            initial,
            velocity,
            rhs,
            modes,
            control: ControlConfig {
                lo,
                hi,
                eps,
                reg,
                max_iter,
                target,
            },
            out,
        })
    }

    /// Every setting with defaults resolved, as `config.*` report entries.
    pub fn effective(&self, mode: Mode) -> Vec<(String, String)> {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut e: Vec<(String, String)> = vec![
            ("mode".into(), mode.name().into()),
            ("seed".into(), self.seed.to_string()),
            ("grid.n".into(), self.n.to_string()),
            ("time.t".into(), format!("{:?}", self.t)),
            ("time.dt".into(), format!("{:?}", self.dt)),
        ];
        match &self.initial {
            InitialData::Zero => e.push(("initial.preset".into(), "zero".into())),
            InitialData::Eigenmode(k) => {
                e.push(("initial.preset".into(), "eigenmode".into()));
                e.push(("initial.n".into(), k.to_string()));
            }
            InitialData::Gaussian { mu, sigma } => {
                e.push(("initial.preset".into(), "gaussian".into()));
                e.push(("initial.mu".into(), format!("{mu:?}")));
                e.push(("initial.sigma".into(), format!("{sigma:?}")));
            }
            InitialData::Coeffs(c) => {
                e.push(("initial.preset".into(), "coeffs".into()));
                e.push(("initial.coeffs".into(), list(c)));
            }
        }
        e.push(("initial.velocity".into(), list(&self.velocity)));
        match self.rhs {
            RhsKind::Zero => e.push(("rhs.kind".into(), "zero".into())),
            RhsKind::Linear(c) => {
                e.push(("rhs.kind".into(), "linear".into()));
                e.push(("rhs.c".into(), format!("{c:?}")));
            }
            RhsKind::Sine(c) => {
                e.push(("rhs.kind".into(), "sine".into()));
                e.push(("rhs.c".into(), format!("{c:?}")));
            }
        }
        e.push(("eigen.count".into(), self.modes.to_string()));
        let c = &self.control;
        e.push(("control.lo".into(), format!("{:?}", c.lo)));
        e.push(("control.hi".into(), format!("{:?}", c.hi)));
        e.push(("control.eps".into(), format!("{:?}", c.eps)));
        e.push(("control.reg".into(), format!("{:?}", c.reg)));
        e.push(("control.max_iter".into(), c.max_iter.to_string()));
        match &c.target {
            TargetSpec::Zero => e.push(("control.target".into(), "zero".into())),
            TargetSpec::Manufactured => e.push(("control.target".into(), "manufactured".into())),
            TargetSpec::Eigenmode(k) => {
                e.push(("control.target".into(), "eigenmode".into()));
                e.push(("control.target_n".into(), k.to_string()));
            }
            TargetSpec::Coeffs { g0, g1 } => {
                e.push(("control.target".into(), "coeffs".into()));
                e.push(("control.g0".into(), list(g0)));
                e.push(("control.g1".into(), list(g1)));
            }
        }
        e.into_iter()
            .map(|(k, v)| (format!("config.{k}"), v))
            .collect()
    }
}
