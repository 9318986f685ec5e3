//! Experiment configuration files and their validation.
//!
//! A config is a single JSON object. `task` selects the experiment; the
//! remaining fields are task parameters, most of them optional. File
//! references are resolved against the directory holding the config, and
//! the names of built-in fixtures (`FIX-A`, `FIX-A/Q1`, `FIX-A/Q2`) may be
//! used wherever a lattice, measure or one-step structure file is expected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use dynrisk::gexp::TerminalPayoff;
use dynrisk::skorokhod::StepPath;
use dynrisk::NodeRef;
use serde::Deserialize;

pub const DEFAULT_MAX_NODES: usize = 100_000;
pub const DEFAULT_SELECTION_CAP: usize = dynrisk::dynamics::DEFAULT_SELECTION_CAP;
pub const DEFAULT_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Eval,
    Penalty,
    Consistency,
    Stability,
    Gexp,
    Skorokhod,
    AcceptanceSuite,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Eval => "eval",
            Task::Penalty => "penalty",
            Task::Consistency => "consistency",
            Task::Stability => "stability",
            Task::Gexp => "gexp",
            Task::Skorokhod => "skorokhod",
            Task::AcceptanceSuite => "acceptance-suite",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    /// Output directory, relative to the config file.
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub lattice: Option<String>,
    #[serde(default)]
    pub max_nodes: Option<usize>,
    /// Dual representation file for `eval` and `penalty`.
    #[serde(default)]
    pub dual: Option<String>,
    /// Zero-penalty representation built from `measures`, used when `dual`
    /// is absent.
    #[serde(default)]
    pub sublinear: Option<Horizon>,
    #[serde(default)]
    pub measures: Vec<String>,
    /// Measures whose minimal penalty the `penalty` task computes.
    #[serde(default)]
    pub queries: Vec<String>,
    /// Capacity exponent for the family formed by `measures`.
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub variable: Option<VariableSpec>,
    /// One-step structure file for `consistency`.
    #[serde(default)]
    pub structure: Option<String>,
    #[serde(default)]
    pub selection_cap: Option<usize>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub stopping_time: Option<StopSpec>,
    #[serde(default)]
    pub gexp: Option<GexpSpec>,
    #[serde(default)]
    pub skorokhod: Option<SkorokhodSpec>,
    /// Overrides of the task's check tolerances, by check name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizon {
    pub s: usize,
    pub t: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VariableSpec {
    /// First coordinate of the lattice position at `time`.
    Coordinate { time: usize },
    Values { time: usize, values: Vec<f64> },
    /// `count` variables uniform on `[-scale, scale]`, drawn from the seed.
    Random {
        time: usize,
        #[serde(default = "one_usize")]
        count: usize,
        #[serde(default = "one")]
        scale: f64,
    },
}

impl VariableSpec {
    pub fn time(&self) -> usize {
        match self {
            VariableSpec::Coordinate { time } | VariableSpec::Values { time, .. } | VariableSpec::Random { time, .. } => {
                *time
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    /// Deterministic stopping time.
    #[serde(default)]
    pub time: Option<usize>,
    /// Explicit stop set.
    #[serde(default)]
    pub nodes: Option<Vec<NodeRef>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Lattice,
    Pde,
    #[default]
    Both,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GexpSpec {
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub maturity: f64,
    pub dt: f64,
    /// Space step; defaults to `kappa · sigma_high · sqrt(dt)`.
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub kappa: Option<f64>,
    /// PDE half-width in space units.
    #[serde(default)]
    pub radius: Option<f64>,
    /// Half-width in levels for both engines; the lattice default covers
    /// every reachable level.
    #[serde(default)]
    pub levels: Option<usize>,
    pub payoff: TerminalPayoff,
    #[serde(default)]
    pub engine: Engine,
    /// Reference value for `Ê(payoff)`.
    #[serde(default)]
    pub expected: Option<f64>,
    /// Reference value for `−Ê(−payoff)`.
    #[serde(default)]
    pub expected_lower: Option<f64>,
}

pub const DEFAULT_KAPPA: f64 = 1.5;
pub const DEFAULT_RADIUS: f64 = 2.0;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case", deny_unknown_fields)]
pub enum Metric {
    Dm { m: u32 },
    Dhat { t: f64, max_m: u32 },
    J1 { horizon: f64 },
}

#[derive(Debug, Clone, Deserialize)]
pub struct SkorokhodSpec {
    #[serde(flatten)]
    pub metric: Metric,
    pub pairs: Vec<(StepPath, StepPath)>,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

/// Tolerance names accepted per task, with defaults.
pub fn default_tolerances(task: Task) -> &'static [(&'static str, f64)] {
    match task {
        Task::Consistency => &[("recursion", 1e-9), ("cocycle", 1e-6)],
        Task::Gexp => &[("expected", 2e-3), ("expected_lower", 1e-3), ("engine_gap", 1e-3)],
        Task::Skorokhod => &[("symmetry", 0.0)],
        Task::Eval => &[("acceptance", dynrisk::risk::ACCEPTANCE_TOLERANCE)],
        Task::Penalty | Task::Stability | Task::AcceptanceSuite => &[],
    }
}

/// A finding about a config, optionally located on a line of its text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

/// A parsed config with the text it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub text: String,
    pub path: PathBuf,
}

impl LoadedConfig {
    pub fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or_else(|| Path::new("."))
    }

    /// Resolves a file reference against the config directory.
    pub fn resolve(&self, reference: &str) -> PathBuf {
        let p = Path::new(reference);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir().join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(self.config.out.as_deref().unwrap_or("out"))
    }

    /// First line mentioning `"key"`, for locating diagnostics.
    pub fn line_of(&self, key: &str) -> Option<usize> {
        let needle = format!("\"{key}\"");
        self.text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
    }

    fn diag(&self, key: &str, message: String) -> Diagnostic {
        Diagnostic {
            line: self.line_of(key),
            column: None,
            message,
        }
    }
}

/// Parses config text; schema errors carry their line and column.
pub fn parse_config(text: &str, path: &Path) -> Result<LoadedConfig, Diagnostic> {
    match serde_json::from_str::<ExperimentConfig>(text) {
        Ok(config) => Ok(LoadedConfig {
            config,
            text: text.to_string(),
            path: path.to_path_buf(),
        }),
        Err(e) => Err(json_diagnostic(&e)),
    }
}

pub fn json_diagnostic(e: &serde_json::Error) -> Diagnostic {
    let full = e.to_string();
    // serde_json appends " at line L column C"; keep only the message part.
    let message = match full.rfind(" at line ") {
        Some(i) => full[..i].to_string(),
        None => full,
    };
    Diagnostic {
        line: (e.line() > 0).then_some(e.line()),
        column: (e.column() > 0).then_some(e.column()),
        message,
    }
}

pub fn is_builtin(reference: &str) -> bool {
    matches!(reference, "FIX-A" | "FIX-A/Q1" | "FIX-A/Q2")
}

/// Schema and cross-field checks that do not run any computation. Every
/// violation found is listed.
pub fn validate_config(loaded: &LoadedConfig) -> Vec<Diagnostic> {
    let c = &loaded.config;
    let mut out = Vec::new();
    let file = |key: &str, reference: &str, out: &mut Vec<Diagnostic>| {
        if !is_builtin(reference) && !loaded.resolve(reference).is_file() {
            out.push(loaded.diag(key, format!("`{key}`: file not found: {reference}")));
        }
    };
    let require = |present: bool, key: &str, out: &mut Vec<Diagnostic>| {
        if !present {
            out.push(Diagnostic {
                line: loaded.line_of("task"),
                column: None,
                message: format!("task `{}` requires `{key}`", c.task.name()),
            });
        }
    };

    if let Some(l) = &c.lattice {
        file("lattice", l, &mut out);
    }
    if let Some(d) = &c.dual {
        file("dual", d, &mut out);
    }
    if let Some(s) = &c.structure {
        file("structure", s, &mut out);
    }
    for m in &c.measures {
        file("measures", m, &mut out);
    }
    for m in &c.queries {
        file("queries", m, &mut out);
    }

    if let Some(p) = c.p {
        if !(p.is_finite() && p >= 1.0) {
            out.push(loaded.diag("p", format!("`p` must be a finite number >= 1, got {p}")));
        }
    }
    for (key, v) in [
        ("max_nodes", c.max_nodes),
        ("selection_cap", c.selection_cap),
        ("samples", c.samples),
    ] {
        if v == Some(0) {
            out.push(loaded.diag(key, format!("`{key}` must be positive")));
        }
    }
    let known = default_tolerances(c.task);
    for (k, v) in &c.tolerances {
        if !known.iter().any(|(name, _)| name == k) {
            let names: Vec<&str> = known.iter().map(|(n, _)| *n).collect();
            out.push(loaded.diag(
                k,
                format!("unknown tolerance `{k}` for task `{}` (known: {})", c.task.name(), names.join(", ")),
            ));
        } else if !(v.is_finite() && *v >= 0.0) {
            out.push(loaded.diag(k, format!("tolerance `{k}` must be finite and non-negative")));
        }
    }
    if let Some(VariableSpec::Random { count, scale, .. }) = &c.variable {
        if *count == 0 {
            out.push(loaded.diag("count", "`variable.count` must be positive".into()));
        }
        if !(scale.is_finite() && *scale > 0.0) {
            out.push(loaded.diag("scale", "`variable.scale` must be positive".into()));
        }
    }
    if let Some(h) = &c.sublinear {
        if h.s > h.t {
            out.push(loaded.diag("sublinear", format!("`sublinear.s` = {} exceeds `sublinear.t` = {}", h.s, h.t)));
        }
    }
    if let Some(st) = &c.stopping_time {
        if st.time.is_some() == st.nodes.is_some() {
            out.push(loaded.diag("stopping_time", "`stopping_time` needs exactly one of `time` or `nodes`".into()));
        }
    }

    match c.task {
        Task::Eval => {
            require(c.lattice.is_some(), "lattice", &mut out);
            require(c.dual.is_some() || c.sublinear.is_some(), "dual or sublinear", &mut out);
            require(c.variable.is_some(), "variable", &mut out);
            if c.dual.is_none() && c.sublinear.is_some() {
                require(!c.measures.is_empty(), "measures", &mut out);
            }
        }
        Task::Penalty => {
            require(c.lattice.is_some(), "lattice", &mut out);
            require(c.dual.is_some() || c.sublinear.is_some(), "dual or sublinear", &mut out);
            if c.dual.is_none() && c.sublinear.is_some() {
                require(!c.measures.is_empty(), "measures", &mut out);
            }
            require(!c.queries.is_empty(), "queries", &mut out);
        }
        Task::Consistency => {
            require(c.lattice.is_some(), "lattice", &mut out);
            require(c.structure.is_some(), "structure", &mut out);
        }
        Task::Stability => {
            require(c.lattice.is_some(), "lattice", &mut out);
            require(!c.measures.is_empty(), "measures", &mut out);
        }
        Task::Gexp => {
            require(c.gexp.is_some(), "gexp", &mut out);
            if let Some(g) = &c.gexp {
                validate_gexp(loaded, g, &mut out);
            }
        }
        Task::Skorokhod => {
            require(c.skorokhod.is_some(), "skorokhod", &mut out);
            if let Some(s) = &c.skorokhod {
                match s.metric {
                    Metric::Dm { m } | Metric::Dhat { max_m: m, .. } if m == 0 => {
                        out.push(loaded.diag("metric", "damping index must be >= 1".into()))
                    }
                    Metric::Dhat { t, .. } if !(t > 0.0 && t.is_finite()) => {
                        out.push(loaded.diag("metric", "`t` must be positive".into()))
                    }
                    Metric::J1 { horizon } if !(horizon > 0.0 && horizon.is_finite()) => {
                        out.push(loaded.diag("metric", "`horizon` must be positive".into()))
                    }
                    _ => {}
                }
                if s.pairs.is_empty() {
                    out.push(loaded.diag("pairs", "`pairs` is empty".into()));
                }
            }
        }
        Task::AcceptanceSuite => {}
    }
    out
}

fn validate_gexp(loaded: &LoadedConfig, g: &GexpSpec, out: &mut Vec<Diagnostic>) {
    let positive = |v: f64| v > 0.0 && v.is_finite();
    if !(g.sigma_low >= 0.0 && g.sigma_low <= g.sigma_high && g.sigma_high.is_finite()) {
        out.push(loaded.diag("sigma_low", "volatility band needs 0 <= sigma_low <= sigma_high".into()));
    }
    for (key, v) in [("maturity", g.maturity), ("dt", g.dt)] {
        if !positive(v) {
            out.push(loaded.diag(key, format!("`{key}` must be positive")));
        }
    }
    if positive(g.maturity) && positive(g.dt) {
        let n = (g.maturity / g.dt).round();
        if n < 1.0 || (n * g.dt - g.maturity).abs() > 1e-9 * g.maturity.max(1.0) {
            out.push(loaded.diag("dt", format!("maturity {} is not a whole number of steps of {}", g.maturity, g.dt)));
        }
    }
    if g.h.is_some() && g.kappa.is_some() {
        out.push(loaded.diag("kappa", "give at most one of `h` and `kappa`".into()));
    }
    for (key, v) in [("h", g.h), ("kappa", g.kappa), ("radius", g.radius)] {
        if let Some(v) = v {
            if !positive(v) {
                out.push(loaded.diag(key, format!("`{key}` must be positive")));
            }
        }
    }
    if g.levels == Some(0) {
        out.push(loaded.diag("levels", "`levels` must be positive".into()));
    }
    if let Err(e) = g.payoff.validate() {
        out.push(loaded.diag("payoff", e.to_string()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> LoadedConfig {
        parse_config(text, Path::new("/nonexistent/config.json")).unwrap()
    }

    #[test]
    fn schema_errors_are_located() {
        let e = parse_config("{\n  \"task\": \"eval\",\n  \"bogus\": 1\n}", Path::new("c.json")).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("bogus"));
    }

    #[test]
    fn fixture_eval_is_clean() {
        let c = load(
            r#"{"task":"eval","lattice":"FIX-A","sublinear":{"s":1,"t":2},
               "measures":["FIX-A/Q1","FIX-A/Q2"],"variable":{"kind":"coordinate","time":2}}"#,
        );
        assert!(validate_config(&c).is_empty());
    }

    #[test]
    fn each_violation_is_listed() {
        let c = load(
            "{\n\"task\":\"eval\",\n\"lattice\":\"missing.json\",\n\"p\":-1,\n\"sublinear\":{\"s\":0,\"t\":2},\n\"measures\":[\"FIX-A/Q1\"],\n\"variable\":{\"kind\":\"coordinate\",\"time\":2}\n}",
        );
        let d = validate_config(&c);
        assert_eq!(d.len(), 2, "{d:?}");
        assert_eq!(d[0].line, Some(3));
        assert!(d[0].message.contains("missing.json"));
        assert_eq!(d[1].line, Some(4));
    }

    #[test]
    fn gexp_grid_checks() {
        let c = load(
            r#"{"task":"gexp","gexp":{"sigma_low":0.1,"sigma_high":0.2,"maturity":1,"dt":0.3,
               "h":0.1,"kappa":1.2,"payoff":{"kind":"square"}}}"#,
        );
        let d = validate_config(&c);
        assert_eq!(d.len(), 2, "{d:?}");
    }
}
