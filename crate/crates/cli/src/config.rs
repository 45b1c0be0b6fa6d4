//! Strict `key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment. Numbers may be written as
//! constant expressions (`2*pi`). Lists are comma-separated. Coordinates in
//! `active` and in expressions are 1-based (`x1..x2n`).

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use volform_core::expr::Expr;
use volform_core::geodesic::SubsolutionSearch;
use volform_core::grid::DiffScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    InspectMetric,
    SolveGeodesic,
    SweepEps,
    Verify,
    SolveCy,
}

impl Command {
    pub const ALL: [Command; 5] =
        [Command::InspectMetric, Command::SolveGeodesic, Command::SweepEps, Command::Verify, Command::SolveCy];

    pub fn name(self) -> &'static str {
        match self {
            Command::InspectMetric => "inspect-metric",
            Command::SolveGeodesic => "solve-geodesic",
            Command::SweepEps => "sweep-eps",
            Command::Verify => "verify",
            Command::SolveCy => "solve-cy",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// `flat`, `conformal(f)`, `kahler_perturbed(ρ)`, `balanced_root(f)` or `file(path)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "arg", rename_all = "snake_case")]
pub enum MetricSpec {
    Flat,
    Conformal(String),
    KahlerPerturbed(String),
    BalancedRoot(String),
    File(PathBuf),
}

impl MetricSpec {
    fn parse(s: &str) -> Result<Self, String> {
        if s == "flat" {
            return Ok(MetricSpec::Flat);
        }
        let open = s.find('(').ok_or_else(|| format!("unrecognized metric spec `{s}`"))?;
        if !s.ends_with(')') {
            return Err(format!("unbalanced parentheses in `{s}`"));
        }
        let (head, arg) = (s[..open].trim(), s[open + 1..s.len() - 1].trim());
        let expr = |arg: &str| Expr::parse(arg).map(|_| arg.to_string()).map_err(|e| e.to_string());
        match head {
            "conformal" => expr(arg).map(MetricSpec::Conformal),
            "kahler_perturbed" => expr(arg).map(MetricSpec::KahlerPerturbed),
            "balanced_root" => expr(arg).map(MetricSpec::BalancedRoot),
            "file" if !arg.is_empty() => Ok(MetricSpec::File(PathBuf::from(arg))),
            _ => Err(format!("unrecognized metric spec `{s}`")),
        }
    }

    fn expr(&self) -> Option<&str> {
        match self {
            MetricSpec::Conformal(e) | MetricSpec::KahlerPerturbed(e) | MetricSpec::BalancedRoot(e) => Some(e),
            _ => None,
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricSpec::Flat => write!(f, "flat"),
            MetricSpec::Conformal(e) => write!(f, "conformal({e})"),
            MetricSpec::KahlerPerturbed(e) => write!(f, "kahler_perturbed({e})"),
            MetricSpec::BalancedRoot(e) => write!(f, "balanced_root({e})"),
            MetricSpec::File(p) => write!(f, "file({})", p.display()),
        }
    }
}

/// A scalar field given by an expression or a field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSource {
    Expr(String),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    /// Residual tolerance of the Newton solvers; margin tolerance for `verify`.
    pub tol: f64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub out: Option<PathBuf>,

    pub n: usize,
    pub period: f64,
    pub resolution: usize,
    /// 1-based active coordinates.
    pub active: Vec<usize>,
    pub scheme: DiffScheme,

    pub metric: MetricSpec,
    pub p: usize,
    pub epsilon: f64,
    pub epsilon_values: Vec<f64>,
    /// Largest ε a geodesic run accepts; larger values fail the run with exit code 2.
    pub epsilon_max: f64,
    pub phi0: Option<FieldSource>,
    pub phi1: Option<FieldSource>,
    pub nt: usize,
    pub max_iter: usize,
    pub s_step: f64,
    pub min_step: f64,
    pub x_tol: f64,
    pub sub_a_values: Vec<f64>,
    pub sub_b_values: Vec<f64>,

    pub input: Option<PathBuf>,
    pub lemma_samples: Vec<usize>,
    pub lemma_dim: usize,
    pub energy_probes: usize,

    pub alpha_spec: MetricSpec,
    pub omega_spec: MetricSpec,
    pub psi: Option<FieldSource>,
    pub rho_expr: Option<String>,
    pub chi: String,
    pub mean: f64,
    pub psi_amplitudes: Vec<f64>,
    pub balanced_tol: f64,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let search = SubsolutionSearch::default();
        Self {
            command,
            seed: 0,
            tol: 1e-9,
            threads: 0,
            out: None,
            n: 3,
            period: 2.0 * std::f64::consts::PI,
            resolution: 12,
            active: vec![1, 3],
            scheme: DiffScheme::Spectral,
            metric: MetricSpec::Flat,
            p: 2,
            epsilon: 1e-2,
            epsilon_values: vec![1e-1, 5e-2, 2e-2, 1e-2],
            epsilon_max: 1.0,
            phi0: None,
            phi1: None,
            nt: 32,
            max_iter: 50,
            s_step: 0.1,
            min_step: 1e-6,
            x_tol: 1e-10,
            sub_a_values: search.a_values,
            sub_b_values: search.b_values,
            input: None,
            lemma_samples: vec![1000, 1000, 200],
            lemma_dim: 3,
            energy_probes: 4,
            alpha_spec: MetricSpec::Flat,
            omega_spec: MetricSpec::Flat,
            psi: None,
            rho_expr: None,
            chi: "none".into(),
            mean: 0.0,
            psi_amplitudes: Vec::new(),
            balanced_tol: 1e-8,
        }
    }

    /// Canonical text: every key in a fixed order, absent optionals omitted.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let ulist = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        kv("command", self.command.name().into());
        kv("seed", self.seed.to_string());
        kv("tol", format!("{:?}", self.tol));
        kv("threads", self.threads.to_string());
        if let Some(o) = &self.out {
            kv("out", o.display().to_string());
        }
        kv("n", self.n.to_string());
        kv("period", format!("{:?}", self.period));
        kv("resolution", self.resolution.to_string());
        kv("active", ulist(&self.active));
        kv("scheme", scheme_name(self.scheme).into());
        kv("metric", self.metric.to_string());
        kv("p", self.p.to_string());
        kv("epsilon", format!("{:?}", self.epsilon));
        kv("epsilon_values", list(&self.epsilon_values));
        kv("epsilon_max", format!("{:?}", self.epsilon_max));
        for (name, src) in [("phi0", &self.phi0), ("phi1", &self.phi1), ("psi", &self.psi)] {
            match src {
                Some(FieldSource::Expr(e)) => kv(&format!("{name}_expr"), e.clone()),
                Some(FieldSource::File(p)) => kv(&format!("{name}_file"), p.display().to_string()),
                None => {}
            }
        }
        kv("nt", self.nt.to_string());
        kv("max_iter", self.max_iter.to_string());
        kv("s_step", format!("{:?}", self.s_step));
        kv("min_step", format!("{:?}", self.min_step));
        kv("x_tol", format!("{:?}", self.x_tol));
        kv("sub_a_values", list(&self.sub_a_values));
        kv("sub_b_values", list(&self.sub_b_values));
        if let Some(i) = &self.input {
            kv("input", i.display().to_string());
        }
        kv("lemma_samples", ulist(&self.lemma_samples));
        kv("lemma_dim", self.lemma_dim.to_string());
        kv("energy_probes", self.energy_probes.to_string());
        kv("alpha_spec", self.alpha_spec.to_string());
        kv("omega_spec", self.omega_spec.to_string());
        if let Some(r) = &self.rho_expr {
            kv("rho_expr", r.clone());
        }
        kv("chi", self.chi.clone());
        kv("mean", format!("{:?}", self.mean));
        kv("psi_amplitudes", list(&self.psi_amplitudes));
        kv("balanced_tol", format!("{:?}", self.balanced_tol));
        s
    }
}

fn scheme_name(s: DiffScheme) -> &'static str {
    match s {
        DiffScheme::Spectral => "spectral",
        DiffScheme::FiniteDifference4 => "fd4",
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` already set on line {first}")]
    DuplicateKey { line: usize, key: String, first: usize },
    #[error("line {line}: `{key}` expects {expected}, got `{value}`: {reason}")]
    TypeMismatch { line: usize, key: String, expected: &'static str, value: String, reason: String },
    #[error("missing required key `{key}` for command {command}")]
    MissingRequired { key: String, command: &'static str },
    #[error("line {line}: `{key}` is invalid: {reason}")]
    Invalid { line: usize, key: String, reason: String },
}

impl ConfigError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Syntax { line }
            | ConfigError::UnknownKey { line, .. }
            | ConfigError::DuplicateKey { line, .. }
            | ConfigError::TypeMismatch { line, .. }
            | ConfigError::Invalid { line, .. } => Some(*line),
            ConfigError::MissingRequired { .. } => None,
        }
    }
}

#[derive(Clone, Copy)]
enum Ty {
    Command,
    U64,
    Usize,
    F64,
    F64List,
    UsizeList,
    Scheme,
    Metric,
    Expr,
    Path,
    Word,
}

impl Ty {
    fn describe(self) -> &'static str {
        match self {
            Ty::Command => "a command name",
            Ty::U64 | Ty::Usize => "a non-negative integer",
            Ty::F64 => "a number",
            Ty::F64List => "a comma-separated list of numbers",
            Ty::UsizeList => "a comma-separated list of integers",
            Ty::Scheme => "`spectral` or `fd4`",
            Ty::Metric => "a metric spec",
            Ty::Expr => "an expression",
            Ty::Path => "a path",
            Ty::Word => "a name",
        }
    }
}

const KEYS: &[(&str, Ty)] = &[
    ("command", Ty::Command),
    ("seed", Ty::U64),
    ("tol", Ty::F64),
    ("threads", Ty::Usize),
    ("out", Ty::Path),
    ("n", Ty::Usize),
    ("period", Ty::F64),
    ("resolution", Ty::Usize),
    ("active", Ty::UsizeList),
    ("scheme", Ty::Scheme),
    ("metric", Ty::Metric),
    ("p", Ty::Usize),
    ("epsilon", Ty::F64),
    ("epsilon_values", Ty::F64List),
    ("epsilon_max", Ty::F64),
    ("phi0_expr", Ty::Expr),
    ("phi0_file", Ty::Path),
    ("phi1_expr", Ty::Expr),
    ("phi1_file", Ty::Path),
    ("nt", Ty::Usize),
    ("max_iter", Ty::Usize),
    ("s_step", Ty::F64),
    ("min_step", Ty::F64),
    ("x_tol", Ty::F64),
    ("sub_a_values", Ty::F64List),
    ("sub_b_values", Ty::F64List),
    ("input", Ty::Path),
    ("lemma_samples", Ty::UsizeList),
    ("lemma_dim", Ty::Usize),
    ("energy_probes", Ty::Usize),
    ("alpha_spec", Ty::Metric),
    ("omega_spec", Ty::Metric),
    ("psi_expr", Ty::Expr),
    ("psi_file", Ty::Path),
    ("rho_expr", Ty::Expr),
    ("chi", Ty::Word),
    ("mean", Ty::F64),
    ("psi_amplitudes", Ty::F64List),
    ("balanced_tol", Ty::F64),
];

#[derive(Debug, Clone)]
enum Value {
    Command(Command),
    Int(u64),
    F64(f64),
    F64List(Vec<f64>),
    UsizeList(Vec<usize>),
    Scheme(DiffScheme),
    Metric(MetricSpec),
    Text(String),
}

fn number(s: &str) -> Result<f64, String> {
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let e = Expr::parse(s).map_err(|e| e.to_string())?;
    e.check_dimension(0).map_err(|_| "constant expressions may not use coordinates".to_string())?;
    if e.depends_on_time() {
        return Err("constant expressions may not use t".into());
    }
    Ok(e.eval(&[], 0.0))
}

fn parse_value(ty: Ty, s: &str) -> Result<Value, String> {
    let list = |s: &str| -> Vec<String> {
        if s.is_empty() {
            Vec::new()
        } else {
            s.split(',').map(|x| x.trim().to_string()).collect()
        }
    };
    Ok(match ty {
        Ty::Command => Value::Command(Command::from_name(s).ok_or("unknown command")?),
        Ty::U64 | Ty::Usize => Value::Int(s.parse::<u64>().map_err(|e| e.to_string())?),
        Ty::F64 => Value::F64(number(s)?),
        Ty::F64List => Value::F64List(list(s).iter().map(|x| number(x)).collect::<Result<_, _>>()?),
        Ty::UsizeList => Value::UsizeList(
            list(s).iter().map(|x| x.parse::<usize>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?,
        ),
        Ty::Scheme => Value::Scheme(match s {
            "spectral" => DiffScheme::Spectral,
            "fd4" => DiffScheme::FiniteDifference4,
            _ => return Err("unknown scheme".into()),
        }),
        Ty::Metric => Value::Metric(MetricSpec::parse(s)?),
        Ty::Expr => {
            Expr::parse(s).map_err(|e| e.to_string())?;
            Value::Text(s.to_string())
        }
        Ty::Path => {
            if s.is_empty() {
                return Err("empty path".into());
            }
            Value::Text(s.to_string())
        }
        Ty::Word => {
            if s.is_empty() || !s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err("not a plain name".into());
            }
            Value::Text(s.to_string())
        }
    })
}

/// Parses a configuration whose `command` key is mandatory.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_for(text, None)
}

/// Parses a configuration; `command` falls back to `default_command` when absent.
pub fn parse_config_for(text: &str, default_command: Option<Command>) -> Result<RunConfig, ConfigError> {
    let mut seen: BTreeMap<&'static str, (usize, Value)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (k, v) = (k.trim(), v.trim());
        let &(key, ty) = KEYS
            .iter()
            .find(|(name, _)| *name == k)
            .ok_or_else(|| ConfigError::UnknownKey { line, key: k.to_string() })?;
        if let Some((first, _)) = seen.get(key) {
            return Err(ConfigError::DuplicateKey { line, key: key.into(), first: *first });
        }
        let value = parse_value(ty, v).map_err(|reason| ConfigError::TypeMismatch {
            line,
            key: key.into(),
            expected: ty.describe(),
            value: v.to_string(),
            reason,
        })?;
        seen.insert(key, (line, value));
    }
    let command = match seen.remove("command") {
        Some((_, Value::Command(c))) => c,
        _ => default_command.ok_or(ConfigError::MissingRequired { key: "command".into(), command: "any" })?,
    };
    let mut c = RunConfig::defaults(command);
    let lines: BTreeMap<&str, usize> = seen.iter().map(|(k, (l, _))| (*k, *l)).collect();
    let mut phi0_file = None;
    let mut phi1_file = None;
    let mut psi_file = None;
    for (key, (_, value)) in seen {
        let int = |v: &Value| match v {
            Value::Int(i) => *i,
            _ => unreachable!(),
        };
        let text = |v: Value| match v {
            Value::Text(s) => s,
            _ => unreachable!(),
        };
        match (key, value) {
            ("seed", v) => c.seed = int(&v),
            ("threads", v) => c.threads = int(&v) as usize,
            ("n", v) => c.n = int(&v) as usize,
            ("resolution", v) => c.resolution = int(&v) as usize,
            ("p", v) => c.p = int(&v) as usize,
            ("nt", v) => c.nt = int(&v) as usize,
            ("max_iter", v) => c.max_iter = int(&v) as usize,
            ("lemma_dim", v) => c.lemma_dim = int(&v) as usize,
            ("energy_probes", v) => c.energy_probes = int(&v) as usize,
            ("tol", Value::F64(x)) => c.tol = x,
            ("period", Value::F64(x)) => c.period = x,
            ("epsilon", Value::F64(x)) => c.epsilon = x,
            ("epsilon_max", Value::F64(x)) => c.epsilon_max = x,
            ("s_step", Value::F64(x)) => c.s_step = x,
            ("min_step", Value::F64(x)) => c.min_step = x,
            ("x_tol", Value::F64(x)) => c.x_tol = x,
            ("mean", Value::F64(x)) => c.mean = x,
            ("balanced_tol", Value::F64(x)) => c.balanced_tol = x,
            ("epsilon_values", Value::F64List(x)) => c.epsilon_values = x,
            ("sub_a_values", Value::F64List(x)) => c.sub_a_values = x,
            ("sub_b_values", Value::F64List(x)) => c.sub_b_values = x,
            ("psi_amplitudes", Value::F64List(x)) => c.psi_amplitudes = x,
            ("active", Value::UsizeList(x)) => c.active = x,
            ("lemma_samples", Value::UsizeList(x)) => c.lemma_samples = x,
            ("scheme", Value::Scheme(s)) => c.scheme = s,
            ("metric", Value::Metric(m)) => c.metric = m,
            ("alpha_spec", Value::Metric(m)) => c.alpha_spec = m,
            ("omega_spec", Value::Metric(m)) => c.omega_spec = m,
            ("out", v) => c.out = Some(PathBuf::from(text(v))),
            ("input", v) => c.input = Some(PathBuf::from(text(v))),
            ("phi0_expr", v) => c.phi0 = Some(FieldSource::Expr(text(v))),
            ("phi1_expr", v) => c.phi1 = Some(FieldSource::Expr(text(v))),
            ("psi_expr", v) => c.psi = Some(FieldSource::Expr(text(v))),
            ("phi0_file", v) => phi0_file = Some(PathBuf::from(text(v))),
            ("phi1_file", v) => phi1_file = Some(PathBuf::from(text(v))),
            ("psi_file", v) => psi_file = Some(PathBuf::from(text(v))),
            ("rho_expr", v) => c.rho_expr = Some(text(v)),
            ("chi", v) => c.chi = text(v),
            (k, _) => unreachable!("unhandled key {k}"),
        }
    }
    for (slot, file, name) in [(&mut c.phi0, phi0_file, "phi0"), (&mut c.phi1, phi1_file, "phi1"), (&mut c.psi, psi_file, "psi")] {
        if let Some(f) = file {
            if slot.is_some() {
                let line = lines[format!("{name}_file").as_str()];
                return Err(ConfigError::Invalid {
                    line,
                    key: format!("{name}_file"),
                    reason: format!("conflicts with {name}_expr"),
                });
            }
            *slot = Some(FieldSource::File(f));
        }
    }
    validate(&c, &lines)?;
    Ok(c)
}

fn validate(c: &RunConfig, lines: &BTreeMap<&str, usize>) -> Result<(), ConfigError> {
    let line = |k: &str| lines.get(k).copied().unwrap_or(0);
    let invalid = |k: &str, reason: String| ConfigError::Invalid { line: line(k), key: k.into(), reason };
    let missing = |k: &str| ConfigError::MissingRequired { key: k.into(), command: c.command.name() };
    if c.n < 2 {
        return Err(invalid("n", "complex dimension must be at least 2".into()));
    }
    if let Some(&a) = c.active.iter().find(|&&a| a == 0 || a > 2 * c.n) {
        return Err(invalid("active", format!("coordinate {a} outside 1..={}", 2 * c.n)));
    }
    let exprs: Vec<(&str, &str, bool)> = [
        ("metric", c.metric.expr(), false),
        ("alpha_spec", c.alpha_spec.expr(), false),
        ("omega_spec", c.omega_spec.expr(), false),
        ("rho_expr", c.rho_expr.as_deref(), false),
    ]
    .into_iter()
    .chain([("phi0_expr", &c.phi0), ("phi1_expr", &c.phi1), ("psi_expr", &c.psi)].into_iter().map(|(k, s)| {
        let e = match s {
            Some(FieldSource::Expr(e)) => Some(e.as_str()),
            _ => None,
        };
        (k, e, false)
    }))
    .filter_map(|(k, e, t)| e.map(|e| (k, e, t)))
    .collect();
    for (k, src, _) in exprs {
        let e = Expr::parse(src).map_err(|e| invalid(k, e.to_string()))?;
        e.check_dimension(c.n).map_err(|e| invalid(k, e.to_string()))?;
        if e.depends_on_time() {
            return Err(invalid(k, "expression may not depend on t".into()));
        }
    }
    for (k, v) in [("tol", c.tol), ("epsilon", c.epsilon), ("s_step", c.s_step), ("min_step", c.min_step), ("period", c.period)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(k, format!("must be positive and finite, got {v}")));
        }
    }
    if c.nt < 2 {
        return Err(invalid("nt", "need at least two time intervals".into()));
    }
    if c.lemma_samples.len() != 3 {
        return Err(invalid("lemma_samples", "expects three counts (concavity, plurisubharmonicity, gap)".into()));
    }
    match c.command {
        Command::SolveGeodesic | Command::SweepEps => {
            if c.phi0.is_none() {
                return Err(missing("phi0_expr"));
            }
            if c.phi1.is_none() {
                return Err(missing("phi1_expr"));
            }
            if c.command == Command::SweepEps && c.epsilon_values.is_empty() {
                return Err(invalid("epsilon_values", "empty sweep".into()));
            }
            if c.sub_a_values.is_empty() || c.sub_b_values.is_empty() {
                return Err(invalid("sub_a_values", "empty subsolution search box".into()));
            }
        }
        Command::Verify => {
            if c.input.is_none() {
                return Err(missing("input"));
            }
        }
        Command::SolveCy => {
            if c.psi.is_some() && c.rho_expr.is_some() {
                return Err(invalid("rho_expr", "conflicts with psi_expr / psi_file".into()));
            }
            if c.psi.is_none() && c.rho_expr.is_none() {
                return Err(missing("psi_expr"));
            }
        }
        Command::InspectMetric => {}
    }
    Ok(())
}
