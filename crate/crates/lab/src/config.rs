//! Experiment configuration files.
//!
//! The format is TOML: optional `[section]` headers, one `key = value` per
//! line, strings in double quotes and numbers in decimal notation. A full
//! configuration looks like
//!
//! ```toml
//! experiment = "free-run"
//! gamma = 1.0
//! out_dir = "runs/free"
//!
//! [grid]
//! dim = 2
//! n = 64
//!
//! [integrator]
//! dt = "auto"          # or a positive number
//! t_end = 1.0
//! cfl = 0.4
//! sample_every = 10
//! reproject_every = 1
//! checkpoint_every = 0 # 0: checkpoint only at the end
//!
//! [params]
//! seed = 7
//! norm = 0.5
//! ```

use std::fmt::Write as _;
use std::ops::Range;
use std::path::PathBuf;

use mrelab_core::{IntegratorConfig, TimeStep};
use serde::Deserialize;
use thiserror::Error;
use toml::{Spanned, Table, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Experiment {
    FreeRun,
    EnergyAudit,
    Stability2dLinear,
    Stability2dNonlinear,
    ShearGrowth,
    HyperbolicGrowth,
    CurrentSheet,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::FreeRun,
        Experiment::EnergyAudit,
        Experiment::Stability2dLinear,
        Experiment::Stability2dNonlinear,
        Experiment::ShearGrowth,
        Experiment::HyperbolicGrowth,
        Experiment::CurrentSheet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::FreeRun => "free-run",
            Experiment::EnergyAudit => "energy-audit",
            Experiment::Stability2dLinear => "stability2d-linear",
            Experiment::Stability2dNonlinear => "stability2d-nonlinear",
            Experiment::ShearGrowth => "shear-growth",
            Experiment::HyperbolicGrowth => "hyperbolic-growth",
            Experiment::CurrentSheet => "current-sheet",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    /// Experiments that evolve the full MRE system from a seeded datum.
    pub fn is_mre_run(self) -> bool {
        matches!(self, Experiment::FreeRun | Experiment::EnergyAudit)
    }

    fn default_t_end(self) -> f64 {
        match self {
            Experiment::Stability2dLinear => 3.0,
            Experiment::Stability2dNonlinear => 5.0,
            Experiment::HyperbolicGrowth => 2.0,
            _ => 1.0,
        }
    }

    fn default_grid(self) -> Option<GridSpec> {
        match self {
            Experiment::Stability2dLinear => Some(GridSpec { dim: 2, n: 64 }),
            Experiment::Stability2dNonlinear | Experiment::HyperbolicGrowth => {
                Some(GridSpec { dim: 2, n: 128 })
            }
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
}

/// Initial datum of the MRE runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Band-limited random divergence-free field of L² norm `norm`.
    Random,
    /// Unit ABC field plus a random perturbation of L² norm `norm` (3D only).
    Abc,
}

impl Init {
    fn name(self) -> &'static str {
        match self {
            Init::Random => "random",
            Init::Abc => "abc",
        }
    }
}

/// Experiment-specific parameters. Absent keys take per-experiment defaults
/// when the experiment runs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    pub seed: Option<u64>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub k: Option<u32>,
    pub m: Option<u32>,
    pub lambda: Option<f64>,
    pub t_samples: Option<Vec<f64>>,
    pub norm: Option<f64>,
    pub init: Option<Init>,
    /// Amplitude of the frozen shear `a = a_amp·sin x₂` in the linear run.
    pub a_amp: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub grid: Option<GridSpec>,
    pub gamma: f64,
    pub integrator: IntegratorConfig,
    pub sample_every: usize,
    pub checkpoint_every: usize,
    pub params: Params,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Grid of the run, falling back to the experiment default.
    pub fn grid_or_default(&self) -> Option<GridSpec> {
        self.grid.or(self.experiment.default_grid())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("[{}] syntax error at line {line}: {msg}", self.code())]
    Syntax { line: usize, msg: String },
    #[error("[{}] unknown experiment \"{name}\" at line {line}; expected one of {}", self.code(), experiment_names())]
    UnknownExperiment { name: String, line: usize },
    #[error("[{}] missing key `{field}`", self.code())]
    MissingKey { field: String },
    #[error("[{}] invalid value for `{field}`{}: {msg}", self.code(), at_line(*line))]
    InvalidValue {
        field: String,
        line: Option<usize>,
        msg: String,
    },
    #[error("[{}] unknown key{}: {msg}", self.code(), at_line(*line))]
    UnknownKey { line: Option<usize>, msg: String },
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

fn experiment_names() -> String {
    Experiment::ALL.map(Experiment::name).join(", ")
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Syntax { .. } => "E100",
            ConfigError::UnknownExperiment { .. } => "E101",
            ConfigError::MissingKey { .. } => "E102",
            ConfigError::InvalidValue { .. } => "E103",
            ConfigError::UnknownKey { .. } => "E104",
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<Spanned<String>>,
    gamma: Option<Spanned<f64>>,
    out_dir: Option<Spanned<String>>,
    grid: Option<RawGrid>,
    integrator: Option<RawIntegrator>,
    params: Option<RawParams>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dim: Option<Spanned<i64>>,
    n: Option<Spanned<i64>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawDt {
    Named(String),
    Value(f64),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    dt: Option<Spanned<RawDt>>,
    t_end: Option<Spanned<f64>>,
    cfl: Option<Spanned<f64>>,
    sample_every: Option<Spanned<i64>>,
    reproject_every: Option<Spanned<i64>>,
    checkpoint_every: Option<Spanned<i64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    seed: Option<Spanned<i64>>,
    eps: Option<Spanned<f64>>,
    delta: Option<Spanned<f64>>,
    k: Option<Spanned<i64>>,
    m: Option<Spanned<i64>>,
    lambda: Option<Spanned<f64>>,
    t_samples: Option<Spanned<Vec<f64>>>,
    norm: Option<Spanned<f64>>,
    init: Option<Spanned<String>>,
    a_amp: Option<Spanned<f64>>,
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn invalid<T>(&self, field: &str, span: Range<usize>, msg: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError::InvalidValue {
            field: field.into(),
            line: Some(line_of(self.text, span)),
            msg: msg.into(),
        })
    }

    fn finite(&self, field: &str, v: &Option<Spanned<f64>>) -> Result<Option<f64>, ConfigError> {
        match v {
            Some(s) if !s.get_ref().is_finite() => self.invalid(field, s.span(), "must be finite"),
            Some(s) => Ok(Some(*s.get_ref())),
            None => Ok(None),
        }
    }

    fn positive(&self, field: &str, v: &Option<Spanned<f64>>) -> Result<Option<f64>, ConfigError> {
        match (self.finite(field, v)?, v) {
            (Some(x), Some(s)) if x <= 0.0 => self.invalid(field, s.span(), "must be > 0"),
            (x, _) => Ok(x),
        }
    }

    fn int(&self, field: &str, v: &Option<Spanned<i64>>, min: i64, max: i64) -> Result<Option<i64>, ConfigError> {
        match v {
            Some(s) if !(min..=max).contains(s.get_ref()) => {
                let msg = if max == i64::MAX {
                    format!("must be ≥ {min}")
                } else {
                    format!("must lie in [{min}, {max}]")
                };
                self.invalid(field, s.span(), msg)
            }
            Some(s) => Ok(Some(*s.get_ref())),
            None => Ok(None),
        }
    }
}

fn missing(field: &str) -> ConfigError {
    ConfigError::MissingKey { field: field.into() }
}

/// Parses and validates a configuration, filling in defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    if let Err(e) = text.parse::<Table>() {
        return Err(ConfigError::Syntax {
            line: e.span().map(|s| line_of(text, s)).unwrap_or(1),
            msg: e.message().trim().to_string(),
        });
    }
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s));
        let msg = e.message().trim().to_string();
        if msg.contains("unknown field") {
            ConfigError::UnknownKey { line, msg }
        } else {
            ConfigError::InvalidValue {
                field: field_from_message(&msg),
                line,
                msg,
            }
        }
    })?;
    let cx = Ctx { text };

    let exp_raw = raw.experiment.ok_or_else(|| missing("experiment"))?;
    let experiment = Experiment::from_name(exp_raw.get_ref()).ok_or_else(|| {
        ConfigError::UnknownExperiment {
            name: exp_raw.get_ref().clone(),
            line: line_of(text, exp_raw.span()),
        }
    })?;

    let gamma = match &raw.gamma {
        Some(g) if !g.get_ref().is_finite() => return cx.invalid("gamma", g.span(), "must be finite"),
        Some(g) if *g.get_ref() < 0.0 => return cx.invalid("gamma", g.span(), "gamma must be ≥ 0"),
        Some(g) => Some(*g.get_ref()),
        None => None,
    };
    let gamma = match experiment {
        Experiment::FreeRun | Experiment::EnergyAudit => gamma.ok_or_else(|| missing("gamma"))?,
        Experiment::Stability2dLinear | Experiment::Stability2dNonlinear => {
            if let (Some(g), Some(s)) = (gamma, &raw.gamma) {
                if g != 0.0 {
                    return cx.invalid("gamma", s.span(), "the stability experiments are posed for gamma = 0");
                }
            }
            0.0
        }
        _ => gamma.unwrap_or(0.0),
    };

    let grid = match &raw.grid {
        Some(g) => {
            let dim = cx.int("grid.dim", &g.dim, 2, 3)?.ok_or_else(|| missing("grid.dim"))?;
            let n = cx.int("grid.n", &g.n, 4, 4096)?.ok_or_else(|| missing("grid.n"))?;
            if n % 2 != 0 {
                return cx.invalid("grid.n", g.n.as_ref().expect("checked").span(), "must be even");
            }
            Some(GridSpec {
                dim: dim as usize,
                n: n as usize,
            })
        }
        None => None,
    };
    match experiment {
        Experiment::FreeRun | Experiment::EnergyAudit if grid.is_none() => return Err(missing("grid")),
        Experiment::Stability2dLinear | Experiment::Stability2dNonlinear | Experiment::HyperbolicGrowth => {
            if let (Some(g), Some(raw_g)) = (grid, &raw.grid) {
                if g.dim != 2 {
                    let span = raw_g.dim.as_ref().expect("checked").span();
                    return cx.invalid("grid.dim", span, format!("{} needs a 2D grid", experiment.name()));
                }
            }
        }
        _ => {}
    }

    let mut integrator = IntegratorConfig {
        t_end: experiment.default_t_end(),
        ..IntegratorConfig::default()
    };
    let mut sample_every = 10;
    let mut checkpoint_every = 0;
    if let Some(ri) = &raw.integrator {
        if let Some(dt) = &ri.dt {
            integrator.dt = match dt.get_ref() {
                RawDt::Named(s) if s == "auto" => TimeStep::Auto,
                RawDt::Named(s) => {
                    return cx.invalid("integrator.dt", dt.span(), format!("expected \"auto\" or a number, found \"{s}\""))
                }
                RawDt::Value(v) if v.is_finite() && *v > 0.0 => TimeStep::Fixed(*v),
                RawDt::Value(_) => return cx.invalid("integrator.dt", dt.span(), "must be > 0"),
            };
        }
        if let Some(t) = &ri.t_end {
            match cx.finite("integrator.t_end", &ri.t_end)? {
                Some(x) if x < 0.0 => return cx.invalid("integrator.t_end", t.span(), "must be ≥ 0"),
                Some(x) => integrator.t_end = x,
                None => {}
            }
        }
        if let Some(c) = &ri.cfl {
            let x = *c.get_ref();
            if !(x > 0.0 && x <= 1.0) {
                return cx.invalid("integrator.cfl", c.span(), "must lie in (0, 1]");
            }
            integrator.cfl = x;
        }
        if let Some(s) = cx.int("integrator.sample_every", &ri.sample_every, 1, i64::MAX)? {
            sample_every = s as usize;
        }
        if let Some(r) = cx.int("integrator.reproject_every", &ri.reproject_every, 1, i64::MAX)? {
            integrator.reproject_every = r as u64;
        }
        if let Some(c) = cx.int("integrator.checkpoint_every", &ri.checkpoint_every, 0, i64::MAX)? {
            checkpoint_every = c as usize;
        }
    }

    let params = match &raw.params {
        Some(rp) => parse_params(&cx, rp)?,
        None => Params::default(),
    };
    match experiment {
        Experiment::FreeRun | Experiment::EnergyAudit => {
            if params.seed.is_none() {
                return Err(missing("params.seed"));
            }
            if params.init == Some(Init::Abc) && grid.map(|g| g.dim) != Some(3) {
                let span = raw.params.as_ref().and_then(|p| p.init.as_ref()).expect("set").span();
                return cx.invalid("params.init", span, "the ABC datum needs a 3D grid");
            }
        }
        Experiment::ShearGrowth if params.eps.is_none() => return Err(missing("params.eps")),
        _ => {}
    }
    if let (Some(d), Some(rp)) = (params.delta, &raw.params) {
        if !(d > 0.0 && d < 1.0) {
            return cx.invalid("params.delta", rp.delta.as_ref().expect("set").span(), "must lie in (0, 1)");
        }
    }

    Ok(ExperimentConfig {
        experiment,
        grid,
        gamma,
        integrator,
        sample_every,
        checkpoint_every,
        params,
        out_dir: raw.out_dir.map(|s| PathBuf::from(s.into_inner())),
    })
}

fn field_from_message(msg: &str) -> String {
    // serde messages end with "for key `integrator.cfl`" when the key is known
    msg.split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "value".into())
}

fn parse_params(cx: &Ctx, rp: &RawParams) -> Result<Params, ConfigError> {
    let init = match &rp.init {
        Some(s) => Some(match s.get_ref().as_str() {
            "random" => Init::Random,
            "abc" => Init::Abc,
            other => return cx.invalid("params.init", s.span(), format!("expected \"random\" or \"abc\", found \"{other}\"")),
        }),
        None => None,
    };
    let t_samples = match &rp.t_samples {
        Some(ts) => {
            let v = ts.get_ref();
            if v.is_empty() || v.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return cx.invalid("params.t_samples", ts.span(), "must be a non-empty list of positive times");
            }
            Some(v.clone())
        }
        None => None,
    };
    Ok(Params {
        seed: cx.int("params.seed", &rp.seed, 0, i64::MAX)?.map(|s| s as u64),
        eps: cx.positive("params.eps", &rp.eps)?,
        delta: cx.finite("params.delta", &rp.delta)?,
        k: cx.int("params.k", &rp.k, 1, 64)?.map(|k| k as u32),
        m: cx.int("params.m", &rp.m, 1, 64)?.map(|m| m as u32),
        lambda: cx.positive("params.lambda", &rp.lambda)?,
        t_samples,
        norm: cx.positive("params.norm", &rp.norm)?,
        init,
        a_amp: cx.finite("params.a_amp", &rp.a_amp)?,
    })
}

/// Writes a configuration back out; `parse_config` of the result equals `cfg`.
pub fn serialize(cfg: &ExperimentConfig) -> String {
    let mut root = Table::new();
    root.insert("experiment".into(), cfg.experiment.name().into());
    root.insert("gamma".into(), cfg.gamma.into());
    if let Some(dir) = &cfg.out_dir {
        root.insert("out_dir".into(), dir.to_string_lossy().into_owned().into());
    }
    if let Some(g) = cfg.grid {
        let mut t = Table::new();
        t.insert("dim".into(), (g.dim as i64).into());
        t.insert("n".into(), (g.n as i64).into());
        root.insert("grid".into(), t.into());
    }
    let mut it = Table::new();
    it.insert(
        "dt".into(),
        match cfg.integrator.dt {
            TimeStep::Auto => "auto".into(),
            TimeStep::Fixed(dt) => dt.into(),
        },
    );
    it.insert("t_end".into(), cfg.integrator.t_end.into());
    it.insert("cfl".into(), cfg.integrator.cfl.into());
    it.insert("sample_every".into(), (cfg.sample_every as i64).into());
    it.insert("reproject_every".into(), (cfg.integrator.reproject_every as i64).into());
    it.insert("checkpoint_every".into(), (cfg.checkpoint_every as i64).into());
    root.insert("integrator".into(), it.into());

    let p = &cfg.params;
    let mut pt = Table::new();
    let mut put = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            pt.insert(k.into(), v);
        }
    };
    put("seed", p.seed.map(|s| Value::from(s as i64)));
    put("eps", p.eps.map(Value::from));
    put("delta", p.delta.map(Value::from));
    put("k", p.k.map(|k| Value::from(i64::from(k))));
    put("m", p.m.map(|m| Value::from(i64::from(m))));
    put("lambda", p.lambda.map(Value::from));
    put("t_samples", p.t_samples.clone().map(Value::from));
    put("norm", p.norm.map(Value::from));
    put("init", p.init.map(|i| Value::from(i.name())));
    put("a_amp", p.a_amp.map(Value::from));
    if !pt.is_empty() {
        root.insert("params".into(), pt.into());
    }
    let mut out = String::new();
    let _ = writeln!(out, "# mrelab {}", env!("CARGO_PKG_VERSION"));
    out.push_str(&toml::to_string(&root).expect("tables of plain values serialize"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "experiment = \"free-run\"\ngamma = 0\n[grid]\ndim = 2\nn = 32\n[params]\nseed = 1\n";

    #[test]
    fn minimal_free_run_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.integrator.cfl, 0.4);
        assert_eq!(cfg.sample_every, 10);
        assert_eq!(cfg.integrator.dt, TimeStep::Auto);
        assert_eq!(cfg.integrator.t_end, 1.0);
        assert_eq!(cfg.grid, Some(GridSpec { dim: 2, n: 32 }));
    }

    #[test]
    fn negative_gamma_is_rejected_with_its_line() {
        let text = MINIMAL.replace("gamma = 0", "gamma = -1");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.code(), "E103");
        assert!(err.to_string().contains("gamma must be ≥ 0"), "{err}");
        assert!(matches!(err, ConfigError::InvalidValue { line: Some(2), .. }));
    }

    #[test]
    fn error_kinds_have_distinct_codes() {
        let unknown = parse_config("experiment = \"warp\"\n").unwrap_err();
        assert_eq!(unknown.code(), "E101");
        let missing = parse_config("experiment = \"shear-growth\"\n").unwrap_err();
        assert_eq!(missing, ConfigError::MissingKey { field: "params.eps".into() });
        let syntax = parse_config("experiment = \n").unwrap_err();
        assert_eq!(syntax.code(), "E100");
        let extra = parse_config(&format!("{MINIMAL}colour = 3\n")).unwrap_err();
        assert_eq!(extra.code(), "E104");
        let bad_type = parse_config(&MINIMAL.replace("n = 32", "n = \"big\"")).unwrap_err();
        assert_eq!(bad_type.code(), "E103");
        let codes: std::collections::HashSet<_> =
            [&unknown, &missing, &syntax, &extra, &bad_type].iter().map(|e| e.code()).collect();
        assert_eq!(codes.len(), 5);
    }

    #[test]
    fn odd_grid_and_bad_dt_are_rejected() {
        let e = parse_config(&MINIMAL.replace("n = 32", "n = 33")).unwrap_err();
        assert!(matches!(e, ConfigError::InvalidValue { line: Some(5), .. }), "{e}");
        let e = parse_config(&format!("{MINIMAL}[integrator]\ndt = \"fast\"\n")).unwrap_err();
        assert_eq!(e.code(), "E103");
        let e = parse_config(&format!("{MINIMAL}[integrator]\ndt = 0.0\n")).unwrap_err();
        assert_eq!(e.code(), "E103");
    }

    #[test]
    fn experiment_defaults_fill_in() {
        let cfg = parse_config("experiment = \"stability2d-nonlinear\"\n").unwrap();
        assert_eq!(cfg.integrator.t_end, 5.0);
        assert_eq!(cfg.grid_or_default(), Some(GridSpec { dim: 2, n: 128 }));
        let cfg = parse_config("experiment = \"shear-growth\"\n[params]\neps = 0.1\n").unwrap();
        assert_eq!(cfg.params.eps, Some(0.1));
    }

    #[test]
    fn serialized_config_reparses() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        cfg.integrator.dt = TimeStep::Fixed(1.0 / 64.0);
        cfg.params.t_samples = Some(vec![1.5, 1e-3, 250.0]);
        cfg.params.init = Some(Init::Random);
        cfg.out_dir = Some("runs/a b".into());
        assert_eq!(parse_config(&serialize(&cfg)).unwrap(), cfg);
    }
}
