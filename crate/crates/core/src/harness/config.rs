//! Study configuration files: flat TOML tables of `key = value` lines.
//!
//! Every key is optional; missing keys take the study defaults and unknown
//! keys are rejected. [`echo_bpdn`] and friends write the fully resolved
//! configuration back in the same syntax.

use std::collections::BTreeSet;
use std::fmt::Write;

use toml::{Table, Value};

use super::bpdn::{BpdnStudyConfig, ConvergenceStudyConfig, Method, SigmaPolicy};
use super::image::ImageStudyConfig;
use super::lowrank_study::LowRankStudyConfig;
use crate::error::{Error, Result};
use crate::lowrank::EtaSchedule;
use crate::prox::BallNorm;
use crate::solvers::ContinuationSchedule;

/// Parsed table with usage tracking, so leftovers can be reported.
pub struct Settings {
    table: Table,
    used: BTreeSet<String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Format(e.to_string()))?;
        if let Some((k, _)) = table.iter().find(|(_, v)| v.is_table()) {
            return Err(Error::Format(format!("sections are not supported (found [{k}])")));
        }
        Ok(Settings {
            table,
            used: BTreeSet::new(),
        })
    }

    fn get(&mut self, key: &str) -> Option<Value> {
        self.used.insert(key.to_string());
        self.table.get(key).cloned()
    }

    fn wrong(key: &str, want: &str, got: &Value) -> Error {
        Error::Argument(format!("config key '{key}' expects {want}, got {got}"))
    }

    pub fn float(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Float(f)) => Ok(f),
            Some(Value::Integer(i)) => Ok(i as f64),
            Some(v) => Err(Self::wrong(key, "a number", &v)),
        }
    }

    pub fn count(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) => usize::try_from(i).map_err(|_| Self::wrong(key, "a nonnegative integer", &Value::Integer(i))),
            Some(v) => Err(Self::wrong(key, "a nonnegative integer", &v)),
        }
    }

    pub fn flag(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(b),
            Some(v) => Err(Self::wrong(key, "true or false", &v)),
        }
    }

    /// Strings, and numbers in their text form (so `sigma = 0.5` works).
    pub fn text(&mut self, key: &str) -> Result<Option<String>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v @ (Value::Float(_) | Value::Integer(_))) => Ok(Some(v.to_string())),
            Some(v) => Err(Self::wrong(key, "a string", &v)),
        }
    }

    pub fn list(&mut self, key: &str) -> Result<Option<Vec<Value>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => Ok(Some(a)),
            Some(v) => Err(Self::wrong(key, "an array", &v)),
        }
    }

    fn strings(&mut self, key: &str) -> Result<Option<Vec<String>>> {
        let Some(items) = self.list(key)? else { return Ok(None) };
        items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                other => Err(Self::wrong(key, "an array of strings", &other)),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Error naming any key that no reader asked for.
    pub fn finish(self) -> Result<()> {
        let unknown: Vec<&String> = self.table.keys().filter(|k| !self.used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Argument(format!("unknown config keys: {unknown:?}")))
        }
    }
}

fn parse_method_ball(s: &str) -> Result<(Method, BallNorm)> {
    let (m, b) = s
        .split_once(':')
        .ok_or_else(|| Error::Argument(format!("method entry '{s}' must look like 'alg3:l1'")))?;
    Ok((m.parse()?, b.parse()?))
}

fn spike_keys(s: &mut Settings, cfg: &mut super::SpikeTrainConfig) -> Result<()> {
    cfg.n = s.count("n", cfg.n)?;
    cfg.m = s.count("m", cfg.m)?;
    cfg.spike_frac = s.float("spike_frac", cfg.spike_frac)?;
    cfg.outlier_frac = s.float("outlier_frac", cfg.outlier_frac)?;
    if let Some(v) = s.text("outlier_magnitude")? {
        cfg.outlier_magnitude = match v.as_str() {
            "auto" => None,
            num => Some(
                num.parse()
                    .map_err(|_| Error::Argument(format!("outlier_magnitude '{num}' is not a number or 'auto'")))?,
            ),
        };
    }
    cfg.seed = s.count("seed", cfg.seed as usize)? as u64;
    cfg.validate()
}

fn echo_spike(out: &mut String, cfg: &super::SpikeTrainConfig) {
    let mag = cfg.outlier_magnitude.map_or("\"auto\"".to_string(), |m| format!("{m:?}"));
    let _ = writeln!(
        out,
        "n = {}\nm = {}\nspike_frac = {:?}\noutlier_frac = {:?}",
        cfg.n, cfg.m, cfg.spike_frac, cfg.outlier_frac
    );
    let _ = writeln!(out, "outlier_magnitude = {mag}\nseed = {}", cfg.seed);
}

fn quoted(items: impl IntoIterator<Item = String>) -> String {
    let v: Vec<String> = items.into_iter().map(|s| format!("\"{s}\"")).collect();
    format!("[{}]", v.join(", "))
}

/// Continuation schedule, `methods` and `sigma` keys shared by the BPDN and
/// image studies.
fn solve_keys(
    s: &mut Settings,
    sch: &mut ContinuationSchedule,
    methods: &mut Vec<(Method, BallNorm)>,
    sigma: &mut SigmaPolicy,
) -> Result<()> {
    sch.eta_init = s.float("eta_init", sch.eta_init)?;
    sch.shrink = s.float("shrink", sch.shrink)?;
    sch.eta_floor = s.float("eta_floor", sch.eta_floor)?;
    sch.inner_iters = s.count("inner_iters", sch.inner_iters)?;
    sch.validate()?;
    if let Some(list) = s.strings("methods")? {
        *methods = list.iter().map(|m| parse_method_ball(m)).collect::<Result<_>>()?;
    }
    if methods.is_empty() {
        return Err(Error::Argument("'methods' must not be empty".into()));
    }
    if let Some(text) = s.text("sigma")? {
        *sigma = text.parse()?;
    }
    Ok(())
}

fn echo_solve(out: &mut String, sch: &ContinuationSchedule, methods: &[(Method, BallNorm)], sigma: SigmaPolicy) {
    let _ = writeln!(
        out,
        "eta_init = {:?}\nshrink = {:?}\neta_floor = {:?}\ninner_iters = {}",
        sch.eta_init, sch.shrink, sch.eta_floor, sch.inner_iters
    );
    let _ = writeln!(out, "methods = {}", quoted(methods.iter().map(|(m, b)| format!("{m}:{b}"))));
    let _ = writeln!(out, "sigma = \"{sigma}\"");
}

pub fn bpdn_config(text: &str) -> Result<BpdnStudyConfig> {
    let mut s = Settings::parse(text)?;
    let mut cfg = BpdnStudyConfig::default();
    spike_keys(&mut s, &mut cfg.spike)?;
    solve_keys(&mut s, &mut cfg.schedule, &mut cfg.methods, &mut cfg.sigma)?;
    s.finish()?;
    Ok(cfg)
}

pub fn echo_bpdn(cfg: &BpdnStudyConfig) -> String {
    let mut out = String::new();
    echo_spike(&mut out, &cfg.spike);
    echo_solve(&mut out, &cfg.schedule, &cfg.methods, cfg.sigma);
    out
}

pub fn convergence_config(text: &str) -> Result<ConvergenceStudyConfig> {
    let mut s = Settings::parse(text)?;
    let mut cfg = ConvergenceStudyConfig::default();
    spike_keys(&mut s, &mut cfg.spike)?;
    cfg.eta = s.float("eta", cfg.eta)?;
    cfg.iters = s.count("iters", cfg.iters)?;
    if let Some(budgets) = s.list("cg_budgets")? {
        cfg.cg_budgets = budgets
            .into_iter()
            .map(|v| match v {
                Value::Integer(k) if k >= 1 => Ok(k as usize),
                other => Err(Error::Argument(format!(
                    "cg_budgets entries must be positive integers, got {other}"
                ))),
            })
            .collect::<Result<_>>()?;
    }
    cfg.zero_start = s.flag("zero_start", cfg.zero_start)?;
    s.finish()?;
    if !(cfg.eta > 0.0 && cfg.eta.is_finite()) || cfg.iters == 0 || cfg.cg_budgets.is_empty() {
        return Err(Error::Argument("need eta > 0, iters >= 1 and at least one CG budget".into()));
    }
    Ok(cfg)
}

pub fn echo_convergence(cfg: &ConvergenceStudyConfig) -> String {
    let mut out = String::new();
    echo_spike(&mut out, &cfg.spike);
    let budgets: Vec<String> = cfg.cg_budgets.iter().map(|k| k.to_string()).collect();
    let _ = writeln!(
        out,
        "eta = {:?}\niters = {}\ncg_budgets = [{}]\nzero_start = {}",
        cfg.eta,
        cfg.iters,
        budgets.join(", "),
        cfg.zero_start
    );
    out
}

pub fn lowrank_config(text: &str) -> Result<LowRankStudyConfig> {
    let mut s = Settings::parse(text)?;
    let mut cfg = LowRankStudyConfig::default();
    let e = &mut cfg.experiment;
    e.n = s.count("n", e.n)?;
    e.m = s.count("m", e.m)?;
    e.true_rank = s.count("true_rank", e.true_rank)?;
    e.rank = s.count("rank", e.rank)?;
    e.missing_frac = s.float("missing_frac", e.missing_frac)?;
    e.outlier_count = s.count("outlier_count", e.outlier_count)?;
    e.outlier_scale = s.float("outlier_scale", e.outlier_scale)?;
    if let Some(mode) = s.text("mode")? {
        e.mode = mode.parse()?;
    }
    e.seed = s.count("seed", e.seed as usize)? as u64;
    e.validate()?;
    if let Some(balls) = s.strings("balls")? {
        cfg.balls = balls.iter().map(|b| b.parse()).collect::<Result<_>>()?;
    }
    if cfg.balls.is_empty() {
        return Err(Error::Argument("'balls' must not be empty".into()));
    }
    let eta = s.float("eta", cfg.eta.eta)?;
    let (dflt_factor, dflt_every) = cfg.eta.decay.unwrap_or((0.5, 0));
    let factor = s.float("eta_decay", dflt_factor)?;
    let every = s.count("eta_every", dflt_every)?;
    cfg.eta = EtaSchedule {
        eta,
        decay: (every > 0).then_some((factor, every)),
    };
    cfg.eta.validate()?;
    cfg.max_iters = s.count("max_iters", cfg.max_iters)?;
    cfg.track_nuclear = s.flag("track_nuclear", cfg.track_nuclear)?;
    s.finish()?;
    if cfg.max_iters == 0 {
        return Err(Error::Argument("max_iters must be at least 1".into()));
    }
    Ok(cfg)
}

pub fn echo_lowrank(cfg: &LowRankStudyConfig) -> String {
    let e = &cfg.experiment;
    let mut out = String::new();
    let _ = writeln!(out, "n = {}\nm = {}\ntrue_rank = {}\nrank = {}", e.n, e.m, e.true_rank, e.rank);
    let _ = writeln!(
        out,
        "missing_frac = {:?}\noutlier_count = {}\noutlier_scale = {:?}",
        e.missing_frac, e.outlier_count, e.outlier_scale
    );
    let _ = writeln!(out, "mode = \"{}\"\nseed = {}", e.mode, e.seed);
    let _ = writeln!(out, "balls = {}", quoted(cfg.balls.iter().map(|b| b.to_string())));
    let (factor, every) = cfg.eta.decay.unwrap_or((0.5, 0));
    let _ = writeln!(out, "eta = {:?}\neta_decay = {:?}\neta_every = {every}", cfg.eta.eta, factor);
    let _ = writeln!(out, "max_iters = {}\ntrack_nuclear = {}", cfg.max_iters, cfg.track_nuclear);
    out
}

pub fn image_config(text: &str) -> Result<ImageStudyConfig> {
    let mut s = Settings::parse(text)?;
    let mut cfg = ImageStudyConfig::default();
    let img = &mut cfg.image;
    img.rows = s.count("rows", img.rows)?;
    img.cols = s.count("cols", img.cols)?;
    img.coef_frac = s.float("coef_frac", img.coef_frac)?;
    img.missing_frac = s.float("missing_frac", img.missing_frac)?;
    img.outlier_frac = s.float("outlier_frac", img.outlier_frac)?;
    img.outlier_scale = s.float("outlier_scale", img.outlier_scale)?;
    if let Some(mode) = s.text("mode")? {
        img.mode = mode.parse()?;
    }
    img.seed = s.count("seed", img.seed as usize)? as u64;
    img.validate()?;
    solve_keys(&mut s, &mut cfg.schedule, &mut cfg.methods, &mut cfg.sigma)?;
    s.finish()?;
    Ok(cfg)
}

pub fn echo_image(cfg: &ImageStudyConfig) -> String {
    let img = &cfg.image;
    let mut out = String::new();
    let _ = writeln!(out, "rows = {}\ncols = {}\ncoef_frac = {:?}", img.rows, img.cols, img.coef_frac);
    let _ = writeln!(
        out,
        "missing_frac = {:?}\noutlier_frac = {:?}\noutlier_scale = {:?}",
        img.missing_frac, img.outlier_frac, img.outlier_scale
    );
    let _ = writeln!(out, "mode = \"{}\"\nseed = {}", img.mode, img.seed);
    echo_solve(&mut out, &cfg.schedule, &cfg.methods, cfg.sigma);
    out
}
