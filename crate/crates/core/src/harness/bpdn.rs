use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use super::metrics::snr_db;
use super::report::{ReportRow, RowStatus, RunReport};
use super::spike::{gen_spike_train, SpikeTrain, SpikeTrainConfig};
use crate::error::{Error, Result};
use crate::operators::{LinearMap, SpdSolveConfig, Vector};
use crate::prox::{BallNorm, BallSpec, Regularizer};
use crate::solvers::{run_fixed_eta, solve, Algorithm, ContinuationSchedule, IterateTrace, ProblemSpec, SolveResult};

/// Solver choice for a study row. Unlike [`Algorithm`] this does not carry
/// a solve configuration, which depends on the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Alg1,
    /// Value-function iteration with a fixed CG budget per step.
    Alg2Cg(usize),
    Alg2Exact,
    Alg3,
}

impl Method {
    pub fn algorithm(&self, spec: &ProblemSpec) -> Algorithm {
        let exact = SpdSolveConfig::exact_for(&spec.c, &spec.a);
        match *self {
            Method::Alg1 => Algorithm::ProxGradient,
            Method::Alg2Cg(k) => Algorithm::ValueFunction(SpdSolveConfig::cg(k)),
            Method::Alg2Exact => Algorithm::ValueFunction(exact),
            Method::Alg3 => Algorithm::BlockCoordinate(exact),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Alg1 => f.write_str("alg1"),
            Method::Alg2Cg(k) => write!(f, "alg2-cg{k}"),
            Method::Alg2Exact => f.write_str("alg2-exact"),
            Method::Alg3 => f.write_str("alg3"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::Argument(format!("unknown method '{s}' (alg1, alg2-cgK, alg2-exact, alg3)"));
        match s.as_str() {
            "alg1" => Ok(Method::Alg1),
            "alg2-exact" => Ok(Method::Alg2Exact),
            "alg3" => Ok(Method::Alg3),
            _ => match s.strip_prefix("alg2-cg").map(str::parse::<usize>) {
                Some(Ok(k)) if k >= 1 => Ok(Method::Alg2Cg(k)),
                _ => Err(bad()),
            },
        }
    }
}

/// How the constraint radius is chosen from the generated noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaPolicy {
    /// `sigma = psi(b - A x_true)`; for the L0 ball the outlier count.
    Exact,
    /// The exact radius times a factor (L0 counts are rounded).
    Scaled(f64),
}

impl SigmaPolicy {
    /// Radius for `norm` given the added noise and the number of corrupted
    /// observations.
    pub fn radius(&self, norm: BallNorm, noise: &Vector, outliers: usize) -> f64 {
        let exact = match norm {
            BallNorm::L0 => outliers as f64,
            _ => norm.eval(noise),
        };
        match *self {
            SigmaPolicy::Exact => exact,
            SigmaPolicy::Scaled(f) if norm == BallNorm::L0 => (f * exact).round(),
            SigmaPolicy::Scaled(f) => f * exact,
        }
    }
}

impl FromStr for SigmaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("exact") {
            return Ok(SigmaPolicy::Exact);
        }
        match s.parse::<f64>() {
            Ok(f) if f >= 0.0 && f.is_finite() => Ok(SigmaPolicy::Scaled(f)),
            _ => Err(Error::Argument(format!(
                "sigma policy '{s}' must be 'exact' or a nonnegative factor"
            ))),
        }
    }
}

impl fmt::Display for SigmaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaPolicy::Exact => f.write_str("exact"),
            SigmaPolicy::Scaled(s) => write!(f, "{s}"),
        }
    }
}

/// BPDN problem with `C = I`, `phi = |.|_1`, and `A`, `b`, `sigma` divided
/// by the RMS column norm `|A|_F / sqrt(n)` (L0 radii are counts and stay
/// put). The feasible set and the minimizers are unchanged; the rescaling
/// keeps the continuation path from `eta = 1` well matched to the data.
pub fn spike_problem(train: &SpikeTrain, norm: BallNorm, sigma: SigmaPolicy) -> Result<ProblemSpec> {
    let a = train.a.to_dense();
    let n = a.ncols();
    let scale = (a.norm_squared() / n as f64).sqrt();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut radius = sigma.radius(norm, &train.noise(), train.outlier_support.len());
    if norm != BallNorm::L0 {
        radius /= scale;
    }
    ProblemSpec::new(
        LinearMap::dense(a / scale),
        LinearMap::identity(n),
        &train.b / scale,
        Regularizer::l1(),
        BallSpec::new(norm, radius)?,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpdnStudyConfig {
    pub spike: SpikeTrainConfig,
    pub schedule: ContinuationSchedule,
    pub methods: Vec<(Method, BallNorm)>,
    pub sigma: SigmaPolicy,
}

impl Default for BpdnStudyConfig {
    fn default() -> Self {
        BpdnStudyConfig {
            spike: SpikeTrainConfig::default(),
            // The l1 ball needs long inner runs on this instance; 100 per
            // level leaves it far from converged.
            schedule: ContinuationSchedule {
                inner_iters: 1000,
                ..Default::default()
            },
            methods: [BallNorm::L0, BallNorm::L1, BallNorm::L2].map(|b| (Method::Alg3, b)).to_vec(),
            sigma: SigmaPolicy::Exact,
        }
    }
}

/// Report plus one iterate trace per successful row, keyed by row label.
#[derive(Debug, Clone, Default)]
pub struct StudyOutput {
    pub report: RunReport,
    pub traces: Vec<(String, IterateTrace)>,
}

pub(super) fn row_from(method: String, ball: String, outcome: Result<(f64, Option<f64>)>, seconds: f64) -> ReportRow {
    let (status, snr, snr_w) = match outcome {
        Ok((s, w)) => (RowStatus::Ok, Some(s), w),
        Err(e) => (RowStatus::Failed(e.to_string()), None, None),
    };
    ReportRow {
        method,
        ball,
        status,
        snr_db: snr,
        snr_w_db: snr_w,
        seconds,
    }
}

fn spike_snrs(train: &SpikeTrain, res: &SolveResult) -> Result<(f64, Option<f64>)> {
    let x = snr_db(train.x_true.as_slice(), res.state.x.as_slice())?;
    // C = I, so w1 estimates x_true directly.
    let w = snr_db(train.x_true.as_slice(), res.state.w1.as_slice())?;
    Ok((x, Some(w)))
}

/// Spike-train recovery, one row per `(method, ball)`. A failing row is
/// reported and the remaining rows still run.
pub fn run_bpdn_study(cfg: &BpdnStudyConfig) -> Result<StudyOutput> {
    if cfg.methods.is_empty() {
        return Err(Error::Argument("bpdn study needs at least one method".into()));
    }
    cfg.schedule.validate()?;
    let train = gen_spike_train(&cfg.spike)?;
    let mut out = StudyOutput::default();
    for &(method, norm) in &cfg.methods {
        let start = Instant::now();
        let label = format!("{method}-{norm}");
        let outcome = spike_problem(&train, norm, cfg.sigma).and_then(|spec| {
            let res = solve(&spec, &cfg.schedule, &method.algorithm(&spec), None)?;
            let snrs = spike_snrs(&train, &res)?;
            out.traces.push((label.clone(), res.trace));
            Ok(snrs)
        });
        out.report.rows.push(row_from(
            method.to_string(),
            norm.to_string(),
            outcome,
            start.elapsed().as_secs_f64(),
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudyConfig {
    pub spike: SpikeTrainConfig,
    /// Fixed `eta1 = eta2`.
    pub eta: f64,
    pub iters: usize,
    pub cg_budgets: Vec<usize>,
    /// Start every variant from `x = 0` instead of the scaled back-projection.
    pub zero_start: bool,
}

impl Default for ConvergenceStudyConfig {
    fn default() -> Self {
        ConvergenceStudyConfig {
            spike: SpikeTrainConfig::default(),
            eta: 1e-4,
            iters: 100,
            cg_budgets: vec![1, 5, 20],
            zero_start: true,
        }
    }
}

impl ConvergenceStudyConfig {
    /// Variants in the order they are run: `alg1`, `alg2` per CG budget, `alg3`.
    pub fn methods(&self) -> Vec<Method> {
        let mut m = vec![Method::Alg1];
        m.extend(self.cg_budgets.iter().map(|&k| Method::Alg2Cg(k)));
        m.push(Method::Alg3);
        m
    }
}

/// Objective decay at a fixed `eta` on one spike-train instance with
/// `l1` regularizer and `l1` residual ball. Traces are keyed by method.
pub fn run_convergence_study(cfg: &ConvergenceStudyConfig) -> Result<StudyOutput> {
    if cfg.cg_budgets.is_empty() {
        return Err(Error::Argument("convergence study needs at least one CG budget".into()));
    }
    let train = gen_spike_train(&cfg.spike)?;
    let spec = spike_problem(&train, BallNorm::L1, SigmaPolicy::Exact)?;
    let zero = Vector::zeros(spec.n());
    let x0 = cfg.zero_start.then_some(&zero);
    let mut out = StudyOutput::default();
    for method in cfg.methods() {
        let start = Instant::now();
        let outcome = run_fixed_eta(&spec, cfg.eta, &method.algorithm(&spec), cfg.iters, x0).and_then(|res| {
            let snrs = spike_snrs(&train, &res)?;
            out.traces.push((method.to_string(), res.trace));
            Ok(snrs)
        });
        out.report.rows.push(row_from(
            method.to_string(),
            BallNorm::L1.to_string(),
            outcome,
            start.elapsed().as_secs_f64(),
        ));
    }
    Ok(out)
}
