use std::fmt;
use std::time::Instant;

use super::steps::{alg1, alg2, alg3};
use super::{objective_from, prox_gradient_step, rate_constant, stationarity_from};
use super::{IterateRecord, IterateTrace, ProblemSpec, SplitState};
use crate::error::{Error, Result};
use crate::operators::{NormalSolver, SpdMethod, SpdSolveConfig, Vector};
use crate::prox::{ball_distance, project_ball};

/// Geometric path `eta1 = eta2 = eta_init * shrink^j`, clamped at `eta_floor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationSchedule {
    pub eta_init: f64,
    pub shrink: f64,
    pub eta_floor: f64,
    /// Iteration cap per level.
    pub inner_iters: usize,
    /// Start each level from the previous level's iterate.
    pub warm_start: bool,
}

impl Default for ContinuationSchedule {
    fn default() -> Self {
        ContinuationSchedule {
            eta_init: 1.0,
            shrink: 0.5,
            eta_floor: 1e-6,
            inner_iters: 100,
            warm_start: true,
        }
    }
}

impl ContinuationSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eta_init > 0.0
            && self.eta_init.is_finite()
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.eta_floor > 0.0
            && self.eta_floor < self.eta_init
            && self.inner_iters >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid continuation schedule {self:?}")))
        }
    }

    pub fn levels(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut eta = self.eta_init;
        loop {
            let clamped = eta.max(self.eta_floor);
            out.push(clamped);
            if clamped <= self.eta_floor {
                return out;
            }
            eta *= self.shrink;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    /// Prox-gradient on the stacked least-squares form, step `1 / C`.
    ProxGradient,
    /// Prox-gradient on the value function, step `min(eta1, eta2)`.
    ValueFunction(SpdSolveConfig),
    /// Block-coordinate descent; the solve should be exact or tight.
    BlockCoordinate(SpdSolveConfig),
}

impl Algorithm {
    /// Block-coordinate descent with the cheapest exact solve for `spec`.
    pub fn exact_bcd(spec: &ProblemSpec) -> Self {
        Algorithm::BlockCoordinate(SpdSolveConfig::exact_for(&spec.c, &spec.a))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::ProxGradient => write!(f, "alg1"),
            Algorithm::ValueFunction(cfg) => match cfg.method {
                SpdMethod::Cg { max_iters, .. } => write!(f, "alg2-cg{max_iters}"),
                _ => write!(f, "alg2-exact"),
            },
            Algorithm::BlockCoordinate(_) => write!(f, "alg3"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub state: SplitState,
    pub trace: IterateTrace,
    /// `|C x - w1|` at the end; small once `eta` is small.
    pub consistency: f64,
}

/// Starting point: `x0` (or `A^T b` scaled to best fit `b` along that
/// direction), `w1 = C x0`, `w2 = proj(A x0 - b)`.
pub fn initial_state(spec: &ProblemSpec, eta: f64, x0: Option<&Vector>) -> Result<SplitState> {
    let x = match x0 {
        Some(x0) if x0.len() == spec.n() => x0.clone(),
        Some(x0) => return Err(Error::dim("initial x", spec.n(), x0.len())),
        None => {
            let atb = spec.a.adjoint_apply(&spec.b);
            let aatb = spec.a.apply(&atb);
            let denom = aatb.norm_squared();
            if denom > 0.0 {
                atb.clone() * (atb.norm_squared() / denom)
            } else {
                Vector::zeros(spec.n())
            }
        }
    };
    let w1 = spec.c.apply(&x);
    let w2 = project_ball(&(spec.a.apply(&x) - &spec.b), &spec.ball)?;
    Ok(SplitState {
        x,
        w1,
        w2,
        eta1: eta,
        eta2: eta,
    })
}

/// Run `algorithm` along the continuation path, warm-starting each level.
pub fn solve(spec: &ProblemSpec, schedule: &ContinuationSchedule, algorithm: &Algorithm, x0: Option<&Vector>) -> Result<SolveResult> {
    schedule.validate()?;
    let levels = schedule.levels();
    let start = Instant::now();
    let mut state = initial_state(spec, levels[0], x0)?;
    let fresh = state.clone();
    let mut trace = IterateTrace::default();
    let mut solver = build_solver(spec, algorithm, levels[0])?;

    for (level, &eta) in levels.iter().enumerate() {
        if !schedule.warm_start {
            state = fresh.clone();
        }
        state = run_level(
            spec,
            algorithm,
            solver.as_mut(),
            state,
            (level, eta),
            schedule.inner_iters,
            true,
            &mut trace,
            start,
        )?;
    }
    Ok(finish(spec, state, trace))
}

/// Exactly `iters` steps at a single `eta1 = eta2 = eta`, with no
/// stationarity stop. Used to compare decay curves across algorithms.
pub fn run_fixed_eta(spec: &ProblemSpec, eta: f64, algorithm: &Algorithm, iters: usize, x0: Option<&Vector>) -> Result<SolveResult> {
    if !(eta > 0.0 && eta.is_finite()) || iters == 0 {
        return Err(Error::Argument(format!(
            "need eta > 0 and iters >= 1, got eta {eta}, iters {iters}"
        )));
    }
    let start = Instant::now();
    let state = initial_state(spec, eta, x0)?;
    let mut trace = IterateTrace::default();
    let mut solver = build_solver(spec, algorithm, eta)?;
    let state = run_level(spec, algorithm, solver.as_mut(), state, (0, eta), iters, false, &mut trace, start)?;
    Ok(finish(spec, state, trace))
}

fn build_solver<'a>(spec: &'a ProblemSpec, algorithm: &Algorithm, eta: f64) -> Result<Option<NormalSolver<'a>>> {
    match algorithm {
        Algorithm::ProxGradient => Ok(None),
        Algorithm::ValueFunction(cfg) | Algorithm::BlockCoordinate(cfg) => Ok(Some(NormalSolver::new(&spec.c, &spec.a, eta, eta, cfg)?)),
    }
}

fn finish(spec: &ProblemSpec, state: SplitState, trace: IterateTrace) -> SolveResult {
    let consistency = (spec.c.apply(&state.x) - &state.w1).norm();
    SolveResult { state, trace, consistency }
}

#[allow(clippy::too_many_arguments)]
fn run_level(
    spec: &ProblemSpec,
    algorithm: &Algorithm,
    mut solver: Option<&mut NormalSolver<'_>>,
    mut state: SplitState,
    (level, eta): (usize, f64),
    iters: usize,
    stop_early: bool,
    trace: &mut IterateTrace,
    start: Instant,
) -> Result<SplitState> {
    state.eta1 = eta;
    state.eta2 = eta;
    if let Some(s) = solver.as_deref_mut() {
        s.set_etas(eta, eta).map_err(|e| e.at(level, 0))?;
    }
    state.check(spec)?;
    // Products with the current x, carried across iterations.
    let mut cx = spec.c.apply(&state.x);
    let mut ax = spec.a.apply(&state.x);
    let p0 = objective_from(spec, &state, &cx, &ax);
    let tol = 1e-8 * (1.0 + p0.abs());
    let alpha = prox_gradient_step(spec, eta, eta);
    let cr = rate_constant(spec, eta, eta);

    for iter in 1..=iters {
        let (next, ax_next) = match (algorithm, solver.as_deref()) {
            (Algorithm::ProxGradient, _) => alg1(spec, &state, alpha, &ax),
            (Algorithm::ValueFunction(_), Some(s)) => alg2(spec, &state, eta, s),
            (Algorithm::BlockCoordinate(_), Some(s)) => alg3(spec, &state, s),
            _ => unreachable!("solver exists for solve-based algorithms"),
        }
        .map_err(|e| e.at(level, iter))?;
        let cx_next = spec.c.apply(&next.x);
        let v = stationarity_from(spec, &state, &next, cr, &(&cx - &cx_next), &(&ax - &ax_next));
        state = next;
        (cx, ax) = (cx_next, ax_next);
        let p = objective_from(spec, &state, &cx, &ax);
        let feas = ball_distance(&(&ax - &spec.b), &spec.ball);
        if !p.is_finite() || !v.is_finite() {
            return Err(Error::Numerical(format!("objective {p}, stationarity {v}")).at(level, iter));
        }
        trace.push(IterateRecord {
            level,
            iter,
            eta,
            objective: p,
            stationarity: v,
            feasibility: feas,
            seconds: start.elapsed().as_secs_f64(),
        });
        if stop_early && v <= tol {
            break;
        }
    }
    Ok(state)
}
