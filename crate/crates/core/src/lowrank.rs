//! Factorized low-rank recovery under a residual constraint:
//!
//! ```text
//! min_{L,R,W}  (|L|_F^2 + |R|_F^2) / 2 + |W - L R^T|_F^2 / (2 eta)
//! s.t.         psi(mask(W) - b) <= sigma
//! ```
//!
//! solved by block-coordinate descent over `L`, `R` and `W`. Small `eta`
//! couples `W` tightly to `L R^T`.

use std::collections::HashSet;
use std::io::Write;
use std::time::Instant;

use nalgebra::{Cholesky, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::operators::{Matrix, Vector};
use crate::prox::{ball_distance, project_ball, BallSpec};

/// Observed entries of an `n x m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedData {
    n: usize,
    m: usize,
    indices: Vec<(usize, usize)>,
    values: Vector,
}

impl MaskedData {
    /// Indices must be unique and inside `n x m`; `values[k]` belongs to
    /// `indices[k]`.
    pub fn new(n: usize, m: usize, indices: Vec<(usize, usize)>, values: Vector) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::dim("masked data values", indices.len(), values.len()));
        }
        let mut seen = HashSet::with_capacity(indices.len());
        for &(i, j) in &indices {
            if i >= n || j >= m {
                return Err(Error::Argument(format!("observed index ({i}, {j}) outside {n}x{m}")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::Argument(format!("observed index ({i}, {j}) repeated")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("observed values must be finite".into()));
        }
        Ok(MaskedData { n, m, indices, values })
    }

    /// Observe `x` at `indices`.
    pub fn sample(x: &Matrix, indices: Vec<(usize, usize)>) -> Result<Self> {
        let values = Vector::from_iterator(
            indices.len(),
            indices.iter().map(|&(i, j)| x.get((i, j)).copied().unwrap_or(f64::NAN)),
        );
        Self::new(x.nrows(), x.ncols(), indices, values)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    pub fn values(&self) -> &Vector {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The masking operator: entries of `x` at the observed positions.
    pub fn gather(&self, x: &Matrix) -> Vector {
        Vector::from_iterator(self.indices.len(), self.indices.iter().map(|&(i, j)| x[(i, j)]))
    }

    /// Zero matrix with `v` written at the observed positions.
    pub fn scatter(&self, v: &Vector) -> Matrix {
        let mut out = Matrix::zeros(self.n, self.m);
        for (&(i, j), &val) in self.indices.iter().zip(v.iter()) {
            out[(i, j)] = val;
        }
        out
    }
}

/// Current factors `L` (n x k), `R` (m x k), latent data `W` (n x m) and
/// coupling weight `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTriple {
    pub l: Matrix,
    pub r: Matrix,
    pub w: Matrix,
    pub eta: f64,
}

impl FactorTriple {
    pub fn rank(&self) -> usize {
        self.l.ncols()
    }

    pub fn check(&self) -> Result<()> {
        let (n, m) = self.w.shape();
        if self.l.nrows() != n {
            return Err(Error::dim("factor L rows", n, self.l.nrows()));
        }
        if self.r.nrows() != m {
            return Err(Error::dim("factor R rows", m, self.r.nrows()));
        }
        if self.r.ncols() != self.l.ncols() {
            return Err(Error::dim("factor R rank", self.l.ncols(), self.r.ncols()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Argument(format!("eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }

    pub fn product(&self) -> Matrix {
        &self.l * self.r.transpose()
    }

    /// `(|L|^2 + |R|^2) / 2 + |W - L R^T|^2 / (2 eta)`.
    pub fn objective(&self) -> f64 {
        self.factor_penalty() + (&self.w - self.product()).norm_squared() / (2.0 * self.eta)
    }

    /// `(|L|^2 + |R|^2) / 2`, an upper bound on the nuclear norm of `L R^T`.
    pub fn factor_penalty(&self) -> f64 {
        0.5 * (self.l.norm_squared() + self.r.norm_squared())
    }

    /// `nu = |L R^T - W|_F^2`.
    pub fn nu(&self) -> f64 {
        (self.product() - &self.w).norm_squared()
    }
}

/// `rhs (eta I + F^T F)^-1` through one shared k x k Cholesky factor.
fn ridge_solve(rhs: Matrix, f: &Matrix, eta: f64) -> Result<Matrix> {
    let k = f.ncols();
    let gram = f.tr_mul(f) + Matrix::identity(k, k) * eta;
    let chol = Cholesky::<f64, Dyn>::new(gram).ok_or_else(|| Error::Numerical("k x k ridge system is not positive definite".into()))?;
    // Row-wise systems X S = rhs with S symmetric: solve S X^T = rhs^T.
    let out = chol.solve(&rhs.transpose()).transpose();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite factor update".into()));
    }
    Ok(out)
}

/// Minimizer over `L` with `R`, `W` fixed: `L = W R (eta I + R^T R)^-1`.
pub fn update_l(t: &FactorTriple) -> Result<Matrix> {
    t.check()?;
    ridge_solve(&t.w * &t.r, &t.r, t.eta)
}

/// Minimizer over `R` with `L`, `W` fixed: `R = W^T L (eta I + L^T L)^-1`.
pub fn update_r(t: &FactorTriple) -> Result<Matrix> {
    t.check()?;
    ridge_solve(t.w.tr_mul(&t.l), &t.l, t.eta)
}

/// Closest `W` to `L R^T` satisfying the constraint: unobserved entries copy
/// `L R^T`, observed entries become `b + proj(mask(L R^T) - b)`.
pub fn update_w(t: &FactorTriple, data: &MaskedData, ball: &BallSpec) -> Result<Matrix> {
    t.check()?;
    if t.w.shape() != data.dims() {
        return Err(Error::dim("masked data rows x cols", t.w.len(), data.n * data.m));
    }
    let mut w = t.product();
    let z = project_ball(&(data.gather(&w) - data.values()), ball)?;
    for (k, &(i, j)) in data.indices().iter().enumerate() {
        w[(i, j)] = data.values()[k] + z[k];
    }
    Ok(w)
}

/// Step schedule for `eta`: `eta` times `factor` every `every` iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSchedule {
    pub eta: f64,
    pub decay: Option<(f64, usize)>,
}

impl Default for EtaSchedule {
    fn default() -> Self {
        EtaSchedule { eta: 1e-3, decay: None }
    }
}

impl EtaSchedule {
    /// Halve every 25 iterations.
    pub fn continuation(eta: f64) -> Self {
        EtaSchedule {
            eta,
            decay: Some((0.5, 25)),
        }
    }

    /// Weight used at 1-based iteration `iter`.
    pub fn at(&self, iter: usize) -> f64 {
        match self.decay {
            Some((factor, every)) => self.eta * factor.powi(((iter - 1) / every) as i32),
            None => self.eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.eta > 0.0 && self.eta.is_finite() && self.decay.is_none_or(|(f, every)| f > 0.0 && f < 1.0 && every >= 1);
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid eta schedule {self:?}")))
        }
    }
}

/// Stop once `nu` falls below this.
pub const NU_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowRankConfig {
    pub rank: usize,
    pub eta: EtaSchedule,
    pub max_iters: usize,
    pub seed: u64,
    /// Record `|L R^T|_*` (one SVD per iteration).
    pub track_nuclear: bool,
}

impl Default for LowRankConfig {
    fn default() -> Self {
        LowRankConfig {
            rank: 5,
            eta: EtaSchedule::default(),
            max_iters: 150,
            seed: 0,
            track_nuclear: false,
        }
    }
}

pub const LOWRANK_TRACE_HEADER: &str = "iter,eta,objective,nu,feasibility,factor_penalty,nuclear_norm,seconds";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowRankRecord {
    pub iter: usize,
    pub eta: f64,
    pub objective: f64,
    pub nu: f64,
    /// Distance of `mask(L R^T) - b` to the ball.
    pub feasibility: f64,
    pub factor_penalty: f64,
    /// `NaN` unless nuclear tracking is on.
    pub nuclear_norm: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LowRankTrace {
    pub records: Vec<LowRankRecord>,
}

impl LowRankTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W, include_time: bool) -> Result<()> {
        writeln!(out, "{LOWRANK_TRACE_HEADER}")?;
        for r in &self.records {
            let secs = if include_time { r.seconds } else { 0.0 };
            writeln!(
                out,
                "{},{:e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.6}",
                r.iter, r.eta, r.objective, r.nu, r.feasibility, r.factor_penalty, r.nuclear_norm, secs
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LowRankResult {
    pub triple: FactorTriple,
    pub trace: LowRankTrace,
    pub converged: bool,
}

pub fn nuclear_norm(x: &Matrix) -> f64 {
    x.singular_values().sum()
}

/// Starting triple: Gaussian factors scaled so `L R^T` matches the typical
/// observed magnitude, and `W` the zero-filled data.
pub fn initial_triple(data: &MaskedData, rank: usize, eta: f64, seed: u64) -> Result<FactorTriple> {
    let (n, m) = data.dims();
    if rank == 0 || rank > n.min(m) {
        return Err(Error::Argument(format!("rank {rank} must lie in 1..={}", n.min(m))));
    }
    let scale = if data.is_empty() {
        0.0
    } else {
        (data.values().norm() / ((data.len() * rank) as f64).sqrt()).sqrt()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = |rows: usize| Matrix::from_fn(rows, rank, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let l = gauss(n);
    let r = gauss(m);
    let w = data.scatter(data.values());
    let t = FactorTriple { l, r, w, eta };
    t.check()?;
    Ok(t)
}

/// Cycle `L`, `R`, `W` updates until `nu < NU_TOL` or `max_iters`.
pub fn solve_lowrank(data: &MaskedData, ball: &BallSpec, cfg: &LowRankConfig) -> Result<LowRankResult> {
    cfg.eta.validate()?;
    if cfg.max_iters == 0 {
        return Err(Error::Argument("max_iters must be at least 1".into()));
    }
    let start = Instant::now();
    let mut t = initial_triple(data, cfg.rank, cfg.eta.at(1), cfg.seed)?;
    let mut trace = LowRankTrace::default();
    let mut converged = false;
    for iter in 1..=cfg.max_iters {
        let wrap = |e: Error| e.at(0, iter);
        t.eta = cfg.eta.at(iter);
        t.l = update_l(&t).map_err(wrap)?;
        t.r = update_r(&t).map_err(wrap)?;
        t.w = update_w(&t, data, ball).map_err(wrap)?;

        let lr = t.product();
        let nu = (&lr - &t.w).norm_squared();
        let factor_penalty = t.factor_penalty();
        trace.records.push(LowRankRecord {
            iter,
            eta: t.eta,
            objective: factor_penalty + nu / (2.0 * t.eta),
            nu,
            feasibility: ball_distance(&(data.gather(&lr) - data.values()), ball),
            factor_penalty,
            nuclear_norm: if cfg.track_nuclear { nuclear_norm(&lr) } else { f64::NAN },
            seconds: start.elapsed().as_secs_f64(),
        });
        if nu < NU_TOL {
            converged = true;
            break;
        }
    }
    Ok(LowRankResult {
        triple: t,
        trace,
        converged,
    })
}
