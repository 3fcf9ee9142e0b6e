//! Measurements behind the solver properties, parameterized by instance
//! seed so the same code serves quick tests and the full acceptance runs.

use levelset::operators::{NormalSolver, SpdSolveConfig, Vector};
use levelset::prox::BallNorm;
use levelset::solvers::{initial_state, objective, rate_constant, run_fixed_eta, step_alg2_with, step_alg3_with, Algorithm};
use rand::Rng;

use super::{gauss, random_spec, rng};

/// Largest entrywise gap between `alg2` with `beta = eta1 = eta2` and
/// `alg3` over `iters` steps, both with exact solves. Instance size and
/// ball vary with `seed`.
pub fn value_iteration_vs_bcd(seed: u64, iters: usize) -> f64 {
    let mut r = rng(seed ^ 0xc0ffee);
    let n = r.random_range(4..=64);
    let d = r.random_range(2..n);
    let norm = BallNorm::ALL[seed as usize % 4];
    let spec = random_spec(seed, n, d, norm, seed % 2 == 1);
    let eta = 10f64.powf(r.random_range(-3.0..0.0));
    let cfg = SpdSolveConfig::exact_for(&spec.c, &spec.a);
    let solver = NormalSolver::new(&spec.c, &spec.a, eta, eta, &cfg).unwrap();
    let mut s2 = initial_state(&spec, eta, None).unwrap();
    let mut s3 = s2.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..iters {
        s2 = step_alg2_with(&spec, &s2, eta, &solver).unwrap();
        s3 = step_alg3_with(&spec, &s3, &solver).unwrap();
        let scale = 1.0 + s3.stacked().amax();
        worst = worst.max((s2.stacked() - s3.stacked()).amax() / scale);
    }
    worst
}

/// `(min_k |v_k|^2, C / N * (p(z_0) - p(z_{N+1})))` for `N + 1` prox-gradient
/// steps at a fixed `eta`.
pub fn telescoped_rate(seed: u64, n_steps: usize) -> (f64, f64) {
    let mut r = rng(seed ^ 0xbeef);
    let n = r.random_range(4..=40);
    let d = r.random_range(2..n);
    let norm = BallNorm::ALL[seed as usize % 4];
    let spec = random_spec(seed, n, d, norm, seed.is_multiple_of(3));
    let eta = 10f64.powf(r.random_range(-2.0..0.0));
    let p0 = objective(&spec, &initial_state(&spec, eta, None).unwrap()).unwrap();
    let res = run_fixed_eta(&spec, eta, &Algorithm::ProxGradient, n_steps + 1, None).unwrap();
    let min_v2 = res
        .trace
        .records
        .iter()
        .map(|rec| rec.stationarity.powi(2))
        .fold(f64::INFINITY, f64::min);
    let p_end = res.trace.last().unwrap().objective;
    let c = rate_constant(&spec, eta, eta);
    (min_v2, c / n_steps as f64 * (p0 - p_end))
}

/// Largest difference quotient of the value-function gradient over `probes`
/// random pairs, divided by `max(1/eta1, 1/eta2)`.
pub fn gradient_lipschitz_ratio(seed: u64, probes: usize) -> f64 {
    let mut r = rng(seed ^ 0x1dea);
    let n = r.random_range(4..=48);
    let d = r.random_range(2..n);
    let spec = random_spec(seed, n, d, BallNorm::L2, seed.is_multiple_of(2));
    let eta1 = 10f64.powf(r.random_range(-3.0..1.0));
    let eta2 = 10f64.powf(r.random_range(-3.0..1.0));
    let cfg = SpdSolveConfig::exact_for(&spec.c, &spec.a);
    let solver = NormalSolver::new(&spec.c, &spec.a, eta1, eta2, &cfg).unwrap();
    let c = spec.c.rows();
    let grad = |w1: &Vector, w2: &Vector| {
        let (g1, g2) = levelset::solvers::value_function_gradient(&spec, w1, w2, &solver).unwrap();
        (g1, g2)
    };
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let scale = 10f64.powf(r.random_range(-3.0..2.0));
        let (w1, w2) = (gauss(&mut r, c), gauss(&mut r, d));
        let (v1, v2) = (&w1 + gauss(&mut r, c) * scale, &w2 + gauss(&mut r, d) * scale);
        let (ga1, ga2) = grad(&w1, &w2);
        let (gb1, gb2) = grad(&v1, &v2);
        let num = ((ga1 - gb1).norm_squared() + (ga2 - gb2).norm_squared()).sqrt();
        let den = ((&w1 - &v1).norm_squared() + (&w2 - &v2).norm_squared()).sqrt();
        worst = worst.max(num / den);
    }
    worst / (1.0 / eta1).max(1.0 / eta2)
}
