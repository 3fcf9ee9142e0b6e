//! Brute-force oracles and random instances shared by the integration tests.
#![allow(dead_code)]

use levelset::operators::{LinearMap, Matrix, OrthonormalTransform, Vector};
use levelset::prox::{BallNorm, BallSpec, Regularizer};
use levelset::solvers::ProblemSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub mod checks;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn gauss_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Euclidean projection onto the l1 ball by enumerating sign patterns.
///
/// Outside the ball the projection sits on the boundary, where it solves
/// `min |x - z|^2  s.t.  s^T x = r, x_i = 0 off S` for its own sign vector
/// `s` and support `S`. That problem has the closed form
/// `x_S = z_S - lambda s_S`; every pattern whose solution is sign-consistent
/// is a candidate and the closest candidate wins.
pub fn l1_projection_oracle(z: &[f64], radius: f64) -> Vec<f64> {
    let n = z.len();
    if z.iter().map(|v| v.abs()).sum::<f64>() <= radius {
        return z.to_vec();
    }
    if radius == 0.0 {
        return vec![0.0; n];
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let patterns = 3usize.pow(n as u32);
    for code in 1..patterns {
        let mut s = vec![0.0; n];
        let mut c = code;
        for si in s.iter_mut() {
            *si = [0.0, 1.0, -1.0][c % 3];
            c /= 3;
        }
        let support = s.iter().filter(|v| **v != 0.0).count() as f64;
        let lambda = (s.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() - radius) / support;
        let x: Vec<f64> = s
            .iter()
            .zip(z)
            .map(|(&si, &zi)| if si == 0.0 { 0.0 } else { zi - lambda * si })
            .collect();
        if x.iter().zip(&s).any(|(xi, si)| xi * si < 0.0) {
            continue;
        }
        let dist: f64 = x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, x));
        }
    }
    best.expect("some sign pattern is consistent").1
}

/// Smallest squared distance from `z` to any vector supported on `tau`
/// indices, by enumerating every support.
pub fn l0_best_distance(z: &[f64], tau: usize) -> f64 {
    let n = z.len();
    let total: f64 = z.iter().map(|v| v * v).sum();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != tau {
            continue;
        }
        let kept: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| z[i] * z[i]).sum();
        best = best.min(total - kept);
    }
    best
}

/// `argmin_x (x - y)^2 / (2 alpha) + |x|` by grid search, then bisection
/// on the derivative inside the best grid cell (function values are too flat
/// near the minimum to resolve 1e-8).
pub fn scalar_prox_oracle(y: f64, alpha: f64) -> f64 {
    let f = |x: f64| (x - y).powi(2) / (2.0 * alpha) + x.abs();
    let span = y.abs() + 1.0;
    let steps = 4000;
    let grid = |k: usize| -span + 2.0 * span * k as f64 / steps as f64;
    let best = (0..=steps).map(grid).min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
    let h = 2.0 * span / steps as f64;
    // Right derivative; nondecreasing because f is convex.
    let df = |x: f64| (x - y) / alpha + if x >= 0.0 { 1.0 } else { -1.0 };
    let (mut lo, mut hi) = (best - h, best + h);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if df(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    // The kink at zero is a minimizer whenever |y| <= alpha.
    if lo < 0.0 && hi >= 0.0 || f(0.0) <= f(x) {
        0.0
    } else {
        x
    }
}

/// Random problem with dense `A` (d x n), `C` either the identity or an
/// orthonormal DCT, and a ball whose radius leaves `b` infeasible at `x = 0`.
pub fn random_spec(seed: u64, n: usize, d: usize, norm: BallNorm, dct: bool) -> ProblemSpec {
    let mut r = rng(seed);
    let a = gauss_matrix(&mut r, d, n);
    let b = gauss(&mut r, d);
    let radius = match norm {
        BallNorm::L0 => (d / 3) as f64,
        _ => 0.3 * norm.eval(&b),
    };
    let c = if dct {
        LinearMap::Orthonormal(OrthonormalTransform::dct(n))
    } else {
        LinearMap::identity(n)
    };
    ProblemSpec::new(LinearMap::dense(a), c, b, Regularizer::l1(), BallSpec::new(norm, radius).unwrap()).unwrap()
}

pub fn max_abs_diff(a: &Vector, b: &Vector) -> f64 {
    (a - b).amax()
}

/// Runs the CLI binary for `study` with `config` in a fresh directory and
/// returns its exit code and output directory.
pub fn run_cli(study: &str, config: &str, extra: &[&str]) -> (i32, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    std::fs::write(&cfg, config).unwrap();
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_levelset"))
        .arg(study)
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path().join("out"))
        .args(extra)
        .output()
        .unwrap();
    (status.status.code().unwrap_or(-1), dir)
}

/// `report.csv` from a [`run_cli`] directory with the timing column dropped.
pub fn report_without_time(dir: &tempfile::TempDir) -> Vec<String> {
    let text = std::fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    text.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}
