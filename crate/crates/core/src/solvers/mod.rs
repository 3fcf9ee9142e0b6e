//! Relaxed level-set problem
//!
//! ```text
//! min  phi(w1) + |C x - w1|^2 / (2 eta1) + |w2 - A x + b|^2 / (2 eta2)
//! s.t. psi(w2) <= sigma
//! ```
//!
//! and the three splitting schemes that solve it: prox-gradient on the
//! stacked least-squares form, prox-gradient on the value function of `w`
//! (inexact or exact x-solves), and block-coordinate descent. A continuation
//! driver in [`continuation`] takes `eta1 = eta2 -> 0` with warm starts.

pub mod continuation;
mod steps;
mod trace;

use crate::error::{Error, Result};
use crate::operators::{LinearMap, NormalSolver, Vector};
use crate::prox::{ball_distance, BallSpec, Regularizer};

pub use continuation::{initial_state, run_fixed_eta, solve, Algorithm, ContinuationSchedule, SolveResult};
pub use steps::{step_alg1, step_alg2, step_alg2_with, step_alg3, step_alg3_with};
pub use trace::{IterateRecord, IterateTrace, TRACE_HEADER};

/// `min phi(C x)  s.t.  psi(A x - b) <= sigma`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    /// Observation operator, d x n.
    pub a: LinearMap,
    /// Transform, c x n.
    pub c: LinearMap,
    pub b: Vector,
    pub regularizer: Regularizer,
    pub ball: BallSpec,
}

impl ProblemSpec {
    pub fn new(a: LinearMap, c: LinearMap, b: Vector, regularizer: Regularizer, ball: BallSpec) -> Result<Self> {
        if a.cols() != c.cols() {
            return Err(Error::dim("problem: A and C column counts", c.cols(), a.cols()));
        }
        if b.len() != a.rows() {
            return Err(Error::dim("problem: observations vs A rows", a.rows(), b.len()));
        }
        regularizer.validate()?;
        BallSpec::new(ball.norm, ball.radius)?;
        Ok(ProblemSpec {
            a,
            c,
            b,
            regularizer,
            ball,
        })
    }

    /// Signal length.
    pub fn n(&self) -> usize {
        self.a.cols()
    }

    /// Transform-domain length.
    pub fn c_len(&self) -> usize {
        self.c.rows()
    }

    /// Number of observations.
    pub fn d(&self) -> usize {
        self.a.rows()
    }
}

/// The iterate `z = (x, w1, w2)` together with the relaxation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitState {
    pub x: Vector,
    pub w1: Vector,
    pub w2: Vector,
    pub eta1: f64,
    pub eta2: f64,
}

impl SplitState {
    pub fn check(&self, spec: &ProblemSpec) -> Result<()> {
        if self.x.len() != spec.n() {
            return Err(Error::dim("state x", spec.n(), self.x.len()));
        }
        if self.w1.len() != spec.c_len() {
            return Err(Error::dim("state w1", spec.c_len(), self.w1.len()));
        }
        if self.w2.len() != spec.d() {
            return Err(Error::dim("state w2", spec.d(), self.w2.len()));
        }
        if !(self.eta1 > 0.0 && self.eta2 > 0.0) {
            return Err(Error::Argument(format!(
                "eta1, eta2 must be positive, got {}, {}",
                self.eta1, self.eta2
            )));
        }
        Ok(())
    }

    /// Stack `(x, w1, w2)` into one vector.
    pub fn stacked(&self) -> Vector {
        let mut z = Vector::zeros(self.x.len() + self.w1.len() + self.w2.len());
        z.rows_mut(0, self.x.len()).copy_from(&self.x);
        z.rows_mut(self.x.len(), self.w1.len()).copy_from(&self.w1);
        z.rows_mut(self.x.len() + self.w1.len(), self.w2.len()).copy_from(&self.w2);
        z
    }

    pub(crate) fn ensure_finite(&self) -> Result<()> {
        let finite = |v: &Vector| v.iter().all(|x| x.is_finite());
        if finite(&self.x) && finite(&self.w1) && finite(&self.w2) {
            Ok(())
        } else {
            Err(Error::Numerical("iterate contains non-finite values".into()))
        }
    }
}

/// Tolerance on `w2`'s distance to the ball before the objective reports +inf.
pub const INFEASIBLE_TOL: f64 = 1e-9;

/// Smooth part of the relaxed objective (no `phi`, no indicator).
pub(crate) fn coupling(spec: &ProblemSpec, state: &SplitState) -> f64 {
    coupling_from(spec, state, &spec.c.apply(&state.x), &spec.a.apply(&state.x))
}

fn coupling_from(spec: &ProblemSpec, state: &SplitState, cx: &Vector, ax: &Vector) -> f64 {
    let r1 = cx - &state.w1;
    let r2 = &state.w2 - ax + &spec.b;
    r1.norm_squared() / (2.0 * state.eta1) + r2.norm_squared() / (2.0 * state.eta2)
}

/// Full relaxed objective; `+inf` when `w2` lies outside the ball.
pub fn objective(spec: &ProblemSpec, state: &SplitState) -> Result<f64> {
    state.check(spec)?;
    Ok(objective_from(spec, state, &spec.c.apply(&state.x), &spec.a.apply(&state.x)))
}

/// [`objective`] given `C x` and `A x`.
pub(crate) fn objective_from(spec: &ProblemSpec, state: &SplitState, cx: &Vector, ax: &Vector) -> f64 {
    if ball_distance(&state.w2, &spec.ball) > INFEASIBLE_TOL {
        return f64::INFINITY;
    }
    spec.regularizer.value(&state.w1) + coupling_from(spec, state, cx, ax)
}

/// `(c + |C|_F^2) / eta1 + (d + |A|_F^2) / eta2`: the squared Frobenius norm
/// of the stacked least-squares operator, an upper bound on its Lipschitz
/// constant.
pub fn rate_constant(spec: &ProblemSpec, eta1: f64, eta2: f64) -> f64 {
    let c_f = spec.c.frobenius_norm_sq().value;
    let a_f = spec.a.frobenius_norm_sq().value;
    (spec.c_len() as f64 + c_f) / eta1 + (spec.d() as f64 + a_f) / eta2
}

/// Prox-gradient step `1 / C`, with estimated Frobenius norms doubled first.
pub fn prox_gradient_step(spec: &ProblemSpec, eta1: f64, eta2: f64) -> f64 {
    let margin = |f: crate::operators::FrobeniusNormSq| if f.exact { f.value } else { 2.0 * f.value };
    let c_f = margin(spec.c.frobenius_norm_sq());
    let a_f = margin(spec.a.frobenius_norm_sq());
    1.0 / ((spec.c_len() as f64 + c_f) / eta1 + (spec.d() as f64 + a_f) / eta2)
}

/// `|v|` with `v = (C_rate I - M^T M)(z_prev - z_next)` for the stacked operator
/// `M = [C/sqrt(eta1), -I/sqrt(eta1), 0; A/sqrt(eta2), 0, -I/sqrt(eta2)]`:
/// the generalized gradient surrogate for consecutive iterates at the same
/// weights.
pub fn stationarity(spec: &ProblemSpec, prev: &SplitState, next: &SplitState) -> f64 {
    let dx = &prev.x - &next.x;
    let cr = rate_constant(spec, next.eta1, next.eta2);
    stationarity_from(spec, prev, next, cr, &spec.c.apply(&dx), &spec.a.apply(&dx))
}

/// [`stationarity`] given the rate constant `cr` and `C dx`, `A dx` for
/// `dx = x_prev - x_next`.
pub(crate) fn stationarity_from(spec: &ProblemSpec, prev: &SplitState, next: &SplitState, cr: f64, c_dx: &Vector, a_dx: &Vector) -> f64 {
    let (eta1, eta2) = (next.eta1, next.eta2);
    let dx = &prev.x - &next.x;
    let dw1 = &prev.w1 - &next.w1;
    let dw2 = &prev.w2 - &next.w2;
    let (s1, s2) = (eta1.sqrt(), eta2.sqrt());
    let u1 = (c_dx - &dw1) / s1;
    let u2 = (a_dx - &dw2) / s2;
    let gx = spec.c.adjoint_apply(&u1) / s1 + spec.a.adjoint_apply(&u2) / s2;
    let vx = dx * cr - gx;
    let v1 = dw1 * cr + u1 / s1;
    let v2 = dw2 * cr + u2 / s2;
    (vx.norm_squared() + v1.norm_squared() + v2.norm_squared()).sqrt()
}

/// Minimizer `x(w)` of the coupling term for fixed `w`.
pub fn partial_minimizer(spec: &ProblemSpec, w1: &Vector, w2: &Vector, solver: &NormalSolver<'_>, x0: Option<&Vector>) -> Result<Vector> {
    let rhs = solver.rhs(w1, w2, &spec.b);
    Ok(solver.solve(&rhs, x0)?.x)
}

/// Value `min_x Q(x, w)` of the coupling term.
pub fn value_function(spec: &ProblemSpec, w1: &Vector, w2: &Vector, solver: &NormalSolver<'_>) -> Result<f64> {
    let x = partial_minimizer(spec, w1, w2, solver, None)?;
    let (eta1, eta2) = solver.etas();
    let state = SplitState {
        x,
        w1: w1.clone(),
        w2: w2.clone(),
        eta1,
        eta2,
    };
    Ok(coupling(spec, &state))
}

/// Gradient of `w -> min_x Q(x, w)`:
/// `((w1 - C x(w)) / eta1, (w2 - A x(w) + b) / eta2)`.
pub fn value_function_gradient(spec: &ProblemSpec, w1: &Vector, w2: &Vector, solver: &NormalSolver<'_>) -> Result<(Vector, Vector)> {
    let x = partial_minimizer(spec, w1, w2, solver, None)?;
    let (eta1, eta2) = solver.etas();
    let g1 = (w1 - spec.c.apply(&x)) / eta1;
    let g2 = (w2 - spec.a.apply(&x) + &spec.b) / eta2;
    Ok((g1, g2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{Matrix, SpdSolveConfig};
    use crate::prox::BallNorm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gauss(rng: &mut ChaCha8Rng, n: usize) -> Vector {
        Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
    }

    fn random_spec(seed: u64, n: usize, d: usize) -> ProblemSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix::from_fn(d, n, |_, _| rng.sample(StandardNormal));
        let b = gauss(&mut rng, d);
        ProblemSpec::new(
            LinearMap::dense(a),
            LinearMap::identity(n),
            b,
            Regularizer::l1(),
            BallSpec::l2(0.5).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn objective_at_origin_is_zero() {
        let spec = ProblemSpec::new(
            LinearMap::identity(3),
            LinearMap::identity(3),
            Vector::zeros(3),
            Regularizer::l1(),
            BallSpec::l1(1.0).unwrap(),
        )
        .unwrap();
        let s = SplitState {
            x: Vector::zeros(3),
            w1: Vector::zeros(3),
            w2: Vector::zeros(3),
            eta1: 0.1,
            eta2: 0.2,
        };
        assert_eq!(objective(&spec, &s).unwrap(), 0.0);
    }

    #[test]
    fn objective_consistency_limit_and_direct_formula() {
        let spec = random_spec(1, 6, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = gauss(&mut rng, 6);
        let w1 = spec.c.apply(&x);
        let w2 = crate::prox::project_ball(&(spec.a.apply(&x) - &spec.b), &spec.ball).unwrap();
        let s = SplitState {
            x: x.clone(),
            w1: w1.clone(),
            w2: w2.clone(),
            eta1: 0.3,
            eta2: 0.7,
        };
        // Direct re-evaluation with dense matrices.
        let ad = spec.a.to_dense();
        let direct = w1.iter().map(|v| v.abs()).sum::<f64>() + 0.0 + (&w2 - &ad * &x + &spec.b).norm_squared() / (2.0 * 0.7);
        assert!((objective(&spec, &s).unwrap() - direct).abs() < 1e-12 * direct.max(1.0));

        // Remove the w2 mismatch too: only phi remains when w2 = A x - b is feasible.
        let feasible = ProblemSpec {
            ball: BallSpec::l2(1e6).unwrap(),
            ..spec.clone()
        };
        let s2 = SplitState {
            w2: spec.a.apply(&x) - &spec.b,
            ..s
        };
        assert_eq!(objective(&feasible, &s2).unwrap(), Regularizer::l1().value(&w1));
    }

    #[test]
    fn objective_flags_infeasible_w2() {
        let spec = random_spec(3, 4, 3);
        let s = SplitState {
            x: Vector::zeros(4),
            w1: Vector::zeros(4),
            w2: Vector::from_element(3, 10.0),
            eta1: 1.0,
            eta2: 1.0,
        };
        assert_eq!(objective(&spec, &s).unwrap(), f64::INFINITY);
        let bad = SplitState { x: Vector::zeros(2), ..s };
        assert!(matches!(objective(&spec, &bad), Err(Error::Dimension { .. })));
    }

    #[test]
    fn rate_constant_substitution() {
        let spec = ProblemSpec::new(
            LinearMap::identity(2),
            LinearMap::identity(2),
            Vector::zeros(2),
            Regularizer::l1(),
            BallSpec::l2(1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(rate_constant(&spec, 1.0, 1.0), 8.0);

        let dense = random_spec(4, 5, 3);
        let fro: f64 = dense.a.to_dense().iter().map(|v| v * v).sum();
        let expected = (5.0 + 5.0) / 0.2 + (3.0 + fro) / 0.4;
        assert!((rate_constant(&dense, 0.2, 0.4) - expected).abs() < 1e-12 * expected);
    }

    /// Dense stacked-matrix evaluation of (C I - M^T M) dz.
    fn dense_stationarity(spec: &ProblemSpec, prev: &SplitState, next: &SplitState) -> f64 {
        let (n, c, d) = (spec.n(), spec.c_len(), spec.d());
        let (e1, e2) = (next.eta1.sqrt(), next.eta2.sqrt());
        let mut m = Matrix::zeros(c + d, n + c + d);
        m.view_mut((0, 0), (c, n)).copy_from(&(spec.c.to_dense() / e1));
        m.view_mut((0, n), (c, c)).copy_from(&(-Matrix::identity(c, c) / e1));
        m.view_mut((c, 0), (d, n)).copy_from(&(spec.a.to_dense() / e2));
        m.view_mut((c, n + c), (d, d)).copy_from(&(-Matrix::identity(d, d) / e2));
        let cr = rate_constant(spec, next.eta1, next.eta2);
        let dz = prev.stacked() - next.stacked();
        let op = Matrix::identity(n + c + d, n + c + d) * cr - m.transpose() * &m;
        (op * dz).norm()
    }

    #[test]
    fn stationarity_matches_dense_oracle() {
        let spec = random_spec(5, 7, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mk = |rng: &mut ChaCha8Rng| SplitState {
            x: gauss(rng, 7),
            w1: gauss(rng, 7),
            w2: gauss(rng, 4),
            eta1: 0.25,
            eta2: 0.5,
        };
        let (p, q) = (mk(&mut rng), mk(&mut rng));
        let got = stationarity(&spec, &p, &q);
        let want = dense_stationarity(&spec, &p, &q);
        assert!((got - want).abs() <= 1e-10 * want);
        assert_eq!(stationarity(&spec, &p, &p), 0.0);
    }

    #[test]
    fn value_gradient_matches_finite_differences() {
        let spec = random_spec(7, 8, 5);
        let (eta1, eta2) = (0.3, 0.6);
        let cfg = SpdSolveConfig::exact_for(&spec.c, &spec.a);
        let solver = NormalSolver::new(&spec.c, &spec.a, eta1, eta2, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w1 = gauss(&mut rng, 8);
        let w2 = gauss(&mut rng, 5);
        let (g1, g2) = value_function_gradient(&spec, &w1, &w2, &solver).unwrap();
        let h = 1e-5;
        let mut fd = Vec::new();
        for i in 0..8 {
            let mut p = w1.clone();
            let mut m = w1.clone();
            p[i] += h;
            m[i] -= h;
            fd.push((value_function(&spec, &p, &w2, &solver).unwrap() - value_function(&spec, &m, &w2, &solver).unwrap()) / (2.0 * h));
        }
        for i in 0..5 {
            let mut p = w2.clone();
            let mut m = w2.clone();
            p[i] += h;
            m[i] -= h;
            fd.push((value_function(&spec, &w1, &p, &solver).unwrap() - value_function(&spec, &w1, &m, &solver).unwrap()) / (2.0 * h));
        }
        let analytic: Vec<f64> = g1.iter().chain(g2.iter()).copied().collect();
        let num = analytic.iter().zip(&fd).map(|(a, f)| (a - f).powi(2)).sum::<f64>().sqrt();
        let den = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(num / den < 1e-5, "relative FD error {}", num / den);
    }

    #[test]
    fn spec_validation() {
        let err = ProblemSpec::new(
            LinearMap::identity(3),
            LinearMap::identity(4),
            Vector::zeros(3),
            Regularizer::l1(),
            BallSpec::l2(1.0).unwrap(),
        );
        assert!(err.is_err());
        let err = ProblemSpec::new(
            LinearMap::identity(3),
            LinearMap::identity(3),
            Vector::zeros(2),
            Regularizer::l1(),
            BallSpec::new(BallNorm::L1, 1.0).unwrap(),
        );
        assert!(err.is_err());
    }
}
