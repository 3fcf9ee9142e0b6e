use super::{ProblemSpec, SplitState};
use crate::error::Result;
use crate::operators::{NormalSolver, SpdSolveConfig, Vector};
use crate::prox::project_ball;

/// One prox-gradient step on the stacked least-squares form, step `alpha`.
///
/// All three blocks use the gradient at the current iterate, so this is
/// exactly `z+ = prox_{alpha Phi}(z - alpha grad f(z))`.
pub fn step_alg1(spec: &ProblemSpec, state: &SplitState, alpha: f64) -> Result<SplitState> {
    state.check(spec)?;
    Ok(alg1(spec, state, alpha, &spec.a.apply(&state.x))?.0)
}

/// [`step_alg1`] given `ax = A x`; also returns `A x+`.
pub(crate) fn alg1(spec: &ProblemSpec, state: &SplitState, alpha: f64, ax: &Vector) -> Result<(SplitState, Vector)> {
    let (eta1, eta2) = (state.eta1, state.eta2);
    let r1 = (spec.c.apply(&state.x) - &state.w1) / eta1;
    let r2 = (ax - &state.w2 - &spec.b) / eta2;
    let grad_x = spec.c.adjoint_apply(&r1) + spec.a.adjoint_apply(&r2);

    let x = &state.x - grad_x * alpha;
    let w1 = spec.regularizer.prox(&(&state.w1 + &r1 * alpha), alpha);
    let w2 = project_ball(&(&state.w2 + &r2 * alpha), &spec.ball)?;
    let ax_next = spec.a.apply(&x);
    let next = SplitState { x, w1, w2, eta1, eta2 };
    next.ensure_finite()?;
    Ok((next, ax_next))
}

/// Value-function prox-gradient step with step `beta`, solving for `x(w)`
/// with a caller-owned solver (so factorizations persist across steps).
pub fn step_alg2_with(spec: &ProblemSpec, state: &SplitState, beta: f64, solver: &NormalSolver<'_>) -> Result<SplitState> {
    state.check(spec)?;
    Ok(alg2(spec, state, beta, solver)?.0)
}

pub(crate) fn alg2(spec: &ProblemSpec, state: &SplitState, beta: f64, solver: &NormalSolver<'_>) -> Result<(SplitState, Vector)> {
    let (eta1, eta2) = (state.eta1, state.eta2);
    let (x, ax) = solver.minimize(&state.w1, &state.w2, &spec.b, Some(&state.x))?;

    let cx = spec.c.apply(&x);
    let w1_arg = &state.w1 - (&state.w1 - &cx) * (beta / eta1);
    let w1 = spec.regularizer.prox(&w1_arg, beta);

    let res = &ax - &spec.b;
    let w2_arg = &state.w2 - (&state.w2 - &res) * (beta / eta2);
    let w2 = project_ball(&w2_arg, &spec.ball)?;

    let next = SplitState { x, w1, w2, eta1, eta2 };
    next.ensure_finite()?;
    Ok((next, ax))
}

/// [`step_alg2_with`] building a fresh solver from `ls`.
pub fn step_alg2(spec: &ProblemSpec, state: &SplitState, beta: f64, ls: &SpdSolveConfig) -> Result<SplitState> {
    let solver = NormalSolver::new(&spec.c, &spec.a, state.eta1, state.eta2, ls)?;
    step_alg2_with(spec, state, beta, &solver)
}

/// Block-coordinate descent: each block minimized exactly given the others.
pub fn step_alg3_with(spec: &ProblemSpec, state: &SplitState, solver: &NormalSolver<'_>) -> Result<SplitState> {
    state.check(spec)?;
    Ok(alg3(spec, state, solver)?.0)
}

pub(crate) fn alg3(spec: &ProblemSpec, state: &SplitState, solver: &NormalSolver<'_>) -> Result<(SplitState, Vector)> {
    let (eta1, eta2) = (state.eta1, state.eta2);
    let (x, ax) = solver.minimize(&state.w1, &state.w2, &spec.b, Some(&state.x))?;
    let w1 = spec.regularizer.prox(&spec.c.apply(&x), eta1);
    let w2 = project_ball(&(&ax - &spec.b), &spec.ball)?;
    let next = SplitState { x, w1, w2, eta1, eta2 };
    next.ensure_finite()?;
    Ok((next, ax))
}

/// [`step_alg3_with`] using the cheapest exact solver for the problem.
pub fn step_alg3(spec: &ProblemSpec, state: &SplitState) -> Result<SplitState> {
    let cfg = SpdSolveConfig::exact_for(&spec.c, &spec.a);
    let solver = NormalSolver::new(&spec.c, &spec.a, state.eta1, state.eta2, &cfg)?;
    step_alg3_with(spec, state, &solver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{LinearMap, Matrix, SpdMethod};
    use crate::prox::{ball_distance, prox_l1, BallSpec, Regularizer};
    use crate::solvers::{objective, prox_gradient_step};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gauss(rng: &mut ChaCha8Rng, n: usize) -> Vector {
        Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
    }

    fn instance(seed: u64, n: usize, d: usize, ball: BallSpec) -> (ProblemSpec, SplitState) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix::from_fn(d, n, |_, _| rng.sample(StandardNormal));
        let b = gauss(&mut rng, d);
        let spec = ProblemSpec::new(LinearMap::dense(a), LinearMap::identity(n), b, Regularizer::l1(), ball).unwrap();
        let x = gauss(&mut rng, n);
        let w1 = gauss(&mut rng, n);
        let w2 = project_ball(&gauss(&mut rng, d), &spec.ball).unwrap();
        (
            spec,
            SplitState {
                x,
                w1,
                w2,
                eta1: 0.5,
                eta2: 0.5,
            },
        )
    }

    #[test]
    fn alg1_matches_dense_prox_gradient() {
        // 2-variable instance, dense C so every block is exercised.
        let spec = ProblemSpec::new(
            LinearMap::dense(Matrix::from_row_slice(1, 2, &[1.0, -2.0])),
            LinearMap::dense(Matrix::from_row_slice(2, 2, &[2.0, 0.5, -1.0, 1.0])),
            Vector::from_vec(vec![0.7]),
            Regularizer::l1(),
            BallSpec::l1(0.2).unwrap(),
        )
        .unwrap();
        let s = SplitState {
            x: Vector::from_vec(vec![0.3, -0.4]),
            w1: Vector::from_vec(vec![1.0, 0.2]),
            w2: Vector::from_vec(vec![0.1]),
            eta1: 0.5,
            eta2: 0.25,
        };
        let alpha = prox_gradient_step(&spec, s.eta1, s.eta2);

        // Stacked M z - a with z = (x, w1, w2).
        let (e1, e2) = (s.eta1.sqrt(), s.eta2.sqrt());
        let mut m = Matrix::zeros(3, 5);
        m.view_mut((0, 0), (2, 2)).copy_from(&(spec.c.to_dense() / e1));
        m.view_mut((0, 2), (2, 2)).copy_from(&(-Matrix::identity(2, 2) / e1));
        m.view_mut((2, 0), (1, 2)).copy_from(&(spec.a.to_dense() / e2));
        m[(2, 4)] = -1.0 / e2;
        let a_vec = Vector::from_vec(vec![0.0, 0.0, 0.7 / e2]);
        let z = s.stacked();
        let g = z.clone() - m.transpose() * (&m * &z - a_vec) * alpha;
        let want_x = g.rows(0, 2).into_owned();
        let want_w1 = prox_l1(&g.rows(2, 2).into_owned(), alpha);
        let want_w2 = project_ball(&g.rows(4, 1).into_owned(), &spec.ball).unwrap();

        let got = step_alg1(&spec, &s, alpha).unwrap();
        assert!((got.x - want_x).norm() < 1e-12);
        assert!((got.w1 - want_w1).norm() < 1e-12);
        assert!((got.w2 - want_w2).norm() < 1e-12);
    }

    #[test]
    fn alg1_fixed_point_is_stationary() {
        // x = 0, w1 = 0, w2 = -b feasible with b small: every gradient vanishes.
        let spec = ProblemSpec::new(
            LinearMap::identity(2),
            LinearMap::identity(2),
            Vector::from_vec(vec![0.1, -0.1]),
            Regularizer::l1(),
            BallSpec::l2(1.0).unwrap(),
        )
        .unwrap();
        let s = SplitState {
            x: Vector::zeros(2),
            w1: Vector::zeros(2),
            w2: Vector::from_vec(vec![-0.1, 0.1]),
            eta1: 0.1,
            eta2: 0.1,
        };
        let alpha = prox_gradient_step(&spec, 0.1, 0.1);
        let next = step_alg1(&spec, &s, alpha).unwrap();
        assert!((next.stacked() - s.stacked()).norm() < 1e-12);
        assert!((step_alg3(&spec, &s).unwrap().stacked() - s.stacked()).norm() < 1e-12);
    }

    #[test]
    fn alg1_monotone_from_random_starts() {
        for seed in 0..100 {
            let (spec, s) = instance(seed, 6, 4, BallSpec::l1(0.8).unwrap());
            let alpha = prox_gradient_step(&spec, s.eta1, s.eta2);
            let before = objective(&spec, &s).unwrap();
            let after = objective(&spec, &step_alg1(&spec, &s, alpha).unwrap()).unwrap();
            assert!(after <= before + 1e-12, "seed {seed}: {after} > {before}");
        }
    }

    #[test]
    fn alg3_monotone_and_feasible() {
        for seed in 0..20 {
            let (spec, mut s) = instance(100 + seed, 8, 5, BallSpec::linf(0.3).unwrap());
            let mut prev = objective(&spec, &s).unwrap();
            for _ in 0..50 {
                s = step_alg3(&spec, &s).unwrap();
                assert_eq!(ball_distance(&s.w2, &spec.ball), 0.0);
                let cur = objective(&spec, &s).unwrap();
                assert!(cur <= prev + 1e-12);
                prev = cur;
            }
        }
    }

    #[test]
    fn alg2_diagonal_matches_cg() {
        let n = 16;
        let c = LinearMap::Orthonormal(crate::operators::OrthonormalTransform::dct(n));
        let a = LinearMap::restriction(vec![0, 2, 3, 7, 9, 12, 15], n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = gauss(&mut rng, 7);
        let spec = ProblemSpec::new(a, c, b, Regularizer::l1(), BallSpec::l1(0.5).unwrap()).unwrap();
        let s = SplitState {
            x: gauss(&mut rng, n),
            w1: gauss(&mut rng, n),
            w2: Vector::zeros(7),
            eta1: 0.2,
            eta2: 0.1,
        };
        let diag = step_alg2(&spec, &s, 0.1, &SpdSolveConfig::with_method(SpdMethod::DiagonalFast)).unwrap();
        let cg = step_alg2(
            &spec,
            &s,
            0.1,
            &SpdSolveConfig::with_method(SpdMethod::Cg {
                max_iters: 200,
                rel_tol: 1e-14,
            }),
        )
        .unwrap();
        assert!((diag.x - cg.x).norm() <= 1e-10);
    }

    #[test]
    fn alg2_with_full_step_is_block_descent() {
        let (spec, mut s2) = instance(9, 10, 6, BallSpec::l1(1.0).unwrap());
        let mut s3 = s2.clone();
        let cfg = SpdSolveConfig::exact_for(&spec.c, &spec.a);
        let solver = NormalSolver::new(&spec.c, &spec.a, 0.5, 0.5, &cfg).unwrap();
        for _ in 0..50 {
            s2 = step_alg2_with(&spec, &s2, 0.5, &solver).unwrap();
            s3 = step_alg3_with(&spec, &s3, &solver).unwrap();
            assert!((s2.stacked() - s3.stacked()).amax() <= 1e-12);
        }
    }
}
