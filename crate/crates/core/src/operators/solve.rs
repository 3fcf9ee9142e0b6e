use nalgebra::{Cholesky, Dyn};

use super::{LinearMap, Matrix, Vector, WoodburySolver};
use crate::error::{Error, Result};

/// How an SPD system is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpdMethod {
    /// Conjugate gradients, stopped at `max_iters` or when `|r| / |rhs| <= rel_tol`.
    Cg { max_iters: usize, rel_tol: f64 },
    /// Woodbury identity with a cached Cholesky factor; needs a tight-frame transform.
    WoodburyDirect,
    /// Elementwise division; needs a diagonal system.
    DiagonalFast,
    /// Cholesky of the materialized system.
    DenseCholesky,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdSolveConfig {
    pub method: SpdMethod,
    pub warm_start: bool,
}

pub const DEFAULT_CG_TOL: f64 = 1e-10;

impl Default for SpdSolveConfig {
    fn default() -> Self {
        SpdSolveConfig::cg(20)
    }
}

impl SpdSolveConfig {
    /// Warm-started CG with a fixed iteration budget.
    pub fn cg(max_iters: usize) -> Self {
        SpdSolveConfig {
            method: SpdMethod::Cg {
                max_iters,
                rel_tol: DEFAULT_CG_TOL,
            },
            warm_start: true,
        }
    }

    pub fn with_method(method: SpdMethod) -> Self {
        SpdSolveConfig { method, warm_start: true }
    }

    /// Cheapest exact method applicable to `H = C^T C / eta1 + A^T A / eta2`.
    pub fn exact_for(c: &LinearMap, a: &LinearMap) -> Self {
        let method = if c.is_tight_frame() && a.gram_diagonal().is_some() {
            SpdMethod::DiagonalFast
        } else if c.is_tight_frame() && a.rows() <= a.cols() {
            SpdMethod::WoodburyDirect
        } else {
            SpdMethod::DenseCholesky
        };
        SpdSolveConfig::with_method(method)
    }

    pub fn validate(&self) -> Result<()> {
        if let SpdMethod::Cg { max_iters, rel_tol } = self.method {
            if max_iters == 0 {
                return Err(Error::Argument("CG max_iters must be at least 1".into()));
            }
            if !(rel_tol > 0.0 && rel_tol < 1.0) {
                return Err(Error::Argument(format!("CG rel_tol must lie in (0, 1), got {rel_tol}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub x: Vector,
    pub iterations: usize,
}

fn ensure_finite(v: &Vector, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("non-finite values in {what}")))
    }
}

/// Plain CG on `H x = rhs` from `x0`.
pub fn conjugate_gradient(
    h: &dyn Fn(&Vector) -> Vector,
    rhs: &Vector,
    x0: Option<&Vector>,
    max_iters: usize,
    rel_tol: f64,
) -> Result<SolveOutcome> {
    let n = rhs.len();
    let rhs_norm = rhs.norm();
    if rhs_norm == 0.0 {
        return Ok(SolveOutcome {
            x: Vector::zeros(n),
            iterations: 0,
        });
    }
    ensure_finite(rhs, "CG right-hand side")?;
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.clone(),
        Some(x0) => return Err(Error::dim("CG initial guess", n, x0.len())),
        None => Vector::zeros(n),
    };
    let mut r = if x.iter().all(|v| *v == 0.0) { rhs.clone() } else { rhs - h(&x) };
    let mut rr = r.norm_squared();
    let target = rel_tol * rhs_norm;
    if rr.sqrt() <= target {
        return Ok(SolveOutcome { x, iterations: 0 });
    }
    let mut p = r.clone();
    for it in 1..=max_iters {
        let hp = h(&p);
        let curvature = p.dot(&hp);
        if !curvature.is_finite() || curvature <= 0.0 {
            return Err(Error::Numerical(format!("CG breakdown at iteration {it}: p^T H p = {curvature}")));
        }
        let step = rr / curvature;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &hp, 1.0);
        let rr_next = r.norm_squared();
        if !rr_next.is_finite() {
            return Err(Error::Numerical(format!("CG residual non-finite at iteration {it}")));
        }
        if rr_next.sqrt() <= target || it == max_iters {
            ensure_finite(&x, "CG iterate")?;
            return Ok(SolveOutcome { x, iterations: it });
        }
        p = &r + &p * (rr_next / rr);
        rr = rr_next;
    }
    unreachable!("max_iters >= 1 returns inside the loop")
}

/// Solve `H x = rhs` given only the action of `H`.
///
/// A closure carries no factor structure, so the direct methods probe it:
/// `DiagonalFast` reads the diagonal off `H 1`, and `WoodburyDirect` /
/// `DenseCholesky` factor the probed dense `H`.
pub fn solve_spd(h: &dyn Fn(&Vector) -> Vector, rhs: &Vector, config: &SpdSolveConfig, x0: Option<&Vector>) -> Result<SolveOutcome> {
    config.validate()?;
    let n = rhs.len();
    if rhs.iter().all(|v| *v == 0.0) {
        return Ok(SolveOutcome {
            x: Vector::zeros(n),
            iterations: 0,
        });
    }
    ensure_finite(rhs, "right-hand side")?;
    match config.method {
        SpdMethod::Cg { max_iters, rel_tol } => {
            let start = if config.warm_start { x0 } else { None };
            conjugate_gradient(h, rhs, start, max_iters, rel_tol)
        }
        SpdMethod::DiagonalFast => {
            let diag = h(&Vector::from_element(n, 1.0));
            divide_by_diagonal(&diag, rhs)
        }
        SpdMethod::WoodburyDirect | SpdMethod::DenseCholesky => {
            let mut dense = Matrix::zeros(n, n);
            let mut e = Vector::zeros(n);
            for j in 0..n {
                e[j] = 1.0;
                dense.set_column(j, &h(&e));
                e[j] = 0.0;
            }
            let chol = Cholesky::new(dense).ok_or_else(|| Error::Numerical("system is not SPD".into()))?;
            let x = chol.solve(rhs);
            ensure_finite(&x, "direct solve")?;
            Ok(SolveOutcome { x, iterations: 1 })
        }
    }
}

fn divide_by_diagonal(diag: &Vector, rhs: &Vector) -> Result<SolveOutcome> {
    if let Some(bad) = diag.iter().find(|d| **d <= 0.0 || !d.is_finite()) {
        return Err(Error::Numerical(format!("diagonal system has non-positive entry {bad}")));
    }
    Ok(SolveOutcome {
        x: rhs.component_div(diag),
        iterations: 1,
    })
}

#[derive(Debug, Clone)]
enum Backend {
    Cg {
        max_iters: usize,
        rel_tol: f64,
    },
    Woodbury(WoodburySolver),
    Diagonal {
        gram: Vector,
        diag: Vector,
    },
    Dense {
        gram_c: Matrix,
        gram_a: Matrix,
        factor: Cholesky<f64, Dyn>,
    },
}

/// Solver for the x-update system `H x = C^T w1 / eta1 + A^T (b + w2) / eta2`
/// with `H = C^T C / eta1 + A^T A / eta2`.
///
/// Direct backends factor once and are re-factored by [`NormalSolver::set_etas`]
/// when the weights change.
#[derive(Debug, Clone)]
pub struct NormalSolver<'a> {
    c: &'a LinearMap,
    a: &'a LinearMap,
    eta1: f64,
    eta2: f64,
    warm_start: bool,
    backend: Backend,
}

impl<'a> NormalSolver<'a> {
    pub fn new(c: &'a LinearMap, a: &'a LinearMap, eta1: f64, eta2: f64, config: &SpdSolveConfig) -> Result<Self> {
        config.validate()?;
        if c.cols() != a.cols() {
            return Err(Error::dim("normal system: C and A column counts", c.cols(), a.cols()));
        }
        if !(eta1 > 0.0 && eta2 > 0.0) {
            return Err(Error::Argument(format!("penalty weights must be positive, got {eta1}, {eta2}")));
        }
        let backend = match config.method {
            SpdMethod::Cg { max_iters, rel_tol } => Backend::Cg { max_iters, rel_tol },
            SpdMethod::WoodburyDirect => {
                if !c.is_tight_frame() {
                    return Err(Error::Argument(format!(
                        "Woodbury solve needs C^T C = I, but C is {}",
                        c.describe()
                    )));
                }
                Backend::Woodbury(WoodburySolver::new(a.to_dense(), eta1, eta2)?)
            }
            SpdMethod::DiagonalFast => {
                let gram = match (c.is_tight_frame(), a.gram_diagonal()) {
                    (true, Some(g)) => g,
                    _ => {
                        return Err(Error::Argument(format!(
                            "diagonal solve needs C^T C = I and diagonal A^T A, got C={} A={}",
                            c.describe(),
                            a.describe()
                        )))
                    }
                };
                let diag = gram.map(|g| 1.0 / eta1 + g / eta2);
                Backend::Diagonal { gram, diag }
            }
            SpdMethod::DenseCholesky => {
                let cd = c.to_dense();
                let ad = a.to_dense();
                let gram_c = cd.tr_mul(&cd);
                let gram_a = ad.tr_mul(&ad);
                let factor = dense_factor(&gram_c, &gram_a, eta1, eta2)?;
                Backend::Dense { gram_c, gram_a, factor }
            }
        };
        Ok(NormalSolver {
            c,
            a,
            eta1,
            eta2,
            warm_start: config.warm_start,
            backend,
        })
    }

    pub fn etas(&self) -> (f64, f64) {
        (self.eta1, self.eta2)
    }

    pub fn set_etas(&mut self, eta1: f64, eta2: f64) -> Result<()> {
        if eta1 == self.eta1 && eta2 == self.eta2 {
            return Ok(());
        }
        if !(eta1 > 0.0 && eta2 > 0.0) {
            return Err(Error::Argument(format!("penalty weights must be positive, got {eta1}, {eta2}")));
        }
        match &mut self.backend {
            Backend::Cg { .. } => {}
            Backend::Woodbury(w) => w.refactor(eta1, eta2)?,
            Backend::Diagonal { gram, diag } => *diag = gram.map(|g| 1.0 / eta1 + g / eta2),
            Backend::Dense { gram_c, gram_a, factor } => *factor = dense_factor(gram_c, gram_a, eta1, eta2)?,
        }
        self.eta1 = eta1;
        self.eta2 = eta2;
        Ok(())
    }

    /// `H x`, matrix-free.
    pub fn apply_h(&self, x: &Vector) -> Vector {
        let cx = self.c.adjoint_apply(&self.c.apply(x));
        let ax = self.a.adjoint_apply(&self.a.apply(x));
        cx / self.eta1 + ax / self.eta2
    }

    /// `C^T w1 / eta1 + A^T (b + w2) / eta2`.
    pub fn rhs(&self, w1: &Vector, w2: &Vector, b: &Vector) -> Vector {
        self.c.adjoint_apply(w1) / self.eta1 + self.a.adjoint_apply(&(b + w2)) / self.eta2
    }

    /// Minimizer `x` of `|C x - w1|^2 / (2 eta1) + |A x - b - w2|^2 / (2 eta2)`
    /// together with `A x`. The Woodbury backend gets both from a single pass
    /// over `A` in each direction.
    pub fn minimize(&self, w1: &Vector, w2: &Vector, b: &Vector, x0: Option<&Vector>) -> Result<(Vector, Vector)> {
        if let Backend::Woodbury(w) = &self.backend {
            if w2.len() != b.len() {
                return Err(Error::dim("normal system w2", b.len(), w2.len()));
            }
            return w.minimize(&self.c.adjoint_apply(w1), &(b + w2));
        }
        let x = self.solve(&self.rhs(w1, w2, b), x0)?.x;
        let ax = self.a.apply(&x);
        Ok((x, ax))
    }

    pub fn solve(&self, rhs: &Vector, x0: Option<&Vector>) -> Result<SolveOutcome> {
        if rhs.len() != self.c.cols() {
            return Err(Error::dim("normal system rhs", self.c.cols(), rhs.len()));
        }
        if rhs.iter().all(|v| *v == 0.0) {
            return Ok(SolveOutcome {
                x: Vector::zeros(rhs.len()),
                iterations: 0,
            });
        }
        match &self.backend {
            Backend::Cg { max_iters, rel_tol } => {
                let start = if self.warm_start { x0 } else { None };
                conjugate_gradient(&|v| self.apply_h(v), rhs, start, *max_iters, *rel_tol)
            }
            Backend::Woodbury(w) => {
                // H = (eta2 I + eta1 A^T A) / (eta1 eta2)
                let x = w.solve(rhs)? * (self.eta1 * self.eta2);
                Ok(SolveOutcome { x, iterations: 1 })
            }
            Backend::Diagonal { diag, .. } => divide_by_diagonal(diag, rhs),
            Backend::Dense { factor, .. } => {
                let x = factor.solve(rhs);
                ensure_finite(&x, "dense normal solve")?;
                Ok(SolveOutcome { x, iterations: 1 })
            }
        }
    }
}

fn dense_factor(gram_c: &Matrix, gram_a: &Matrix, eta1: f64, eta2: f64) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(gram_c / eta1 + gram_a / eta2).ok_or_else(|| Error::Numerical("normal matrix is not positive definite".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::OrthonormalTransform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_spd(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Matrix::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        g.tr_mul(&g) + Matrix::identity(n, n) * (n as f64)
    }

    #[test]
    fn identity_system_any_method() {
        let b = Vector::from_vec(vec![1.0, -2.0, 3.5]);
        let id = |v: &Vector| v.clone();
        for method in [
            SpdMethod::Cg {
                max_iters: 5,
                rel_tol: 1e-12,
            },
            SpdMethod::DiagonalFast,
            SpdMethod::DenseCholesky,
            SpdMethod::WoodburyDirect,
        ] {
            let out = solve_spd(&id, &b, &SpdSolveConfig::with_method(method), None).unwrap();
            assert!(out.iterations <= 1, "{method:?}");
            assert!((out.x - &b).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_rhs_short_circuits() {
        let out = solve_spd(&|v: &Vector| v * 2.0, &Vector::zeros(4), &SpdSolveConfig::default(), None).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, Vector::zeros(4));
    }

    #[test]
    fn diagonal_from_restriction_is_exact() {
        let (eta1, eta2) = (0.5, 0.125);
        let c = LinearMap::identity(5);
        let a = LinearMap::restriction(vec![0, 3], 5).unwrap();
        let ns = NormalSolver::new(&c, &a, eta1, eta2, &SpdSolveConfig::with_method(SpdMethod::DiagonalFast)).unwrap();
        let rhs = Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let x = ns.solve(&rhs, None).unwrap().x;
        let d = [1.0 / eta1 + 1.0 / eta2, 1.0 / eta1, 1.0 / eta1, 1.0 / eta1 + 1.0 / eta2, 1.0 / eta1];
        for i in 0..5 {
            assert_eq!(x[i], rhs[i] / d[i]);
        }
    }

    #[test]
    fn cg_matches_dense_oracle() {
        let h = random_spd(20, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = Vector::from_fn(20, |_, _| rng.sample(StandardNormal));
        let cfg = SpdSolveConfig::with_method(SpdMethod::Cg {
            max_iters: 200,
            rel_tol: 1e-12,
        });
        let out = solve_spd(&|v: &Vector| &h * v, &b, &cfg, None).unwrap();
        let oracle = h.clone().lu().solve(&b).unwrap();
        assert!((out.x - &oracle).norm() / oracle.norm() < 1e-8);
    }

    #[test]
    fn warm_start_at_solution_takes_no_iterations() {
        let h = random_spd(6, 7);
        let b = Vector::from_element(6, 1.0);
        let exact = h.clone().lu().solve(&b).unwrap();
        let cfg = SpdSolveConfig::with_method(SpdMethod::Cg {
            max_iters: 50,
            rel_tol: 1e-8,
        });
        let out = solve_spd(&|v: &Vector| &h * v, &b, &cfg, Some(&exact)).unwrap();
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn cg_reports_breakdown_on_indefinite() {
        let h = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]));
        let b = Vector::from_vec(vec![0.0, 1.0]);
        let cfg = SpdSolveConfig::with_method(SpdMethod::Cg {
            max_iters: 5,
            rel_tol: 1e-10,
        });
        assert!(matches!(solve_spd(&|v: &Vector| &h * v, &b, &cfg, None), Err(Error::Numerical(_))));
    }

    #[test]
    fn cg_rejects_non_finite_rhs() {
        let b = Vector::from_vec(vec![f64::NAN, 1.0]);
        assert!(matches!(
            solve_spd(&|v: &Vector| v.clone(), &b, &SpdSolveConfig::default(), None),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SpdSolveConfig::cg(0).validate().is_err());
        let bad = SpdSolveConfig::with_method(SpdMethod::Cg {
            max_iters: 3,
            rel_tol: 1.0,
        });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn backends_agree_on_normal_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = LinearMap::dense(Matrix::from_fn(6, 10, |_, _| rng.sample(StandardNormal)));
        let c = LinearMap::Orthonormal(OrthonormalTransform::dct(10));
        let (w1, w2, b) = (
            Vector::from_fn(10, |_, _| rng.sample(StandardNormal)),
            Vector::from_fn(6, |_, _| rng.sample(StandardNormal)),
            Vector::from_fn(6, |_, _| rng.sample(StandardNormal)),
        );
        let dense = NormalSolver::new(&c, &a, 0.3, 0.7, &SpdSolveConfig::with_method(SpdMethod::DenseCholesky)).unwrap();
        let wood = NormalSolver::new(&c, &a, 0.3, 0.7, &SpdSolveConfig::with_method(SpdMethod::WoodburyDirect)).unwrap();
        let cg = NormalSolver::new(
            &c,
            &a,
            0.3,
            0.7,
            &SpdSolveConfig::with_method(SpdMethod::Cg {
                max_iters: 100,
                rel_tol: 1e-14,
            }),
        )
        .unwrap();
        let rhs = dense.rhs(&w1, &w2, &b);
        let xd = dense.solve(&rhs, None).unwrap().x;
        let xw = wood.solve(&rhs, None).unwrap().x;
        let xc = cg.solve(&rhs, None).unwrap().x;
        assert!((&xd - &xw).norm() / xd.norm() < 1e-10);
        assert!((&xd - &xc).norm() / xd.norm() < 1e-8);
        assert!((dense.apply_h(&xd) - &rhs).norm() / rhs.norm() < 1e-10);
    }

    #[test]
    fn set_etas_refactors_every_backend() {
        let c = LinearMap::identity(4);
        let a = LinearMap::restriction(vec![1, 2], 4).unwrap();
        let rhs = Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        for method in [SpdMethod::DiagonalFast, SpdMethod::WoodburyDirect, SpdMethod::DenseCholesky] {
            let mut ns = NormalSolver::new(&c, &a, 1.0, 1.0, &SpdSolveConfig::with_method(method)).unwrap();
            ns.set_etas(0.1, 0.2).unwrap();
            let x = ns.solve(&rhs, None).unwrap().x;
            assert!((ns.apply_h(&x) - &rhs).norm() < 1e-10, "{method:?}");
        }
    }

    #[test]
    fn woodbury_requires_tight_frame() {
        let c = LinearMap::dense(Matrix::identity(3, 3) * 2.0);
        let a = LinearMap::identity(3);
        let err = NormalSolver::new(&c, &a, 1.0, 1.0, &SpdSolveConfig::with_method(SpdMethod::WoodburyDirect));
        assert!(matches!(err, Err(Error::Argument(_))));
    }
}
