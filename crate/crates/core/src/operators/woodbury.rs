use nalgebra::Cholesky;

use super::{mul_sparse_aware, Matrix, Vector};
use crate::error::{Error, Result};

/// Solves `(eta2 I + eta1 A^T A) x = r` for a wide dense `A` (d x n) through
///
/// ```text
/// (eta2 I + eta1 A^T A)^-1 = I/eta2 - A^T (I/eta1 + A A^T/eta2)^-1 A / eta2^2
/// ```
///
/// so only a d x d system is ever factored. The Gram matrix `A A^T` is cached,
/// which makes [`WoodburySolver::refactor`] cheap when the penalty weights
/// change along a continuation path. The inner matrix is at least `I/eta1`,
/// so its inverse is formed explicitly and applied as a plain product.
#[derive(Debug, Clone)]
pub struct WoodburySolver {
    a: Matrix,
    at: Matrix,
    gram: Matrix,
    eta1: f64,
    eta2: f64,
    inner_inv: Matrix,
    factorizations: usize,
}

fn check_etas(eta1: f64, eta2: f64) -> Result<()> {
    if !(eta1 > 0.0 && eta2 > 0.0 && eta1.is_finite() && eta2.is_finite()) {
        return Err(Error::Argument(format!(
            "penalty weights must be positive, got eta1={eta1}, eta2={eta2}"
        )));
    }
    Ok(())
}

fn invert_inner(gram: &Matrix, eta1: f64, eta2: f64) -> Result<Matrix> {
    let d = gram.nrows();
    let inner = Matrix::identity(d, d) / eta1 + gram / eta2;
    Cholesky::new(inner)
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Numerical("Cholesky of the Woodbury inner matrix failed".into()))
}

impl WoodburySolver {
    pub fn new(a: Matrix, eta1: f64, eta2: f64) -> Result<Self> {
        check_etas(eta1, eta2)?;
        let at = a.transpose();
        let gram = &a * &at;
        let inner_inv = invert_inner(&gram, eta1, eta2)?;
        Ok(WoodburySolver {
            a,
            at,
            gram,
            eta1,
            eta2,
            inner_inv,
            factorizations: 1,
        })
    }

    /// Re-factor for new weights, reusing the cached `A A^T`. A no-op when
    /// the weights are unchanged.
    pub fn refactor(&mut self, eta1: f64, eta2: f64) -> Result<()> {
        check_etas(eta1, eta2)?;
        if eta1 == self.eta1 && eta2 == self.eta2 {
            return Ok(());
        }
        self.inner_inv = invert_inner(&self.gram, eta1, eta2)?;
        self.eta1 = eta1;
        self.eta2 = eta2;
        self.factorizations += 1;
        Ok(())
    }

    pub fn etas(&self) -> (f64, f64) {
        (self.eta1, self.eta2)
    }

    /// How many d x d factorizations this solver has performed.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    pub fn solve(&self, rhs: &Vector) -> Result<Vector> {
        if rhs.len() != self.a.ncols() {
            return Err(Error::dim("woodbury rhs", self.a.ncols(), rhs.len()));
        }
        let inner = &self.inner_inv * (&self.a * rhs);
        let x = rhs / self.eta2 - &self.at * inner / (self.eta2 * self.eta2);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite Woodbury solution".into()));
        }
        Ok(x)
    }

    /// Minimizer of `|x - g|^2 / (2 eta1) + |A x - u|^2 / (2 eta2)` together
    /// with `A x`, using one product with `A` and one with `A^T`.
    ///
    /// With `t = eta1 / eta2` and `K = I/eta1 + A A^T/eta2`, the push-through
    /// identity gives `x = g + A^T y` where
    /// `y = t (u - K^-1 (A g / eta1 + A A^T u / eta2))`, and then
    /// `A x = A g + (A A^T) y` needs no further pass over `A`.
    pub fn minimize(&self, g: &Vector, u: &Vector) -> Result<(Vector, Vector)> {
        if g.len() != self.a.ncols() {
            return Err(Error::dim("woodbury g", self.a.ncols(), g.len()));
        }
        if u.len() != self.a.nrows() {
            return Err(Error::dim("woodbury u", self.a.nrows(), u.len()));
        }
        let ag = mul_sparse_aware(&self.a, g);
        let a_rhs = &ag / self.eta1 + &self.gram * u / self.eta2;
        let y = (u - &self.inner_inv * a_rhs) * (self.eta1 / self.eta2);
        let x = g + &self.at * &y;
        let ax = ag + &self.gram * y;
        if x.iter().chain(ax.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite Woodbury solution".into()));
        }
        Ok((x, ax))
    }
}

/// One-shot `(eta2 I + eta1 A^T A)^-1 rhs`.
pub fn woodbury_solve(a: &Matrix, eta1: f64, eta2: f64, rhs: &Vector) -> Result<Vector> {
    WoodburySolver::new(a.clone(), eta1, eta2)?.solve(rhs)
}
