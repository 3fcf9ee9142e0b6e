//! Matrix-free linear maps with adjoints, and the solvers for the SPD
//! normal-equation systems that the splitting algorithms need.
//!
//! Everything downstream only ever calls [`LinearMap::apply`] and
//! [`LinearMap::adjoint_apply`]. A dense matrix is one kind of map among
//! several; restriction, identity, orthonormal transforms, scaling and
//! composition never materialize a matrix.

mod dct;
mod solve;
mod woodbury;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub use dct::OrthonormalTransform;
pub use solve::{conjugate_gradient, solve_spd, NormalSolver, SolveOutcome, SpdMethod, SpdSolveConfig};
pub use woodbury::{woodbury_solve, WoodburySolver};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// A user-supplied operator. Implementors must honor the shapes reported by
/// `rows`/`cols`; [`adjoint_test`] catches the ones that do not.
pub trait LinearOperator: Send + Sync + fmt::Debug {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &Vector) -> Vector;
    fn adjoint_apply(&self, y: &Vector) -> Vector;
}

/// Squared Frobenius norm, flagged when it is only a stochastic estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrobeniusNormSq {
    pub value: f64,
    pub exact: bool,
}

/// Number of Rademacher probes used when the Frobenius norm cannot be
/// computed in closed form.
pub const TRACE_PROBES: usize = 20;

/// Sorted, duplicate-free selection of entries out of a length-`n` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Restriction {
    indices: Vec<usize>,
    n: usize,
}

impl Restriction {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Argument(format!(
                    "restriction indices must be strictly increasing, found {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::Argument(format!("restriction index {last} out of range for length {n}")));
            }
        }
        Ok(Restriction { indices, n })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Explicit matrix with a cached transpose, so both products stream
/// through memory in the same (column-major) order.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    m: Matrix,
    mt: Matrix,
}

impl DenseMatrix {
    pub fn new(m: Matrix) -> Self {
        let mt = m.transpose();
        DenseMatrix { m, mt }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }
}

/// `m x`, summing only the columns where `x` is nonzero when `x` is mostly
/// zeros (as soft-thresholded iterates are).
pub(crate) fn mul_sparse_aware(m: &Matrix, x: &Vector) -> Vector {
    let nnz = x.iter().filter(|v| **v != 0.0).count();
    if 4 * nnz > x.len() {
        return m * x;
    }
    let mut out = Vector::zeros(m.nrows());
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            out.axpy(xj, &m.column(j), 1.0);
        }
    }
    out
}

impl std::ops::Deref for DenseMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.m
    }
}

/// A linear map `R^cols -> R^rows`.
#[derive(Debug, Clone)]
pub enum LinearMap {
    /// Explicit matrix.
    Dense(DenseMatrix),
    Restriction(Restriction),
    Identity(usize),
    /// Square map with `Q^T Q = I`.
    Orthonormal(OrthonormalTransform),
    Scaled(f64, Box<LinearMap>),
    /// `outer ∘ inner`.
    Composite(Box<LinearMap>, Box<LinearMap>),
    MatrixFree(Arc<dyn LinearOperator>),
}

impl LinearMap {
    pub fn dense(m: Matrix) -> Self {
        LinearMap::Dense(DenseMatrix::new(m))
    }

    pub fn identity(n: usize) -> Self {
        LinearMap::Identity(n)
    }

    pub fn restriction(indices: Vec<usize>, n: usize) -> Result<Self> {
        Ok(LinearMap::Restriction(Restriction::new(indices, n)?))
    }

    pub fn scaled(s: f64, inner: LinearMap) -> Self {
        LinearMap::Scaled(s, Box::new(inner))
    }

    /// `outer ∘ inner`; fails when `inner.rows() != outer.cols()`.
    pub fn composite(outer: LinearMap, inner: LinearMap) -> Result<Self> {
        if inner.rows() != outer.cols() {
            return Err(Error::dim(
                format!("composite {} ∘ {}", outer.describe(), inner.describe()),
                outer.cols(),
                inner.rows(),
            ));
        }
        Ok(LinearMap::Composite(Box::new(outer), Box::new(inner)))
    }

    pub fn matrix_free(op: Arc<dyn LinearOperator>) -> Self {
        LinearMap::MatrixFree(op)
    }

    pub fn rows(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.nrows(),
            LinearMap::Restriction(r) => r.indices.len(),
            LinearMap::Identity(n) => *n,
            LinearMap::Orthonormal(t) => t.len(),
            LinearMap::Scaled(_, inner) => inner.rows(),
            LinearMap::Composite(outer, _) => outer.rows(),
            LinearMap::MatrixFree(op) => op.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.ncols(),
            LinearMap::Restriction(r) => r.n,
            LinearMap::Identity(n) => *n,
            LinearMap::Orthonormal(t) => t.len(),
            LinearMap::Scaled(_, inner) => inner.cols(),
            LinearMap::Composite(_, inner) => inner.cols(),
            LinearMap::MatrixFree(op) => op.cols(),
        }
    }

    /// Short human-readable label used in error messages.
    pub fn describe(&self) -> String {
        match self {
            LinearMap::Dense(m) => format!("Dense({}x{})", m.nrows(), m.ncols()),
            LinearMap::Restriction(r) => format!("Restriction({} of {})", r.indices.len(), r.n),
            LinearMap::Identity(n) => format!("Identity({n})"),
            LinearMap::Orthonormal(t) => format!("Orthonormal({t})"),
            LinearMap::Scaled(s, inner) => format!("Scaled({s}, {})", inner.describe()),
            LinearMap::Composite(o, i) => format!("Composite({}, {})", o.describe(), i.describe()),
            LinearMap::MatrixFree(op) => format!("MatrixFree({:?})", op),
        }
    }

    /// Panics if `x.len() != self.cols()`.
    pub fn apply(&self, x: &Vector) -> Vector {
        assert_eq!(x.len(), self.cols(), "{}: apply input length", self.describe());
        match self {
            LinearMap::Dense(m) => mul_sparse_aware(&m.m, x),
            LinearMap::Restriction(r) => Vector::from_iterator(r.indices.len(), r.indices.iter().map(|&i| x[i])),
            LinearMap::Identity(_) => x.clone(),
            LinearMap::Orthonormal(t) => t.forward(x),
            LinearMap::Scaled(s, inner) => inner.apply(x) * *s,
            LinearMap::Composite(outer, inner) => outer.apply(&inner.apply(x)),
            LinearMap::MatrixFree(op) => op.apply(x),
        }
    }

    /// Panics if `y.len() != self.rows()`.
    pub fn adjoint_apply(&self, y: &Vector) -> Vector {
        assert_eq!(y.len(), self.rows(), "{}: adjoint input length", self.describe());
        match self {
            LinearMap::Dense(m) => &m.mt * y,
            LinearMap::Restriction(r) => {
                let mut out = Vector::zeros(r.n);
                for (k, &i) in r.indices.iter().enumerate() {
                    out[i] = y[k];
                }
                out
            }
            LinearMap::Identity(_) => y.clone(),
            LinearMap::Orthonormal(t) => t.inverse(y),
            LinearMap::Scaled(s, inner) => inner.adjoint_apply(y) * *s,
            LinearMap::Composite(outer, inner) => inner.adjoint_apply(&outer.adjoint_apply(y)),
            LinearMap::MatrixFree(op) => op.adjoint_apply(y),
        }
    }

    /// Materialize as a dense matrix by applying to unit vectors.
    pub fn to_dense(&self) -> Matrix {
        if let LinearMap::Dense(m) = self {
            return m.m.clone();
        }
        let (rows, cols) = (self.rows(), self.cols());
        let mut out = Matrix::zeros(rows, cols);
        let mut e = Vector::zeros(cols);
        for j in 0..cols {
            e[j] = 1.0;
            out.set_column(j, &self.apply(&e));
            e[j] = 0.0;
        }
        out
    }

    /// True when `self^T self = I` holds structurally.
    pub fn is_tight_frame(&self) -> bool {
        match self {
            LinearMap::Identity(_) | LinearMap::Orthonormal(_) => true,
            LinearMap::Scaled(s, inner) => s.abs() == 1.0 && inner.is_tight_frame(),
            LinearMap::Composite(o, i) => o.is_tight_frame() && i.is_tight_frame(),
            _ => false,
        }
    }

    /// Diagonal of `self^T self` when that Gram matrix is structurally diagonal.
    pub fn gram_diagonal(&self) -> Option<Vector> {
        match self {
            LinearMap::Identity(n) => Some(Vector::from_element(*n, 1.0)),
            LinearMap::Restriction(r) => {
                let mut d = Vector::zeros(r.n);
                for &i in &r.indices {
                    d[i] = 1.0;
                }
                Some(d)
            }
            LinearMap::Scaled(s, inner) => inner.gram_diagonal().map(|d| d * (s * s)),
            // (Q P)^T (Q P) = P^T P when Q is a tight frame.
            LinearMap::Composite(o, i) if o.is_tight_frame() => i.gram_diagonal(),
            LinearMap::Dense(m) => {
                let g = m.tr_mul(m);
                let off_diag = (0..g.ncols()).any(|j| (0..g.nrows()).any(|i| i != j && g[(i, j)] != 0.0));
                (!off_diag).then(|| g.diagonal())
            }
            _ => None,
        }
    }

    pub fn frobenius_norm_sq(&self) -> FrobeniusNormSq {
        let exact = |value: f64| FrobeniusNormSq { value, exact: true };
        match self {
            LinearMap::Dense(m) => exact(m.iter().map(|v| v * v).sum()),
            LinearMap::Restriction(r) => exact(r.indices.len() as f64),
            LinearMap::Identity(n) => exact(*n as f64),
            LinearMap::Orthonormal(t) => exact(t.len() as f64),
            LinearMap::Scaled(s, inner) => {
                let f = inner.frobenius_norm_sq();
                FrobeniusNormSq {
                    value: s * s * f.value,
                    exact: f.exact,
                }
            }
            // Orthonormal factors on either side leave the Frobenius norm unchanged.
            LinearMap::Composite(o, i) if o.is_tight_frame() && o.rows() == o.cols() => i.frobenius_norm_sq(),
            LinearMap::Composite(o, i) if i.is_tight_frame() && i.rows() == i.cols() => o.frobenius_norm_sq(),
            LinearMap::Composite(o, i) => match (o.as_ref(), i.as_ref()) {
                (LinearMap::Dense(a), LinearMap::Dense(b)) => exact((&a.m * &b.m).iter().map(|v| v * v).sum()),
                (LinearMap::Restriction(r), LinearMap::Dense(b)) => {
                    exact(r.indices.iter().map(|&k| b.row(k).iter().map(|v| v * v).sum::<f64>()).sum())
                }
                _ => self.estimate_frobenius_sq(),
            },
            LinearMap::MatrixFree(_) => self.estimate_frobenius_sq(),
        }
    }

    /// Hutchinson estimate of `trace(A^T A)` with fixed-seed Rademacher probes.
    fn estimate_frobenius_sq(&self) -> FrobeniusNormSq {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f00d);
        let mut acc = 0.0;
        for _ in 0..TRACE_PROBES {
            let z = Vector::from_fn(self.cols(), |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
            acc += self.apply(&z).norm_squared();
        }
        FrobeniusNormSq {
            value: acc / TRACE_PROBES as f64,
            exact: false,
        }
    }
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Largest relative defect `|<Ax,y> - <x,A^T y>| / (|Ax||y| + eps)` over
/// `trials` random pairs.
pub fn adjoint_test(map: &LinearMap, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Argument("adjoint_test needs at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = gaussian_vector(&mut rng, map.cols());
        let y = gaussian_vector(&mut rng, map.rows());
        let ax = map.apply(&x);
        if ax.len() != map.rows() {
            return Err(Error::dim(format!("{} apply output", map.describe()), map.rows(), ax.len()));
        }
        let aty = map.adjoint_apply(&y);
        if aty.len() != map.cols() {
            return Err(Error::dim(format!("{} adjoint output", map.describe()), map.cols(), aty.len()));
        }
        let defect = (ax.dot(&y) - x.dot(&aty)).abs() / (ax.norm() * y.norm() + f64::MIN_POSITIVE);
        worst = worst.max(defect);
    }
    Ok(worst)
}
