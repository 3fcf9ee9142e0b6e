use std::f64::consts::PI;
use std::fmt;

use super::{Matrix, Vector};

/// Unitary type-II DCT, in one dimension or separably over a row-major image.
#[derive(Debug, Clone)]
pub enum OrthonormalTransform {
    Dct1d {
        basis: Matrix,
    },
    /// Acts on a `rows x cols` image flattened row-major.
    Dct2d {
        row_basis: Matrix,
        col_basis: Matrix,
    },
}

/// `Q[k, j] = s_k cos(pi (j + 1/2) k / n)` with `s_0 = sqrt(1/n)`, `s_k = sqrt(2/n)`.
fn dct_basis(n: usize) -> Matrix {
    let nf = n as f64;
    Matrix::from_fn(n, n, |k, j| {
        let s = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        s * (PI * (j as f64 + 0.5) * k as f64 / nf).cos()
    })
}

impl OrthonormalTransform {
    pub fn dct(n: usize) -> Self {
        OrthonormalTransform::Dct1d { basis: dct_basis(n) }
    }

    pub fn dct2(rows: usize, cols: usize) -> Self {
        OrthonormalTransform::Dct2d {
            row_basis: dct_basis(rows),
            col_basis: dct_basis(cols),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            OrthonormalTransform::Dct1d { basis } => basis.nrows(),
            OrthonormalTransform::Dct2d { row_basis, col_basis } => row_basis.nrows() * col_basis.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, x: &Vector) -> Vector {
        match self {
            OrthonormalTransform::Dct1d { basis } => basis * x,
            OrthonormalTransform::Dct2d { row_basis, col_basis } => {
                let img = as_image(x, row_basis.nrows(), col_basis.nrows());
                flatten(&(row_basis * img * col_basis.transpose()))
            }
        }
    }

    pub fn inverse(&self, y: &Vector) -> Vector {
        match self {
            OrthonormalTransform::Dct1d { basis } => basis.tr_mul(y),
            OrthonormalTransform::Dct2d { row_basis, col_basis } => {
                let img = as_image(y, row_basis.nrows(), col_basis.nrows());
                flatten(&(row_basis.tr_mul(&img) * col_basis))
            }
        }
    }
}

impl fmt::Display for OrthonormalTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrthonormalTransform::Dct1d { basis } => write!(f, "dct{}", basis.nrows()),
            OrthonormalTransform::Dct2d { row_basis, col_basis } => {
                write!(f, "dct{}x{}", row_basis.nrows(), col_basis.nrows())
            }
        }
    }
}

fn as_image(v: &Vector, rows: usize, cols: usize) -> Matrix {
    Matrix::from_row_slice(rows, cols, v.as_slice())
}

fn flatten(m: &Matrix) -> Vector {
    Vector::from_iterator(m.len(), m.transpose().iter().copied())
}
