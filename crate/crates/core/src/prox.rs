//! Proximal operators and Euclidean projections onto `lp` balls.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::operators::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BallNorm {
    L0,
    L1,
    L2,
    Linf,
}

impl BallNorm {
    pub const ALL: [BallNorm; 4] = [BallNorm::L0, BallNorm::L1, BallNorm::L2, BallNorm::Linf];

    pub fn as_str(&self) -> &'static str {
        match self {
            BallNorm::L0 => "l0",
            BallNorm::L1 => "l1",
            BallNorm::L2 => "l2",
            BallNorm::Linf => "linf",
        }
    }

    /// `|z|_p`; for `L0` the number of nonzeros.
    pub fn eval(&self, z: &Vector) -> f64 {
        match self {
            BallNorm::L0 => z.iter().filter(|v| **v != 0.0).count() as f64,
            BallNorm::L1 => z.iter().map(|v| v.abs()).sum(),
            BallNorm::L2 => z.norm(),
            BallNorm::Linf => z.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

impl fmt::Display for BallNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BallNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l0" => Ok(BallNorm::L0),
            "l1" => Ok(BallNorm::L1),
            "l2" => Ok(BallNorm::L2),
            "linf" | "l_inf" | "inf" => Ok(BallNorm::Linf),
            other => Err(Error::Argument(format!("unknown ball norm '{other}'"))),
        }
    }
}

/// `{x : |x|_p <= radius}`. For `L0` the radius is a cardinality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallSpec {
    pub norm: BallNorm,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(norm: BallNorm, radius: f64) -> Result<Self> {
        if radius.is_nan() || radius < 0.0 {
            return Err(Error::Argument(format!("ball radius must be nonnegative, got {radius}")));
        }
        if norm == BallNorm::L0 && (radius.fract() != 0.0 || !radius.is_finite()) {
            return Err(Error::Argument(format!(
                "l0 ball radius must be an integer cardinality, got {radius}"
            )));
        }
        Ok(BallSpec { norm, radius })
    }

    pub fn l0(tau: usize) -> Self {
        BallSpec {
            norm: BallNorm::L0,
            radius: tau as f64,
        }
    }

    pub fn l1(radius: f64) -> Result<Self> {
        Self::new(BallNorm::L1, radius)
    }

    pub fn l2(radius: f64) -> Result<Self> {
        Self::new(BallNorm::L2, radius)
    }

    pub fn linf(radius: f64) -> Result<Self> {
        Self::new(BallNorm::Linf, radius)
    }
}

/// The sparsity regularizer applied to the transformed signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    L1Norm { weight: f64 },
    Zero,
}

impl Regularizer {
    pub fn l1() -> Self {
        Regularizer::L1Norm { weight: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Regularizer::L1Norm { weight } if !(*weight > 0.0 && weight.is_finite()) => {
                Err(Error::Argument(format!("regularizer weight must be positive, got {weight}")))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            Regularizer::L1Norm { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::Zero => 0.0,
        }
    }

    /// `prox_{alpha * phi}(y)`.
    pub fn prox(&self, y: &Vector, alpha: f64) -> Vector {
        match self {
            Regularizer::L1Norm { weight } => prox_l1(y, alpha * weight),
            Regularizer::Zero => y.clone(),
        }
    }
}

/// Soft thresholding `sign(y) max(|y| - alpha, 0)`. Negative `alpha` acts as 0.
pub fn prox_l1(y: &Vector, alpha: f64) -> Vector {
    let t = alpha.max(0.0);
    y.map(|v| {
        if v > t {
            v - t
        } else if v < -t {
            v + t
        } else {
            0.0
        }
    })
}

/// Euclidean projection onto the ball.
///
/// `L0` keeps the `tau` largest magnitudes, lowest index first among ties.
pub fn project_ball(z: &Vector, ball: &BallSpec) -> Result<Vector> {
    let r = ball.radius;
    match ball.norm {
        BallNorm::L2 => {
            let nrm = z.norm();
            if nrm <= r {
                return Ok(z.clone());
            }
            let mut p = z * (r / nrm);
            // Keep the output inside the ball despite rounding in the rescale.
            while p.norm() > r {
                p *= 1.0 - f64::EPSILON;
            }
            Ok(p)
        }
        BallNorm::Linf => Ok(z.map(|v| v.clamp(-r, r))),
        BallNorm::L1 => Ok(project_l1(z, r)),
        BallNorm::L0 => {
            if r.fract() != 0.0 || r < 0.0 || !r.is_finite() {
                return Err(Error::Argument(format!("l0 radius must be an integer, got {r}")));
            }
            let tau = r as usize;
            if tau > z.len() {
                return Err(Error::Argument(format!("l0 radius {tau} exceeds vector length {}", z.len())));
            }
            let keep = top_magnitudes(z, tau);
            let mut out = Vector::zeros(z.len());
            for i in keep {
                out[i] = z[i];
            }
            Ok(out)
        }
    }
}

/// Indices of the `k` largest `|z_i|`, ties resolved toward the lower index.
fn top_magnitudes(z: &Vector, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..z.len()).collect();
    idx.sort_by(|&a, &b| match z[b].abs().total_cmp(&z[a].abs()) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    idx.truncate(k);
    idx
}

/// Sort-and-threshold projection onto `{|x|_1 <= r}`.
fn project_l1(z: &Vector, r: f64) -> Vector {
    let l1: f64 = z.iter().map(|v| v.abs()).sum();
    if l1 <= r {
        return z.clone();
    }
    if r == 0.0 {
        return Vector::zeros(z.len());
    }
    let mut mags: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - r) / (j + 1) as f64;
        if u > t {
            theta = t;
        } else {
            break;
        }
    }
    let shrink = |theta: f64| z.map(|v| v.signum() * (v.abs() - theta).max(0.0));
    let mut x = shrink(theta);
    // Rounding in the cumulative sum can leave |x|_1 a few ulps above r.
    for _ in 0..4 {
        let excess: f64 = x.iter().map(|v| v.abs()).sum::<f64>() - r;
        if excess <= 0.0 {
            break;
        }
        let support = x.iter().filter(|v| **v != 0.0).count().max(1);
        theta += excess / support as f64 + f64::EPSILON * theta.abs();
        x = shrink(theta);
    }
    x
}

/// `|z - proj(z)|_2`; zero exactly when `z` is feasible. An `L0` ball whose
/// cardinality exceeds the length of `z` contains everything.
pub fn ball_distance(z: &Vector, ball: &BallSpec) -> f64 {
    if ball.norm == BallNorm::L0 && ball.radius >= z.len() as f64 {
        return 0.0;
    }
    match project_ball(z, ball) {
        Ok(p) => (z - p).norm(),
        Err(_) => f64::INFINITY,
    }
}
