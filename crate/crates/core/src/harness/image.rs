//! Masked and corrupted 2-D image with a sparse DCT representation: a
//! desk-scale stand-in for transform-domain seismic interpolation and
//! denoising. The regularizer acts on `C x` with `C` the orthonormal 2-D DCT
//! and `A` keeps the observed pixels.

use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::bpdn::{row_from, Method, SigmaPolicy, StudyOutput};
use super::lowrank_study::LowRankMode;
use super::metrics::snr_db;
use crate::error::{Error, Result};
use crate::operators::{LinearMap, OrthonormalTransform, Vector};
use crate::prox::{BallNorm, BallSpec, Regularizer};
use crate::solvers::{solve, ContinuationSchedule, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageConfig {
    pub rows: usize,
    pub cols: usize,
    /// Fraction of nonzero DCT coefficients.
    pub coef_frac: f64,
    /// Fraction of pixels hidden (ignored in `DenoiseOnly`).
    pub missing_frac: f64,
    /// Fraction of observed pixels corrupted (ignored in `InterpolateOnly`).
    pub outlier_frac: f64,
    /// Outlier size as a multiple of the largest clean pixel.
    pub outlier_scale: f64,
    pub mode: LowRankMode,
    pub seed: u64,
}

impl Default for ImageConfig {
    fn default() -> Self {
        ImageConfig {
            rows: 32,
            cols: 32,
            coef_frac: 0.05,
            missing_frac: 0.5,
            outlier_frac: 0.05,
            outlier_scale: 10.0,
            mode: LowRankMode::Both,
            seed: 0,
        }
    }
}

impl ImageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Argument(format!(
                "image must be nonempty, got {} x {}",
                self.rows, self.cols
            )));
        }
        for (name, v) in [
            ("coef_frac", self.coef_frac),
            ("missing_frac", self.missing_frac),
            ("outlier_frac", self.outlier_frac),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Argument(format!("{name} {v} must lie in [0, 1)")));
            }
        }
        if !(self.outlier_scale >= 0.0 && self.outlier_scale.is_finite()) {
            return Err(Error::Argument(format!(
                "outlier_scale {} must be finite and >= 0",
                self.outlier_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ImageInstance {
    pub transform: OrthonormalTransform,
    /// Row-major pixels.
    pub x_true: Vector,
    /// Sorted indices of observed pixels.
    pub observed: Vec<usize>,
    pub b: Vector,
    /// `b - x_true[observed]`.
    pub noise: Vector,
    pub outliers: usize,
}

pub fn gen_image(cfg: &ImageConfig) -> Result<ImageInstance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total = cfg.rows * cfg.cols;
    let transform = OrthonormalTransform::dct2(cfg.rows, cfg.cols);
    let mut coef = Vector::zeros(total);
    let nnz = ((cfg.coef_frac * total as f64).round() as usize).max(1);
    for k in sample(&mut rng, total, nnz) {
        coef[k] = rng.sample(StandardNormal);
    }
    let x_true = transform.inverse(&coef);

    let kept = if cfg.mode == LowRankMode::DenoiseOnly {
        total
    } else {
        total - (cfg.missing_frac * total as f64).round() as usize
    };
    let mut observed = sample(&mut rng, total, kept).into_vec();
    observed.sort_unstable();
    let clean = Vector::from_iterator(kept, observed.iter().map(|&k| x_true[k]));

    let outliers = if cfg.mode == LowRankMode::InterpolateOnly {
        0
    } else {
        (cfg.outlier_frac * kept as f64).round() as usize
    };
    let magnitude = cfg.outlier_scale * x_true.amax();
    let mut b = clean.clone();
    for k in sample(&mut rng, kept, outliers) {
        b[k] += if rng.random::<bool>() { magnitude } else { -magnitude };
    }
    let noise = &b - &clean;
    Ok(ImageInstance {
        transform,
        x_true,
        observed,
        b,
        noise,
        outliers,
    })
}

/// `min |DCT x|_1` subject to `psi(x[observed] - b) <= sigma`.
pub fn image_problem(inst: &ImageInstance, norm: BallNorm, sigma: SigmaPolicy) -> Result<ProblemSpec> {
    let n = inst.x_true.len();
    ProblemSpec::new(
        LinearMap::restriction(inst.observed.clone(), n)?,
        LinearMap::Orthonormal(inst.transform.clone()),
        inst.b.clone(),
        Regularizer::l1(),
        BallSpec::new(norm, sigma.radius(norm, &inst.noise, inst.outliers))?,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageStudyConfig {
    pub image: ImageConfig,
    pub schedule: ContinuationSchedule,
    pub methods: Vec<(Method, BallNorm)>,
    pub sigma: SigmaPolicy,
}

impl Default for ImageStudyConfig {
    fn default() -> Self {
        ImageStudyConfig {
            image: ImageConfig::default(),
            schedule: ContinuationSchedule::default(),
            methods: [BallNorm::L0, BallNorm::L1, BallNorm::L2].map(|b| (Method::Alg3, b)).to_vec(),
            sigma: SigmaPolicy::Exact,
        }
    }
}

/// One row per `(method, ball)`: SNR of the recovered image, and of `w1`
/// against the true DCT coefficients.
pub fn run_image_study(cfg: &ImageStudyConfig) -> Result<StudyOutput> {
    if cfg.methods.is_empty() {
        return Err(Error::Argument("image study needs at least one method".into()));
    }
    cfg.schedule.validate()?;
    let inst = gen_image(&cfg.image)?;
    let coef_true = inst.transform.forward(&inst.x_true);
    let mut out = StudyOutput::default();
    for &(method, norm) in &cfg.methods {
        let start = Instant::now();
        let outcome = image_problem(&inst, norm, cfg.sigma).and_then(|spec| {
            let res = solve(&spec, &cfg.schedule, &method.algorithm(&spec), None)?;
            let x = snr_db(inst.x_true.as_slice(), res.state.x.as_slice())?;
            let w = snr_db(coef_true.as_slice(), res.state.w1.as_slice())?;
            out.traces.push((format!("{method}-{norm}"), res.trace));
            Ok((x, Some(w)))
        });
        out.report.rows.push(row_from(
            method.to_string(),
            norm.to_string(),
            outcome,
            start.elapsed().as_secs_f64(),
        ));
    }
    Ok(out)
}
