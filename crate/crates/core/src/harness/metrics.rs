use crate::error::{Error, Result};

/// Reported in place of `+inf` when the estimate is exact.
pub const SNR_CAP_DB: f64 = 300.0;

/// `20 log10(|truth| / |truth - estimate|)` over matching flat slices,
/// capped at [`SNR_CAP_DB`].
pub fn snr_db(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::dim("snr estimate", truth.len(), estimate.len()));
    }
    let signal = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    if signal == 0.0 {
        return Err(Error::Argument("SNR is undefined for an all-zero reference".into()));
    }
    let err = truth.iter().zip(estimate).map(|(t, e)| (t - e) * (t - e)).sum::<f64>().sqrt();
    if err == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((20.0 * (signal / err).log10()).min(SNR_CAP_DB))
}

/// Median of a nonempty sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
