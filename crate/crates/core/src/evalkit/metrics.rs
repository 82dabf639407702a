use serde::{Deserialize, Serialize};

use super::{EvalError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MaeResult {
    /// `|truth - pred|` for each pair with defined truth, in input order.
    pub errors: Vec<f64>,
    pub mean: f64,
}

/// Absolute errors over the pairs whose truth is defined.
pub fn mae(truth: &[Option<f64>], pred: &[f64]) -> Result<MaeResult> {
    if truth.len() != pred.len() {
        return Err(EvalError::InvalidArgument(format!("{} truths vs {} predictions", truth.len(), pred.len())));
    }
    let errors: Vec<f64> = truth.iter().zip(pred).filter_map(|(t, p)| t.map(|t| (t - p).abs())).collect();
    if errors.is_empty() {
        return Err(EvalError::InvalidArgument("no defined ground-truth values".into()));
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    Ok(MaeResult { errors, mean })
}

/// Type-7 quantile of already sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of nothing");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn iqr(values: &[f64]) -> Result<f64> {
    if values.len() < 4 {
        return Err(EvalError::InvalidArgument(format!("IQR needs at least 4 values, got {}", values.len())));
    }
    let s = sorted(values);
    Ok(quantile(&s, 0.75) - quantile(&s, 0.25))
}

/// MAE over defined pairs divided by the IQR of the defined truths.
pub fn nmae(truth: &[Option<f64>], pred: &[f64]) -> Result<f64> {
    let m = mae(truth, pred)?;
    let defined: Vec<f64> = truth.iter().flatten().copied().collect();
    let spread = iqr(&defined)?;
    if spread <= 0.0 {
        return Err(EvalError::DegenerateSpread);
    }
    Ok(m.mean / spread)
}

/// Tukey box: whiskers reach the most extreme values within 1.5 IQR of the
/// quartiles; anything beyond is an outlier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub lo_whisker: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub hi_whisker: f64,
    pub outliers: Vec<f64>,
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(EvalError::InvalidArgument("box statistics of no values".into()));
    }
    let s = sorted(values);
    let (q1, median, q3) = (quantile(&s, 0.25), quantile(&s, 0.5), quantile(&s, 0.75));
    let (lo_fence, hi_fence) = (q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1));
    let mut inside = s.iter().filter(|&&v| v >= lo_fence && v <= hi_fence);
    let lo_whisker = inside.clone().next().copied().unwrap_or(q1);
    let hi_whisker = inside.next_back().copied().unwrap_or(q3);
    let outliers = s.iter().copied().filter(|&v| v < lo_fence || v > hi_fence).collect();
    Ok(BoxStats { lo_whisker, q1, median, q3, hi_whisker, outliers })
}
