//! Evaluation metrics and summary statistics.

use serde::{Deserialize, Serialize};

use crate::error::{FitError, Result};
use crate::model::RLParams;

/// Average over trials of `KL(truth(t) || estimate(t))`.
pub fn mean_kl(truth: &[Vec<f64>], estimate: &[Vec<f64>]) -> Result<f64> {
    if truth.len() != estimate.len() || truth.is_empty() {
        return Err(FitError::shape(format!(
            "policy sequences have lengths {} and {}",
            truth.len(),
            estimate.len()
        )));
    }
    let mut total = 0.0;
    for (t, (p, q)) in truth.iter().zip(estimate).enumerate() {
        if p.len() != q.len() {
            return Err(FitError::shape(format!("trial {t}: policy widths {} and {}", p.len(), q.len())));
        }
        for (&pj, &qj) in p.iter().zip(q) {
            if pj == 0.0 {
                continue;
            }
            if !(qj > 0.0) {
                return Err(FitError::numeric(format!("trial {t}: estimated probability {qj} is not positive")));
            }
            total += pj * (pj / qj).ln();
        }
    }
    Ok((total / truth.len() as f64).max(0.0))
}

fn flat(v: &[Vec<f64>]) -> impl Iterator<Item = f64> + '_ {
    v.iter().flatten().copied()
}

/// Euclidean distances between the concatenated `alpha` and `beta` vectors.
/// Shared parameters compare as scalars per signal.
pub fn param_errors(truth: &RLParams, est: &RLParams) -> Result<(f64, f64)> {
    if truth.k() != est.k() || truth.m() != est.m() {
        return Err(FitError::shape(format!(
            "parameter shapes {}x{} and {}x{}",
            truth.k(),
            truth.m(),
            est.k(),
            est.m()
        )));
    }
    let dist = |a: &[Vec<f64>], b: &[Vec<f64>]| -> f64 {
        if truth.shared && est.shared {
            a.iter().zip(b).map(|(x, y)| (x[0] - y[0]).powi(2)).sum::<f64>().sqrt()
        } else {
            flat(a).zip(flat(b)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
        }
    };
    Ok((dist(&truth.alpha, &est.alpha), dist(&truth.beta, &est.beta)))
}

/// Nearest-rank quantile of `q` in `[0, 1]`; NaNs are ignored.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let rank = (q * v.len() as f64).ceil() as usize;
    Some(v[rank.clamp(1, v.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    Some(Summary {
        median: quantile(values, 0.5)?,
        q25: quantile(values, 0.25)?,
        q75: quantile(values, 0.75)?,
        count: values.iter().filter(|x| !x.is_nan()).count(),
    })
}
