//! Small evaluation statistics shared by the harness and the CLI.

use crate::error::{Error, Result};

/// Pearson correlation coefficient between two equal-length samples.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Shape("pearson operands differ in length".into()));
    }
    if xs.len() < 2 {
        return Err(Error::Param("pearson needs at least 2 samples".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Param("pearson input has zero variance".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// ROC area under the curve for separating positives from negatives by
/// score, computed as the Mann-Whitney rank statistic with half credit
/// for ties. Higher scores are expected for positives.
pub fn roc_auc(positive: &[f64], negative: &[f64]) -> Result<f64> {
    if positive.is_empty() || negative.is_empty() {
        return Err(Error::Param("roc_auc needs both classes".into()));
    }
    let mut wins = 0.0f64;
    for p in positive {
        for n in negative {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (positive.len() as f64 * negative.len() as f64))
}
