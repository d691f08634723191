//! Scalar losses with gradients with respect to the predictions.

use super::layers::sigmoid;
use crate::error::{Error, Result};

fn check_len(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Shape("loss operands differ in length".into()));
    }
    if pred.is_empty() {
        return Err(Error::Param("loss needs at least one element".into()));
    }
    Ok(pred.len() as f64)
}

/// Mean absolute error. The subgradient at exact ties is 0.
pub fn mae_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = check_len(pred, target)?;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d.abs();
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok((loss / n, grad))
}

/// Mean squared error.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = check_len(pred, target)?;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// Mean binary cross-entropy on logits, in the numerically stable
/// `max(z, 0) - z y + ln(1 + exp(-|z|))` form. The gradient with respect
/// to each logit is `(σ(z) - y) / n`.
pub fn bce_logit_loss(logits: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = check_len(logits, labels)?;
    let mut loss = 0.0;
    let grad = logits
        .iter()
        .zip(labels)
        .map(|(z, y)| {
            loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
            (sigmoid(*z) - y) / n
        })
        .collect();
    Ok((loss / n, grad))
}
