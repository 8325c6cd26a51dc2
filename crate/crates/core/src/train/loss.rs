//! Two-class negative log-likelihood on the masked rows.

use ndarray::Array2;

use crate::data::Label;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const CLAMP: f64 = 1e-12;

fn p_true(z0: f64, z1: f64) -> f64 {
    let m = z0.max(z1);
    let (e0, e1) = ((z0 - m).exp(), (z1 - m).exp());
    e1 / (e0 + e1)
}

fn masked_labels(labels: &[Option<Label>], mask: &[usize]) -> Result<Vec<(usize, f64)>> {
    if mask.is_empty() {
        return Err(Error::Validation("loss mask is empty".into()));
    }
    mask.iter()
        .map(|&i| {
            labels
                .get(i)
                .copied()
                .flatten()
                .map(|y| (i, y.index() as f64))
                .ok_or_else(|| Error::Validation(format!("loss mask includes unlabeled item {i}")))
        })
        .collect()
}

/// Mean over `mask` of `-[y ln p1 + (1 - y) ln(1 - p1)]`, with `p1` the
/// softmax probability of the true class clamped to `[1e-12, 1 - 1e-12]`.
/// Evaluated in `f64` regardless of `T`.
pub fn loss<T: Scalar>(logits: &Array2<T>, labels: &[Option<Label>], mask: &[usize]) -> Result<f64> {
    let rows = masked_labels(labels, mask)?;
    let total: f64 = rows
        .iter()
        .map(|&(i, y)| {
            let p =
                p_true(logits[[i, 0]].to_f64().unwrap(), logits[[i, 1]].to_f64().unwrap()).clamp(CLAMP, 1.0 - CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / rows.len() as f64)
}

/// Loss and its gradient w.r.t. the logits. Clamped rows contribute zero
/// gradient, matching the clamp's derivative.
pub fn loss_and_grad<T: Scalar>(
    logits: &Array2<T>,
    labels: &[Option<Label>],
    mask: &[usize],
) -> Result<(f64, Array2<T>)> {
    let rows = masked_labels(labels, mask)?;
    let n = rows.len() as f64;
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = 0.0;
    for &(i, y) in &rows {
        let raw = p_true(logits[[i, 0]].to_f64().unwrap(), logits[[i, 1]].to_f64().unwrap());
        let p = raw.clamp(CLAMP, 1.0 - CLAMP);
        total += -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
        if raw == p {
            let d_p = -y / p + (1.0 - y) / (1.0 - p);
            let d_z1 = d_p * raw * (1.0 - raw) / n;
            grad[[i, 0]] = T::of(-d_z1);
            grad[[i, 1]] = T::of(d_z1);
        }
    }
    Ok((total / n, grad))
}
