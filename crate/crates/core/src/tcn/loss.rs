//! Masked mean-squared-error over valid target frames.

use super::tensor::{Elem, Tensor3};
use crate::error::{Error, Result};

/// Mean squared error over (batch, targets, valid frames) with the
/// analytic gradient. `valid_frames[b]` marks how many leading frames
/// of segment `b` are real; padded frames contribute nothing to either
/// loss or gradient.
pub fn masked_mse<E: Elem>(
    pred: &Tensor3<E>,
    target: &Tensor3<E>,
    valid_frames: &[usize],
) -> Result<(f64, Tensor3<E>)> {
    if pred.dim() != target.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", pred.dim()),
            got: format!("{:?}", target.dim()),
        });
    }
    let (batch, n_targets, t_len) = pred.dim();
    if valid_frames.len() != batch {
        return Err(Error::LengthMismatch {
            a: valid_frames.len(),
            b: batch,
        });
    }
    let mut n_entries = 0usize;
    for (b, &v) in valid_frames.iter().enumerate() {
        if v > t_len {
            return Err(Error::BadWindow {
                window: v,
                len: t_len,
            });
        }
        n_entries += v * n_targets;
        let _ = b;
    }
    if n_entries == 0 {
        return Err(Error::EmptyMask);
    }
    let n = n_entries as f64;
    let mut loss = 0.0f64;
    let mut grad = Tensor3::<E>::zeros(pred.dim());
    for b in 0..batch {
        for k in 0..n_targets {
            for t in 0..valid_frames[b] {
                let d = pred[(b, k, t)].to_f64() - target[(b, k, t)].to_f64();
                loss += d * d;
                grad[(b, k, t)] = E::from_f64(2.0 * d / n);
            }
        }
    }
    Ok((loss / n, grad))
}
