//! Distance-weighted ordinal cross-entropy.
//!
//! For a probability vector `p` over `C` ordered categories and a true index
//! `y`:
//!
//! ```text
//! L = (1 + |argmax(p) − y| / (C − 1)) · (1 / C) · (−ln p[y])
//! ```
//!
//! The leading factor lies in `[1, 2]` and is piecewise constant in the
//! logits, so the backward pass treats it as a constant per example.

use crate::error::{Error, Result};
use crate::nn::ProbVector;

/// Floor applied to `p[y]` inside the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrdinalTarget {
    true_index: usize,
    num_categories: usize,
}

impl OrdinalTarget {
    pub fn new(true_index: usize, num_categories: usize) -> Result<Self> {
        if num_categories < 2 {
            return Err(Error::usage(format!(
                "ordinal loss needs at least 2 categories, got {num_categories}"
            )));
        }
        if true_index >= num_categories {
            return Err(Error::usage(format!(
                "true index {true_index} outside 0..{num_categories}"
            )));
        }
        Ok(Self {
            true_index,
            num_categories,
        })
    }

    pub fn true_index(&self) -> usize {
        self.true_index
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn onehot(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.num_categories];
        y[self.true_index] = 1.0;
        y
    }
}

fn check(p: &ProbVector, target: &OrdinalTarget) -> Result<()> {
    if p.len() != target.num_categories {
        return Err(Error::usage(format!(
            "probability vector has {} entries, target expects {}",
            p.len(),
            target.num_categories
        )));
    }
    Ok(())
}

/// `1 + |argmax(p) − y| / (C − 1)`.
pub fn ordinal_weight(p: &ProbVector, target: &OrdinalTarget) -> Result<f64> {
    check(p, target)?;
    let dist = p.argmax().abs_diff(target.true_index) as f64;
    Ok(1.0 + dist / (target.num_categories - 1) as f64)
}

pub fn ordinal_loss(p: &ProbVector, target: &OrdinalTarget) -> Result<f64> {
    let w = ordinal_weight(p, target)?;
    Ok(weighted_ce(p, target, w))
}

/// The loss with an externally fixed weight factor; used when the weight is
/// frozen at a reference point (finite-difference probes).
pub fn weighted_ce(p: &ProbVector, target: &OrdinalTarget, weight: f64) -> f64 {
    let pt = p.as_slice()[target.true_index].max(PROB_FLOOR);
    weight / target.num_categories as f64 * -pt.ln()
}

/// Gradient with respect to the pre-softmax logits: `w / C · (p − y)`.
pub fn ordinal_loss_gradient(p: &ProbVector, target: &OrdinalTarget) -> Result<Vec<f64>> {
    let w = ordinal_weight(p, target)?;
    let k = w / target.num_categories as f64;
    Ok(p
        .as_slice()
        .iter()
        .zip(target.onehot())
        .map(|(pi, yi)| k * (pi - yi))
        .collect())
}

/// Arithmetic mean of per-example losses.
pub fn batch_ordinal_loss(batch: &[(ProbVector, OrdinalTarget)]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::usage("empty batch"));
    }
    let mut total = 0.0;
    for (p, t) in batch {
        total += ordinal_loss(p, t)?;
    }
    Ok(total / batch.len() as f64)
}
