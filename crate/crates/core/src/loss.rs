//! Reconstruction losses.
//!
//! The plain loss is the Euclidean norm `‖r − r̂‖₂` (not squared). The
//! bit-aware loss averages the per-user norms, each weighted by
//! `μ + δ·d_H(b, b̂)` where `b̂` is the hard decision taken from `r̂`. The
//! weight is a stop-gradient multiplier: it is piecewise constant in the
//! parameters and contributes no gradient of its own.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::modem::argmax;
use crate::system::hamming;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Mean of the per-user Euclidean reconstruction errors.
    L2,
    /// Per-user errors weighted by `μ + δ·d_H`.
    Proposed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub kind: LossKind,
    pub mu: f64,
    pub delta: f64,
}

impl LossSpec {
    pub fn l2() -> Self {
        Self {
            kind: LossKind::L2,
            mu: 1.0,
            delta: 0.0,
        }
    }

    pub fn proposed(mu: f64, delta: f64) -> Self {
        Self {
            kind: LossKind::Proposed,
            mu,
            delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::config(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::config(format!("delta must be non-negative, got {}", self.delta)));
        }
        Ok(())
    }

    /// Weight applied to a user's error given its bit errors.
    #[inline]
    pub fn weight(&self, bit_errors: u32) -> f64 {
        match self.kind {
            LossKind::L2 => 1.0,
            LossKind::Proposed => self.mu + self.delta * bit_errors as f64,
        }
    }
}

/// `‖r − r̂‖₂` and its gradient with respect to `r̂`. At `r̂ = r` the
/// subgradient zero is returned.
pub fn l2_loss(r: &[f64], r_hat: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_dim("l2 loss operands", r.len(), r_hat.len())?;
    let mut grad: Vec<f64> = r_hat.iter().zip(r).map(|(a, b)| a - b).collect();
    let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        grad.iter_mut().for_each(|g| *g /= norm);
    } else {
        grad.iter_mut().for_each(|g| *g = 0.0);
    }
    Ok((norm, grad))
}

/// `(1/J) Σ_j B_j ‖r^(j) − r̂^(j)‖₂` with `B_j = μ + δ·bit_errors[j]`.
/// Returns the value and per-user gradients with respect to `r̂^(j)`.
pub fn proposed_loss(
    targets: &[Vec<f64>],
    outputs: &[Vec<f64>],
    bit_errors: &[u32],
    spec: &LossSpec,
) -> Result<(f64, Vec<Vec<f64>>)> {
    check_dim("proposed loss users", targets.len(), outputs.len())?;
    check_dim("proposed loss users", targets.len(), bit_errors.len())?;
    if targets.is_empty() {
        return Err(Error::config("proposed loss needs at least one user"));
    }
    let j_count = targets.len() as f64;
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(targets.len());
    for ((r, r_hat), &errs) in targets.iter().zip(outputs).zip(bit_errors) {
        let (norm, mut g) = l2_loss(r, r_hat)?;
        let w = spec.weight(errs);
        value += w * norm;
        g.iter_mut().for_each(|v| *v *= w / j_count);
        grads.push(g);
    }
    Ok((value / j_count, grads))
}

/// Training loss of one sample whose true symbols are `symbols` and whose
/// decoder output is `r_hat` (length `M·J`). Symbol indices carry their own
/// binary expansion as bits. Writes `∂loss/∂r̂` into `grad`.
pub fn sample_loss(
    spec: &LossSpec,
    order: usize,
    symbols: &[usize],
    r_hat: &[f64],
    grad: &mut [f64],
) -> f64 {
    let users = symbols.len() as f64;
    let mut total = 0.0;
    for (&sym, (out, g)) in symbols
        .iter()
        .zip(r_hat.chunks_exact(order).zip(grad.chunks_exact_mut(order)))
    {
        let mut norm2 = 0.0;
        for (i, (&o, gi)) in out.iter().zip(g.iter_mut()).enumerate() {
            let target = if i == sym { 1.0 } else { 0.0 };
            let d = o - target;
            *gi = d;
            norm2 += d * d;
        }
        let norm = norm2.sqrt();
        let decided = argmax(out);
        let w = spec.weight(hamming(sym as u64, decided as u64));
        total += w * norm;
        let f = if norm > 0.0 { w / (users * norm) } else { 0.0 };
        g.iter_mut().for_each(|v| *v *= f);
    }
    total / users
}
