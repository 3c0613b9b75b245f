use serde::{Deserialize, Serialize};

use super::LossWeights;
use crate::error::{Error, Result};
use crate::numerics::{log_sigmoid, DenseMatrix, GradientTape, Trans, Var};

/// Mean of −ln σ(s⁺ − s⁻).
pub fn bpr_loss(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.len() != neg.len() {
        return Err(Error::shape("bpr_loss", (pos.len(), 1), (neg.len(), 1)));
    }
    if pos.is_empty() {
        return Err(Error::Degenerate("bpr_loss needs at least one triple".into()));
    }
    let sum: f64 = pos.iter().zip(neg).map(|(p, n)| -log_sigmoid(p - n)).sum();
    Ok(sum / pos.len() as f64)
}

/// Mean squared error over all entries.
pub fn diffusion_loss(x0: &DenseMatrix, x0_hat: &DenseMatrix) -> Result<f64> {
    let sq = x0.zip_map(x0_hat, |a, b| (a - b) * (a - b))?;
    Ok(sq.mean())
}

/// In-batch InfoNCE: row r of `anchors` is paired with row r of `positives`;
/// the other rows of `positives` are its negatives. Rows are L2-normalised.
pub fn contrastive_loss(anchors: &DenseMatrix, positives: &DenseMatrix, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if anchors.shape() != positives.shape() {
        return Err(Error::shape("contrastive_loss", anchors.shape(), positives.shape()));
    }
    let n = anchors.rows();
    if n == 0 {
        return Err(Error::Degenerate("contrastive_loss needs at least one row".into()));
    }
    let (a, p) = (unit_rows(anchors), unit_rows(positives));
    let logits = a.matmul_t(Trans::No, &p, Trans::Yes)?.scale(1.0 / tau);
    let mut total = 0.0;
    for r in 0..n {
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[r];
    }
    Ok(total / n as f64)
}

fn unit_rows(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    out
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("temperature must be positive, got {tau}")))
    }
}

/// Unweighted loss terms of one batch or epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub bpr: f64,
    pub diffusion: f64,
    pub contrastive: f64,
}

/// L_bpr + λ₁·L_diff + λ₂·L_cl. A term with zero weight adds exactly nothing.
pub fn total_loss(parts: LossParts, w: &LossWeights) -> f64 {
    let mut total = parts.bpr;
    if w.diffusion != 0.0 {
        total += w.diffusion * parts.diffusion;
    }
    if w.contrastive != 0.0 {
        total += w.contrastive * parts.contrastive;
    }
    total
}

pub fn bpr_on_tape(tape: &mut GradientTape, pos: Var, neg: Var) -> Result<Var> {
    let margin = tape.sub(pos, neg)?;
    let ls = tape.log_sigmoid(margin);
    let mean = tape.mean(ls);
    Ok(tape.scale(mean, -1.0))
}

pub fn diffusion_on_tape(tape: &mut GradientTape, x0: Var, x0_hat: Var) -> Result<Var> {
    let diff = tape.sub(x0, x0_hat)?;
    let sq = tape.mul(diff, diff)?;
    Ok(tape.mean(sq))
}

pub fn contrastive_on_tape(tape: &mut GradientTape, anchors: Var, positives: Var, tau: f64) -> Result<Var> {
    check_tau(tau)?;
    let n = tape.shape(anchors).0;
    let a = tape.normalize_rows(anchors);
    let p = tape.normalize_rows(positives);
    let logits = tape.matmul_t(a, Trans::No, p, Trans::Yes)?;
    let logits = tape.scale(logits, 1.0 / tau);
    let log_probs = tape.log_softmax_rows(logits);
    let eye = tape.constant(DenseMatrix::identity(n));
    let diag = tape.mul(log_probs, eye)?;
    let sum = tape.sum(diag);
    Ok(tape.scale(sum, -1.0 / n as f64))
}
