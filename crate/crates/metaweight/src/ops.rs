//! Elementary differentiable operations shared by every model.

use crate::error::{Error, Result};

/// Logistic sigmoid, numerically stable at both tails.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax probabilities with max-subtraction stabilization.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Cross-entropy loss of `logits` against `target`, with the gradient
/// w.r.t. the logits (softmax(logits) - onehot(target)).
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::Index {
            index: target,
            len: logits.len(),
        });
    }
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut grad: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let z: f64 = grad.iter().sum();
    // loss = log(sum exp(l - m)) - (l_t - m)
    let loss = z.ln() - (logits[target] - m);
    for g in grad.iter_mut() {
        *g /= z;
    }
    grad[target] -= 1.0;
    Ok((loss, grad))
}

/// Argmax with deterministic tie-break toward the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
