//! Multinomial logistic regression fitted by full-batch gradient descent.

use serde::{Deserialize, Serialize};

/// Mean softmax cross-entropy with an L2 penalty on the non-bias weights,
/// and its gradient.
///
/// `params` is row-major `n_classes x (n_features + 1)` with the bias in the
/// last column of each row.
pub fn softmax_loss_and_grad(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: &[f64],
    l2: f64,
) -> (f64, Vec<f64>) {
    let width = x.first().map_or(0, Vec::len) + 1;
    debug_assert_eq!(params.len(), n_classes * width);
    let n = x.len().max(1) as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let mut logits = vec![0.0; n_classes];
    for (row, &label) in x.iter().zip(y) {
        for (c, logit) in logits.iter_mut().enumerate() {
            let w = &params[c * width..(c + 1) * width];
            *logit = w[width - 1] + row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        let log_z = max + z.ln();
        loss += log_z - logits[label];
        for (c, logit) in logits.iter().enumerate() {
            let p = (logit - log_z).exp();
            let err = p - f64::from(u8::from(c == label));
            let g = &mut grad[c * width..(c + 1) * width];
            for (gj, xj) in g.iter_mut().zip(row) {
                *gj += err * xj;
            }
            g[width - 1] += err;
        }
    }
    loss /= n;
    for g in &mut grad {
        *g /= n;
    }
    for c in 0..n_classes {
        for j in 0..width - 1 {
            let w = params[c * width + j];
            loss += 0.5 * l2 * w * w;
            grad[c * width + j] += l2 * w;
        }
    }
    (loss, grad)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub n_classes: usize,
    pub params: Vec<f64>,
}

impl LogisticModel {
    /// Gradient descent from zero weights. A step that increases the loss
    /// is rejected and the step size halved.
    pub fn fit(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        iterations: usize,
        learning_rate: f64,
        l2: f64,
    ) -> Self {
        let width = x.first().map_or(0, Vec::len) + 1;
        let mut params = vec![0.0; n_classes * width];
        let (mut loss, mut grad) = softmax_loss_and_grad(x, y, n_classes, &params, l2);
        let mut step = learning_rate;
        for _ in 0..iterations {
            let candidate: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let (cand_loss, cand_grad) = softmax_loss_and_grad(x, y, n_classes, &candidate, l2);
            if cand_loss <= loss {
                params = candidate;
                loss = cand_loss;
                grad = cand_grad;
            } else {
                step *= 0.5;
                if step < 1e-12 {
                    break;
                }
            }
        }
        LogisticModel { n_classes, params }
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        let width = row.len() + 1;
        let mut best = (0, f64::NEG_INFINITY);
        for c in 0..self.n_classes {
            let w = &self.params[c * width..(c + 1) * width];
            let logit = w[width - 1] + row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            if logit > best.1 {
                best = (c, logit);
            }
        }
        best.0
    }
}
