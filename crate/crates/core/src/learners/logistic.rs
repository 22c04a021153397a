//! Multinomial logistic regression with an L2 penalty on the weights,
//! fitted by gradient descent with backtracking line search on z-scored
//! features. For two classes this is ordinary logistic regression.

use serde::{Deserialize, Serialize};

use super::{check_training, encode_classes, ClassDistribution, LearnError, Standardizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticParams {
    /// L2 strength; the penalty is `lambda / (2n) * |W|^2` (bias unpenalized).
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop once an accepted step lowers the loss by less than this.
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            lambda: 1.0,
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    scaler: Standardizer,
    classes: Vec<usize>,
    /// `classes.len()` rows of `width` weights followed by one bias per class.
    theta: Vec<f64>,
    loss_trace: Vec<f64>,
}

fn softmax_into(logits: &mut [f64]) {
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - top).exp();
        z += *l;
    }
    for l in logits.iter_mut() {
        *l /= z;
    }
}

fn logits(theta: &[f64], row: &[f64], k: usize) -> Vec<f64> {
    let d = row.len();
    (0..k)
        .map(|c| {
            let w = &theta[c * d..(c + 1) * d];
            theta[k * d + c] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

/// Penalized mean cross-entropy only.
pub fn loss(theta: &[f64], x: &[Vec<f64>], y: &[usize], k: usize, lambda: f64) -> f64 {
    let n = x.len() as f64;
    let d = x.first().map_or(0, Vec::len);
    let mut total = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z = logits(theta, row, k);
        let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + z.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
        total += lse - z[label];
    }
    let penalty: f64 = theta[..k * d].iter().map(|w| w * w).sum();
    total / n + lambda / (2.0 * n) * penalty
}

/// Penalized mean cross-entropy and its gradient with respect to `theta`.
/// `y` holds class positions in `0..k`.
pub fn loss_and_gradient(
    theta: &[f64],
    x: &[Vec<f64>],
    y: &[usize],
    k: usize,
    lambda: f64,
) -> (f64, Vec<f64>) {
    let n = x.len() as f64;
    let d = x.first().map_or(0, Vec::len);
    let mut grad = vec![0.0; theta.len()];
    let mut total = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let mut p = logits(theta, row, k);
        let top = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + p.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
        total += lse - p[label];
        softmax_into(&mut p);
        for c in 0..k {
            let r = p[c] - if c == label { 1.0 } else { 0.0 };
            let g = &mut grad[c * d..(c + 1) * d];
            for (gj, xj) in g.iter_mut().zip(row) {
                *gj += r * xj;
            }
            grad[k * d + c] += r;
        }
    }
    for g in grad.iter_mut() {
        *g /= n;
    }
    let mut penalty = 0.0;
    for (g, w) in grad[..k * d].iter_mut().zip(&theta[..k * d]) {
        *g += lambda / n * w;
        penalty += w * w;
    }
    (total / n + lambda / (2.0 * n) * penalty, grad)
}

impl LogisticRegression {
    pub fn fit(params: &LogisticParams, x: &[Vec<f64>], y: &[usize]) -> Result<Self, LearnError> {
        let width = check_training(x, y)?;
        let scaler = Standardizer::fit(x);
        let (classes, encoded) = encode_classes(y);
        let k = classes.len();
        let mut theta = vec![0.0; k * width + k];
        let mut loss_trace = Vec::new();
        if k > 1 {
            let z = scaler.transform_all(x);
            let (mut current, mut grad) = loss_and_gradient(&theta, &z, &encoded, k, params.lambda);
            loss_trace.push(current);
            let mut step = 1.0;
            for _ in 0..params.max_iter {
                let g2: f64 = grad.iter().map(|g| g * g).sum();
                if g2 == 0.0 {
                    break;
                }
                let mut accepted = None;
                while step > 1e-12 {
                    let candidate: Vec<f64> =
                        theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
                    let l = loss(&candidate, &z, &encoded, k, params.lambda);
                    if l <= current - 1e-4 * step * g2 {
                        accepted = Some((candidate, l));
                        break;
                    }
                    step *= 0.5;
                }
                let Some((next, next_loss)) = accepted else {
                    break;
                };
                let delta = current - next_loss;
                theta = next;
                let (l, g) = loss_and_gradient(&theta, &z, &encoded, k, params.lambda);
                current = l;
                grad = g;
                loss_trace.push(current);
                step = (step * 2.0).min(1e3);
                if delta < params.tol {
                    break;
                }
            }
            if let Some(i) = loss_trace.windows(2).position(|w| w[1] > w[0]) {
                return Err(LearnError::NonMonotoneLoss(i + 1));
            }
        }
        Ok(LogisticRegression {
            scaler,
            classes,
            theta,
            loss_trace,
        })
    }

    pub fn width(&self) -> usize {
        self.scaler.mean.len()
    }

    /// Training loss after each accepted optimizer step (starting point first).
    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }

    pub fn predict_proba(&self, x: &[f64]) -> ClassDistribution {
        let k = self.classes.len();
        let mut p = logits(&self.theta, &self.scaler.transform(x), k);
        softmax_into(&mut p);
        ClassDistribution {
            classes: self.classes.clone(),
            probs: p,
        }
    }

    /// Assembles a model from explicit parameters (layout as in `loss_and_gradient`).
    pub fn from_parts(scaler: Standardizer, classes: Vec<usize>, theta: Vec<f64>) -> Self {
        LogisticRegression {
            scaler,
            classes,
            theta,
            loss_trace: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_uniform() {
        let scaler = Standardizer {
            mean: vec![0.0; 3],
            std: vec![1.0; 3],
        };
        let m = LogisticRegression::from_parts(scaler, vec![0, 1], vec![0.0; 8]);
        let d = m.predict_proba(&[4.0, -1.0, 2.0]);
        assert_eq!(d.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn loss_trace_is_monotone() {
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.37).cos()])
            .collect();
        let y: Vec<usize> = x
            .iter()
            .map(|r| usize::from(r[0] + 0.5 * r[1] > 0.1))
            .collect();
        let m = LogisticRegression::fit(&LogisticParams::default(), &x, &y).unwrap();
        let trace = m.loss_trace();
        assert!(trace.len() > 2);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        let acc = x
            .iter()
            .zip(&y)
            .filter(|(r, l)| m.predict_proba(r).argmax() == **l)
            .count();
        assert!(acc >= 36);
    }
}
