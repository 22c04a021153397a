use serde::{Deserialize, Serialize};

use super::{check_training, encode_classes, ClassDistribution, LearnError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BnbParams {
    /// Laplace smoothing.
    pub alpha: f64,
}

impl Default for BnbParams {
    fn default() -> Self {
        BnbParams { alpha: 1.0 }
    }
}

/// Bernoulli naive Bayes over features binarized at their training median
/// (a value is "on" when strictly above the median).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliNb {
    thresholds: Vec<f64>,
    classes: Vec<usize>,
    log_prior: Vec<f64>,
    /// Per class, per feature: ln P(on | class) and ln P(off | class).
    log_on: Vec<Vec<f64>>,
    log_off: Vec<Vec<f64>>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl BernoulliNb {
    pub fn fit(params: &BnbParams, x: &[Vec<f64>], y: &[usize]) -> Result<Self, LearnError> {
        let width = check_training(x, y)?;
        let thresholds: Vec<f64> = (0..width)
            .map(|j| median(&mut x.iter().map(|r| r[j]).collect::<Vec<_>>()))
            .collect();
        let (classes, encoded) = encode_classes(y);
        let k = classes.len();
        let mut counts = vec![0.0; k];
        let mut on = vec![vec![0.0; width]; k];
        for (row, &c) in x.iter().zip(&encoded) {
            counts[c] += 1.0;
            for j in 0..width {
                if row[j] > thresholds[j] {
                    on[c][j] += 1.0;
                }
            }
        }
        let n = x.len() as f64;
        let a = params.alpha;
        let mut log_on = vec![vec![0.0; width]; k];
        let mut log_off = vec![vec![0.0; width]; k];
        for c in 0..k {
            for j in 0..width {
                let p = (on[c][j] + a) / (counts[c] + 2.0 * a);
                log_on[c][j] = p.ln();
                log_off[c][j] = (1.0 - p).ln();
            }
        }
        Ok(BernoulliNb {
            thresholds,
            log_prior: counts.iter().map(|c| (c / n).ln()).collect(),
            classes,
            log_on,
            log_off,
        })
    }

    pub fn width(&self) -> usize {
        self.thresholds.len()
    }

    pub fn predict_proba(&self, x: &[f64]) -> ClassDistribution {
        let joint: Vec<f64> = (0..self.classes.len())
            .map(|c| {
                self.log_prior[c]
                    + x.iter()
                        .zip(&self.thresholds)
                        .enumerate()
                        .map(|(j, (v, t))| {
                            if v > t {
                                self.log_on[c][j]
                            } else {
                                self.log_off[c][j]
                            }
                        })
                        .sum::<f64>()
            })
            .collect();
        let top = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = joint.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = unnorm.iter().sum();
        ClassDistribution {
            classes: self.classes.clone(),
            probs: unnorm.iter().map(|u| u / z).collect(),
        }
    }
}
