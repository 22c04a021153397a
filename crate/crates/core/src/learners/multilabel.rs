//! Multi-label problem transformations over the base classifiers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{fit, Classifier, LearnError, LearnerKind, LearnerParams};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MultiLabelScheme {
    /// One independent binary model per label.
    #[serde(rename = "BR")]
    BinaryRelevance,
    /// Binary models in label order, each also fed the preceding labels.
    #[serde(rename = "CC")]
    ClassifierChain,
    /// One multi-class model over the label combinations seen in training.
    #[serde(rename = "LP")]
    LabelPowerset,
}

impl MultiLabelScheme {
    pub const ALL: [MultiLabelScheme; 3] = [
        MultiLabelScheme::BinaryRelevance,
        MultiLabelScheme::ClassifierChain,
        MultiLabelScheme::LabelPowerset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MultiLabelScheme::BinaryRelevance => "BR",
            MultiLabelScheme::ClassifierChain => "CC",
            MultiLabelScheme::LabelPowerset => "LP",
        }
    }
}

impl fmt::Display for MultiLabelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MultiLabelScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "BR" => Ok(MultiLabelScheme::BinaryRelevance),
            "CC" => Ok(MultiLabelScheme::ClassifierChain),
            "LP" => Ok(MultiLabelScheme::LabelPowerset),
            other => Err(format!("unknown multi-label scheme `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme")]
enum Fitted {
    #[serde(rename = "BR")]
    Independent { models: Vec<Classifier> },
    #[serde(rename = "CC")]
    Chain { models: Vec<Classifier> },
    #[serde(rename = "LP")]
    Powerset {
        model: Classifier,
        combinations: Vec<Vec<bool>>,
    },
}

/// A fitted multi-label model yielding P(label = 1) per label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelModel {
    base: LearnerKind,
    width: usize,
    num_labels: usize,
    fitted: Fitted,
}

fn check_labels(x: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<(usize, usize), LearnError> {
    if x.is_empty() {
        return Err(LearnError::EmptyTrainingSet);
    }
    if x.len() != labels.len() {
        return Err(LearnError::LabelCountMismatch {
            rows: x.len(),
            labels: labels.len(),
        });
    }
    let width = x[0].len();
    if width == 0 {
        return Err(LearnError::WidthMismatch {
            expected: 1,
            got: 0,
        });
    }
    let num_labels = labels[0].len();
    if let Some(bad) = labels.iter().find(|l| l.len() != num_labels) {
        return Err(LearnError::WidthMismatch {
            expected: num_labels,
            got: bad.len(),
        });
    }
    Ok((width, num_labels))
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl MultiLabelModel {
    pub fn fit(
        scheme: MultiLabelScheme,
        base: LearnerKind,
        params: &LearnerParams,
        x: &[Vec<f64>],
        labels: &[Vec<bool>],
        seed: u64,
    ) -> Result<Self, LearnError> {
        let (width, num_labels) = check_labels(x, labels)?;
        let fitted = match scheme {
            MultiLabelScheme::BinaryRelevance => {
                let models = (0..num_labels)
                    .map(|j| {
                        let y: Vec<usize> = labels.iter().map(|l| usize::from(l[j])).collect();
                        fit(base, params, x, &y, seeds::mix(seed, &[j as u64]))
                    })
                    .collect::<Result<_, _>>()?;
                Fitted::Independent { models }
            }
            MultiLabelScheme::ClassifierChain => {
                let mut augmented: Vec<Vec<f64>> = x.to_vec();
                let mut models = Vec::with_capacity(num_labels);
                for j in 0..num_labels {
                    let y: Vec<usize> = labels.iter().map(|l| usize::from(l[j])).collect();
                    models.push(fit(
                        base,
                        params,
                        &augmented,
                        &y,
                        seeds::mix(seed, &[j as u64]),
                    )?);
                    for (row, l) in augmented.iter_mut().zip(labels) {
                        row.push(bit(l[j]));
                    }
                }
                Fitted::Chain { models }
            }
            MultiLabelScheme::LabelPowerset => {
                let mut combinations: Vec<Vec<bool>> = labels.to_vec();
                combinations.sort();
                combinations.dedup();
                let y: Vec<usize> = labels
                    .iter()
                    .map(|l| combinations.binary_search(l).expect("combination present"))
                    .collect();
                let model = fit(base, params, x, &y, seeds::mix(seed, &[0]))?;
                Fitted::Powerset {
                    model,
                    combinations,
                }
            }
        };
        Ok(MultiLabelModel {
            base,
            width,
            num_labels,
            fitted,
        })
    }

    pub fn scheme(&self) -> MultiLabelScheme {
        match self.fitted {
            Fitted::Independent { .. } => MultiLabelScheme::BinaryRelevance,
            Fitted::Chain { .. } => MultiLabelScheme::ClassifierChain,
            Fitted::Powerset { .. } => MultiLabelScheme::LabelPowerset,
        }
    }

    pub fn base(&self) -> LearnerKind {
        self.base
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Label combinations the powerset model can predict (empty for other schemes).
    pub fn combinations(&self) -> &[Vec<bool>] {
        match &self.fitted {
            Fitted::Powerset { combinations, .. } => combinations,
            _ => &[],
        }
    }

    /// P(label = 1) for each label, in training label order.
    pub fn predict_label_probs(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        if x.len() != self.width {
            return Err(LearnError::WidthMismatch {
                expected: self.width,
                got: x.len(),
            });
        }
        match &self.fitted {
            Fitted::Independent { models } => models
                .iter()
                .map(|m| Ok(m.predict_proba(x)?.prob(1)))
                .collect(),
            Fitted::Chain { models } => {
                let mut input = x.to_vec();
                let mut probs = Vec::with_capacity(models.len());
                for m in models {
                    let p = m.predict_proba(&input)?.prob(1);
                    probs.push(p);
                    input.push(bit(p > 0.5));
                }
                Ok(probs)
            }
            Fitted::Powerset {
                model,
                combinations,
            } => {
                let dist = model.predict_proba(x)?;
                Ok(Self::marginals(combinations, |class| dist.prob(class)))
            }
        }
    }

    /// Per-label marginals of a distribution over label combinations.
    pub fn marginals(combinations: &[Vec<bool>], prob: impl Fn(usize) -> f64) -> Vec<f64> {
        let num_labels = combinations.first().map_or(0, Vec::len);
        let mut out = vec![0.0; num_labels];
        for (class, combo) in combinations.iter().enumerate() {
            let p = prob(class);
            for (o, b) in out.iter_mut().zip(combo) {
                if *b {
                    *o += p;
                }
            }
        }
        out
    }
}
