//! A small supervised-learning suite: Bernoulli naive Bayes, k-nearest
//! neighbours, logistic regression and random forest, all producing class
//! probability distributions, plus the binary-relevance, classifier-chain
//! and label-powerset multi-label transformations.

mod bnb;
mod forest;
mod knn;
pub mod logistic;
mod multilabel;
mod standardize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bnb::{BernoulliNb, BnbParams};
pub use forest::{DecisionTree, ForestParams, RandomForest};
pub use knn::{KnnParams, NearestNeighbors};
pub use logistic::{LogisticParams, LogisticRegression};
pub use multilabel::{MultiLabelModel, MultiLabelScheme};
pub use standardize::Standardizer;

/// Version written into serialized model artifacts.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("feature width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("{rows} feature rows but {labels} labels")]
    LabelCountMismatch { rows: usize, labels: usize },
    #[error("feature value at row {row}, column {col} is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("logistic-regression loss increased at iteration {0}")]
    NonMonotoneLoss(usize),
    #[error("unsupported model artifact version {0}")]
    UnsupportedFormat(u32),
    #[error("malformed model artifact: {0}")]
    Artifact(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LearnerKind {
    #[serde(rename = "BNB")]
    Bnb,
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "RF")]
    Rf,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] = [
        LearnerKind::Bnb,
        LearnerKind::Knn,
        LearnerKind::Lr,
        LearnerKind::Rf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Bnb => "BNB",
            LearnerKind::Knn => "KNN",
            LearnerKind::Lr => "LR",
            LearnerKind::Rf => "RF",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "BNB" => Ok(LearnerKind::Bnb),
            "KNN" => Ok(LearnerKind::Knn),
            "LR" => Ok(LearnerKind::Lr),
            "RF" => Ok(LearnerKind::Rf),
            other => Err(format!("unknown classifier `{other}`")),
        }
    }
}

/// Hyperparameters for every learner kind.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerParams {
    pub bnb: BnbParams,
    pub knn: KnnParams,
    pub lr: LogisticParams,
    pub rf: ForestParams,
}

/// Probabilities over the classes seen at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub classes: Vec<usize>,
    pub probs: Vec<f64>,
}

impl ClassDistribution {
    /// Probability of `class`; zero for classes never seen in training.
    pub fn prob(&self, class: usize) -> f64 {
        self.classes
            .iter()
            .position(|c| *c == class)
            .map_or(0.0, |i| self.probs[i])
    }

    /// Most probable class; ties go to the smallest class id.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.probs.len() {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        self.classes[best]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Classifier {
    #[serde(rename = "BNB")]
    Bnb(BernoulliNb),
    #[serde(rename = "KNN")]
    Knn(NearestNeighbors),
    #[serde(rename = "LR")]
    Lr(LogisticRegression),
    #[serde(rename = "RF")]
    Rf(RandomForest),
}

/// Checks shape and finiteness; returns the feature width.
pub(crate) fn check_training(x: &[Vec<f64>], y: &[usize]) -> Result<usize, LearnError> {
    if x.is_empty() {
        return Err(LearnError::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(LearnError::LabelCountMismatch {
            rows: x.len(),
            labels: y.len(),
        });
    }
    let width = x[0].len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != width {
            return Err(LearnError::WidthMismatch {
                expected: width,
                got: row.len(),
            });
        }
        if let Some(col) = row.iter().position(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite { row: i, col });
        }
    }
    Ok(width)
}

/// Sorted distinct labels and each row's position among them.
pub(crate) fn encode_classes(y: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let encoded = y
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    (classes, encoded)
}

pub fn fit(
    kind: LearnerKind,
    params: &LearnerParams,
    x: &[Vec<f64>],
    y: &[usize],
    seed: u64,
) -> Result<Classifier, LearnError> {
    Ok(match kind {
        LearnerKind::Bnb => Classifier::Bnb(BernoulliNb::fit(&params.bnb, x, y)?),
        LearnerKind::Knn => Classifier::Knn(NearestNeighbors::fit(&params.knn, x, y)?),
        LearnerKind::Lr => Classifier::Lr(LogisticRegression::fit(&params.lr, x, y)?),
        LearnerKind::Rf => Classifier::Rf(RandomForest::fit(&params.rf, x, y, seed)?),
    })
}

impl Classifier {
    pub fn kind(&self) -> LearnerKind {
        match self {
            Classifier::Bnb(_) => LearnerKind::Bnb,
            Classifier::Knn(_) => LearnerKind::Knn,
            Classifier::Lr(_) => LearnerKind::Lr,
            Classifier::Rf(_) => LearnerKind::Rf,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            Classifier::Bnb(m) => m.width(),
            Classifier::Knn(m) => m.width(),
            Classifier::Lr(m) => m.width(),
            Classifier::Rf(m) => m.width(),
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<ClassDistribution, LearnError> {
        if x.len() != self.width() {
            return Err(LearnError::WidthMismatch {
                expected: self.width(),
                got: x.len(),
            });
        }
        Ok(match self {
            Classifier::Bnb(m) => m.predict_proba(x),
            Classifier::Knn(m) => m.predict_proba(x),
            Classifier::Lr(m) => m.predict_proba(x),
            Classifier::Rf(m) => m.predict_proba(x),
        })
    }

    /// Serializes into a versioned JSON artifact.
    pub fn to_artifact(&self) -> String {
        serde_json::json!({
            "format_version": MODEL_FORMAT_VERSION,
            "model": self,
        })
        .to_string()
    }

    pub fn from_artifact(text: &str) -> Result<Self, LearnError> {
        #[derive(Deserialize)]
        struct Artifact {
            format_version: u32,
            model: serde_json::Value,
        }
        let a: Artifact =
            serde_json::from_str(text).map_err(|e| LearnError::Artifact(e.to_string()))?;
        if a.format_version != MODEL_FORMAT_VERSION {
            return Err(LearnError::UnsupportedFormat(a.format_version));
        }
        serde_json::from_value(a.model).map_err(|e| LearnError::Artifact(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_clusters() -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.05;
            x.push(vec![t, 1.0 - t, 0.3]);
            y.push(0);
            x.push(vec![3.0 + t, 4.0 - t, 0.3]);
            y.push(1);
        }
        (x, y)
    }

    #[test]
    fn single_class_is_certain() {
        let x = vec![vec![0.1, 0.2], vec![0.5, 0.9], vec![0.3, 0.3]];
        let y = vec![1, 1, 1];
        for kind in LearnerKind::ALL {
            let m = fit(kind, &LearnerParams::default(), &x, &y, 3).unwrap();
            let d = m.predict_proba(&[0.7, -2.0]).unwrap();
            assert_eq!(d.classes, vec![1], "{kind}");
            assert_eq!(d.probs, vec![1.0], "{kind}");
        }
    }

    #[test]
    fn distributions_sum_to_one() {
        let (x, y) = two_clusters();
        for kind in LearnerKind::ALL {
            let m = fit(kind, &LearnerParams::default(), &x, &y, 5).unwrap();
            for q in [[0.0, 0.0, 0.3], [1.5, 2.0, 0.3], [9.0, -1.0, 2.0]] {
                let d = m.predict_proba(&q).unwrap();
                let total: f64 = d.probs.iter().sum();
                assert!((total - 1.0).abs() < 1e-9, "{kind}: {total}");
                assert!(d.probs.iter().all(|p| (0.0..=1.0).contains(p)));
            }
            assert_eq!(
                m.predict_proba(&[0.0, 0.0, 0.3]).unwrap().argmax(),
                0,
                "{kind}"
            );
            assert_eq!(
                m.predict_proba(&[3.5, 3.5, 0.3]).unwrap().argmax(),
                1,
                "{kind}"
            );
        }
    }

    #[test]
    fn width_and_shape_errors() {
        let (x, y) = two_clusters();
        let m = fit(LearnerKind::Knn, &LearnerParams::default(), &x, &y, 0).unwrap();
        assert_eq!(
            m.predict_proba(&[1.0]),
            Err(LearnError::WidthMismatch {
                expected: 3,
                got: 1
            })
        );
        assert_eq!(
            fit(LearnerKind::Rf, &LearnerParams::default(), &[], &[], 0),
            Err(LearnError::EmptyTrainingSet)
        );
        assert!(matches!(
            fit(LearnerKind::Lr, &LearnerParams::default(), &x, &y[1..], 0),
            Err(LearnError::LabelCountMismatch { .. })
        ));
    }

    #[test]
    fn artifact_roundtrip() {
        let (x, y) = two_clusters();
        for kind in LearnerKind::ALL {
            let m = fit(kind, &LearnerParams::default(), &x, &y, 1).unwrap();
            let text = m.to_artifact();
            assert!(text.contains("\"format_version\":1"));
            let back = Classifier::from_artifact(&text).unwrap();
            let q = [1.0, 2.0, 0.3];
            assert_eq!(back.predict_proba(&q), m.predict_proba(&q), "{kind}");
        }
        assert_eq!(
            Classifier::from_artifact(r#"{"format_version":9,"model":{}}"#),
            Err(LearnError::UnsupportedFormat(9))
        );
    }

    #[test]
    fn class_distribution_helpers() {
        let d = ClassDistribution {
            classes: vec![0, 3],
            probs: vec![0.5, 0.5],
        };
        assert_eq!(d.argmax(), 0);
        assert_eq!(d.prob(3), 0.5);
        assert_eq!(d.prob(7), 0.0);
    }
}
