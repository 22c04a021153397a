//! The two learned aggregation approaches.
//!
//! Method prediction (AMP) learns, per aggregation method, whether that
//! method will return the correct answer, then applies the method with the
//! highest predicted success probability. Direct answer prediction (DAP)
//! learns the correct answer itself from the case features plus every
//! method's choice.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregators::{self, aggregate_da, AggregationResult, CaseStats, MethodId};
use crate::case_model::{AnswerIdx, DecisionCase};
use crate::features::{featurize_case, FeatureError, FeatureMask, SubgroupPlan, NUM_FEATURES};
use crate::learners::{ClassDistribution, Classifier, LearnError, MultiLabelModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Approach {
    #[serde(rename = "AMP", alias = "amp")]
    Amp,
    #[serde(rename = "DAP", alias = "dap")]
    Dap,
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Approach::Amp => "AMP",
            Approach::Dap => "DAP",
        })
    }
}

impl FromStr for Approach {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "amp" => Ok(Approach::Amp),
            "dap" => Ok(Approach::Dap),
            other => Err(format!("unknown approach `{other}` (expected amp or dap)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("case `{0}` has no known correct answer")]
    MissingGroundTruth(String),
    #[error("method set must contain MR")]
    MissingMajorityRule,
    #[error("case `{case_id}` has {got} answers; the model was built for {expected}")]
    AnswerCountMismatch {
        case_id: String,
        expected: usize,
        got: usize,
    },
    #[error("model expects {expected} labels, method set has {got}")]
    LabelCountMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// The aggregation methods in play, kept in canonical order. MR is always
/// present. When DA is present its inputs are the other members.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MethodId>", into = "Vec<MethodId>")]
pub struct MethodSet(Vec<MethodId>);

impl MethodSet {
    pub fn full() -> Self {
        MethodSet(MethodId::ALL.to_vec())
    }

    pub fn new(methods: &[MethodId]) -> Result<Self, PipelineError> {
        if !methods.contains(&MethodId::Mr) {
            return Err(PipelineError::MissingMajorityRule);
        }
        Ok(MethodSet(
            MethodId::ALL
                .into_iter()
                .filter(|m| methods.contains(m))
                .collect(),
        ))
    }

    pub fn without(&self, method: MethodId) -> Result<Self, PipelineError> {
        let rest: Vec<MethodId> = self.0.iter().copied().filter(|m| *m != method).collect();
        Self::new(&rest)
    }

    pub fn contains(&self, method: MethodId) -> bool {
        self.0.contains(&method)
    }

    pub fn methods(&self) -> &[MethodId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Standard methods feeding DA.
    pub fn da_inputs(&self) -> Vec<MethodId> {
        self.0
            .iter()
            .copied()
            .filter(|m| *m != MethodId::Da)
            .collect()
    }
}

impl Default for MethodSet {
    fn default() -> Self {
        MethodSet::full()
    }
}

impl TryFrom<Vec<MethodId>> for MethodSet {
    type Error = PipelineError;

    fn try_from(v: Vec<MethodId>) -> Result<Self, Self::Error> {
        MethodSet::new(&v)
    }
}

impl From<MethodSet> for Vec<MethodId> {
    fn from(s: MethodSet) -> Self {
        s.0
    }
}

/// How a case becomes a learning instance.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub plan: SubgroupPlan,
    pub mask: FeatureMask,
    pub methods: MethodSet,
}

/// Everything the pipelines need from a case, computed once: the full
/// feature vector and the choice of each standard method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedCase {
    pub case_id: String,
    pub num_answers: usize,
    pub correct: Option<AnswerIdx>,
    pub features: [f64; NUM_FEATURES],
    /// Choices of MR, HAC, WC, SP, in that order.
    pub standard_choices: [AnswerIdx; 4],
}

impl PreparedCase {
    pub fn new(case: &DecisionCase, plan: &SubgroupPlan) -> Result<Self, PipelineError> {
        let instance = featurize_case(case, plan)?;
        let stats = CaseStats::of(case);
        let standard = aggregators::aggregate_all(case, &stats, &MethodId::STANDARD);
        let mut standard_choices = [0; 4];
        for (slot, r) in standard_choices.iter_mut().zip(&standard) {
            *slot = r.chosen;
        }
        Ok(PreparedCase {
            case_id: case.case_id.clone(),
            num_answers: case.num_answers(),
            correct: case.correct,
            features: instance.features,
            standard_choices,
        })
    }

    /// The answer `method` picks, with DA drawing on the set's other members.
    pub fn choice(&self, method: MethodId, methods: &MethodSet) -> AnswerIdx {
        match method {
            MethodId::Da => {
                let inputs: Vec<(MethodId, AnswerIdx)> = methods
                    .da_inputs()
                    .into_iter()
                    .map(|m| (m, self.standard_choices[m.index()]))
                    .collect();
                aggregate_da(self.num_answers, &inputs, self.standard_choices[0])
                    .expect("inputs include MR")
                    .0
            }
            m => self.standard_choices[m.index()],
        }
    }

    pub fn correct_answer(&self) -> Result<AnswerIdx, PipelineError> {
        self.correct
            .ok_or_else(|| PipelineError::MissingGroundTruth(self.case_id.clone()))
    }

    /// Outcome bits for every method in the set.
    pub fn outcomes(&self, methods: &MethodSet) -> Result<Vec<bool>, PipelineError> {
        let correct = self.correct_answer()?;
        Ok(methods
            .methods()
            .iter()
            .map(|m| self.choice(*m, methods) == correct)
            .collect())
    }

    pub fn amp_features(&self, mask: &FeatureMask) -> Vec<f64> {
        mask.columns()
            .into_iter()
            .map(|c| self.features[c])
            .collect()
    }

    /// Masked features followed by one one-hot block per method in the set.
    pub fn dap_features(&self, mask: &FeatureMask, methods: &MethodSet) -> Vec<f64> {
        let mut row = self.amp_features(mask);
        for m in methods.methods() {
            let chosen = self.choice(*m, methods);
            row.extend((0..self.num_answers).map(|a| if a == chosen { 1.0 } else { 0.0 }));
        }
        row
    }
}

/// Training instance of the method-prediction approach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpInstance {
    pub case_id: String,
    pub features: Vec<f64>,
    pub methods: Vec<MethodId>,
    /// Outcome of each method, aligned with `methods`.
    pub labels: Vec<bool>,
}

/// Training instance of the direct-answer approach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DapInstance {
    pub case_id: String,
    pub features: Vec<f64>,
    /// Index of the correct answer.
    pub label: AnswerIdx,
}

pub fn build_amp_instance(
    case: &DecisionCase,
    spec: &InstanceSpec,
) -> Result<AmpInstance, PipelineError> {
    if case.correct.is_none() {
        return Err(PipelineError::MissingGroundTruth(case.case_id.clone()));
    }
    let prepared = PreparedCase::new(case, &spec.plan)?;
    Ok(AmpInstance {
        case_id: prepared.case_id.clone(),
        features: prepared.amp_features(&spec.mask),
        methods: spec.methods.methods().to_vec(),
        labels: prepared.outcomes(&spec.methods)?,
    })
}

pub fn build_dap_instance(
    case: &DecisionCase,
    spec: &InstanceSpec,
) -> Result<DapInstance, PipelineError> {
    let correct = case
        .correct
        .ok_or_else(|| PipelineError::MissingGroundTruth(case.case_id.clone()))?;
    let prepared = PreparedCase::new(case, &spec.plan)?;
    Ok(DapInstance {
        case_id: prepared.case_id.clone(),
        features: prepared.dap_features(&spec.mask, &spec.methods),
        label: correct,
    })
}

/// Width of a DAP feature row.
pub fn dap_width(mask: &FeatureMask, methods: &MethodSet, num_answers: usize) -> usize {
    mask.width() + methods.len() * num_answers
}

/// The method with the highest P(success); ties go to the earlier method in
/// canonical order.
pub fn select_method(label_probs: &[f64], methods: &MethodSet) -> MethodId {
    let mut best = 0;
    for i in 1..label_probs.len() {
        if label_probs[i] > label_probs[best] {
            best = i;
        }
    }
    methods.methods()[best]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpDecision {
    pub selected: MethodId,
    /// P(method succeeds), aligned with the method set.
    pub label_probs: Vec<f64>,
    pub result: AggregationResult,
}

/// Applies the method the model rates most likely to succeed.
pub fn amp_select_and_aggregate(
    model: &MultiLabelModel,
    case: &DecisionCase,
    spec: &InstanceSpec,
) -> Result<AmpDecision, PipelineError> {
    if model.num_labels() != spec.methods.len() {
        return Err(PipelineError::LabelCountMismatch {
            expected: model.num_labels(),
            got: spec.methods.len(),
        });
    }
    let prepared = PreparedCase::new(case, &spec.plan)?;
    let label_probs = model.predict_label_probs(&prepared.amp_features(&spec.mask))?;
    Ok(amp_resolve(label_probs, case, &spec.methods))
}

/// Turns per-method success probabilities into an aggregation result by
/// running the selected method on the case.
pub fn amp_resolve(label_probs: Vec<f64>, case: &DecisionCase, methods: &MethodSet) -> AmpDecision {
    let selected = select_method(&label_probs, methods);
    let result =
        aggregators::apply_method(case, &CaseStats::of(case), selected, &methods.da_inputs());
    AmpDecision {
        selected,
        label_probs,
        result,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DapDecision {
    pub chosen: AnswerIdx,
    pub class_probs: ClassDistribution,
    pub outcome: Option<bool>,
}

/// Returns the answer with the highest predicted probability of being
/// correct; ties go to the lowest answer index.
pub fn dap_predict_answer(
    model: &Classifier,
    case: &DecisionCase,
    spec: &InstanceSpec,
) -> Result<DapDecision, PipelineError> {
    let expected = model.width();
    let width = dap_width(&spec.mask, &spec.methods, case.num_answers());
    if width != expected {
        return Err(PipelineError::AnswerCountMismatch {
            case_id: case.case_id.clone(),
            expected: (expected - spec.mask.width()) / spec.methods.len().max(1),
            got: case.num_answers(),
        });
    }
    let prepared = PreparedCase::new(case, &spec.plan)?;
    let dist = model.predict_proba(&prepared.dap_features(&spec.mask, &spec.methods))?;
    Ok(dap_resolve(dist, case.correct))
}

pub fn dap_resolve(dist: ClassDistribution, correct: Option<AnswerIdx>) -> DapDecision {
    let chosen = dist.argmax();
    DapDecision {
        chosen,
        outcome: correct.map(|c| c == chosen),
        class_probs: dist,
    }
}
