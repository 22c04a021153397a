//! Leave-one-out evaluation, nested model selection, ablation, coverage
//! analysis and significance testing over a corpus of decision cases.
//!
//! Every case is featurized once into a [`PreparedCase`]; each experiment
//! then builds a design matrix from the prepared cases for its feature mask
//! and method set. Per-case work units run in parallel with seeds derived
//! from their coordinates, and results are collected in corpus order, so
//! reports do not depend on the number of worker threads.

mod ablation;
mod coverage;
mod format;
mod report;
mod selection;
pub mod stats;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregators::MethodId;
use crate::case_model::{AnswerIdx, DecisionCase};
use crate::features::{FeatureMask, SubgroupPlan};
use crate::learners::{
    self, Classifier, LearnError, LearnerKind, LearnerParams, MultiLabelModel, MultiLabelScheme,
};
use crate::pipelines::{
    dap_resolve, select_method, Approach, MethodSet, PipelineError, PreparedCase,
};
use crate::seeds;

pub use ablation::{
    ablate, ablation_table, apply_exclusions, render_ablation, standard_ablation_rows, AblationRow,
    Exclusion,
};
pub use coverage::{coverage_analysis, CoverageReport, MethodCoverage, Region};
pub use format::sig6;
pub use report::{
    conditional_success_report, CaseOutcome, ConditionalRow, EvaluationReport, MethodRate,
    SignificanceRow,
};
pub use selection::{
    amp_grid, dap_grid, fold_assignment, nested_model_selection, render_grid, FoldResult,
    ModelSelectionReport, WinnerRule,
};
pub use stats::{
    mcnemar_from_counts, mcnemar_test, proportion_test, McNemarResult, McNemarVariant,
    ProportionResult,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("sample size must be at least 1")]
    ZeroSample,
    #[error("success count exceeds sample size")]
    InvalidCounts,
    #[error("corpus has {got} cases; at least {need} required")]
    CorpusTooSmall { need: usize, got: usize },
    #[error("case `{0}` has no known correct answer")]
    MissingGroundTruth(String),
    #[error("cannot exclude {0}: voting features and MR are always retained")]
    InvalidExclusion(String),
    #[error("candidate grid is empty")]
    EmptyGrid,
    #[error("technique {technique} does not belong to the {approach} approach")]
    TechniqueMismatch {
        technique: String,
        approach: Approach,
    },
    #[error("answer prediction needs a fixed answer count; case `{case_id}` has {got}, expected {expected}")]
    MixedAnswerCounts {
        case_id: String,
        expected: usize,
        got: usize,
    },
    #[error("case `{case_id}`: {source}")]
    Case {
        case_id: String,
        #[source]
        source: PipelineError,
    },
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// A classification technique: a multi-label wrapper around a base learner
/// for method prediction, or a plain learner for answer prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "approach")]
pub enum Technique {
    #[serde(rename = "AMP")]
    Amp {
        scheme: MultiLabelScheme,
        learner: LearnerKind,
    },
    #[serde(rename = "DAP")]
    Dap { learner: LearnerKind },
}

impl Technique {
    pub fn approach(self) -> Approach {
        match self {
            Technique::Amp { .. } => Approach::Amp,
            Technique::Dap { .. } => Approach::Dap,
        }
    }

    pub fn learner(self) -> LearnerKind {
        match self {
            Technique::Amp { learner, .. } | Technique::Dap { learner } => learner,
        }
    }

    /// Parses `BR+RF`-style names for AMP and bare learner names for DAP.
    pub fn parse(approach: Approach, s: &str) -> Result<Self, String> {
        match approach {
            Approach::Amp => {
                let (scheme, learner) = s
                    .split_once('+')
                    .ok_or_else(|| format!("expected SCHEME+LEARNER, got `{s}`"))?;
                Ok(Technique::Amp {
                    scheme: scheme.parse()?,
                    learner: learner.parse()?,
                })
            }
            Approach::Dap => Ok(Technique::Dap {
                learner: s.parse()?,
            }),
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Technique::Amp { scheme, learner } => write!(f, "{}+{}", scheme.name(), learner),
            Technique::Dap { learner } => write!(f, "{learner}"),
        }
    }
}

impl FromStr for Technique {
    type Err = String;

    /// `amp:BR+RF` or `dap:RF`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (approach, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("expected APPROACH:TECHNIQUE, got `{s}`"))?;
        Technique::parse(approach.parse()?, rest)
    }
}

/// Evaluation-protocol options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub folds: usize,
    pub winner_rule: WinnerRule,
    /// Cap on inner leave-one-out evaluations per fold and candidate
    /// (stratified subsample); `None` runs every training case.
    pub inner_subsample: Option<usize>,
    pub mcnemar: McNemarVariant,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            folds: 10,
            winner_rule: WinnerRule::default(),
            inner_subsample: None,
            mcnemar: McNemarVariant::default(),
        }
    }
}

/// Everything about an experiment except the technique and the seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub mask: FeatureMask,
    pub methods: MethodSet,
    pub params: LearnerParams,
    pub options: EvalOptions,
}

/// Cases featurized once, all with ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedCorpus {
    cases: Vec<PreparedCase>,
}

impl PreparedCorpus {
    /// Featurizes every case in parallel.
    pub fn prepare(cases: &[DecisionCase], plan: &SubgroupPlan) -> Result<Self, EvalError> {
        let prepared = cases
            .par_iter()
            .map(|c| {
                PreparedCase::new(c, plan).map_err(|source| EvalError::Case {
                    case_id: c.case_id.clone(),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_prepared(prepared)
    }

    pub fn from_prepared(cases: Vec<PreparedCase>) -> Result<Self, EvalError> {
        if let Some(c) = cases.iter().find(|c| c.correct.is_none()) {
            return Err(EvalError::MissingGroundTruth(c.case_id.clone()));
        }
        Ok(PreparedCorpus { cases })
    }

    pub fn cases(&self) -> &[PreparedCase] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub(crate) fn correct(&self, i: usize) -> AnswerIdx {
        self.cases[i].correct.expect("checked at construction")
    }
}

/// Feature rows and targets for one (mask, method set, approach).
pub(crate) struct Design {
    approach: Approach,
    rows: Vec<Vec<f64>>,
    /// Per case, the answer chosen by each method of the set.
    choices: Vec<Vec<AnswerIdx>>,
    /// Per case, whether each method of the set is correct.
    outcomes: Vec<Vec<bool>>,
    correct: Vec<AnswerIdx>,
    methods: MethodSet,
}

impl Design {
    pub(crate) fn build(
        corpus: &PreparedCorpus,
        approach: Approach,
        config: &EvalConfig,
    ) -> Result<Self, EvalError> {
        let methods = config.methods.clone();
        if approach == Approach::Dap {
            if let Some(first) = corpus.cases.first() {
                if let Some(c) = corpus
                    .cases
                    .iter()
                    .find(|c| c.num_answers != first.num_answers)
                {
                    return Err(EvalError::MixedAnswerCounts {
                        case_id: c.case_id.clone(),
                        expected: first.num_answers,
                        got: c.num_answers,
                    });
                }
            }
        }
        let mut design = Design {
            approach,
            rows: Vec::with_capacity(corpus.len()),
            choices: Vec::with_capacity(corpus.len()),
            outcomes: Vec::with_capacity(corpus.len()),
            correct: Vec::with_capacity(corpus.len()),
            methods,
        };
        for (i, c) in corpus.cases.iter().enumerate() {
            let correct = corpus.correct(i);
            let choices: Vec<AnswerIdx> = design
                .methods
                .methods()
                .iter()
                .map(|m| c.choice(*m, &design.methods))
                .collect();
            design
                .outcomes
                .push(choices.iter().map(|a| *a == correct).collect());
            design.choices.push(choices);
            design.correct.push(correct);
            design.rows.push(match approach {
                Approach::Amp => c.amp_features(&config.mask),
                Approach::Dap => c.dap_features(&config.mask, &design.methods),
            });
        }
        Ok(design)
    }

    pub(crate) fn outcomes(&self) -> &[Vec<bool>] {
        &self.outcomes
    }

    pub(crate) fn methods(&self) -> &MethodSet {
        &self.methods
    }

    /// Stratum of a case for inner-loop subsampling: the label vector for
    /// AMP, the correct answer for DAP.
    pub(crate) fn stratum(&self, i: usize) -> u64 {
        match self.approach {
            Approach::Amp => self.outcomes[i]
                .iter()
                .enumerate()
                .fold(0, |acc, (j, b)| acc | (u64::from(*b) << j)),
            Approach::Dap => self.correct[i] as u64,
        }
    }
}

enum Fitted {
    Amp(MultiLabelModel),
    Dap(Classifier),
}

/// One case's prediction from a model that never saw it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Prediction {
    pub chosen: AnswerIdx,
    /// Position of the applied method in the set (method prediction only).
    pub selected: Option<usize>,
    pub success: bool,
}

fn check_technique(technique: Technique, approach: Approach) -> Result<(), EvalError> {
    if technique.approach() != approach {
        return Err(EvalError::TechniqueMismatch {
            technique: technique.to_string(),
            approach,
        });
    }
    Ok(())
}

fn fit_on(
    design: &Design,
    technique: Technique,
    params: &LearnerParams,
    train: &[usize],
    seed: u64,
) -> Result<Fitted, EvalError> {
    let x: Vec<Vec<f64>> = train.iter().map(|&i| design.rows[i].clone()).collect();
    Ok(match technique {
        Technique::Amp { scheme, learner } => {
            let y: Vec<Vec<bool>> = train.iter().map(|&i| design.outcomes[i].clone()).collect();
            Fitted::Amp(MultiLabelModel::fit(scheme, learner, params, &x, &y, seed)?)
        }
        Technique::Dap { learner } => {
            let y: Vec<usize> = train.iter().map(|&i| design.correct[i]).collect();
            Fitted::Dap(learners::fit(learner, params, &x, &y, seed)?)
        }
    })
}

fn predict(fitted: &Fitted, design: &Design, i: usize) -> Result<Prediction, EvalError> {
    let row = &design.rows[i];
    Ok(match fitted {
        Fitted::Amp(model) => {
            let probs = model.predict_label_probs(row)?;
            let method = select_method(&probs, &design.methods);
            let j = design
                .methods
                .methods()
                .iter()
                .position(|m| *m == method)
                .expect("selected from the set");
            Prediction {
                chosen: design.choices[i][j],
                selected: Some(j),
                success: design.outcomes[i][j],
            }
        }
        Fitted::Dap(model) => {
            let d = dap_resolve(model.predict_proba(row)?, Some(design.correct[i]));
            Prediction {
                chosen: d.chosen,
                selected: None,
                success: d.outcome == Some(true),
            }
        }
    })
}

/// Leave-one-out splits over `pool`: each member of `evaluate` paired with
/// the pool minus that member.
pub(crate) fn loo_splits(pool: &[usize], evaluate: &[usize]) -> Vec<(usize, Vec<usize>)> {
    evaluate
        .iter()
        .map(|&held| (held, pool.iter().copied().filter(|&i| i != held).collect()))
        .collect()
}

/// Leave-one-out predictions for the cases in `evaluate`, training each on
/// `pool` minus the held case. `coords` namespaces the per-case seeds.
pub(crate) fn loo_predictions(
    design: &Design,
    technique: Technique,
    params: &LearnerParams,
    pool: &[usize],
    evaluate: &[usize],
    seed: u64,
    coords: &[u64],
) -> Result<Vec<Prediction>, EvalError> {
    loo_splits(pool, evaluate)
        .into_par_iter()
        .map(|(held, train)| {
            let mut c = coords.to_vec();
            c.push(held as u64);
            let fitted = fit_on(design, technique, params, &train, seeds::mix(seed, &c))?;
            predict(&fitted, design, held)
        })
        .collect()
}

/// Runs `f` on a dedicated pool of `workers` threads (0 = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool")
        .install(f)
}

const LOO_STREAM: u64 = 0;

/// Leave-one-out evaluation of one technique over the whole corpus.
pub fn loo_evaluate(
    corpus: &PreparedCorpus,
    technique: Technique,
    config: &EvalConfig,
    seed: u64,
) -> Result<EvaluationReport, EvalError> {
    if corpus.len() < 3 {
        return Err(EvalError::CorpusTooSmall {
            need: 3,
            got: corpus.len(),
        });
    }
    let design = Design::build(corpus, technique.approach(), config)?;
    let all: Vec<usize> = (0..corpus.len()).collect();
    let predictions = loo_predictions(
        &design,
        technique,
        &config.params,
        &all,
        &all,
        seed,
        &[LOO_STREAM],
    )?;
    report::assemble(corpus, &design, technique, config, &predictions)
}

/// Success of each method applied to every case, in set order.
pub fn uniform_success(corpus: &PreparedCorpus, methods: &MethodSet) -> Vec<MethodRate> {
    let n = corpus.len();
    methods
        .methods()
        .iter()
        .map(|m| {
            let successes = (0..n)
                .filter(|&i| corpus.cases[i].choice(*m, methods) == corpus.correct(i))
                .count();
            MethodRate::new(*m, successes, n)
        })
        .collect()
}

/// Outcome of `method` on every case.
pub fn method_outcomes(
    corpus: &PreparedCorpus,
    method: MethodId,
    methods: &MethodSet,
) -> Vec<bool> {
    (0..corpus.len())
        .map(|i| corpus.cases[i].choice(method, methods) == corpus.correct(i))
        .collect()
}
