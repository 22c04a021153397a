//! Rule-based aggregation methods: majority rule, weighted confidence,
//! highest average confidence, surprisingly popular, and the devil's
//! advocate that opposes the others' choices.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case_model::{
    argmax_first, AnswerIdx, ConfidenceStats, DecisionCase, PredictedSupportStats, SupportStats,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MethodId {
    #[serde(rename = "MR")]
    Mr,
    #[serde(rename = "HAC")]
    Hac,
    #[serde(rename = "WC")]
    Wc,
    #[serde(rename = "SP")]
    Sp,
    #[serde(rename = "DA")]
    Da,
}

impl MethodId {
    /// Canonical order; also the label order of the method-prediction pipeline.
    pub const ALL: [MethodId; 5] = [
        MethodId::Mr,
        MethodId::Hac,
        MethodId::Wc,
        MethodId::Sp,
        MethodId::Da,
    ];

    /// Methods that read the responses directly (the devil's advocate inputs).
    pub const STANDARD: [MethodId; 4] = [MethodId::Mr, MethodId::Hac, MethodId::Wc, MethodId::Sp];

    pub fn name(self) -> &'static str {
        match self {
            MethodId::Mr => "MR",
            MethodId::Hac => "HAC",
            MethodId::Wc => "WC",
            MethodId::Sp => "SP",
            MethodId::Da => "DA",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "MR" => Ok(MethodId::Mr),
            "HAC" => Ok(MethodId::Hac),
            "WC" => Ok(MethodId::Wc),
            "SP" => Ok(MethodId::Sp),
            "DA" => Ok(MethodId::Da),
            other => Err(format!("unknown aggregation method `{other}`")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregateError {
    #[error("devil's advocate needs at least one input method")]
    EmptyInputMethods,
    #[error("answer index {0} is outside the answer set")]
    AnswerOutOfRange(AnswerIdx),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationResult {
    pub method: MethodId,
    pub chosen: AnswerIdx,
    /// The method's criterion per answer. `None` marks answers outside the
    /// method's domain (HAC over unsupported answers).
    pub score_per_answer: Vec<Option<f64>>,
    pub outcome: Option<bool>,
}

impl AggregationResult {
    fn new(
        method: MethodId,
        scores: Vec<Option<f64>>,
        chosen: AnswerIdx,
        case: &DecisionCase,
    ) -> Self {
        AggregationResult {
            method,
            chosen,
            score_per_answer: scores,
            outcome: case.correct.map(|c| c == chosen),
        }
    }
}

/// All statistics the standard methods need, computed once per case.
#[derive(Debug, Clone)]
pub struct CaseStats {
    pub support: SupportStats,
    pub confidence: ConfidenceStats,
    pub predicted: PredictedSupportStats,
}

impl CaseStats {
    pub fn of(case: &DecisionCase) -> Self {
        let support = crate::case_model::support_stats(case);
        let confidence = crate::case_model::confidence_stats(case, &support);
        let predicted = crate::case_model::predicted_support_stats(case);
        CaseStats {
            support,
            confidence,
            predicted,
        }
    }
}

fn pick(scores: &[Option<f64>]) -> AnswerIdx {
    argmax_first(scores.iter().copied()).unwrap_or(0)
}

pub fn mr_with(case: &DecisionCase, stats: &CaseStats) -> AggregationResult {
    let scores: Vec<Option<f64>> = stats.support.support.iter().map(|s| Some(*s)).collect();
    let chosen = pick(&scores);
    AggregationResult::new(MethodId::Mr, scores, chosen, case)
}

pub fn wc_with(case: &DecisionCase, stats: &CaseStats) -> AggregationResult {
    let scores: Vec<Option<f64>> = stats
        .support
        .support
        .iter()
        .zip(&stats.confidence.per_answer_avg)
        .map(|(s, c)| Some(c.map_or(0.0, |c| s * c)))
        .collect();
    let chosen = pick(&scores);
    AggregationResult::new(MethodId::Wc, scores, chosen, case)
}

pub fn hac_with(case: &DecisionCase, stats: &CaseStats) -> AggregationResult {
    let scores = stats.confidence.per_answer_avg.clone();
    let chosen = pick(&scores);
    AggregationResult::new(MethodId::Hac, scores, chosen, case)
}

pub fn sp_with(case: &DecisionCase, stats: &CaseStats) -> AggregationResult {
    let scores: Vec<Option<f64>> = stats
        .support
        .support
        .iter()
        .zip(&stats.predicted.per_answer_avg)
        .map(|(s, p)| Some(s - p))
        .collect();
    let chosen = pick(&scores);
    AggregationResult::new(MethodId::Sp, scores, chosen, case)
}

pub fn aggregate_mr(case: &DecisionCase) -> AggregationResult {
    mr_with(case, &CaseStats::of(case))
}

pub fn aggregate_wc(case: &DecisionCase) -> AggregationResult {
    wc_with(case, &CaseStats::of(case))
}

pub fn aggregate_hac(case: &DecisionCase) -> AggregationResult {
    hac_with(case, &CaseStats::of(case))
}

pub fn aggregate_sp(case: &DecisionCase) -> AggregationResult {
    sp_with(case, &CaseStats::of(case))
}

/// Devil's advocate over the choices of other methods: the answer picked by
/// the fewest of them. Ties go to an answer MR did not choose, then to the
/// lowest answer index.
pub fn aggregate_da(
    num_answers: usize,
    inputs: &[(MethodId, AnswerIdx)],
    mr_choice: AnswerIdx,
) -> Result<(AnswerIdx, Vec<usize>), AggregateError> {
    if inputs.is_empty() {
        return Err(AggregateError::EmptyInputMethods);
    }
    if mr_choice >= num_answers {
        return Err(AggregateError::AnswerOutOfRange(mr_choice));
    }
    let mut counters = vec![0usize; num_answers];
    for &(_, chosen) in inputs {
        *counters
            .get_mut(chosen)
            .ok_or(AggregateError::AnswerOutOfRange(chosen))? += 1;
    }
    let lowest = *counters.iter().min().expect("at least two answers");
    let minimal: Vec<AnswerIdx> = (0..num_answers)
        .filter(|&a| counters[a] == lowest)
        .collect();
    let chosen = minimal
        .iter()
        .copied()
        .find(|&a| a != mr_choice)
        .unwrap_or(minimal[0]);
    Ok((chosen, counters))
}

/// Runs the included methods on a case. DA, when included, takes the
/// included standard methods as its inputs. MR is always computed since
/// DA's tie-break needs it.
pub fn aggregate_all(
    case: &DecisionCase,
    stats: &CaseStats,
    included: &[MethodId],
) -> Vec<AggregationResult> {
    let mr = mr_with(case, stats);
    let mut results: Vec<AggregationResult> = Vec::with_capacity(included.len());
    for method in MethodId::STANDARD {
        if !included.contains(&method) {
            continue;
        }
        results.push(match method {
            MethodId::Mr => mr.clone(),
            MethodId::Hac => hac_with(case, stats),
            MethodId::Wc => wc_with(case, stats),
            MethodId::Sp => sp_with(case, stats),
            MethodId::Da => unreachable!(),
        });
    }
    if included.contains(&MethodId::Da) {
        let inputs: Vec<(MethodId, AnswerIdx)> =
            results.iter().map(|r| (r.method, r.chosen)).collect();
        // With no standard method included, DA opposes MR alone.
        let inputs = if inputs.is_empty() {
            vec![(MethodId::Mr, mr.chosen)]
        } else {
            inputs
        };
        let (chosen, counters) =
            aggregate_da(case.num_answers(), &inputs, mr.chosen).expect("valid inputs");
        results.push(AggregationResult::new(
            MethodId::Da,
            counters.into_iter().map(|c| Some(c as f64)).collect(),
            chosen,
            case,
        ));
    }
    results
}

/// Applies one method to a case; DA uses the given standard-method inputs.
pub fn apply_method(
    case: &DecisionCase,
    stats: &CaseStats,
    method: MethodId,
    da_inputs: &[MethodId],
) -> AggregationResult {
    match method {
        MethodId::Mr => mr_with(case, stats),
        MethodId::Hac => hac_with(case, stats),
        MethodId::Wc => wc_with(case, stats),
        MethodId::Sp => sp_with(case, stats),
        MethodId::Da => {
            let mut included: Vec<MethodId> = da_inputs
                .iter()
                .copied()
                .filter(|m| *m != MethodId::Da)
                .collect();
            included.push(MethodId::Da);
            aggregate_all(case, stats, &included)
                .pop()
                .expect("DA result present")
        }
    }
}

pub fn outcome(result: &AggregationResult, correct: AnswerIdx) -> bool {
    result.chosen == correct
}
