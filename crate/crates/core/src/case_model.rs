//! Decision cases and the per-case aggregate statistics every other module
//! consumes: support rates, supporter confidence and predicted support.
//!
//! Answers are referenced by their position in the case's declared answer
//! order. Argmax/argmin ties resolve to the lowest position.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Position of an answer in its case's declared answer order.
pub type AnswerIdx = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaseError {
    #[error("case has no responses")]
    EmptyResponses,
    #[error("case declares {0} answers; at least 2 are required")]
    TooFewAnswers(usize),
    #[error("answer `{0}` is listed more than once")]
    DuplicateAnswers(String),
    #[error("response {response} votes `{vote}`, which is not in the answer set")]
    VoteOutsideAnswerSet { response: usize, vote: String },
    #[error("correct answer `{0}` is not in the answer set")]
    CorrectAnswerOutsideAnswerSet(String),
    #[error("response {response} has {got} predicted-support entries, expected {expected}")]
    PredictedSupportLengthMismatch {
        response: usize,
        got: usize,
        expected: usize,
    },
    #[error("response {response} has an all-zero predicted-support array")]
    PredictedSupportAllZero { response: usize },
    #[error("response {response} has a negative or non-finite predicted support")]
    PredictedSupportInvalid { response: usize },
    #[error("response {response} has confidence {value} outside [0, 1] (or (1, 100] as percent)")]
    ConfidenceOutOfRange { response: usize, value: f64 },
}

/// A response as it arrives from a dataset, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawResponse {
    pub vote: String,
    pub confidence: f64,
    pub predicted_support: Vec<f64>,
}

/// A decision case as it arrives from a dataset, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCase {
    pub case_id: String,
    pub answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct_answer: Option<String>,
    pub responses: Vec<RawResponse>,
    /// Free-form provenance tag (e.g. the generating regime). Never used as a feature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub vote: AnswerIdx,
    /// Reported confidence in [0, 1].
    pub confidence: f64,
    /// Predicted support per answer, in answer order; sums to 1.
    pub predicted_support: Vec<f64>,
}

/// A validated collective decision case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionCase {
    pub case_id: String,
    pub answers: Vec<String>,
    pub responses: Vec<Response>,
    pub correct: Option<AnswerIdx>,
    pub tag: Option<String>,
}

impl DecisionCase {
    pub fn num_answers(&self) -> usize {
        self.answers.len()
    }

    pub fn num_responses(&self) -> usize {
        self.responses.len()
    }

    pub fn answer_index(&self, answer: &str) -> Option<AnswerIdx> {
        self.answers.iter().position(|a| a == answer)
    }

    /// Converts back to the dataset representation.
    pub fn to_raw(&self) -> RawCase {
        RawCase {
            case_id: self.case_id.clone(),
            answers: self.answers.clone(),
            correct_answer: self.correct.map(|i| self.answers[i].clone()),
            responses: self
                .responses
                .iter()
                .map(|r| RawResponse {
                    vote: self.answers[r.vote].clone(),
                    confidence: r.confidence,
                    predicted_support: r.predicted_support.clone(),
                })
                .collect(),
            tag: self.tag.clone(),
        }
    }

    /// Share of responses voting for the correct answer, when it is known.
    pub fn correct_share(&self) -> Option<f64> {
        let correct = self.correct?;
        let hits = self.responses.iter().filter(|r| r.vote == correct).count();
        Some(hits as f64 / self.responses.len() as f64)
    }
}

/// Checks well-formedness and normalizes a raw case.
///
/// Confidence reported on a percent scale (any value in (1, 100]) is divided
/// by 100 for the whole case. Predicted-support arrays with a positive sum are
/// rescaled to sum to 1; arrays already within 1e-12 of 1 are kept as given,
/// so validating a validated case changes nothing.
pub fn validate_case(raw: &RawCase) -> Result<DecisionCase, CaseError> {
    let m = raw.answers.len();
    if m < 2 {
        return Err(CaseError::TooFewAnswers(m));
    }
    for (i, a) in raw.answers.iter().enumerate() {
        if raw.answers[..i].contains(a) {
            return Err(CaseError::DuplicateAnswers(a.clone()));
        }
    }
    if raw.responses.is_empty() {
        return Err(CaseError::EmptyResponses);
    }
    let correct = match &raw.correct_answer {
        None => None,
        Some(c) => Some(
            raw.answers
                .iter()
                .position(|a| a == c)
                .ok_or_else(|| CaseError::CorrectAnswerOutsideAnswerSet(c.clone()))?,
        ),
    };

    let mut percent_scale = false;
    for (j, r) in raw.responses.iter().enumerate() {
        let c = r.confidence;
        if !c.is_finite() || !(0.0..=100.0).contains(&c) {
            return Err(CaseError::ConfidenceOutOfRange {
                response: j,
                value: c,
            });
        }
        if c > 1.0 {
            percent_scale = true;
        }
    }
    let scale = if percent_scale { 100.0 } else { 1.0 };

    let mut responses = Vec::with_capacity(raw.responses.len());
    for (j, r) in raw.responses.iter().enumerate() {
        let vote = raw
            .answers
            .iter()
            .position(|a| *a == r.vote)
            .ok_or_else(|| CaseError::VoteOutsideAnswerSet {
                response: j,
                vote: r.vote.clone(),
            })?;
        if r.predicted_support.len() != m {
            return Err(CaseError::PredictedSupportLengthMismatch {
                response: j,
                got: r.predicted_support.len(),
                expected: m,
            });
        }
        if r.predicted_support
            .iter()
            .any(|p| !p.is_finite() || *p < 0.0)
        {
            return Err(CaseError::PredictedSupportInvalid { response: j });
        }
        let total: f64 = r.predicted_support.iter().sum();
        if total <= 0.0 {
            return Err(CaseError::PredictedSupportAllZero { response: j });
        }
        let predicted_support = if (total - 1.0).abs() <= 1e-12 {
            r.predicted_support.clone()
        } else {
            r.predicted_support.iter().map(|p| p / total).collect()
        };
        responses.push(Response {
            vote,
            confidence: r.confidence / scale,
            predicted_support,
        });
    }

    Ok(DecisionCase {
        case_id: raw.case_id.clone(),
        answers: raw.answers.clone(),
        responses,
        correct,
        tag: raw.tag.clone(),
    })
}

/// Index of the first maximum; `None` entries are skipped.
pub(crate) fn argmax_first<I: IntoIterator<Item = Option<f64>>>(values: I) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if let Some(v) = v {
            match best {
                Some((_, b)) if v <= b => {}
                _ => best = Some((i, v)),
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Index of the first minimum; `None` entries are skipped.
pub(crate) fn argmin_first<I: IntoIterator<Item = Option<f64>>>(values: I) -> Option<usize> {
    argmax_first(values.into_iter().map(|v| v.map(|x| -x)))
}

/// Arithmetic mean; exact for constant sequences.
pub(crate) fn mean(values: &[f64]) -> f64 {
    match values.split_first() {
        Some((first, rest)) if rest.iter().all(|v| v == first) => *first,
        _ => values.iter().sum::<f64>() / values.len() as f64,
    }
}

/// Population variance, two-pass.
pub(crate) fn variance(values: &[f64]) -> f64 {
    let mu = mean(values);
    values.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / values.len() as f64
}

/// Vote shares and supporters.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportStats {
    pub support: Vec<f64>,
    pub a_max: AnswerIdx,
    pub a_min: AnswerIdx,
    /// Response indices (into the slice the stats were computed from) per answer.
    pub supporters: Vec<Vec<usize>>,
}

impl SupportStats {
    pub fn from_responses(num_answers: usize, responses: &[&Response]) -> Self {
        let mut supporters = vec![Vec::new(); num_answers];
        for (j, r) in responses.iter().enumerate() {
            supporters[r.vote].push(j);
        }
        let n = responses.len() as f64;
        let support: Vec<f64> = supporters.iter().map(|s| s.len() as f64 / n).collect();
        let a_max = argmax_first(support.iter().map(|s| Some(*s))).unwrap_or(0);
        let a_min = argmin_first(support.iter().map(|s| Some(*s))).unwrap_or(0);
        SupportStats {
            support,
            a_max,
            a_min,
            supporters,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceStats {
    pub all_conf: Vec<f64>,
    /// Mean supporter confidence per answer; `None` for answers nobody voted for.
    pub per_answer_avg: Vec<Option<f64>>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
}

impl ConfidenceStats {
    pub fn from_responses(responses: &[&Response], support: &SupportStats) -> Self {
        let all_conf: Vec<f64> = responses.iter().map(|r| r.confidence).collect();
        let per_answer_avg = support
            .supporters
            .iter()
            .map(|idx| {
                if idx.is_empty() {
                    None
                } else {
                    let c: Vec<f64> = idx.iter().map(|&j| responses[j].confidence).collect();
                    Some(mean(&c))
                }
            })
            .collect();
        ConfidenceStats {
            min: all_conf.iter().copied().fold(f64::INFINITY, f64::min),
            max: all_conf.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: mean(&all_conf),
            variance: variance(&all_conf),
            per_answer_avg,
            all_conf,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedSupportStats {
    /// Mean predicted support per answer over all responses.
    pub per_answer_avg: Vec<f64>,
    /// Each respondent's predicted support for the answer they voted for.
    pub own_vote_ps: Vec<f64>,
}

impl PredictedSupportStats {
    pub fn from_responses(num_answers: usize, responses: &[&Response]) -> Self {
        let n = responses.len() as f64;
        let per_answer_avg = (0..num_answers)
            .map(|a| {
                responses
                    .iter()
                    .map(|r| r.predicted_support[a])
                    .sum::<f64>()
                    / n
            })
            .collect();
        let own_vote_ps = responses
            .iter()
            .map(|r| r.predicted_support[r.vote])
            .collect();
        PredictedSupportStats {
            per_answer_avg,
            own_vote_ps,
        }
    }
}

pub fn support_stats(case: &DecisionCase) -> SupportStats {
    SupportStats::from_responses(
        case.num_answers(),
        &case.responses.iter().collect::<Vec<_>>(),
    )
}

pub fn confidence_stats(case: &DecisionCase, stats: &SupportStats) -> ConfidenceStats {
    ConfidenceStats::from_responses(&case.responses.iter().collect::<Vec<_>>(), stats)
}

pub fn predicted_support_stats(case: &DecisionCase) -> PredictedSupportStats {
    PredictedSupportStats::from_responses(
        case.num_answers(),
        &case.responses.iter().collect::<Vec<_>>(),
    )
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    fn raw_response(vote: &str, c: f64, ps: &[f64]) -> RawResponse {
        RawResponse {
            vote: vote.into(),
            confidence: c,
            predicted_support: ps.to_vec(),
        }
    }

    pub(crate) fn case_x_raw() -> RawCase {
        RawCase {
            case_id: "case-x".into(),
            answers: vec!["A".into(), "B".into()],
            correct_answer: Some("B".into()),
            responses: vec![
                raw_response("A", 0.9, &[0.6, 0.4]),
                raw_response("A", 0.5, &[0.7, 0.3]),
                raw_response("A", 0.6, &[0.8, 0.2]),
                raw_response("B", 1.0, &[0.3, 0.7]),
                raw_response("B", 0.9, &[0.5, 0.5]),
            ],
            tag: None,
        }
    }

    pub(crate) fn case_x() -> DecisionCase {
        validate_case(&case_x_raw()).unwrap()
    }

    fn simple(votes: &[&str], answers: &[&str]) -> DecisionCase {
        let m = answers.len();
        validate_case(&RawCase {
            case_id: "t".into(),
            answers: answers.iter().map(|s| s.to_string()).collect(),
            correct_answer: None,
            responses: votes
                .iter()
                .map(|v| raw_response(v, 0.5, &vec![1.0 / m as f64; m]))
                .collect(),
            tag: None,
        })
        .unwrap()
    }

    #[test]
    fn case_x_accepted_unchanged() {
        let raw = case_x_raw();
        let case = validate_case(&raw).unwrap();
        assert_eq!(case.to_raw(), raw);
    }

    #[test]
    fn duplicate_answers_rejected() {
        let raw = RawCase {
            case_id: "d".into(),
            answers: vec!["A".into(), "A".into()],
            correct_answer: None,
            responses: vec![raw_response("A", 0.5, &[0.5, 0.5])],
            tag: None,
        };
        assert_eq!(
            validate_case(&raw),
            Err(CaseError::DuplicateAnswers("A".into()))
        );
    }

    #[test]
    fn predicted_support_rescaled() {
        let mut raw = case_x_raw();
        raw.responses[0].predicted_support = vec![0.7, 0.7];
        let case = validate_case(&raw).unwrap();
        assert_eq!(case.responses[0].predicted_support, vec![0.5, 0.5]);
    }

    #[test]
    fn validation_errors() {
        let mut raw = case_x_raw();
        raw.responses.clear();
        assert_eq!(validate_case(&raw), Err(CaseError::EmptyResponses));

        let mut raw = case_x_raw();
        raw.responses[2].vote = "C".into();
        assert!(matches!(
            validate_case(&raw),
            Err(CaseError::VoteOutsideAnswerSet { response: 2, .. })
        ));

        let mut raw = case_x_raw();
        raw.responses[1].predicted_support = vec![1.0];
        assert!(matches!(
            validate_case(&raw),
            Err(CaseError::PredictedSupportLengthMismatch {
                response: 1,
                got: 1,
                expected: 2
            })
        ));

        let mut raw = case_x_raw();
        raw.responses[3].predicted_support = vec![0.0, 0.0];
        assert_eq!(
            validate_case(&raw),
            Err(CaseError::PredictedSupportAllZero { response: 3 })
        );

        let mut raw = case_x_raw();
        raw.responses[4].confidence = -0.1;
        assert!(matches!(
            validate_case(&raw),
            Err(CaseError::ConfidenceOutOfRange { response: 4, .. })
        ));

        let mut raw = case_x_raw();
        raw.correct_answer = Some("Z".into());
        assert!(validate_case(&raw).is_err());
    }

    #[test]
    fn percent_confidence_converted() {
        let mut raw = case_x_raw();
        for r in &mut raw.responses {
            r.confidence *= 100.0;
        }
        let case = validate_case(&raw).unwrap();
        let conf: Vec<f64> = case.responses.iter().map(|r| r.confidence).collect();
        for (got, want) in conf.iter().zip([0.9, 0.5, 0.6, 1.0, 0.9]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn case_x_support() {
        let s = support_stats(&case_x());
        assert_eq!(s.support, vec![0.6, 0.4]);
        assert_eq!((s.a_max, s.a_min), (0, 1));
        assert_eq!(s.supporters, vec![vec![0, 1, 2], vec![3, 4]]);
    }

    #[test]
    fn support_unanimous_and_ties() {
        let s = support_stats(&simple(&["A", "A", "A", "A"], &["A", "B"]));
        assert_eq!(s.support, vec![1.0, 0.0]);
        assert_eq!((s.a_max, s.a_min), (0, 1));

        let s = support_stats(&simple(&["A", "B", "B", "A"], &["A", "B"]));
        assert_eq!((s.a_max, s.a_min), (0, 0));
    }

    #[test]
    fn case_x_confidence() {
        let case = case_x();
        let c = confidence_stats(&case, &support_stats(&case));
        assert!((c.mean - 0.78).abs() < 1e-12);
        assert_eq!((c.min, c.max), (0.5, 1.0));
        assert!((c.variance - 0.0376).abs() < 1e-12);
        assert!((c.per_answer_avg[0].unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((c.per_answer_avg[1].unwrap() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn confidence_single_and_absent() {
        let mut raw = case_x_raw();
        raw.responses.truncate(1);
        raw.responses[0].confidence = 0.7;
        let case = validate_case(&raw).unwrap();
        let c = confidence_stats(&case, &support_stats(&case));
        assert_eq!((c.mean, c.min, c.max, c.variance), (0.7, 0.7, 0.7, 0.0));
        assert_eq!(c.per_answer_avg[1], None);
    }

    #[test]
    fn case_x_predicted_support() {
        let p = predicted_support_stats(&case_x());
        assert!((p.per_answer_avg[0] - 0.58).abs() < 1e-12);
        assert!((p.per_answer_avg[1] - 0.42).abs() < 1e-12);
        assert_eq!(p.own_vote_ps, vec![0.6, 0.7, 0.8, 0.7, 0.5]);
    }

    #[test]
    fn predicted_support_edge_cases() {
        let p = predicted_support_stats(&simple(&["A", "B", "B"], &["A", "B"]));
        assert_eq!(p.per_answer_avg, vec![0.5, 0.5]);

        let mut raw = case_x_raw();
        raw.responses.truncate(1);
        raw.responses[0].predicted_support = vec![1.0, 0.0];
        let p = predicted_support_stats(&validate_case(&raw).unwrap());
        assert_eq!(p.per_answer_avg, vec![1.0, 0.0]);
        assert_eq!(p.own_vote_ps, vec![1.0]);
    }
}
