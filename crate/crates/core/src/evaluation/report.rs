use serde::{Deserialize, Serialize};

use super::coverage::{coverage_analysis, CoverageReport};
use super::stats::{mcnemar_test, proportion_test, McNemarResult, ProportionResult};
use super::{
    sig6, uniform_success, Design, EvalConfig, EvalError, Prediction, PreparedCorpus, Technique,
};
use crate::aggregators::MethodId;
use crate::case_model::AnswerIdx;
use crate::features::FeatureGroup;
use crate::pipelines::Approach;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRate {
    pub method: MethodId,
    pub successes: usize,
    pub cases: usize,
    pub rate: f64,
}

impl MethodRate {
    pub(crate) fn new(method: MethodId, successes: usize, cases: usize) -> Self {
        MethodRate {
            method,
            successes,
            cases,
            rate: successes as f64 / cases as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub successes: usize,
    pub cases: usize,
    pub rate: f64,
}

/// Per-method selection statistics of method prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRow {
    pub method: MethodId,
    pub selected: usize,
    /// Fraction of cases for which the method was applied.
    pub share: f64,
    /// Success of the method applied to every case.
    pub p_success: f64,
    /// Success on the cases where it was applied; undefined when it never was.
    #[serde(with = "undefined_marker")]
    pub p_success_given_selected: Option<f64>,
}

mod undefined_marker {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    const MARKER: &str = "UNDEFINED";

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => x.serialize(s),
            None => s.serialize_str(MARKER),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Either {
            Num(f64),
            Str(String),
        }
        match Either::deserialize(d)? {
            Either::Num(x) => Ok(Some(x)),
            Either::Str(s) if s == MARKER => Ok(None),
            Either::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number or {MARKER}, got `{s}`"
            ))),
        }
    }
}

/// The learned approach against one uniform method on the same cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub method: MethodId,
    pub mcnemar: McNemarResult,
    pub proportion: ProportionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub case_id: String,
    pub chosen: AnswerIdx,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selected: Option<MethodId>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub technique: Technique,
    pub cases: usize,
    pub methods: Vec<MethodId>,
    pub feature_groups: Vec<FeatureGroup>,
    pub uniform: Vec<MethodRate>,
    pub approach: Rate,
    /// Method-prediction only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub conditional: Option<Vec<ConditionalRow>>,
    pub coverage: CoverageReport,
    pub significance: Vec<SignificanceRow>,
    pub predictions: Vec<CaseOutcome>,
}

pub(crate) fn assemble(
    corpus: &PreparedCorpus,
    design: &Design,
    technique: Technique,
    config: &EvalConfig,
    predictions: &[Prediction],
) -> Result<EvaluationReport, EvalError> {
    let n = corpus.len();
    let methods = design.methods().methods().to_vec();
    let successes = predictions.iter().filter(|p| p.success).count();
    let approach_bits: Vec<bool> = predictions.iter().map(|p| p.success).collect();
    let uniform = uniform_success(corpus, design.methods());

    let mut significance = Vec::with_capacity(methods.len());
    for (j, m) in methods.iter().enumerate() {
        let bits: Vec<bool> = design.outcomes().iter().map(|o| o[j]).collect();
        significance.push(SignificanceRow {
            method: *m,
            mcnemar: mcnemar_test(&approach_bits, &bits, config.options.mcnemar)?,
            proportion: proportion_test(successes, n, uniform[j].successes, n)?,
        });
    }

    let outcomes: Vec<CaseOutcome> = predictions
        .iter()
        .zip(corpus.cases())
        .map(|(p, c)| CaseOutcome {
            case_id: c.case_id.clone(),
            chosen: p.chosen,
            selected: p.selected.map(|j| methods[j]),
            success: p.success,
        })
        .collect();

    let mut report = EvaluationReport {
        technique,
        cases: n,
        methods: methods.clone(),
        feature_groups: config.mask.groups().collect(),
        uniform,
        approach: Rate {
            successes,
            cases: n,
            rate: successes as f64 / n as f64,
        },
        conditional: None,
        coverage: coverage_analysis(corpus),
        significance,
        predictions: outcomes,
    };
    report.conditional = conditional_success_report(&report);
    Ok(report)
}

/// P(success), P(success | selected) and selection share per method, from
/// a method-prediction report; `None` for answer-prediction reports.
pub fn conditional_success_report(report: &EvaluationReport) -> Option<Vec<ConditionalRow>> {
    if report.technique.approach() != Approach::Amp {
        return None;
    }
    let n = report.predictions.len();
    Some(
        report
            .methods
            .iter()
            .zip(&report.uniform)
            .map(|(m, u)| {
                let picked: Vec<&CaseOutcome> = report
                    .predictions
                    .iter()
                    .filter(|p| p.selected == Some(*m))
                    .collect();
                let wins = picked.iter().filter(|p| p.success).count();
                ConditionalRow {
                    method: *m,
                    selected: picked.len(),
                    share: picked.len() as f64 / n as f64,
                    p_success: u.rate,
                    p_success_given_selected: (!picked.is_empty())
                        .then(|| wins as f64 / picked.len() as f64),
                }
            })
            .collect(),
    )
}

impl EvaluationReport {
    /// Aligned plain-text summary.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{} {}  cases={}  success={} ({}/{})\n",
            self.technique.approach(),
            self.technique,
            self.cases,
            sig6(self.approach.rate),
            self.approach.successes,
            self.approach.cases
        );
        out.push_str(&format!(
            "{:<6}{:>10}{:>14}{:>14}{:>14}{:>12}{:>12}\n",
            "method", "uniform", "mcnemar_p", "proportion_p", "selected", "share", "P(s|sel)"
        ));
        for (i, u) in self.uniform.iter().enumerate() {
            let s = &self.significance[i];
            let (sel, share, cond) = match &self.conditional {
                Some(rows) => (
                    rows[i].selected.to_string(),
                    sig6(rows[i].share),
                    rows[i]
                        .p_success_given_selected
                        .map_or_else(|| "UNDEFINED".to_string(), sig6),
                ),
                None => ("-".into(), "-".into(), "-".into()),
            };
            out.push_str(&format!(
                "{:<6}{:>10}{:>14}{:>14}{:>14}{:>12}{:>12}\n",
                u.method.name(),
                sig6(u.rate),
                sig6(s.mcnemar.p_value),
                sig6(s.proportion.p_value),
                sel,
                share,
                cond
            ));
        }
        out.push_str(&format!(
            "coverage: union with DA {} ({}), without DA {} ({})\n",
            self.coverage.union_with_da,
            sig6(self.coverage.rate_with_da),
            self.coverage.union_without_da,
            sig6(self.coverage.rate_without_da)
        ));
        out
    }
}
