use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stats::{proportion_test, ProportionResult};
use super::{loo_evaluate, sig6, EvalConfig, EvalError, PreparedCorpus, Technique};
use crate::aggregators::MethodId;
use crate::features::FeatureGroup;
use crate::pipelines::PipelineError;

/// A part of the input that an ablation run withholds. Voting features and
/// MR cannot be withheld.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    /// Confidence-derived features.
    Confidence,
    /// Predicted-support-derived features.
    #[serde(rename = "ps")]
    PredictedSupport,
    /// WC and HAC labels (method prediction) or choice features (answer prediction).
    WcHac,
    Sp,
    Da,
}

impl Exclusion {
    pub fn name(self) -> &'static str {
        match self {
            Exclusion::Confidence => "confidence",
            Exclusion::PredictedSupport => "ps",
            Exclusion::WcHac => "wc_hac",
            Exclusion::Sp => "sp",
            Exclusion::Da => "da",
        }
    }

    /// Parses a comma-separated list; the empty string is no exclusion.
    pub fn parse_list(s: &str) -> Result<Vec<Exclusion>, EvalError> {
        let mut out: Vec<Exclusion> = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty() && *p != "none")
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for Exclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Exclusion {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "confidence" | "c" => Ok(Exclusion::Confidence),
            "ps" | "predicted_support" => Ok(Exclusion::PredictedSupport),
            "wc_hac" | "wc+hac" | "hac_wc" | "wc" | "hac" => Ok(Exclusion::WcHac),
            "sp" => Ok(Exclusion::Sp),
            "da" => Ok(Exclusion::Da),
            "voting" | "mr" => Err(EvalError::InvalidExclusion(s.to_string())),
            _ => Err(EvalError::InvalidExclusion(format!("unknown part `{s}`"))),
        }
    }
}

/// The configuration with the excluded feature groups masked out and the
/// excluded methods removed from the method set (DA then draws only on the
/// remaining methods).
pub fn apply_exclusions(
    config: &EvalConfig,
    exclusions: &[Exclusion],
) -> Result<EvalConfig, EvalError> {
    let mut out = config.clone();
    let drop = |out: &mut EvalConfig, m: MethodId| -> Result<(), PipelineError> {
        if out.methods.contains(m) {
            out.methods = out.methods.without(m)?;
        }
        Ok(())
    };
    for e in exclusions {
        let r = match e {
            Exclusion::Confidence => {
                out.mask = out.mask.clone().without(FeatureGroup::Confidence);
                Ok(())
            }
            Exclusion::PredictedSupport => {
                out.mask = out.mask.clone().without(FeatureGroup::PredictedSupport);
                Ok(())
            }
            Exclusion::WcHac => {
                drop(&mut out, MethodId::Wc).and_then(|_| drop(&mut out, MethodId::Hac))
            }
            Exclusion::Sp => drop(&mut out, MethodId::Sp),
            Exclusion::Da => drop(&mut out, MethodId::Da),
        };
        r.map_err(|e| EvalError::InvalidExclusion(e.to_string()))?;
    }
    Ok(out)
}

/// One row of an ablation table: which inputs were kept, and the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub exclusions: Vec<Exclusion>,
    pub voting: bool,
    pub confidence: bool,
    pub predicted_support: bool,
    pub mr: bool,
    pub wc_hac: bool,
    pub sp: bool,
    pub da: bool,
    pub successes: usize,
    pub cases: usize,
    pub success_rate: f64,
    /// Two-tailed proportion test against the first row of the table.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vs_baseline: Option<ProportionResult>,
}

/// Leave-one-out success of `technique` with the given inputs withheld.
pub fn ablate(
    corpus: &PreparedCorpus,
    technique: Technique,
    config: &EvalConfig,
    exclusions: &[Exclusion],
    seed: u64,
) -> Result<AblationRow, EvalError> {
    let mut exclusions = exclusions.to_vec();
    exclusions.sort_unstable();
    exclusions.dedup();
    let ablated = apply_exclusions(config, &exclusions)?;
    let report = loo_evaluate(corpus, technique, &ablated, seed)?;
    let has = |e: Exclusion| !exclusions.contains(&e);
    Ok(AblationRow {
        voting: true,
        confidence: has(Exclusion::Confidence),
        predicted_support: has(Exclusion::PredictedSupport),
        mr: true,
        wc_hac: has(Exclusion::WcHac),
        sp: has(Exclusion::Sp),
        da: has(Exclusion::Da),
        exclusions,
        successes: report.approach.successes,
        cases: report.approach.cases,
        success_rate: report.approach.rate,
        vs_baseline: None,
    })
}

/// Runs every row; rows after the first are tested against the first.
pub fn ablation_table(
    corpus: &PreparedCorpus,
    technique: Technique,
    config: &EvalConfig,
    rows: &[Vec<Exclusion>],
    seed: u64,
) -> Result<Vec<AblationRow>, EvalError> {
    let mut out: Vec<AblationRow> = Vec::with_capacity(rows.len());
    for r in rows {
        let mut row = ablate(corpus, technique, config, r, seed)?;
        if let Some(base) = out.first() {
            row.vs_baseline = Some(proportion_test(
                row.successes,
                row.cases,
                base.successes,
                base.cases,
            )?);
        }
        out.push(row);
    }
    Ok(out)
}

/// The eleven rows of the published ablation tables, baseline first.
pub fn standard_ablation_rows() -> Vec<Vec<Exclusion>> {
    use Exclusion::*;
    vec![
        vec![],
        vec![Confidence],
        vec![PredictedSupport],
        vec![Confidence, PredictedSupport],
        vec![WcHac],
        vec![Sp],
        vec![WcHac, Sp],
        vec![Da],
        vec![Confidence, WcHac],
        vec![PredictedSupport, Sp],
        vec![Confidence, PredictedSupport, WcHac, Sp],
    ]
}

/// Kept inputs marked `V`, one line per row.
pub fn render_ablation(rows: &[AblationRow]) -> String {
    let header = ["Voting", "Confidence", "PS", "MR", "WC,HAC", "SP", "DA"];
    let mut out = String::new();
    for h in header {
        out.push_str(&format!("{h:>11}"));
    }
    out.push_str(&format!("{:>14}{:>14}\n", "Success rate", "p vs row 1"));
    for r in rows {
        for kept in [
            r.voting,
            r.confidence,
            r.predicted_support,
            r.mr,
            r.wc_hac,
            r.sp,
            r.da,
        ] {
            out.push_str(&format!("{:>11}", if kept { "V" } else { "" }));
        }
        let p = r
            .vs_baseline
            .as_ref()
            .map_or_else(|| "-".to_string(), |t| sig6(t.p_value));
        out.push_str(&format!("{:>14}{:>14}\n", sig6(r.success_rate), p));
    }
    out
}
