//! The 27 engineered case features: 17 computed over the full response set
//! and 10 describing how aggregate statistics move across resampled
//! sub-sets of responses.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case_model::{
    mean, variance, ConfidenceStats, DecisionCase, PredictedSupportStats, Response, SupportStats,
};
use crate::seeds;

pub const NUM_FEATURES: usize = 27;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "N",
    "D_Smax_Smin",
    "ES",
    "VarS",
    "D_S_Uniform",
    "CAmin",
    "CAmax",
    "MinC",
    "AvgC",
    "VarC",
    "D_MaxC_AvgC",
    "B_Amax_MaxCa",
    "MaxPSa",
    "MinPSa",
    "AvgPSv",
    "P_lowC_highPSv",
    "P_lowPSv_highC",
    "SG_B_Amax",
    "SG_VarSAmax",
    "SG_D_MaxVarS_MinVarS",
    "SG_D_MaxES_MinES",
    "SG_D_MaxAvgC_MinAvgC",
    "SG_D_MaxVarC_MinVarC",
    "SG_VarCAmin",
    "SG_VarCAmax",
    "SG_AvgCAmin",
    "SG_AvgCAmax",
];

/// Which part of a response a feature is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Voting,
    Confidence,
    PredictedSupport,
}

const VOTING_ROWS: [usize; 9] = [1, 2, 3, 4, 5, 18, 19, 20, 21];
const CONFIDENCE_ROWS: [usize; 15] = [6, 7, 8, 9, 10, 11, 12, 16, 17, 22, 23, 24, 25, 26, 27];
const PREDICTED_SUPPORT_ROWS: [usize; 5] = [13, 14, 15, 16, 17];

impl FeatureGroup {
    /// 1-based feature rows belonging to the group.
    pub fn rows(self) -> &'static [usize] {
        match self {
            FeatureGroup::Voting => &VOTING_ROWS,
            FeatureGroup::Confidence => &CONFIDENCE_ROWS,
            FeatureGroup::PredictedSupport => &PREDICTED_SUPPORT_ROWS,
        }
    }
}

/// The feature groups kept in a feature matrix. A feature survives only if
/// every group it belongs to is kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMask {
    groups: BTreeSet<FeatureGroup>,
}

impl Default for FeatureMask {
    fn default() -> Self {
        FeatureMask::full()
    }
}

impl FeatureMask {
    pub fn full() -> Self {
        FeatureMask {
            groups: [
                FeatureGroup::Voting,
                FeatureGroup::Confidence,
                FeatureGroup::PredictedSupport,
            ]
            .into_iter()
            .collect(),
        }
    }

    pub fn without(mut self, group: FeatureGroup) -> Self {
        self.groups.remove(&group);
        self
    }

    pub fn contains(&self, group: FeatureGroup) -> bool {
        self.groups.contains(&group)
    }

    pub fn groups(&self) -> impl Iterator<Item = FeatureGroup> + '_ {
        self.groups.iter().copied()
    }

    /// 0-based column indices of the retained features, in table order.
    pub fn columns(&self) -> Vec<usize> {
        (1..=NUM_FEATURES)
            .filter(|row| {
                [
                    FeatureGroup::Voting,
                    FeatureGroup::Confidence,
                    FeatureGroup::PredictedSupport,
                ]
                .iter()
                .all(|g| !g.rows().contains(row) || self.contains(*g))
            })
            .map(|row| row - 1)
            .collect()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.columns()
            .into_iter()
            .map(|c| FEATURE_NAMES[c])
            .collect()
    }

    pub fn width(&self) -> usize {
        self.columns().len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubgroupPlan {
    pub num_subgroups: usize,
    pub fraction: f64,
    pub min_size: usize,
    pub seed: u64,
}

impl Default for SubgroupPlan {
    fn default() -> Self {
        SubgroupPlan {
            num_subgroups: 10,
            fraction: 0.5,
            min_size: 3,
            seed: 0,
        }
    }
}

impl SubgroupPlan {
    /// Size of each sub-set for a case with `n` responses.
    pub fn subset_size(&self, n: usize) -> usize {
        let size = self
            .min_size
            .max((self.fraction * n as f64).round() as usize);
        if n >= 2 {
            size.min(n - 1)
        } else {
            size.min(n)
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("case `{case_id}` has {n} responses; sub-group sampling needs at least 2")]
    CaseTooSmall { case_id: String, n: usize },
    #[error("sub-group plan is invalid: {0}")]
    InvalidPlan(String),
    #[error("no sub-groups were supplied")]
    NoSubgroups,
}

/// Response indices sorted into an order that does not depend on how the
/// responses were listed.
fn canonical_order(responses: &[Response]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..responses.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&responses[i], &responses[j]);
        a.vote
            .cmp(&b.vote)
            .then(a.confidence.total_cmp(&b.confidence))
            .then_with(|| {
                a.predicted_support
                    .iter()
                    .zip(&b.predicted_support)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .then(i.cmp(&j))
    });
    order
}

/// Draws `plan.num_subgroups` independent sub-sets (each without
/// replacement) of response indices. The draw is keyed to the case id and
/// the plan seed and is insensitive to response order: each sub-set lists
/// its members in canonical order.
pub fn sample_subgroups(
    case: &DecisionCase,
    plan: &SubgroupPlan,
) -> Result<Vec<Vec<usize>>, FeatureError> {
    let n = case.num_responses();
    if n < 2 {
        return Err(FeatureError::CaseTooSmall {
            case_id: case.case_id.clone(),
            n,
        });
    }
    if plan.num_subgroups == 0
        || !(plan.fraction > 0.0 && plan.fraction <= 1.0)
        || plan.min_size == 0
    {
        return Err(FeatureError::InvalidPlan(format!("{plan:?}")));
    }
    let size = plan.subset_size(n);
    let order = canonical_order(&case.responses);
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(plan.seed, &case.case_id));
    Ok((0..plan.num_subgroups)
        .map(|_| {
            let mut ranks: Vec<usize> = index::sample(&mut rng, n, size).into_vec();
            ranks.sort_unstable();
            ranks.into_iter().map(|k| order[k]).collect()
        })
        .collect())
}

/// Base-2 Shannon entropy with 0·log 0 = 0.
pub(crate) fn entropy(dist: &[f64]) -> f64 {
    -dist
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Rows 1-17. Responses are visited in canonical order so the values do
/// not depend on how the responses were listed.
pub fn compute_global_features(case: &DecisionCase) -> [f64; 17] {
    let responses: Vec<&Response> = canonical_order(&case.responses)
        .into_iter()
        .map(|j| &case.responses[j])
        .collect();
    let m = case.num_answers();
    let s = SupportStats::from_responses(m, &responses);
    let c = ConfidenceStats::from_responses(&responses, &s);
    let p = PredictedSupportStats::from_responses(m, &responses);

    let uniform = 1.0 / m as f64;
    let d_uniform = s
        .support
        .iter()
        .map(|x| (x - uniform) * (x - uniform))
        .sum::<f64>()
        .sqrt();
    let ca_min = c.per_answer_avg[s.a_min].unwrap_or(0.0);
    let ca_max = c.per_answer_avg[s.a_max].unwrap_or(0.0);
    let max_ca = c
        .per_answer_avg
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let b_amax_maxca = match c.per_answer_avg[s.a_max] {
        Some(v) if v == max_ca => 1.0,
        _ => 0.0,
    };
    let avg_psv = mean(&p.own_vote_ps);
    let n = responses.len() as f64;
    let low_c_high_psv = responses
        .iter()
        .zip(&p.own_vote_ps)
        .filter(|(r, ps)| r.confidence < c.mean && **ps > avg_psv)
        .count() as f64
        / n;
    let low_psv_high_c = responses
        .iter()
        .zip(&p.own_vote_ps)
        .filter(|(r, ps)| r.confidence > c.mean && **ps < avg_psv)
        .count() as f64
        / n;

    [
        n,
        s.support[s.a_max] - s.support[s.a_min],
        entropy(&s.support),
        variance(&s.support),
        d_uniform,
        ca_min,
        ca_max,
        c.min,
        c.mean,
        c.variance,
        c.max - c.mean,
        b_amax_maxca,
        p.per_answer_avg
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
        p.per_answer_avg
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
        avg_psv,
        low_c_high_psv,
        low_psv_high_c,
    ]
}

/// Rows 18-27 from explicit sub-sets of response indices.
pub fn compute_subgroup_features(
    case: &DecisionCase,
    subgroups: &[Vec<usize>],
) -> Result<[f64; 10], FeatureError> {
    if subgroups.is_empty() || subgroups.iter().any(|g| g.is_empty()) {
        return Err(FeatureError::NoSubgroups);
    }
    let m = case.num_answers();
    let k = subgroups.len();
    let mut a_max = Vec::with_capacity(k);
    let mut s_amax = Vec::with_capacity(k);
    let mut var_s = Vec::with_capacity(k);
    let mut ent_s = Vec::with_capacity(k);
    let mut avg_c = Vec::with_capacity(k);
    let mut var_c = Vec::with_capacity(k);
    let mut c_amin = Vec::with_capacity(k);
    let mut c_amax = Vec::with_capacity(k);
    for group in subgroups {
        let responses: Vec<&Response> = group.iter().map(|&j| &case.responses[j]).collect();
        let s = SupportStats::from_responses(m, &responses);
        let c = ConfidenceStats::from_responses(&responses, &s);
        a_max.push(s.a_max);
        s_amax.push(s.support[s.a_max]);
        var_s.push(variance(&s.support));
        ent_s.push(entropy(&s.support));
        avg_c.push(c.mean);
        var_c.push(c.variance);
        c_amin.push(c.per_answer_avg[s.a_min].unwrap_or(0.0));
        c_amax.push(c.per_answer_avg[s.a_max].unwrap_or(0.0));
    }
    let amax_differs = if a_max.iter().all(|a| *a == a_max[0]) {
        0.0
    } else {
        1.0
    };
    Ok([
        amax_differs,
        variance(&s_amax),
        spread(&var_s),
        spread(&ent_s),
        spread(&avg_c),
        spread(&var_c),
        variance(&c_amin),
        variance(&c_amax),
        mean(&c_amin),
        mean(&c_amax),
    ])
}

/// A case's full feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseInstance {
    pub case_id: String,
    pub features: [f64; NUM_FEATURES],
}

impl CaseInstance {
    /// Feature values restricted to a mask, in table order.
    pub fn masked(&self, mask: &FeatureMask) -> Vec<f64> {
        mask.columns()
            .into_iter()
            .map(|c| self.features[c])
            .collect()
    }
}

pub fn featurize_case(
    case: &DecisionCase,
    plan: &SubgroupPlan,
) -> Result<CaseInstance, FeatureError> {
    let subgroups = sample_subgroups(case, plan)?;
    let global = compute_global_features(case);
    let sg = compute_subgroup_features(case, &subgroups)?;
    let mut features = [0.0; NUM_FEATURES];
    features[..17].copy_from_slice(&global);
    features[17..].copy_from_slice(&sg);
    Ok(CaseInstance {
        case_id: case.case_id.clone(),
        features,
    })
}
