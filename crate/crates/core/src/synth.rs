//! Seeded generator of synthetic decision cases.
//!
//! Each case is drawn from a regime that fixes how often respondents are
//! right, how confident right and wrong voters are, and how their predicted
//! support relates to the actual vote shares. Some regimes carry a
//! post-condition on which aggregators succeed; the generator redraws until
//! it holds.

use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregators::{self, CaseStats, MethodId};
use crate::case_model::{validate_case, CaseError, DecisionCase, RawCase, RawResponse};
use crate::seeds;

/// Redraws allowed before a regime's post-condition is declared unsatisfiable.
pub const RETRY_BUDGET: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid regime spec: {0}")]
    InvalidSpec(String),
    #[error("{regime} post-condition not met after {attempts} draws")]
    RegimeUnsatisfiable { regime: Regime, attempts: usize },
    #[error("mixture is empty")]
    EmptyMixture,
    #[error(transparent)]
    Case(#[from] CaseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    /// Most respondents are right and the right ones are more confident.
    EasyMajority,
    /// Most are wrong and confidently so, but everyone expects the wrong
    /// answer to be popular: only the surprisingly-popular rule recovers.
    Misleading,
    /// A minority is right and much more confident than the majority.
    ConfidentMinority,
    /// Every standard method fails; only the devil's advocate succeeds.
    DaOnly,
    /// Coin-flip voters with uninformative confidence and predictions.
    Noise,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::EasyMajority,
        Regime::Misleading,
        Regime::ConfidentMinority,
        Regime::DaOnly,
        Regime::Noise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::EasyMajority => "EASY_MAJORITY",
            Regime::Misleading => "MISLEADING",
            Regime::ConfidentMinority => "CONFIDENT_MINORITY",
            Regime::DaOnly => "DA_ONLY",
            Regime::Noise => "NOISE",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_uppercase().replace('-', "_");
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == key)
            .ok_or_else(|| format!("unknown regime `{s}`"))
    }
}

/// Normal confidence distributions (clamped to [0, 1]) for right and wrong voters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfidenceModel {
    pub correct_mean: f64,
    pub correct_sd: f64,
    pub wrong_mean: f64,
    pub wrong_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    pub regime: Regime,
    /// Probability that a respondent votes for the correct answer.
    pub p_correct: f64,
    pub confidence: ConfidenceModel,
    /// Weight of the (shifted) true vote shares in each predicted-support
    /// array; the rest is the respondent's own-vote bias.
    pub meta_knowledge: f64,
    /// Amount by which respondents collectively overrate the main wrong
    /// answer's support and underrate the correct one's (negative: the reverse).
    pub prediction_shift: f64,
    /// Per-component multiplicative jitter on predicted support.
    pub prediction_noise: f64,
    /// Inclusive range of the number of responses.
    pub group_size: (usize, usize),
    pub num_answers: usize,
}

impl RegimeSpec {
    /// Documented defaults for each regime, with binary answers and 30 to
    /// 100 respondents.
    pub fn default_for(regime: Regime) -> Self {
        let conf = |cm, wm| ConfidenceModel {
            correct_mean: cm,
            correct_sd: 0.12,
            wrong_mean: wm,
            wrong_sd: 0.12,
        };
        let base = RegimeSpec {
            regime,
            p_correct: 0.8,
            confidence: conf(0.75, 0.5),
            meta_knowledge: 0.7,
            prediction_shift: 0.0,
            prediction_noise: 0.2,
            group_size: (30, 100),
            num_answers: 2,
        };
        match regime {
            Regime::EasyMajority => base,
            Regime::Misleading => RegimeSpec {
                p_correct: 0.3,
                confidence: conf(0.55, 0.75),
                meta_knowledge: 0.8,
                prediction_shift: 0.2,
                ..base
            },
            Regime::ConfidentMinority => RegimeSpec {
                p_correct: 0.4,
                confidence: ConfidenceModel {
                    correct_mean: 0.9,
                    correct_sd: 0.06,
                    wrong_mean: 0.45,
                    wrong_sd: 0.12,
                },
                prediction_shift: -0.1,
                ..base
            },
            Regime::DaOnly => RegimeSpec {
                p_correct: 0.35,
                confidence: conf(0.45, 0.7),
                prediction_shift: -0.15,
                ..base
            },
            Regime::Noise => RegimeSpec {
                p_correct: 0.5,
                confidence: ConfidenceModel {
                    correct_mean: 0.6,
                    correct_sd: 0.15,
                    wrong_mean: 0.6,
                    wrong_sd: 0.15,
                },
                meta_knowledge: 0.2,
                prediction_noise: 0.4,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: &str| Err(SynthError::InvalidSpec(msg.to_string()));
        if !(self.p_correct > 0.0 && self.p_correct < 1.0) {
            return bad("p_correct must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.meta_knowledge) {
            return bad("meta_knowledge must lie in [0, 1]");
        }
        let c = &self.confidence;
        if ![c.correct_mean, c.wrong_mean]
            .iter()
            .all(|m| (0.0..=1.0).contains(m))
            || ![c.correct_sd, c.wrong_sd]
                .iter()
                .all(|s| s.is_finite() && *s >= 0.0)
        {
            return bad("confidence means must lie in [0, 1] and spreads be non-negative");
        }
        if !self.prediction_shift.is_finite() || !(0.0..1.0).contains(&self.prediction_noise) {
            return bad("prediction_noise must lie in [0, 1)");
        }
        let (lo, hi) = self.group_size;
        if lo < 4 || hi < lo {
            return bad("group_size must satisfy 4 <= min <= max");
        }
        if !(2..=26).contains(&self.num_answers) {
            return bad("num_answers must lie in 2..=26");
        }
        Ok(())
    }
}

fn answer_label(i: usize) -> String {
    char::from(b'A' + i as u8).to_string()
}

/// One unconstrained draw from the regime's generative model.
fn draw(
    spec: &RegimeSpec,
    rng: &mut ChaCha8Rng,
    case_id: &str,
) -> Result<DecisionCase, SynthError> {
    let m = spec.num_answers;
    let n = rng.random_range(spec.group_size.0..=spec.group_size.1);
    let correct = rng.random_range(0..m);
    // The wrong answer that attracts most wrong voters.
    let lure = (correct + rng.random_range(1..m)) % m;

    let mut votes = Vec::with_capacity(n);
    for _ in 0..n {
        let v = if rng.random_bool(spec.p_correct) {
            correct
        } else if m == 2 || rng.random_bool(0.7) {
            lure
        } else {
            let others: Vec<usize> = (0..m).filter(|a| *a != correct && *a != lure).collect();
            *others.choose(rng).expect("m > 2")
        };
        votes.push(v);
    }
    let mut support = vec![0.0; m];
    for v in &votes {
        support[*v] += 1.0 / n as f64;
    }

    // Collective belief about vote shares: the truth, shifted toward the lure.
    let mut belief = support.clone();
    belief[lure] += spec.prediction_shift;
    belief[correct] -= spec.prediction_shift;
    for b in &mut belief {
        *b = b.clamp(0.01, 0.99);
    }
    let total: f64 = belief.iter().sum();
    for b in &mut belief {
        *b /= total;
    }

    let c = &spec.confidence;
    let right = Normal::new(c.correct_mean, c.correct_sd)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let wrong = Normal::new(c.wrong_mean, c.wrong_sd)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let mk = spec.meta_knowledge;
    let mut responses = Vec::with_capacity(n);
    for &v in &votes {
        let dist = if v == correct { &right } else { &wrong };
        let confidence = dist.sample(rng).clamp(0.0, 1.0);
        let mut ps: Vec<f64> = (0..m)
            .map(|a| {
                let own = 0.5 * f64::from(u8::from(a == v)) + 0.5 / m as f64;
                let jitter = 1.0 + spec.prediction_noise * (2.0 * rng.random::<f64>() - 1.0);
                ((mk * belief[a] + (1.0 - mk) * own) * jitter).max(1e-3)
            })
            .collect();
        let total: f64 = ps.iter().sum();
        for p in &mut ps {
            *p /= total;
        }
        responses.push(RawResponse {
            vote: answer_label(v),
            confidence,
            predicted_support: ps,
        });
    }
    let raw = RawCase {
        case_id: case_id.to_string(),
        answers: (0..m).map(answer_label).collect(),
        correct_answer: Some(answer_label(correct)),
        responses,
        tag: Some(spec.regime.name().to_string()),
    };
    Ok(validate_case(&raw)?)
}

/// Outcomes of MR, HAC, WC, SP and DA on a case with known answer.
pub fn outcomes(case: &DecisionCase) -> [bool; 5] {
    let correct = case.correct.expect("generated cases carry the answer");
    let stats = CaseStats::of(case);
    let results = aggregators::aggregate_all(case, &stats, &MethodId::ALL);
    let mut out = [false; 5];
    for (slot, m) in out.iter_mut().zip(MethodId::ALL) {
        *slot = results
            .iter()
            .find(|r| r.method == m)
            .is_some_and(|r| r.chosen == correct);
    }
    out
}

fn post_condition(regime: Regime, case: &DecisionCase) -> bool {
    let [mr, hac, wc, sp, da] = outcomes(case);
    match regime {
        Regime::EasyMajority | Regime::Noise => true,
        Regime::Misleading => sp && !mr,
        Regime::ConfidentMinority => hac && !mr,
        Regime::DaOnly => !mr && !hac && !wc && !sp && da,
    }
}

/// Draws a case satisfying the regime's post-condition.
pub fn generate_case(spec: &RegimeSpec, seed: u64) -> Result<DecisionCase, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let case_id = format!("synth-{seed:016x}");
    for _ in 0..RETRY_BUDGET {
        let case = draw(spec, &mut rng, &case_id)?;
        if post_condition(spec.regime, &case) {
            return Ok(case);
        }
    }
    Err(SynthError::RegimeUnsatisfiable {
        regime: spec.regime,
        attempts: RETRY_BUDGET,
    })
}

/// Regime specs and how many cases to draw from each.
pub type Mixture = Vec<(RegimeSpec, usize)>;

/// 150 easy, 150 misleading, 100 confident-minority, 50 DA-only and 50 noise cases.
pub fn default_mixture() -> Mixture {
    scaled_mixture(500)
}

/// The default mixture proportions scaled to `total` cases (largest
/// remainders get the leftovers, earlier regimes first on ties).
pub fn scaled_mixture(total: usize) -> Mixture {
    const WEIGHTS: [usize; 5] = [150, 150, 100, 50, 50];
    let sum: usize = WEIGHTS.iter().sum();
    let mut counts: Vec<(usize, usize)> = WEIGHTS
        .iter()
        .map(|w| (total * w / sum, total * w % sum))
        .collect();
    let assigned: usize = counts.iter().map(|c| c.0).sum();
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|a, b| counts[*b].1.cmp(&counts[*a].1).then(a.cmp(b)));
    for &i in order.iter().take(total - assigned) {
        counts[i].0 += 1;
    }
    Regime::ALL
        .into_iter()
        .zip(counts)
        .map(|(r, (c, _))| (RegimeSpec::default_for(r), c))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub cases: Vec<DecisionCase>,
    /// Generating regime of each case, aligned with `cases`.
    pub tags: Vec<Regime>,
}

/// Draws every requested case, shuffles, and renumbers ids as `case-0000`...
/// The regime stays in each case's tag for diagnostics.
pub fn generate_corpus(
    mixture: &[(RegimeSpec, usize)],
    seed: u64,
) -> Result<SynthCorpus, SynthError> {
    let units: Vec<(usize, usize)> = mixture
        .iter()
        .enumerate()
        .flat_map(|(s, (_, count))| (0..*count).map(move |k| (s, k)))
        .collect();
    if units.is_empty() {
        return Err(SynthError::EmptyMixture);
    }
    let mut drawn: Vec<(DecisionCase, Regime)> = units
        .par_iter()
        .map(|&(s, k)| {
            let spec = &mixture[s].0;
            generate_case(spec, seeds::mix(seed, &[s as u64, k as u64])).map(|c| (c, spec.regime))
        })
        .collect::<Result<_, _>>()?;
    drawn.shuffle(&mut ChaCha8Rng::seed_from_u64(seeds::mix(
        seed,
        &[u64::MAX],
    )));
    let width = drawn.len().saturating_sub(1).to_string().len().max(4);
    let mut cases = Vec::with_capacity(drawn.len());
    let mut tags = Vec::with_capacity(drawn.len());
    for (i, (mut case, regime)) in drawn.into_iter().enumerate() {
        case.case_id = format!("case-{i:0width$}");
        cases.push(case);
        tags.push(regime);
    }
    Ok(SynthCorpus { cases, tags })
}
