//! Paired and unpaired significance tests for success rates.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF, Normal};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarVariant {
    /// (b - c)^2 / (b + c) against chi-squared with one degree of freedom,
    /// no continuity correction.
    #[default]
    ChiSquared,
    /// Two-sided exact binomial test on the discordant pairs.
    ExactBinomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// Pairs where the first sequence succeeded and the second failed.
    pub b: usize,
    /// Pairs where the second sequence succeeded and the first failed.
    pub c: usize,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionResult {
    pub z: f64,
    pub p_value: f64,
}

pub fn mcnemar_test(
    outcomes_a: &[bool],
    outcomes_b: &[bool],
    variant: McNemarVariant,
) -> Result<McNemarResult, EvalError> {
    if outcomes_a.len() != outcomes_b.len() {
        return Err(EvalError::LengthMismatch(
            outcomes_a.len(),
            outcomes_b.len(),
        ));
    }
    if outcomes_a.is_empty() {
        return Err(EvalError::ZeroSample);
    }
    let b = outcomes_a
        .iter()
        .zip(outcomes_b)
        .filter(|(a, b)| **a && !**b)
        .count();
    let c = outcomes_a
        .iter()
        .zip(outcomes_b)
        .filter(|(a, b)| !**a && **b)
        .count();
    Ok(mcnemar_from_counts(b, c, variant))
}

pub fn mcnemar_from_counts(b: usize, c: usize, variant: McNemarVariant) -> McNemarResult {
    let discordant = b + c;
    if discordant == 0 {
        return McNemarResult {
            b,
            c,
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let diff = b as f64 - c as f64;
    let statistic = diff * diff / discordant as f64;
    let p_value = match variant {
        McNemarVariant::ChiSquared => ChiSquared::new(1.0).expect("dof 1").sf(statistic),
        McNemarVariant::ExactBinomial => {
            let binom = Binomial::new(0.5, discordant as u64).expect("valid binomial");
            (2.0 * binom.cdf(b.min(c) as u64)).min(1.0)
        }
    };
    McNemarResult {
        b,
        c,
        statistic,
        p_value,
    }
}

/// Pooled two-proportion z-test, two-tailed.
pub fn proportion_test(
    s1: usize,
    n1: usize,
    s2: usize,
    n2: usize,
) -> Result<ProportionResult, EvalError> {
    if n1 == 0 || n2 == 0 {
        return Err(EvalError::ZeroSample);
    }
    if s1 > n1 || s2 > n2 {
        return Err(EvalError::InvalidCounts);
    }
    let (p1, p2) = (s1 as f64 / n1 as f64, s2 as f64 / n2 as f64);
    let pooled = (s1 + s2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return Ok(ProportionResult {
            z: 0.0,
            p_value: 1.0,
        });
    }
    let z = (p1 - p2) / se;
    let normal = Normal::standard();
    Ok(ProportionResult {
        z,
        p_value: (2.0 * normal.sf(z.abs())).min(1.0),
    })
}
