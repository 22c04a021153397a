//! Independent recomputations used by the integration tests. Nothing here
//! calls into the library's statistics code: every quantity is rebuilt from
//! the raw responses with plain loops.
#![allow(dead_code)]

use crowdagg::{validate_case, DecisionCase, RawCase, RawResponse};
use rand::Rng;

pub fn case_x() -> DecisionCase {
    let r = |vote: &str, confidence: f64, ps: [f64; 2]| RawResponse {
        vote: vote.into(),
        confidence,
        predicted_support: ps.to_vec(),
    };
    validate_case(&RawCase {
        case_id: "case-x".into(),
        answers: vec!["A".into(), "B".into()],
        correct_answer: Some("B".into()),
        responses: vec![
            r("A", 0.9, [0.6, 0.4]),
            r("A", 0.5, [0.7, 0.3]),
            r("A", 0.6, [0.8, 0.2]),
            r("B", 1.0, [0.3, 0.7]),
            r("B", 0.9, [0.5, 0.5]),
        ],
        tag: None,
    })
    .unwrap()
}

/// A case with `n` responses over `m` answers; confidences and predicted
/// supports are continuous draws, votes uniform.
pub fn random_case(rng: &mut impl Rng, id: &str, n: usize, m: usize) -> DecisionCase {
    let answers: Vec<String> = (0..m).map(|a| format!("a{a}")).collect();
    let responses = (0..n)
        .map(|_| {
            let ps: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
            RawResponse {
                vote: answers[rng.random_range(0..m)].clone(),
                confidence: rng.random_range(0.0..=1.0),
                predicted_support: ps,
            }
        })
        .collect();
    validate_case(&RawCase {
        case_id: id.into(),
        answers: answers.clone(),
        correct_answer: Some(answers[rng.random_range(0..m)].clone()),
        responses,
        tag: None,
    })
    .unwrap()
}

fn first_max(values: &[Option<f64>]) -> usize {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = v {
            if best.is_none_or(|b| *v > values[b].unwrap()) {
                best = Some(i);
            }
        }
    }
    best.unwrap_or(0)
}

/// Per-answer criterion values and choices of MR, HAC, WC, SP and DA (in
/// that order), recomputed by direct counting.
pub struct OracleChoices {
    pub scores: [Vec<Option<f64>>; 4],
    pub chosen: [usize; 5],
}

pub fn oracle_choices(case: &DecisionCase) -> OracleChoices {
    let m = case.answers.len();
    let n = case.responses.len() as f64;
    let mut votes = vec![0usize; m];
    let mut conf_sum = vec![0.0; m];
    let mut ps_sum = vec![0.0; m];
    for r in &case.responses {
        votes[r.vote] += 1;
        conf_sum[r.vote] += r.confidence;
        for a in 0..m {
            ps_sum[a] += r.predicted_support[a];
        }
    }
    let support: Vec<f64> = votes.iter().map(|v| *v as f64 / n).collect();
    let avg_conf: Vec<Option<f64>> = (0..m)
        .map(|a| (votes[a] > 0).then(|| conf_sum[a] / votes[a] as f64))
        .collect();
    let mr: Vec<Option<f64>> = support.iter().map(|s| Some(*s)).collect();
    let hac = avg_conf.clone();
    let wc: Vec<Option<f64>> = (0..m)
        .map(|a| Some(avg_conf[a].map_or(0.0, |c| support[a] * c)))
        .collect();
    let sp: Vec<Option<f64>> = (0..m).map(|a| Some(support[a] - ps_sum[a] / n)).collect();
    let picks = [
        first_max(&mr),
        first_max(&hac),
        first_max(&wc),
        first_max(&sp),
    ];
    let mut counter = vec![0usize; m];
    for p in picks {
        counter[p] += 1;
    }
    let low = *counter.iter().min().unwrap();
    let candidates: Vec<usize> = (0..m).filter(|a| counter[*a] == low).collect();
    let da = candidates
        .iter()
        .copied()
        .find(|a| *a != picks[0])
        .unwrap_or(candidates[0]);
    OracleChoices {
        scores: [mr, hac, wc, sp],
        chosen: [picks[0], picks[1], picks[2], picks[3], da],
    }
}

fn avg(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn pop_var(xs: &[f64]) -> f64 {
    let mu = avg(xs);
    xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / xs.len() as f64
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::MIN, f64::max)
}

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::MAX, f64::min)
}

struct GroupStats {
    support: Vec<f64>,
    a_max: usize,
    a_min: usize,
    avg_conf: Vec<Option<f64>>,
    conf: Vec<f64>,
}

fn group_stats(case: &DecisionCase, members: &[usize]) -> GroupStats {
    let m = case.answers.len();
    let mut votes = vec![0usize; m];
    let mut sums = vec![0.0; m];
    let mut conf = Vec::new();
    for &j in members {
        let r = &case.responses[j];
        votes[r.vote] += 1;
        sums[r.vote] += r.confidence;
        conf.push(r.confidence);
    }
    let support: Vec<f64> = votes
        .iter()
        .map(|v| *v as f64 / members.len() as f64)
        .collect();
    let mut a_max = 0;
    let mut a_min = 0;
    for a in 1..m {
        if votes[a] > votes[a_max] {
            a_max = a;
        }
        if votes[a] < votes[a_min] {
            a_min = a;
        }
    }
    GroupStats {
        a_max,
        a_min,
        avg_conf: (0..m)
            .map(|a| (votes[a] > 0).then(|| sums[a] / votes[a] as f64))
            .collect(),
        support,
        conf,
    }
}

/// All 27 feature values, from the case and the given sub-sets.
pub fn oracle_features(case: &DecisionCase, subgroups: &[Vec<usize>]) -> [f64; 27] {
    let m = case.answers.len();
    let n = case.responses.len();
    let all: Vec<usize> = (0..n).collect();
    let g = group_stats(case, &all);
    let entropy =
        |s: &[f64]| -> f64 { s.iter().filter(|p| **p > 0.0).map(|p| -p * p.log2()).sum() };
    let uniform = 1.0 / m as f64;
    let mean_c = avg(&g.conf);
    let max_ca = g
        .avg_conf
        .iter()
        .flatten()
        .copied()
        .fold(f64::MIN, f64::max);
    let ps_avg: Vec<f64> = (0..m)
        .map(|a| {
            avg(&case
                .responses
                .iter()
                .map(|r| r.predicted_support[a])
                .collect::<Vec<_>>())
        })
        .collect();
    let own: Vec<f64> = case
        .responses
        .iter()
        .map(|r| r.predicted_support[r.vote])
        .collect();
    let avg_own = avg(&own);
    let frac = |pred: &dyn Fn(f64, f64) -> bool| -> f64 {
        case.responses
            .iter()
            .zip(&own)
            .filter(|(r, p)| pred(r.confidence, **p))
            .count() as f64
            / n as f64
    };

    let mut f = [0.0; 27];
    f[0] = n as f64;
    f[1] = max_of(&g.support) - min_of(&g.support);
    f[2] = entropy(&g.support);
    f[3] = pop_var(&g.support);
    f[4] = g
        .support
        .iter()
        .map(|s| (s - uniform).powi(2))
        .sum::<f64>()
        .sqrt();
    f[5] = g.avg_conf[g.a_min].unwrap_or(0.0);
    f[6] = g.avg_conf[g.a_max].unwrap_or(0.0);
    f[7] = min_of(&g.conf);
    f[8] = mean_c;
    f[9] = pop_var(&g.conf);
    f[10] = max_of(&g.conf) - mean_c;
    f[11] = if g.avg_conf[g.a_max] == Some(max_ca) {
        1.0
    } else {
        0.0
    };
    f[12] = max_of(&ps_avg);
    f[13] = min_of(&ps_avg);
    f[14] = avg_own;
    f[15] = frac(&|c, p| c < mean_c && p > avg_own);
    f[16] = frac(&|c, p| c > mean_c && p < avg_own);

    let groups: Vec<GroupStats> = subgroups.iter().map(|s| group_stats(case, s)).collect();
    let col = |h: &dyn Fn(&GroupStats) -> f64| -> Vec<f64> { groups.iter().map(h).collect() };
    let spread = |xs: Vec<f64>| max_of(&xs) - min_of(&xs);
    f[17] = if groups.iter().all(|s| s.a_max == groups[0].a_max) {
        0.0
    } else {
        1.0
    };
    f[18] = pop_var(&col(&|s| s.support[s.a_max]));
    f[19] = spread(col(&|s| pop_var(&s.support)));
    f[20] = spread(col(&|s| entropy(&s.support)));
    f[21] = spread(col(&|s| avg(&s.conf)));
    f[22] = spread(col(&|s| pop_var(&s.conf)));
    let c_min = col(&|s| s.avg_conf[s.a_min].unwrap_or(0.0));
    let c_max = col(&|s| s.avg_conf[s.a_max].unwrap_or(0.0));
    f[23] = pop_var(&c_min);
    f[24] = pop_var(&c_max);
    f[25] = avg(&c_min);
    f[26] = avg(&c_max);
    f
}

/// Complementary error function: power series for small arguments and a
/// Lentz continued fraction in the tail.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    if x < 2.5 {
        // erf(x) = 2/sqrt(pi) * sum (-1)^k x^(2k+1) / (k! (2k+1))
        let mut term = x;
        let mut sum = x;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= -x * x / k;
            let add = term / (2.0 * k + 1.0);
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        return 1.0 - 2.0 / sqrt_pi * sum;
    }
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        d = if d.abs() < tiny { tiny } else { d };
        c = x + a / c;
        c = if c.abs() < tiny { tiny } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / sqrt_pi / f
}

/// Upper tail of chi-squared with one degree of freedom.
pub fn chi2_1_sf(x: f64) -> f64 {
    erfc((x / 2.0).sqrt())
}

/// Two-tailed standard normal p-value.
pub fn normal_two_tailed(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// (b - c)^2 / (b + c) and its p-value; p = 1 without discordant pairs.
pub fn mcnemar_oracle(b: usize, c: usize) -> (f64, f64) {
    if b + c == 0 {
        return (0.0, 1.0);
    }
    let (b, c) = (b as f64, c as f64);
    let stat = (b - c) * (b - c) / (b + c);
    (stat, chi2_1_sf(stat))
}

pub fn proportion_oracle(s1: usize, n1: usize, s2: usize, n2: usize) -> (f64, f64) {
    let (p1, p2) = (s1 as f64 / n1 as f64, s2 as f64 / n2 as f64);
    let pooled = (s1 + s2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return (0.0, 1.0);
    }
    let z = (p1 - p2) / se;
    (z, normal_two_tailed(z))
}
