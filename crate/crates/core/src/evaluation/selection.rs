use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_technique, fit_on, loo_predictions, predict, sig6, Design, EvalConfig, EvalError,
    PreparedCorpus, Technique,
};
use crate::learners::{LearnerKind, MultiLabelScheme};
use crate::pipelines::Approach;
use crate::seeds;

const FOLD_STREAM: u64 = 1;
const INNER_STREAM: u64 = 2;
const OUTER_STREAM: u64 = 3;
const SUBSAMPLE_STREAM: u64 = 4;

/// Minimum corpus size for nested model selection.
pub const MIN_SELECTION_CORPUS: usize = 20;

/// How per-fold inner contests combine into one overall technique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WinnerRule {
    /// The candidate winning the most folds; ties go to the earlier candidate.
    #[default]
    MostWins,
    /// The candidate with the highest inner success averaged over folds.
    MeanInnerSuccess,
}

/// Every multi-label scheme paired with every base learner (12 candidates).
pub fn amp_grid() -> Vec<Technique> {
    MultiLabelScheme::ALL
        .iter()
        .flat_map(|scheme| {
            LearnerKind::ALL.iter().map(move |learner| Technique::Amp {
                scheme: *scheme,
                learner: *learner,
            })
        })
        .collect()
}

pub fn dap_grid() -> Vec<Technique> {
    [LearnerKind::Knn, LearnerKind::Lr, LearnerKind::Rf]
        .into_iter()
        .map(|learner| Technique::Dap { learner })
        .collect()
}

/// Seeded shuffle of `0..n`, cut into `folds` contiguous blocks whose sizes
/// differ by at most one (larger blocks first). Each block is sorted.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seeds::mix(
        seed,
        &[FOLD_STREAM],
    )));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for k in 0..folds {
        let size = base + usize::from(k < extra);
        let mut block = order[start..start + size].to_vec();
        block.sort_unstable();
        out.push(block);
        start += size;
    }
    out
}

/// Stratified sample of `m` members of `pool`, allocated across strata in
/// proportion to their size (largest remainders get the leftovers).
fn stratified_subsample(design: &Design, pool: &[usize], m: usize, seed: u64) -> Vec<usize> {
    if pool.len() <= m {
        return pool.to_vec();
    }
    let mut strata: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for &i in pool {
        strata.entry(design.stratum(i)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = pool.len();
    let mut quotas: Vec<(usize, usize, usize)> = strata
        .values()
        .enumerate()
        .map(|(s, members)| {
            let exact = m * members.len();
            (s, exact / total, exact % total)
        })
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.1).sum();
    let mut by_remainder: Vec<usize> = (0..quotas.len()).collect();
    by_remainder.sort_by(|a, b| quotas[*b].2.cmp(&quotas[*a].2).then(a.cmp(b)));
    for &s in by_remainder.iter().take(m - assigned) {
        quotas[s].1 += 1;
    }
    let mut picked = Vec::with_capacity(m);
    for ((_, members), (_, quota, _)) in strata.into_iter().zip(quotas) {
        let mut members = members;
        members.shuffle(&mut rng);
        picked.extend_from_slice(&members[..quota]);
    }
    picked.sort_unstable();
    picked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    /// Inner cases actually scored (all of the training part unless subsampled).
    pub inner_evaluated: usize,
    /// Inner leave-one-out success of every candidate, in grid order.
    pub inner_success: Vec<f64>,
    pub winner: usize,
    pub test_successes: usize,
    pub test_success: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelectionReport {
    pub approach: Approach,
    pub candidates: Vec<Technique>,
    pub rule: WinnerRule,
    pub folds: Vec<FoldResult>,
    pub wins: Vec<usize>,
    pub mean_inner_success: Vec<f64>,
    pub chosen: Technique,
    /// Held-out success of the per-fold winners, pooled over folds.
    pub outer_successes: usize,
    pub outer_success: f64,
}

/// Outer k-fold cross-validation with an inner leave-one-out contest among
/// the candidates on each training part. The fold winner is retrained on
/// its whole training part and scored on the held-out fold.
pub fn nested_model_selection(
    corpus: &PreparedCorpus,
    approach: Approach,
    grid: &[Technique],
    config: &EvalConfig,
    seed: u64,
) -> Result<ModelSelectionReport, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    for t in grid {
        check_technique(*t, approach)?;
    }
    let n = corpus.len();
    let need = MIN_SELECTION_CORPUS.max(config.options.folds);
    if n < need {
        return Err(EvalError::CorpusTooSmall { need, got: n });
    }
    let design = Design::build(corpus, approach, config)?;
    let folds = fold_assignment(n, config.options.folds, seed);
    let mut results = Vec::with_capacity(folds.len());
    let mut outer_successes = 0;
    for (k, test) in folds.iter().enumerate() {
        let train: Vec<usize> = (0..n).filter(|i| test.binary_search(i).is_err()).collect();
        let evaluate = match config.options.inner_subsample {
            Some(m) => stratified_subsample(
                &design,
                &train,
                m,
                seeds::mix(seed, &[SUBSAMPLE_STREAM, k as u64]),
            ),
            None => train.clone(),
        };
        let mut inner_success = Vec::with_capacity(grid.len());
        for (c, t) in grid.iter().enumerate() {
            let preds = loo_predictions(
                &design,
                *t,
                &config.params,
                &train,
                &evaluate,
                seed,
                &[INNER_STREAM, k as u64, c as u64],
            )?;
            let wins = preds.iter().filter(|p| p.success).count();
            inner_success.push(wins as f64 / evaluate.len() as f64);
        }
        let winner = argmax_first(&inner_success);
        let fitted = fit_on(
            &design,
            grid[winner],
            &config.params,
            &train,
            seeds::mix(seed, &[OUTER_STREAM, k as u64]),
        )?;
        let mut test_successes = 0;
        for &i in test {
            if predict(&fitted, &design, i)?.success {
                test_successes += 1;
            }
        }
        outer_successes += test_successes;
        results.push(FoldResult {
            fold: k,
            train_size: train.len(),
            test_size: test.len(),
            inner_evaluated: evaluate.len(),
            inner_success,
            winner,
            test_successes,
            test_success: test_successes as f64 / test.len() as f64,
        });
    }

    let mut wins = vec![0usize; grid.len()];
    for r in &results {
        wins[r.winner] += 1;
    }
    let mean_inner_success: Vec<f64> = (0..grid.len())
        .map(|c| results.iter().map(|r| r.inner_success[c]).sum::<f64>() / results.len() as f64)
        .collect();
    let chosen = match config.options.winner_rule {
        WinnerRule::MostWins => argmax_first(&wins.iter().map(|w| *w as f64).collect::<Vec<_>>()),
        WinnerRule::MeanInnerSuccess => argmax_first(&mean_inner_success),
    };
    Ok(ModelSelectionReport {
        approach,
        candidates: grid.to_vec(),
        rule: config.options.winner_rule,
        folds: results,
        wins,
        mean_inner_success,
        chosen: grid[chosen],
        outer_successes,
        outer_success: outer_successes as f64 / n as f64,
    })
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Candidates by folds, fold winners starred, held-out results last.
pub fn render_grid(report: &ModelSelectionReport) -> String {
    let label_width = report
        .candidates
        .iter()
        .map(|t| t.to_string().len())
        .max()
        .unwrap_or(0)
        .max("Test Results".len())
        + 2;
    let mut out = format!("{:<label_width$}", "Technique");
    for r in &report.folds {
        out.push_str(&format!("{:>11}", format!("Fold {}", r.fold + 1)));
    }
    out.push('\n');
    for (c, t) in report.candidates.iter().enumerate() {
        out.push_str(&format!("{:<label_width$}", t.to_string()));
        for r in &report.folds {
            let mark = if r.winner == c { "*" } else { " " };
            out.push_str(&format!("{:>10}{mark}", sig6(r.inner_success[c])));
        }
        out.push('\n');
    }
    out.push_str(&format!("{:<label_width$}", "Test Results"));
    for r in &report.folds {
        out.push_str(&format!("{:>10} ", sig6(r.test_success)));
    }
    out.push('\n');
    out.push_str(&format!(
        "chosen: {} ({:?}), pooled held-out success {}\n",
        report.chosen,
        report.rule,
        sig6(report.outer_success)
    ));
    out
}
