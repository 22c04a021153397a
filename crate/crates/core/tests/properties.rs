mod common;

use crowdagg::aggregators::{aggregate_all, CaseStats, MethodId};
use crowdagg::case_model::{confidence_stats, support_stats};
use crowdagg::features::{compute_global_features, featurize_case};
use crowdagg::learners::{
    self, LearnerKind, LearnerParams, LogisticParams, LogisticRegression, Standardizer,
};
use crowdagg::{validate_case, DecisionCase, RawCase, RawResponse, SubgroupPlan};
use proptest::prelude::*;

use common::oracle_choices;

type Row = (usize, f64, Vec<f64>);

fn rows(max_n: usize, m: usize) -> impl Strategy<Value = Vec<Row>> {
    prop::collection::vec(
        (0..m, 0.0..=1.0f64, prop::collection::vec(0.01..1.0f64, m)),
        1..=max_n,
    )
}

fn build(rows: &[Row], m: usize, answers: &[String]) -> DecisionCase {
    validate_case(&RawCase {
        case_id: "p".into(),
        answers: answers.to_vec(),
        correct_answer: None,
        responses: rows
            .iter()
            .map(|(v, c, ps)| RawResponse {
                vote: answers[*v].clone(),
                confidence: *c,
                predicted_support: ps[..m].to_vec(),
            })
            .collect(),
        tag: None,
    })
    .unwrap()
}

fn labels(m: usize) -> Vec<String> {
    (0..m).map(|a| format!("a{a}")).collect()
}

fn choices(case: &DecisionCase) -> Vec<usize> {
    aggregate_all(case, &CaseStats::of(case), &MethodId::ALL)
        .iter()
        .map(|r| r.chosen)
        .collect()
}

/// True when some method's best two criterion values are within `eps`.
fn near_tie(case: &DecisionCase, eps: f64) -> bool {
    oracle_choices(case).scores.iter().any(|s| {
        let mut v: Vec<f64> = s.iter().flatten().copied().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v.len() >= 2 && v[0] - v[1] <= eps
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn response_order_does_not_matter(rows in rows(12, 3), seed in any::<u64>()) {
        let ans = labels(3);
        let case = build(&rows, 3, &ans);
        let mut shuffled = rows.clone();
        let len = shuffled.len();
        for i in (1..len).rev() {
            shuffled.swap(i, (seed.rotate_left(i as u32) as usize) % (i + 1));
        }
        let other = build(&shuffled, 3, &ans);
        if rows.len() >= 2 {
            let plan = SubgroupPlan::default();
            prop_assert_eq!(
                featurize_case(&case, &plan).unwrap().features,
                featurize_case(&other, &plan).unwrap().features
            );
        }
        prop_assume!(!near_tie(&case, 1e-9));
        prop_assert_eq!(choices(&case), choices(&other));
    }

    #[test]
    fn relabelling_answers_relabels_choices(rows in rows(15, 3), rot in 1usize..3) {
        let ans = labels(3);
        let case = build(&rows, 3, &ans);
        prop_assume!(!near_tie(&case, 1e-9));
        // Answer a moves to position (a + rot) % 3.
        let moved: Vec<Row> = rows
            .iter()
            .map(|(v, c, ps)| {
                let mut p = vec![0.0; 3];
                for a in 0..3 {
                    p[(a + rot) % 3] = ps[a];
                }
                ((v + rot) % 3, *c, p)
            })
            .collect();
        let other = build(&moved, 3, &ans);
        let expected: Vec<usize> = choices(&case)[..4].iter().map(|a| (a + rot) % 3).collect();
        prop_assert_eq!(&choices(&other)[..4], &expected[..]);
        let s = support_stats(&case);
        let mut sorted = s.support.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.windows(2).all(|w| w[1] - w[0] > 1e-9));
        let (f, g) = (compute_global_features(&case), compute_global_features(&other));
        for k in 0..17 {
            prop_assert!((f[k] - g[k]).abs() <= 1e-12, "row {} {} vs {}", k + 1, f[k], g[k]);
        }
    }

    #[test]
    fn da_opposes_mr_unless_mr_is_outvoted(rows in rows(40, 2)) {
        let case = build(&rows, 2, &labels(2));
        let c = choices(&case);
        let against_mr = c[1..4].iter().filter(|a| **a != c[0]).count();
        prop_assert_eq!(c[4] == c[0], against_mr == 3);
    }

    #[test]
    fn confidence_scale_keeps_wc_and_hac(rows in rows(20, 3), k in 0.01..=1.0f64) {
        let ans = labels(3);
        let case = build(&rows, 3, &ans);
        prop_assume!(!near_tie(&case, 1e-9));
        let scaled: Vec<Row> = rows.iter().map(|(v, c, ps)| (*v, c * k, ps.clone())).collect();
        let other = build(&scaled, 3, &ans);
        let (a, b) = (choices(&case), choices(&other));
        prop_assert_eq!(a[1], b[1]);
        prop_assert_eq!(a[2], b[2]);
    }

    #[test]
    fn sp_is_mr_under_uniform_shared_predictions(votes in prop::collection::vec((0usize..4, 0.0..=1.0f64), 1..30)) {
        let rows: Vec<Row> = votes.iter().map(|(v, c)| (*v, *c, vec![0.25; 4])).collect();
        let case = build(&rows, 4, &labels(4));
        let c = choices(&case);
        prop_assert_eq!(c[3], c[0]);
    }

    #[test]
    fn confidence_variance_matches_brute_force(rows in rows(30, 2)) {
        let case = build(&rows, 2, &labels(2));
        let stats = confidence_stats(&case, &support_stats(&case));
        let n = rows.len() as f64;
        let sq: f64 = rows.iter().map(|r| r.1 * r.1).sum::<f64>() / n;
        let mu: f64 = rows.iter().map(|r| r.1).sum::<f64>() / n;
        prop_assert!((stats.variance - (sq - mu * mu).max(0.0)).abs() <= 1e-12);
        prop_assert!(stats.variance >= 0.0);
        prop_assert!(stats.min <= stats.mean + 1e-15 && stats.mean <= stats.max + 1e-15);
    }

    #[test]
    fn features_are_finite_and_bounded(rows in rows(25, 3)) {
        prop_assume!(rows.len() >= 2);
        let case = build(&rows, 3, &labels(3));
        let f = featurize_case(&case, &SubgroupPlan::default()).unwrap().features;
        prop_assert!(f.iter().all(|v| v.is_finite()));
        for row in [2usize, 11, 20, 21, 22, 23, 3, 4, 5] {
            prop_assert!(f[row - 1] >= 0.0, "row {} negative", row);
        }
        prop_assert!(f[2] <= 3f64.log2() + 1e-12);
    }

    #[test]
    fn standardized_columns(x in prop::collection::vec(prop::collection::vec(-50.0..50.0f64, 3), 2..30)) {
        let s = Standardizer::fit(&x);
        let z = s.transform_all(&x);
        let n = x.len() as f64;
        for j in 0..3 {
            let col: Vec<f64> = z.iter().map(|r| r[j]).collect();
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let constant = x.iter().all(|r| r[j] == x[0][j]);
            prop_assert!(mean.abs() <= 1e-9);
            if constant {
                prop_assert!(col.iter().all(|v| *v == 0.0));
            } else {
                prop_assert!((var - 1.0).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn probabilities_are_distributions(
        data in prop::collection::vec((prop::collection::vec(-3.0..3.0f64, 2), 0usize..3), 3..25),
        query in prop::collection::vec(-5.0..5.0f64, 2),
        seed in any::<u64>(),
    ) {
        let x: Vec<Vec<f64>> = data.iter().map(|d| d.0.clone()).collect();
        let y: Vec<usize> = data.iter().map(|d| d.1).collect();
        let mut params = LearnerParams::default();
        params.rf.n_trees = 10;
        for kind in LearnerKind::ALL {
            let model = learners::fit(kind, &params, &x, &y, seed).unwrap();
            let d = model.predict_proba(&query).unwrap();
            prop_assert!((d.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(d.probs.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn logistic_loss_never_increases(
        data in prop::collection::vec((prop::collection::vec(-3.0..3.0f64, 3), 0usize..2), 4..30),
    ) {
        let x: Vec<Vec<f64>> = data.iter().map(|d| d.0.clone()).collect();
        let y: Vec<usize> = data.iter().map(|d| d.1).collect();
        let model = LogisticRegression::fit(&LogisticParams::default(), &x, &y).unwrap();
        prop_assert!(model.loss_trace().windows(2).all(|w| w[1] <= w[0]));
    }
}
