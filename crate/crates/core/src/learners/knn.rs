use serde::{Deserialize, Serialize};

use super::{check_training, encode_classes, ClassDistribution, LearnError, Standardizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

/// k-nearest neighbours under Euclidean distance on z-scored features.
/// Equidistant neighbours are taken in training order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestNeighbors {
    k: usize,
    scaler: Standardizer,
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    classes: Vec<usize>,
}

impl NearestNeighbors {
    pub fn fit(params: &KnnParams, x: &[Vec<f64>], y: &[usize]) -> Result<Self, LearnError> {
        check_training(x, y)?;
        let scaler = Standardizer::fit(x);
        let (classes, labels) = encode_classes(y);
        Ok(NearestNeighbors {
            k: params.k.max(1),
            rows: scaler.transform_all(x),
            scaler,
            labels,
            classes,
        })
    }

    pub fn width(&self) -> usize {
        self.scaler.mean.len()
    }

    pub fn predict_proba(&self, x: &[f64]) -> ClassDistribution {
        let q = self.scaler.transform(x);
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let d: f64 = r.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        let k = self.k.min(dist.len());
        let by_distance =
            |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, by_distance);
        }
        let mut counts = vec![0usize; self.classes.len()];
        for &(_, i) in &dist[..k] {
            counts[self.labels[i]] += 1;
        }
        ClassDistribution {
            classes: self.classes.clone(),
            probs: counts.iter().map(|c| *c as f64 / k as f64).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_neighbour_reproduces_training_label() {
        let x = vec![
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![2.0, 2.0],
            vec![0.5, 0.5],
        ];
        let y = vec![0, 1, 1, 0];
        let m = NearestNeighbors::fit(&KnnParams { k: 1 }, &x, &y).unwrap();
        for (row, label) in x.iter().zip(&y) {
            let d = m.predict_proba(row);
            assert_eq!(d.prob(*label), 1.0);
        }
    }

    #[test]
    fn five_neighbours_vote_fractions() {
        // Three class-1 points close to the query, two class-0 points a bit further,
        // one far class-0 point that must not count.
        let x = vec![
            vec![0.0],
            vec![0.1],
            vec![-0.1],
            vec![0.5],
            vec![-0.5],
            vec![10.0],
        ];
        let y = vec![1, 1, 1, 0, 0, 0];
        let m = NearestNeighbors::fit(&KnnParams { k: 5 }, &x, &y).unwrap();
        let d = m.predict_proba(&[0.0]);
        assert!((d.prob(1) - 0.6).abs() < 1e-15);
        assert!((d.prob(0) - 0.4).abs() < 1e-15);
    }
}
