//! CART classification trees (Gini impurity) and a bagged random forest.
//! Each tree votes the majority class of the leaf a query lands in; the
//! forest's probability for a class is the fraction of trees voting for it.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training, encode_classes, ClassDistribution, LearnError};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means ceil(sqrt(width)).
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_features: None,
            max_depth: None,
            min_samples_leaf: 1,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted tree; leaves hold class positions into the forest's class list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    fn predict(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Grows one tree. Bootstrap duplicates are carried as integer weights, so
/// a node holds each distinct row once; all counts below are weighted.
struct TreeBuilder<'a> {
    cols: &'a [Vec<f64>],
    /// Dense rank of each row's value within each column.
    ranks: &'a [Vec<u32>],
    labels: &'a [usize],
    weights: Vec<u32>,
    n_classes: usize,
    max_features: usize,
    max_depth: Option<usize>,
    min_leaf: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    /// Distinct in-bag rows; each node owns a contiguous range.
    samples: Vec<u32>,
    /// Sort keys: rank in the high half, row in the low half.
    sorted: Vec<u64>,
    features: Vec<usize>,
    left: Vec<usize>,
}

struct BestSplit {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl TreeBuilder<'_> {
    fn class_totals(&self, start: usize, end: usize) -> Vec<usize> {
        let mut totals = vec![0usize; self.n_classes];
        for &i in &self.samples[start..end] {
            totals[self.labels[i as usize]] += self.weights[i as usize] as usize;
        }
        totals
    }

    /// Best threshold on one feature, scored by sum over children of
    /// sum_c count_c^2 / size (maximizing it minimizes weighted Gini).
    fn best_threshold(
        &mut self,
        start: usize,
        end: usize,
        feature: usize,
        totals: &[usize],
        size: usize,
    ) -> Option<(f64, f64)> {
        let ranks = &self.ranks[feature];
        self.sorted.clear();
        self.sorted.extend(
            self.samples[start..end]
                .iter()
                .map(|&i| (u64::from(ranks[i as usize]) << 32) | u64::from(i)),
        );
        self.sorted.sort_unstable();
        self.left.clear();
        self.left.resize(self.n_classes, 0);
        let mut nl = 0;
        let mut best: Option<(f64, f64)> = None;
        for pos in 0..self.sorted.len() - 1 {
            let key = self.sorted[pos];
            let i = (key & 0xffff_ffff) as usize;
            let w = self.weights[i] as usize;
            self.left[self.labels[i]] += w;
            nl += w;
            let next_key = self.sorted[pos + 1];
            if key >> 32 == next_key >> 32 {
                continue;
            }
            let nr = size - nl;
            if nl < self.min_leaf || nr < self.min_leaf {
                continue;
            }
            let mut sl = 0.0;
            let mut sr = 0.0;
            for c in 0..self.n_classes {
                let l = self.left[c] as f64;
                let r = (totals[c] - self.left[c]) as f64;
                sl += l * l;
                sr += r * r;
            }
            let score = sl / nl as f64 + sr / nr as f64;
            if best.is_none_or(|(s, _)| score > s) {
                let col = &self.cols[feature];
                let (v, next) = (col[i], col[(next_key & 0xffff_ffff) as usize]);
                let mut threshold = 0.5 * (v + next);
                if threshold >= next {
                    threshold = v;
                }
                best = Some((score, threshold));
            }
        }
        best
    }

    fn build(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { class: 0 });
        let totals = self.class_totals(start, end);
        let size: usize = totals.iter().sum();
        // Most frequent class; ties go to the smallest class position.
        let majority =
            (1..self.n_classes).fold(0, |b, c| if totals[c] > totals[b] { c } else { b });
        let pure = totals.iter().filter(|c| **c > 0).count() <= 1;
        let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || size < 2 * self.min_leaf || end - start < 2 {
            self.nodes[at] = Node::Leaf { class: majority };
            return at;
        }

        self.features.shuffle(&mut self.rng);
        let mut best: Option<BestSplit> = None;
        // Keep drawing features past max_features until at least one usable split is found.
        for tried in 0..self.features.len() {
            if tried >= self.max_features && best.is_some() {
                break;
            }
            let f = self.features[tried];
            if let Some((score, threshold)) = self.best_threshold(start, end, f, &totals, size) {
                if best.as_ref().is_none_or(|b| score > b.score) {
                    best = Some(BestSplit {
                        score,
                        feature: f,
                        threshold,
                    });
                }
            }
        }
        let Some(split) = best else {
            self.nodes[at] = Node::Leaf { class: majority };
            return at;
        };
        let col = &self.cols[split.feature];
        let mut mid = start;
        for k in start..end {
            if col[self.samples[k] as usize] <= split.threshold {
                self.samples.swap(k, mid);
                mid += 1;
            }
        }
        let left = self.build(start, mid, depth + 1);
        let right = self.build(mid, end, depth + 1);
        self.nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }
}

/// Rank of each value among the distinct values of the column.
fn dense_ranks(col: &[f64]) -> Vec<u32> {
    let mut order: Vec<usize> = (0..col.len()).collect();
    order.sort_unstable_by(|a, b| col[*a].total_cmp(&col[*b]));
    let mut ranks = vec![0u32; col.len()];
    let mut rank = 0u32;
    for k in 0..order.len() {
        if k > 0 && col[order[k]] != col[order[k - 1]] {
            rank += 1;
        }
        ranks[order[k]] = rank;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    width: usize,
    classes: Vec<usize>,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(
        params: &ForestParams,
        x: &[Vec<f64>],
        y: &[usize],
        seed: u64,
    ) -> Result<Self, LearnError> {
        let width = check_training(x, y)?;
        let (classes, labels) = encode_classes(y);
        let cols: Vec<Vec<f64>> = (0..width)
            .map(|j| x.iter().map(|r| r[j]).collect())
            .collect();
        let ranks: Vec<Vec<u32>> = cols.iter().map(|c| dense_ranks(c)).collect();
        let max_features = params
            .max_features
            .unwrap_or_else(|| (width as f64).sqrt().ceil() as usize)
            .clamp(1, width.max(1));
        let n = x.len();
        let trees = (0..params.n_trees.max(1))
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(seed, &[t as u64]));
                let mut weights = vec![0u32; n];
                if params.bootstrap {
                    for _ in 0..n {
                        weights[rng.random_range(0..n)] += 1;
                    }
                } else {
                    weights.fill(1);
                }
                let samples: Vec<u32> =
                    (0..n as u32).filter(|&i| weights[i as usize] > 0).collect();
                let mut builder = TreeBuilder {
                    cols: &cols,
                    ranks: &ranks,
                    labels: &labels,
                    weights,
                    n_classes: classes.len(),
                    max_features,
                    max_depth: params.max_depth,
                    min_leaf: params.min_samples_leaf.max(1),
                    rng,
                    nodes: Vec::new(),
                    sorted: Vec::with_capacity(samples.len()),
                    features: (0..width).collect(),
                    left: Vec::with_capacity(classes.len()),
                    samples,
                };
                let end = builder.samples.len();
                builder.build(0, end, 0);
                DecisionTree {
                    nodes: builder.nodes,
                }
            })
            .collect();
        Ok(RandomForest {
            width,
            classes,
            trees,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn predict_proba(&self, x: &[f64]) -> ClassDistribution {
        let mut votes = vec![0usize; self.classes.len()];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        let total = self.trees.len() as f64;
        ClassDistribution {
            classes: self.classes.clone(),
            probs: votes.iter().map(|v| *v as f64 / total).collect(),
        }
    }

    /// Number of trees voting for each class position, in class order.
    pub fn votes(&self, x: &[f64]) -> Vec<usize> {
        let mut votes = vec![0usize; self.classes.len()];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        votes
    }
}
