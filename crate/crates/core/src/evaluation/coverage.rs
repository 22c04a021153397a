use serde::{Deserialize, Serialize};

use super::PreparedCorpus;
use crate::aggregators::MethodId;
use crate::pipelines::MethodSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCoverage {
    pub method: MethodId,
    pub solved: usize,
    /// Ids of the cases the method answers correctly, in corpus order.
    pub cases: Vec<String>,
}

/// Cases solved by exactly the listed methods and no others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub methods: Vec<MethodId>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub cases: usize,
    pub per_method: Vec<MethodCoverage>,
    /// All 32 regions, indexed by the bitmask of solving methods in
    /// canonical order (bit 0 = MR). Region 0 holds the unsolved cases.
    pub regions: Vec<Region>,
    pub union_with_da: usize,
    pub union_without_da: usize,
    pub rate_with_da: f64,
    pub rate_without_da: f64,
}

impl CoverageReport {
    /// Count of the region solved by exactly `methods`.
    pub fn region(&self, methods: &[MethodId]) -> usize {
        let mask = methods.iter().fold(0, |acc, m| acc | region_bit(*m));
        self.regions[mask].count
    }
}

fn region_bit(m: MethodId) -> usize {
    1 << MethodId::ALL
        .iter()
        .position(|x| *x == m)
        .expect("canonical method")
}

/// Which cases each of the five methods solves, and how those sets overlap.
pub fn coverage_analysis(corpus: &PreparedCorpus) -> CoverageReport {
    let all = MethodSet::full();
    let n = corpus.len();
    let mut counts = [0usize; 32];
    let mut per_method: Vec<MethodCoverage> = MethodId::ALL
        .iter()
        .map(|m| MethodCoverage {
            method: *m,
            solved: 0,
            cases: Vec::new(),
        })
        .collect();
    for (i, case) in corpus.cases().iter().enumerate() {
        let correct = corpus.correct(i);
        let mut mask = 0;
        for (k, m) in MethodId::ALL.iter().enumerate() {
            if case.choice(*m, &all) == correct {
                mask |= 1 << k;
                per_method[k].solved += 1;
                per_method[k].cases.push(case.case_id.clone());
            }
        }
        counts[mask] += 1;
    }
    let regions: Vec<Region> = (0..32)
        .map(|mask| Region {
            methods: MethodId::ALL
                .iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, m)| *m)
                .collect(),
            count: counts[mask],
        })
        .collect();
    let da = region_bit(MethodId::Da);
    let union_with_da = n - counts[0];
    let union_without_da = n - counts[0] - counts[da];
    let rate = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    CoverageReport {
        cases: n,
        per_method,
        regions,
        union_with_da,
        union_without_da,
        rate_with_da: rate(union_with_da),
        rate_without_da: rate(union_without_da),
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{copies_of_case_x, synthetic};
    use super::*;
    use MethodId::*;

    #[test]
    fn case_x_copies() {
        let c = coverage_analysis(&copies_of_case_x(10));
        assert_eq!(c.per_method[0].solved, 0);
        assert_eq!(c.per_method[1].solved, 10);
        assert_eq!(c.per_method[4].solved, 10);
        assert_eq!(c.region(&[Da]), 0);
        assert_eq!(c.region(&[Hac, Da]), 10);
        assert_eq!(c.union_with_da, 10);
    }

    #[test]
    fn da_only_region() {
        // All four standard methods pick 0 and the answer is 1: only DA solves it.
        let c = coverage_analysis(&synthetic(&[
            ([0.0; 27], [0, 0, 0, 0], 1),
            ([0.0; 27], [0, 0, 0, 0], 0),
            ([0.0; 27], [0, 1, 0, 1], 1),
        ]));
        assert_eq!(c.region(&[Da]), 1);
        assert_eq!(c.region(&[Mr, Hac, Wc, Sp]), 1);
        assert_eq!(c.region(&[Hac, Sp, Da]), 1);
        assert_eq!(c.regions.iter().map(|r| r.count).sum::<usize>(), 3);
        assert_eq!((c.union_with_da, c.union_without_da), (3, 2));
    }
}
