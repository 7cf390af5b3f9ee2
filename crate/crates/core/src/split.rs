//! Deterministic stratified holdout and k-fold partitioning.
//!
//! All shuffling uses [`SplitMix64`] seeded with the caller's seed, so a
//! given `(labels, ratios, seed)` produces identical partitions everywhere.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("class {class} has {count} members, at least {required} required")]
    ClassTooSmall { class: bool, count: usize, required: usize },
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self, SplitError> {
        let r = Self { train, validation, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), SplitError> {
        let parts = [self.train, self.validation, self.test];
        let ok = parts.iter().all(|&x| x.is_finite() && x > 0.0) && (parts.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(SplitError::InvalidRatios(parts))
        }
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.70, validation: 0.15, test: 0.15 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl Partition {
    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.validation.len(), self.test.len()]
    }
}

// Slack for ratio products such as 0.2 * 10 landing a hair above an integer.
const EPS: f64 = 1e-9;

fn ceil_eps(x: f64) -> usize {
    (x - EPS).ceil().max(0.0) as usize
}

fn floor_eps(x: f64) -> usize {
    (x + EPS).floor().max(0.0) as usize
}

/// Subset totals: the held-out block is `ceil((val + test) * n)`, then the
/// test share of it is `ceil(test / (val + test) * held_out)`, clamped so that
/// every total is the floor or ceiling of its exact share `ratio * n`.
fn subset_totals(n: usize, ratios: &SplitRatios) -> [usize; 3] {
    let nf = n as f64;
    let held_out = ceil_eps((ratios.validation + ratios.test) * nf).min(n);
    let test = ceil_eps(ratios.test / (ratios.validation + ratios.test) * held_out as f64);
    let (val_lo, val_hi) = (floor_eps(ratios.validation * nf), ceil_eps(ratios.validation * nf));
    let lo = floor_eps(ratios.test * nf).max(held_out.saturating_sub(val_hi));
    let hi = ceil_eps(ratios.test * nf).min(held_out.saturating_sub(val_lo));
    let test = test.clamp(lo, hi.max(lo));
    [n - held_out, held_out - test, test]
}

/// Per-subset positive counts whose sum is `positives`, with both the positive
/// and the negative count in every subset as close as possible to its ideal
/// share. Candidates are searched in floor-first order, so ties favour
/// earlier subsets receiving the rounded-down count.
fn allocate_positives(totals: [usize; 3], positives: usize, ratios: [f64; 3], n: usize) -> [usize; 3] {
    let negatives = n - positives;
    let ideal_pos = ratios.map(|r| r * positives as f64);
    let ideal_neg = ratios.map(|r| r * negatives as f64);
    for radius in 0..=n {
        let mut best: Option<(f64, [usize; 3])> = None;
        let lo = |s: usize| (ideal_pos[s].floor() as i64 - radius as i64).max(0) as usize;
        let hi = |s: usize| (ideal_pos[s].ceil() as usize + radius).min(totals[s]);
        for a in lo(0)..=hi(0) {
            for b in lo(1)..=hi(1) {
                let Some(c) = positives.checked_sub(a + b) else { continue };
                if c < lo(2) || c > hi(2) {
                    continue;
                }
                let pos = [a, b, c];
                let within = (0..3).all(|s| {
                    let neg = totals[s] as f64 - pos[s] as f64;
                    neg >= 0.0 && (neg - ideal_neg[s]).abs() < 1.0 + radius as f64
                });
                if !within {
                    continue;
                }
                let cost: f64 = (0..3)
                    .map(|s| {
                        let neg = (totals[s] - pos[s]) as f64;
                        (pos[s] as f64 - ideal_pos[s]).powi(2) + (neg - ideal_neg[s]).powi(2)
                    })
                    .sum();
                if best.is_none_or(|(b, _)| cost < b - 1e-12) {
                    best = Some((cost, pos));
                }
            }
        }
        if let Some((_, pos)) = best {
            return pos;
        }
    }
    unreachable!("a feasible allocation always exists at radius n")
}

/// Stratified train/validation/test partition.
///
/// Subset sizes are fixed first (see `subset_totals`); for n = 1195 at
/// 70/15/15 they are 836/179/180. Each class is then shuffled and dealt into
/// the subsets in train, validation, test order.
pub fn stratified_split(labels: &[bool], ratios: SplitRatios, seed: u64) -> Result<Partition, SplitError> {
    ratios.validate()?;
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i]);
    for (class, members) in [(false, &neg), (true, &pos)] {
        if members.len() < 3 {
            return Err(SplitError::ClassTooSmall { class, count: members.len(), required: 3 });
        }
    }
    let n = labels.len();
    let r = [ratios.train, ratios.validation, ratios.test];
    let totals = subset_totals(n, &ratios);
    let pos_counts = allocate_positives(totals, pos.len(), r, n);
    let neg_counts = [0, 1, 2].map(|s| totals[s] - pos_counts[s]);

    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut neg);
    rng.shuffle(&mut pos);

    let mut subsets: [Vec<usize>; 3] = Default::default();
    for (members, counts) in [(&neg, neg_counts), (&pos, pos_counts)] {
        let mut start = 0;
        for s in 0..3 {
            subsets[s].extend_from_slice(&members[start..start + counts[s]]);
            start += counts[s];
        }
    }
    for s in &mut subsets {
        s.sort_unstable();
    }
    let [train, validation, test] = subsets;
    Ok(Partition { train, validation, test, seed })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold id in `[0, k)` for every row.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn fold_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold assignment: each class is shuffled, then dealt round-robin.
/// The deal continues across classes so overall fold sizes differ by at most one.
pub fn stratified_kfold(labels: &[bool], k: usize, seed: u64) -> Result<FoldPlan, SplitError> {
    if k < 2 {
        return Err(SplitError::InvalidK(k));
    }
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i]);
    for (class, members) in [(false, &neg), (true, &pos)] {
        if members.len() < k {
            return Err(SplitError::ClassTooSmall { class, count: members.len(), required: k });
        }
    }
    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut neg);
    rng.shuffle(&mut pos);
    let mut assignments = vec![0; labels.len()];
    for (slot, &row) in neg.iter().chain(pos.iter()).enumerate() {
        assignments[row] = slot % k;
    }
    Ok(FoldPlan { k, assignments, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(pos: usize, neg: usize) -> Vec<bool> {
        let mut v = vec![true; pos];
        v.extend(vec![false; neg]);
        v
    }

    fn assert_exact_cover(p: &Partition, n: usize) {
        let mut all: Vec<usize> = p.train.iter().chain(&p.validation).chain(&p.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn reference_cohort_sizes() {
        // 201 positives in 1195, as in the reference registry.
        let y = labels(201, 994);
        let p = stratified_split(&y, SplitRatios::default(), 42).unwrap();
        assert_eq!(p.sizes(), [836, 179, 180]);
        assert_exact_cover(&p, 1195);
        for prevalence in [0.05, 0.168, 0.3, 0.5] {
            let pos = (1195.0 * prevalence) as usize;
            let p = stratified_split(&labels(pos, 1195 - pos), SplitRatios::default(), 7).unwrap();
            assert_eq!(p.sizes(), [836, 179, 180], "prevalence {prevalence}");
        }
    }

    #[test]
    fn exact_division() {
        let y = labels(0, 10);
        // One class only fails the precondition; use the totals helper directly.
        assert!(stratified_split(&y, SplitRatios::new(0.8, 0.1, 0.1).unwrap(), 1).is_err());
        assert_eq!(subset_totals(10, &SplitRatios::new(0.8, 0.1, 0.1).unwrap()), [8, 1, 1]);
        let p = stratified_split(&labels(5, 5), SplitRatios::new(0.6, 0.2, 0.2).unwrap(), 1).unwrap();
        assert_eq!(p.sizes(), [6, 2, 2]);
    }

    #[test]
    fn six_positives_fourteen_negatives() {
        // Sizes 10/5/5; ideal positive shares 3/1.5/1.5 round to 3/1/2.
        let y = labels(6, 14);
        let p = stratified_split(&y, SplitRatios::new(0.5, 0.25, 0.25).unwrap(), 3).unwrap();
        assert_eq!(p.sizes(), [10, 5, 5]);
        let count = |idx: &[usize]| idx.iter().filter(|&&i| y[i]).count();
        assert_eq!([count(&p.train), count(&p.validation), count(&p.test)], [3, 1, 2]);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(SplitRatios::new(0.7, 0.2, 0.2), Err(SplitError::InvalidRatios(_))));
        assert!(matches!(SplitRatios::new(1.0, 0.0, 0.0), Err(SplitError::InvalidRatios(_))));
        let err = stratified_split(&labels(2, 20), SplitRatios::default(), 0).unwrap_err();
        assert_eq!(err, SplitError::ClassTooSmall { class: true, count: 2, required: 3 });
        assert!(stratified_kfold(&labels(4, 20), 5, 0).is_err());
        assert!(stratified_kfold(&labels(4, 20), 1, 0).is_err());
    }

    #[test]
    fn kfold_exact_division() {
        let plan = stratified_kfold(&labels(5, 5), 5, 42).unwrap();
        let y = labels(5, 5);
        for f in 0..5 {
            let rows = plan.fold_rows(f);
            assert_eq!(rows.len(), 2);
            assert_eq!(rows.iter().filter(|&&i| y[i]).count(), 1);
        }
    }

    #[test]
    fn kfold_sizes_for_training_block() {
        let plan = stratified_kfold(&labels(141, 695), 5, 42).unwrap();
        for s in plan.fold_sizes() {
            assert!(s == 167 || s == 168, "{s}");
        }
    }

    #[test]
    fn determinism() {
        let y: Vec<bool> = (0..300).map(|i| i % 7 == 0).collect();
        assert_eq!(stratified_kfold(&y, 5, 9).unwrap(), stratified_kfold(&y, 5, 9).unwrap());
        assert_eq!(
            stratified_split(&y, SplitRatios::default(), 9).unwrap(),
            stratified_split(&y, SplitRatios::default(), 9).unwrap()
        );
        assert_ne!(
            stratified_split(&y, SplitRatios::default(), 9).unwrap(),
            stratified_split(&y, SplitRatios::default(), 10).unwrap()
        );
    }

    #[test]
    fn partition_json_round_trip() {
        let y: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let p = stratified_split(&y, SplitRatios::default(), 5).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<Partition>(&text).unwrap(), p);
    }

    proptest! {
        #[test]
        fn split_invariants(pos in 3usize..200, neg in 3usize..400, seed in any::<u64>(),
                            tr in 0.3f64..0.8, va_share in 0.2f64..0.8) {
            let va = (1.0 - tr) * va_share;
            let te = 1.0 - tr - va;
            let ratios = SplitRatios::new(tr, va, te).unwrap();
            let mut y = labels(pos, neg);
            SplitMix64::new(seed).shuffle(&mut y);
            let n = y.len();
            let p = stratified_split(&y, ratios, seed).unwrap();
            assert_exact_cover(&p, n);
            let prevalence = pos as f64 / n as f64;
            let r = [tr, va, te];
            for (s, subset) in [&p.train, &p.validation, &p.test].into_iter().enumerate() {
                let sp = subset.iter().filter(|&&i| y[i]).count();
                let sn = subset.len() - sp;
                prop_assert!((sp as f64 - r[s] * pos as f64).abs() < 1.0);
                prop_assert!((sn as f64 - r[s] * neg as f64).abs() < 1.0);
                if !subset.is_empty() {
                    let sub_prev = sp as f64 / subset.len() as f64;
                    let min_size = p.sizes().into_iter().filter(|&x| x > 0).min().unwrap();
                    prop_assert!((sub_prev - prevalence).abs() <= 1.0 / min_size as f64 + 1e-12);
                }
            }
        }

        #[test]
        fn kfold_invariants(pos in 5usize..100, neg in 5usize..200, k in 2usize..6, seed in any::<u64>()) {
            let y = labels(pos, neg);
            let plan = stratified_kfold(&y, k, seed).unwrap();
            prop_assert_eq!(plan.assignments.len(), y.len());
            let sizes = plan.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for class in [true, false] {
                let mut per = vec![0usize; k];
                for (i, &f) in plan.assignments.iter().enumerate() {
                    if y[i] == class { per[f] += 1; }
                }
                prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
            }
        }
    }
}
