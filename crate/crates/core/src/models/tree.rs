//! Binary decision trees and the CART-style builder shared by both ensembles.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::matrix::Matrix;

/// A tree node. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize, cover: u64 },
    Leaf { value: f64, cover: u64 },
}

impl Node {
    pub fn cover(&self) -> u64 {
        match *self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => cover,
        }
    }
}

/// Nodes stored in pre-order; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Build from explicit nodes, checking that child links form a tree
    /// (children after parents, every node reachable exactly once) and that
    /// each split's cover equals the sum of its children's covers.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self, ModelError> {
        let tree = Self { nodes };
        tree.validate()?;
        Ok(tree)
    }

    pub fn leaf(value: f64, cover: u64) -> Self {
        Self { nodes: vec![Node::Leaf { value, cover }] }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::MalformedTree(m));
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split { threshold, left, right, cover, .. } = *node {
                if !threshold.is_finite() {
                    return bad(format!("node {i} has a non-finite threshold"));
                }
                for child in [left, right] {
                    if child <= i || child >= self.nodes.len() {
                        return bad(format!("node {i} links to invalid child {child}"));
                    }
                    parents[child] += 1;
                }
                if left == right {
                    return bad(format!("node {i} has identical children"));
                }
                let sum = self.nodes[left].cover() + self.nodes[right].cover();
                if sum != cover {
                    return bad(format!("node {i} cover {cover} differs from children total {sum}"));
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return bad("nodes do not form a single tree".into());
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &Node {
        &self.nodes[index]
    }

    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    /// Largest feature index referenced by a split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Cover-weighted mean of the leaf values.
    pub fn expected_value(&self) -> f64 {
        let total = self.nodes[0].cover() as f64;
        self.nodes
            .iter()
            .filter_map(|n| match *n {
                Node::Leaf { value, cover } => Some(value * cover as f64),
                Node::Split { .. } => None,
            })
            .sum::<f64>()
            / total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Criterion {
    /// Weighted Gini impurity decrease on 0/1 targets.
    Gini,
    /// Sum-of-squares reduction on real-valued targets.
    Variance,
}

const MIN_GAIN: f64 = 1e-12;

pub(crate) struct TreeBuilder<'a, F, L>
where
    F: FnMut(usize) -> Vec<usize>,
    L: Fn(&[usize]) -> f64,
{
    pub x: &'a Matrix,
    pub targets: &'a [f64],
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Candidate features for a node, given the feature count.
    pub candidate_features: F,
    /// Leaf value for the rows that reach it.
    pub leaf_value: L,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl<F, L> TreeBuilder<'_, F, L>
where
    F: FnMut(usize) -> Vec<usize>,
    L: Fn(&[usize]) -> f64,
{
    /// Grow a tree on `rows` (indices into `x`, duplicates allowed).
    pub fn build(mut self, rows: &[usize]) -> DecisionTree {
        let mut nodes = Vec::new();
        self.grow(rows.to_vec(), 0, &mut nodes);
        DecisionTree { nodes }
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, nodes: &mut Vec<Node>) -> usize {
        let index = nodes.len();
        let cover = rows.len() as u64;
        let split = if depth < self.max_depth && rows.len() >= 2 * self.min_samples_leaf && !self.is_pure(&rows) {
            self.best_split(&rows)
        } else {
            None
        };
        let Some(split) = split else {
            nodes.push(Node::Leaf { value: (self.leaf_value)(&rows), cover });
            return index;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.x.get(r, split.feature) <= split.threshold);
        nodes.push(Node::Split { feature: split.feature, threshold: split.threshold, left: 0, right: 0, cover });
        let left = self.grow(left_rows, depth + 1, nodes);
        let right = self.grow(right_rows, depth + 1, nodes);
        if let Node::Split { left: l, right: r, .. } = &mut nodes[index] {
            *l = left;
            *r = right;
        }
        index
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.targets[rows[0]];
        rows.iter().all(|&r| self.targets[r] == first)
    }

    fn impurity(&self, n: f64, sum: f64) -> f64 {
        match self.criterion {
            // n * (1 - p^2 - (1-p)^2) with p = sum / n.
            Criterion::Gini => {
                let p = sum / n;
                n * (1.0 - p * p - (1.0 - p) * (1.0 - p))
            }
            // Sum of squares minus its mean-only part; the sum(y^2) term cancels in the gain.
            Criterion::Variance => -sum * sum / n,
        }
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<BestSplit> {
        let n = rows.len();
        let mut features = (self.candidate_features)(self.x.cols());
        features.sort_unstable();
        let total: f64 = rows.iter().map(|&r| self.targets[r]).sum();
        let parent = self.impurity(n as f64, total);
        let mut best: Option<BestSplit> = None;
        let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(n);

        for feature in features {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.x.get(r, feature), self.targets[r])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            for i in 0..n - 1 {
                left_sum += sorted[i].1;
                let n_left = i + 1;
                if n_left < self.min_samples_leaf {
                    continue;
                }
                if n - n_left < self.min_samples_leaf {
                    break;
                }
                let (lo, hi) = (sorted[i].0, sorted[i + 1].0);
                if lo == hi {
                    continue;
                }
                let gain = parent
                    - self.impurity(n_left as f64, left_sum)
                    - self.impurity((n - n_left) as f64, total - left_sum);
                if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit { feature, threshold, gain });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump(a: f64, b: f64) -> DecisionTree {
        DecisionTree::from_nodes(vec![
            Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2, cover: 10 },
            Node::Leaf { value: a, cover: 4 },
            Node::Leaf { value: b, cover: 6 },
        ])
        .unwrap()
    }

    #[test]
    fn routing_and_expectation() {
        let t = stump(1.0, 3.0);
        assert_eq!(t.predict(&[0.5]), 1.0);
        assert_eq!(t.predict(&[0.6]), 3.0);
        assert_eq!(t.depth(), 1);
        assert!((t.expected_value() - 2.2).abs() < 1e-15);
    }

    #[test]
    fn malformed_trees_rejected() {
        let bad_cover = vec![
            Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2, cover: 11 },
            Node::Leaf { value: 0.0, cover: 4 },
            Node::Leaf { value: 0.0, cover: 6 },
        ];
        assert!(DecisionTree::from_nodes(bad_cover).is_err());
        let backwards = vec![
            Node::Leaf { value: 0.0, cover: 4 },
            Node::Split { feature: 0, threshold: 0.5, left: 0, right: 2, cover: 10 },
            Node::Leaf { value: 0.0, cover: 6 },
        ];
        assert!(DecisionTree::from_nodes(backwards).is_err());
        assert!(DecisionTree::from_nodes(vec![]).is_err());
    }

    fn build(x: &Matrix, y: &[f64], criterion: Criterion, depth: usize, leaf: usize) -> DecisionTree {
        let rows: Vec<usize> = (0..x.rows()).collect();
        TreeBuilder {
            x,
            targets: y,
            criterion,
            max_depth: depth,
            min_samples_leaf: leaf,
            candidate_features: |p| (0..p).collect(),
            leaf_value: |rows: &[usize]| rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64,
        }
        .build(&rows)
    }

    #[test]
    fn threshold_is_midpoint_of_distinct_values() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [4.0], [8.0]]).unwrap();
        let y = [0.0, 0.0, 1.0, 1.0];
        let t = build(&x, &y, Criterion::Gini, 3, 1);
        match t.node(0) {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 3.0),
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn equal_gain_prefers_lowest_feature() {
        // Columns 0 and 1 are identical; column 2 is the same split mirrored.
        let x = Matrix::from_rows(&[[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0], [1.0, 1.0, 0.0]]).unwrap();
        let y = [0.0, 0.0, 1.0, 1.0];
        let t = build(&x, &y, Criterion::Variance, 1, 1);
        assert!(matches!(t.node(0), Node::Split { feature: 0, .. }));
    }

    #[test]
    fn respects_depth_leaf_size_and_cover_bookkeeping() {
        let rows: Vec<[f64; 2]> = (0..200).map(|i| [((i * 37) % 101) as f64, ((i * 13) % 29) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r[0] > 50.0) ^ u8::from(r[1] > 14.0))).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let t = build(&x, &y, Criterion::Gini, 3, 7);
        t.validate().unwrap();
        assert!(t.depth() <= 3);
        let mut reach = vec![0u64; t.nodes().len()];
        for r in x.iter_rows() {
            let mut i = 0;
            loop {
                reach[i] += 1;
                match *t.node(i) {
                    Node::Leaf { .. } => break,
                    Node::Split { feature, threshold, left, right, .. } => {
                        i = if r[feature] <= threshold { left } else { right };
                    }
                }
            }
        }
        for (i, n) in t.nodes().iter().enumerate() {
            assert_eq!(n.cover(), reach[i]);
            if let Node::Leaf { cover, .. } = n {
                assert!(*cover >= 7);
            }
        }
    }

    #[test]
    fn gini_gain_is_twice_variance_gain_on_binary_targets() {
        let x = Matrix::from_rows(&[[0.0]]).unwrap();
        let dummy = [0.0];
        let mk = |c| TreeBuilder {
            x: &x,
            targets: &dummy,
            criterion: c,
            max_depth: 1,
            min_samples_leaf: 1,
            candidate_features: |p: usize| (0..p).collect(),
            leaf_value: |_: &[usize]| 0.0,
        };
        let (g, v) = (mk(Criterion::Gini), mk(Criterion::Variance));
        let gain = |b: &TreeBuilder<_, _>| b.impurity(10.0, 4.0) - b.impurity(6.0, 1.0) - b.impurity(4.0, 3.0);
        assert!((gain(&g) - 2.0 * gain(&v)).abs() < 1e-12);
    }
}
