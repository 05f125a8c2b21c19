use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct C45Params {
    pub min_leaf: usize,
    /// Pruning confidence factor; smaller prunes harder.
    pub confidence: f64,
    /// Skip pessimistic pruning altogether.
    pub prune: bool,
}

impl Default for C45Params {
    fn default() -> Self {
        Self { min_leaf: 2, confidence: 0.25, prune: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        dist: Vec<f64>,
        n: usize,
    },
    Split {
        attr: usize,
        /// Samples with `x[attr] ≤ threshold` go left.
        threshold: f64,
        gain: f64,
        gain_ratio: f64,
        left: Box<Node>,
        right: Box<Node>,
        dist: Vec<f64>,
        n: usize,
    },
}

impl Node {
    fn dist(&self) -> &[f64] {
        match self {
            Node::Leaf { dist, .. } | Node::Split { dist, .. } => dist,
        }
    }

    fn n(&self) -> usize {
        match self {
            Node::Leaf { n, .. } | Node::Split { n, .. } => *n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: Node,
    pub n_classes: usize,
    /// Number of subtrees replaced by leaves during pruning.
    pub pruned: usize,
}

/// Entropy in bits of a count vector.
pub fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

/// Best binary cut of one attribute: `(threshold, gain, gain_ratio)`.
pub(crate) fn best_cut(values: &[(f64, usize)], n_classes: usize, min_leaf: usize) -> Option<(f64, f64, f64)> {
    let n = values.len();
    let mut total = vec![0usize; n_classes];
    for &(_, c) in values {
        total[c] += 1;
    }
    let base = entropy(&total);
    let mut left = vec![0usize; n_classes];
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..n.saturating_sub(1) {
        left[values[i].1] += 1;
        if values[i].0 == values[i + 1].0 {
            continue;
        }
        let nl = i + 1;
        let nr = n - nl;
        if nl < min_leaf || nr < min_leaf {
            continue;
        }
        let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
        let (pl, pr) = (nl as f64 / n as f64, nr as f64 / n as f64);
        let gain = base - pl * entropy(&left) - pr * entropy(&right);
        let split_info = entropy(&[nl, nr]);
        let ratio = if split_info > 0.0 { gain / split_info } else { 0.0 };
        if best.is_none_or(|b| gain > b.1 + 1e-12) {
            best = Some(((values[i].0 + values[i + 1].0) / 2.0, gain, ratio));
        }
    }
    best
}

fn distribution(counts: &[usize]) -> Vec<f64> {
    let n: usize = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / n as f64).collect()
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    params: C45Params,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn grow(&self, idx: &[usize]) -> Node {
        let counts = self.counts(idx);
        let dist = distribution(&counts);
        let leaf = || Node::Leaf { dist: dist.clone(), n: idx.len() };
        if counts.iter().filter(|&&c| c > 0).count() <= 1 || idx.len() < 2 * self.params.min_leaf {
            return leaf();
        }
        let dims = self.x[idx[0]].len();
        let mut cands = Vec::new();
        for a in 0..dims {
            let mut vals: Vec<(f64, usize)> = idx.iter().map(|&i| (self.x[i][a], self.y[i])).collect();
            vals.sort_by(|p, q| p.0.total_cmp(&q.0));
            if let Some((t, g, r)) = best_cut(&vals, self.n_classes, self.params.min_leaf) {
                if g > 1e-12 {
                    cands.push((a, t, g, r));
                }
            }
        }
        if cands.is_empty() {
            return leaf();
        }
        // Gain ratio among attributes with at least average gain.
        let avg = cands.iter().map(|c| c.2).sum::<f64>() / cands.len() as f64;
        let (attr, threshold, gain, gain_ratio) = cands
            .into_iter()
            .filter(|c| c.2 >= avg - 1e-12)
            .fold(None::<(usize, f64, f64, f64)>, |best, c| match best {
                Some(b) if b.3 >= c.3 => Some(b),
                _ => Some(c),
            })
            .unwrap();
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][attr] <= threshold);
        Node::Split {
            attr,
            threshold,
            gain,
            gain_ratio,
            left: Box::new(self.grow(&l)),
            right: Box::new(self.grow(&r)),
            dist,
            n: idx.len(),
        }
    }
}

/// Upper confidence bound on the error rate of `e` errors in `n` cases.
pub fn pessimistic_rate(e: f64, n: f64, confidence: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - confidence);
    let f = e / n;
    let z2 = z * z;
    let num = f + z2 / (2.0 * n) + z * (f / n - f * f / n + z2 / (4.0 * n * n)).max(0.0).sqrt();
    (num / (1.0 + z2 / n)).min(1.0)
}

fn leaf_errors(node: &Node) -> f64 {
    let d = node.dist();
    let best = d.iter().copied().fold(0.0, f64::max);
    node.n() as f64 * (1.0 - best)
}

/// Bottom-up subtree replacement; returns the pessimistic error estimate.
fn prune(node: &mut Node, confidence: f64, pruned: &mut usize) -> f64 {
    let as_leaf = {
        let n = node.n() as f64;
        n * pessimistic_rate(leaf_errors(node).round(), n, confidence)
    };
    let subtree = match node {
        Node::Leaf { .. } => return as_leaf,
        Node::Split { left, right, .. } => prune(left, confidence, pruned) + prune(right, confidence, pruned),
    };
    if as_leaf <= subtree + 1e-9 {
        *node = Node::Leaf { dist: node.dist().to_vec(), n: node.n() };
        *pruned += 1;
        as_leaf
    } else {
        subtree
    }
}

pub fn c45_build(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: &C45Params) -> Result<DecisionTree> {
    if x.is_empty() {
        return Err(Error::Training("cannot grow a tree from an empty dataset".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), actual: y.len() });
    }
    if y.iter().any(|&c| c >= n_classes) {
        return Err(Error::Training("class index out of range".into()));
    }
    if !(params.confidence > 0.0 && params.confidence < 1.0) || params.min_leaf == 0 {
        return Err(Error::Config("c4.5 needs min_leaf ≥ 1 and confidence in (0, 1)".into()));
    }
    let b = Builder { x, y, n_classes, params: *params };
    let idx: Vec<usize> = (0..x.len()).collect();
    let mut root = b.grow(&idx);
    let mut pruned = 0;
    if params.prune {
        prune(&mut root, params.confidence, &mut pruned);
    }
    Ok(DecisionTree { root, n_classes, pruned })
}

impl DecisionTree {
    pub fn leaf_for(&self, x: &[f64]) -> &[f64] {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { dist, .. } => return dist,
                Node::Split { attr, threshold, left, right, .. } => {
                    node = if x[*attr] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.leaf_for(x).to_vec()
    }

    pub fn depth(&self) -> usize {
        fn d(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pure_set_is_one_leaf() {
        let t = c45_build(&[vec![1.0], vec![2.0], vec![3.0]], &[0, 0, 0], 2, &C45Params::default()).unwrap();
        assert!(matches!(t.root, Node::Leaf { .. }));
        assert_eq!(entropy(&[3, 0]), 0.0);
    }

    #[test]
    fn constant_attribute_gives_no_split() {
        let x = vec![vec![5.0]; 4];
        let t = c45_build(&x, &[0, 1, 0, 1], 2, &C45Params::default()).unwrap();
        assert!(matches!(t.root, Node::Leaf { .. }));
        assert_eq!(entropy(&[2, 2]), 1.0);
    }

    #[test]
    fn midpoint_split_with_one_bit_gain() {
        let x = vec![vec![1.0], vec![2.0], vec![8.0], vec![9.0]];
        let p = C45Params { prune: false, ..Default::default() };
        let t = c45_build(&x, &[0, 0, 1, 1], 2, &p).unwrap();
        match t.root {
            Node::Split { threshold, gain, .. } => {
                assert_eq!(threshold, 5.0);
                assert!((gain - 1.0).abs() < 1e-12);
            }
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(c45_build(&[], &[], 2, &C45Params::default()).is_err());
    }

    #[test]
    fn pessimistic_bound_exceeds_observed_rate() {
        let u = pessimistic_rate(2.0, 20.0, 0.25);
        assert!(u > 0.1 && u < 0.3);
        assert!(pessimistic_rate(0.0, 6.0, 0.25) > 0.0);
    }

    #[test]
    fn pruning_collapses_noise_splits() {
        // One mislabeled point creates a split that does not pay for itself.
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![f64::from(i)]).collect();
        let mut y = vec![0; 12];
        y[10] = 1;
        y[11] = 1;
        y[5] = 1;
        y[6] = 1;
        let p = C45Params { min_leaf: 1, ..Default::default() };
        let grown = c45_build(&x, &y, 2, &C45Params { prune: false, ..p }).unwrap();
        let pruned = c45_build(&x, &y, 2, &p).unwrap();
        assert!(pruned.depth() <= grown.depth());
    }

    proptest! {
        #[test]
        fn monotone_transform_keeps_predictions(
            pts in proptest::collection::vec((-50.0f64..50.0, 0usize..2), 4..40),
        ) {
            let x: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.0]).collect();
            let y: Vec<usize> = pts.iter().map(|p| p.1).collect();
            let xt: Vec<Vec<f64>> = x.iter().map(|v| vec![v[0].powi(3) + 2.0 * v[0]]).collect();
            let a = c45_build(&x, &y, 2, &C45Params::default()).unwrap();
            let b = c45_build(&xt, &y, 2, &C45Params::default()).unwrap();
            for (u, v) in x.iter().zip(&xt) {
                prop_assert_eq!(a.predict(u), b.predict(v));
            }
        }
    }
}
