//! CART trees with axis-aligned splits, shared by the forest classifier
//! (Gini impurity) and the forest regressor (squared error).
//!
//! Split selection visits candidate features in ascending index order and
//! thresholds in ascending order and only accepts strictly better splits, so
//! ties resolve to the lowest feature index and then the lowest threshold.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) enum Node {
    Leaf {
        value: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Target<'a> {
    /// 0-based class labels.
    Classes { labels: &'a [usize], n_classes: usize },
    Values(&'a [f64]),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub max_features: usize,
}

impl DecisionTree {
    pub(crate) fn fit<R: Rng>(
        x: ArrayView2<f64>,
        target: Target<'_>,
        samples: Vec<usize>,
        params: TreeParams,
        rng: &mut R,
    ) -> DecisionTree {
        let mut builder = Builder {
            x,
            target,
            params,
            nodes: Vec::new(),
        };
        builder.grow(samples, 0, rng);
        DecisionTree {
            nodes: builder.nodes,
        }
    }

    /// Leaf value reached by `row`: class frequencies, or `[mean]` for
    /// regression trees.
    pub fn leaf_value(&self, row: ArrayView1<f64>) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
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

    /// Sizes of the training samples (with bootstrap multiplicity) per leaf.
    #[cfg(test)]
    pub(crate) fn leaves(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(value.as_slice()),
            Node::Split { .. } => None,
        })
    }
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    target: Target<'a>,
    params: TreeParams,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn grow<R: Rng>(&mut self, samples: Vec<usize>, depth: usize, rng: &mut R) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(&samples),
        });
        let p = self.params;
        if depth >= p.max_depth || samples.len() < 2 * p.min_samples_leaf || self.is_pure(&samples) {
            return id;
        }
        let Some(split) = self.best_split(&samples, rng) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| self.x[[i, split.feature]] <= split.threshold);
        let l = self.grow(left, depth + 1, rng);
        let r = self.grow(right, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        id
    }

    fn leaf_value(&self, samples: &[usize]) -> Vec<f64> {
        let n = samples.len() as f64;
        match self.target {
            Target::Classes { labels, n_classes } => {
                let mut freq = vec![0.0; n_classes];
                for &i in samples {
                    freq[labels[i]] += 1.0;
                }
                freq.iter_mut().for_each(|f| *f /= n);
                freq
            }
            Target::Values(y) => vec![samples.iter().map(|&i| y[i]).sum::<f64>() / n],
        }
    }

    fn is_pure(&self, samples: &[usize]) -> bool {
        match self.target {
            Target::Classes { labels, .. } => {
                samples.iter().all(|&i| labels[i] == labels[samples[0]])
            }
            Target::Values(y) => samples.iter().all(|&i| y[i] == y[samples[0]]),
        }
    }

    fn best_split<R: Rng>(&self, samples: &[usize], rng: &mut R) -> Option<BestSplit> {
        let d = self.x.ncols();
        let mut features = index::sample(rng, d, self.params.max_features.min(d)).into_vec();
        features.sort_unstable();

        let mut best: Option<BestSplit> = None;
        let mut order = samples.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]).then(a.cmp(&b)));
            if let Some((threshold, score)) = self.scan_feature(&order, f) {
                if best.as_ref().is_none_or(|b| score > b.score) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }

    /// Best threshold on one feature. The score is the quantity a split
    /// maximizes: `sum_c n_c^2 / n` per child for Gini, `S^2 / n` per child
    /// for squared error.
    fn scan_feature(&self, order: &[usize], f: usize) -> Option<(f64, f64)> {
        let n = order.len();
        let min_leaf = self.params.min_samples_leaf;
        let value = |pos: usize| self.x[[order[pos], f]];
        let mut best: Option<(f64, f64)> = None;
        let mut consider = |pos: usize, score: f64| {
            // left child holds order[..pos]
            let (a, b) = (value(pos - 1), value(pos));
            if a < b && best.is_none_or(|(_, s)| score > s) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some((threshold, score));
            }
        };

        match self.target {
            Target::Classes { labels, n_classes } => {
                let mut left = vec![0.0f64; n_classes];
                let mut right = vec![0.0f64; n_classes];
                for &i in order {
                    right[labels[i]] += 1.0;
                }
                let mut sq_left = 0.0;
                let mut sq_right: f64 = right.iter().map(|c| c * c).sum();
                for pos in 1..n {
                    let c = labels[order[pos - 1]];
                    sq_left += 2.0 * left[c] + 1.0;
                    sq_right -= 2.0 * right[c] - 1.0;
                    left[c] += 1.0;
                    right[c] -= 1.0;
                    if pos < min_leaf || n - pos < min_leaf {
                        continue;
                    }
                    let score = sq_left / pos as f64 + sq_right / (n - pos) as f64;
                    consider(pos, score);
                }
            }
            Target::Values(y) => {
                let total: f64 = order.iter().map(|&i| y[i]).sum();
                let mut sum_left = 0.0;
                for pos in 1..n {
                    sum_left += y[order[pos - 1]];
                    if pos < min_leaf || n - pos < min_leaf {
                        continue;
                    }
                    let sum_right = total - sum_left;
                    let score =
                        sum_left * sum_left / pos as f64 + sum_right * sum_right / (n - pos) as f64;
                    consider(pos, score);
                }
            }
        }
        best
    }
}
