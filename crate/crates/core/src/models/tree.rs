//! CART classification tree with Gini impurity.

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Class frequencies of the training rows reaching the leaf.
        distribution: Vec<f64>,
        class: usize,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Rows with `x[feature] <= threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_classes: usize,
}

/// One root-to-leaf path: `(feature, went_left, threshold)` steps and the
/// leaf's class.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafPath {
    pub steps: Vec<(usize, bool, f64)>,
    pub class: usize,
    pub samples: usize,
}

pub struct TreeParams {
    pub max_depth: usize,
    /// Features considered per split; `None` means all.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>()
}

fn argmax(counts: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

impl DecisionTree {
    pub fn fit(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        params: &TreeParams,
        rng: &mut dyn RngCore,
    ) -> Self {
        let mut tree = DecisionTree {
            nodes: Vec::new(),
            n_classes,
        };
        let indices: Vec<usize> = (0..x.len()).collect();
        tree.grow(x, y, indices, 0, params, rng);
        tree
    }

    fn grow(
        &mut self,
        x: &[Vec<f64>],
        y: &[usize],
        indices: Vec<usize>,
        depth: usize,
        params: &TreeParams,
        rng: &mut dyn RngCore,
    ) -> usize {
        let mut counts = vec![0.0; self.n_classes];
        for &i in &indices {
            counts[y[i]] += 1.0;
        }
        let total = indices.len() as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            distribution: counts.iter().map(|c| c / total.max(1.0)).collect(),
            class: argmax(&counts),
            samples: indices.len(),
        });
        let impurity = gini(&counts, total);
        if depth >= params.max_depth || indices.len() < params.min_samples_split || impurity <= 0.0
        {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(x, y, &indices, &counts, params, rng)
        else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            indices.into_iter().partition(|&i| x[i][feature] <= threshold);
        let l = self.grow(x, y, left, depth + 1, params, rng);
        let r = self.grow(x, y, right, depth + 1, params, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left: l,
            right: r,
        };
        id
    }

    fn best_split(
        &self,
        x: &[Vec<f64>],
        y: &[usize],
        indices: &[usize],
        counts: &[f64],
        params: &TreeParams,
        rng: &mut dyn RngCore,
    ) -> Option<(usize, f64)> {
        let n_features = x[indices[0]].len();
        let mut features: Vec<usize> = (0..n_features).collect();
        if let Some(m) = params.max_features {
            if m < n_features {
                features.shuffle(rng);
                features.truncate(m.max(1));
                features.sort_unstable();
            }
        }
        let total = indices.len() as f64;
        let parent = gini(counts, total);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = indices.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            let mut left = vec![0.0; self.n_classes];
            for w in 0..order.len() - 1 {
                left[y[order[w]]] += 1.0;
                let (v, next) = (x[order[w]][f], x[order[w + 1]][f]);
                if v == next {
                    continue;
                }
                let nl = (w + 1) as f64;
                let nr = total - nl;
                let right: Vec<f64> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let score = (nl * gini(&left, nl) + nr * gini(&right, nr)) / total;
                if best.is_none_or(|(s, _, _)| score < s - 1e-12) {
                    best = Some((score, f, v + (next - v) / 2.0));
                }
            }
        }
        best.filter(|(s, _, _)| *s < parent - 1e-12).map(|(_, f, t)| (f, t))
    }

    fn leaf(&self, row: &[f64]) -> &Node {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { *left } else { *right },
                leaf => return leaf,
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        match self.leaf(row) {
            Node::Leaf { class, .. } => *class,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn predict_distribution(&self, row: &[f64]) -> &[f64] {
        match self.leaf(row) {
            Node::Leaf { distribution, .. } => distribution,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// All root-to-leaf paths, left subtrees first.
    pub fn paths(&self) -> Vec<LeafPath> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::new())];
        while let Some((node, steps)) = stack.pop() {
            match &self.nodes[node] {
                Node::Leaf { class, samples, .. } => out.push(LeafPath {
                    steps,
                    class: *class,
                    samples: *samples,
                }),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let mut r = steps.clone();
                    r.push((*feature, false, *threshold));
                    stack.push((*right, r));
                    let mut l = steps;
                    l.push((*feature, true, *threshold));
                    stack.push((*left, l));
                }
            }
        }
        out
    }
}
