//! Depth-limited binary regression trees and their exact greedy grower.

use crate::data::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] < threshold` go to `yes`, the rest to `no`.
    Split {
        feature: usize,
        threshold: f64,
        yes: usize,
        no: usize,
    },
    Leaf { value: f64 },
}

/// A regression tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    yes,
                    no,
                } => id = if x[feature] < threshold { yes } else { no },
            }
        }
    }

    /// Longest root-to-leaf path, counted in splits.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { yes, no, .. } => 1 + walk(nodes, yes).max(walk(nodes, no)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

/// Features mapped to the rank of their value among the column's sorted
/// unique values. Candidate thresholds are midpoints between neighbours, so
/// a scan over ranks is the exact greedy split search.
pub(crate) struct BinnedFeatures {
    n_rows: usize,
    /// Column-major ranks.
    ranks: Vec<u32>,
    uniques: Vec<Vec<f64>>,
}

impl BinnedFeatures {
    pub fn new(data: &Dataset) -> Self {
        let n = data.n_rows();
        let b = data.n_features();
        let mut ranks = vec![0u32; n * b];
        let mut uniques = Vec::with_capacity(b);
        for f in 0..b {
            let mut values: Vec<f64> = (0..n).map(|i| data.feature(i, f)).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for i in 0..n {
                let v = data.feature(i, f);
                let r = values.partition_point(|u| *u < v);
                ranks[f * n + i] = r as u32;
            }
            uniques.push(values);
        }
        BinnedFeatures {
            n_rows: n,
            ranks,
            uniques,
        }
    }

    fn rank(&self, feature: usize, row: usize) -> usize {
        self.ranks[feature * self.n_rows + row] as usize
    }

    fn threshold(&self, feature: usize, rank: usize) -> f64 {
        let u = &self.uniques[feature];
        (u[rank] + u[rank + 1]) / 2.0
    }
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_child_samples: usize,
    pub hessian_floor: f64,
}

struct Candidate {
    gain: f64,
    feature: usize,
    rank: usize,
}

pub(crate) struct Grower<'a> {
    pub binned: &'a BinnedFeatures,
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub params: &'a GrowParams,
}

impl Grower<'_> {
    /// Grows one tree over `rows`. Returns the tree and, for every leaf, the
    /// rows that landed in it.
    pub fn grow(&self, rows: Vec<u32>) -> (Tree, Vec<(f64, Vec<u32>)>) {
        let mut nodes = Vec::new();
        let mut leaves = Vec::new();
        self.grow_node(rows, 0, &mut nodes, &mut leaves);
        (Tree { nodes }, leaves)
    }

    fn grow_node(
        &self,
        rows: Vec<u32>,
        depth: usize,
        nodes: &mut Vec<Node>,
        leaves: &mut Vec<(f64, Vec<u32>)>,
    ) -> usize {
        let id = nodes.len();
        let (g, h) = rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.grad[r as usize], h + self.hess[r as usize])
        });
        let eps = self.params.hessian_floor;

        let split = if depth < self.params.max_depth
            && rows.len() >= 2 * self.params.min_child_samples.max(1)
        {
            self.best_split(&rows, g, h)
        } else {
            None
        };

        match split {
            Some(c) => {
                nodes.push(Node::Leaf { value: 0.0 });
                let (left, right): (Vec<u32>, Vec<u32>) = rows
                    .into_iter()
                    .partition(|&r| self.binned.rank(c.feature, r as usize) <= c.rank);
                let yes = self.grow_node(left, depth + 1, nodes, leaves);
                let no = self.grow_node(right, depth + 1, nodes, leaves);
                nodes[id] = Node::Split {
                    feature: c.feature,
                    threshold: self.binned.threshold(c.feature, c.rank),
                    yes,
                    no,
                };
            }
            None => {
                let value = -g / (h + eps);
                nodes.push(Node::Leaf { value });
                leaves.push((value, rows));
            }
        }
        id
    }

    /// Highest-gain split with a positive gain. Ties keep the lowest feature
    /// index, then the lowest threshold.
    fn best_split(&self, rows: &[u32], g: f64, h: f64) -> Option<Candidate> {
        let eps = self.params.hessian_floor;
        let min_child = self.params.min_child_samples.max(1);
        let parent = g * g / (h + eps);
        let mut best: Option<Candidate> = None;
        let mut hist_g = Vec::new();
        let mut hist_h = Vec::new();
        let mut hist_n = Vec::new();

        for (feature, uniques) in self.binned.uniques.iter().enumerate() {
            let n_bins = uniques.len();
            if n_bins < 2 {
                continue;
            }
            hist_g.clear();
            hist_g.resize(n_bins, 0.0);
            hist_h.clear();
            hist_h.resize(n_bins, 0.0);
            hist_n.clear();
            hist_n.resize(n_bins, 0usize);
            for &r in rows {
                let r = r as usize;
                let b = self.binned.rank(feature, r);
                hist_g[b] += self.grad[r];
                hist_h[b] += self.hess[r];
                hist_n[b] += 1;
            }
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
            for rank in 0..n_bins - 1 {
                gl += hist_g[rank];
                hl += hist_h[rank];
                nl += hist_n[rank];
                let nr = rows.len() - nl;
                if nl < min_child || nr < min_child {
                    continue;
                }
                let gr = g - gl;
                let hr = h - hl;
                let gain = gl * gl / (hl + eps) + gr * gr / (hr + eps) - parent;
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate {
                        gain,
                        feature,
                        rank,
                    });
                }
            }
        }
        best
    }
}
