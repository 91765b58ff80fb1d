//! Regression-tree predictor of validation loss from genome features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvaluationRecord;
use crate::genome::{Genome, GenomeConfig, MOTIF_KINDS};
use crate::graph::genome_summary;
use crate::metrics::{spearman, Spearman};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 12,
            min_samples_leaf: 5,
        }
    }
}

impl TreeParams {
    pub fn check(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

/// Number of features for a genome layout: genes, then motif-kind counts,
/// global edge count, feedback edge count and per-op counts.
pub fn feature_len(cfg: &GenomeConfig) -> usize {
    cfg.genome_len() + MOTIF_KINDS as usize + 2 + cfg.ops
}

pub fn features(genome: &Genome) -> Vec<f64> {
    let summary = genome_summary(genome);
    let mut x = Vec::with_capacity(feature_len(genome.config()));
    x.extend(genome.genes().iter().map(|&g| g as f64));
    x.extend(summary.motif_counts.iter().map(|&c| c as f64));
    x.push(summary.global_edges as f64);
    x.push(summary.feedback_edges as f64);
    x.extend(summary.op_counts.iter().map(|&c| c as f64));
    x
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        samples: usize,
    },
}

/// CART regression tree stored as an arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub params: TreeParams,
    pub n_features: usize,
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: TreeParams) -> Result<Self> {
        params.check()?;
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        if y.len() < params.min_samples_leaf || y.is_empty() {
            return Err(Error::Fit(format!(
                "{} records, need at least {}",
                y.len(),
                params.min_samples_leaf.max(1)
            )));
        }
        let n_features = x[0].len();
        if x.iter().any(|r| r.len() != n_features) {
            return Err(Error::Fit("feature rows differ in length".into()));
        }
        if y.iter().chain(x.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training data"));
        }
        let mut tree = RegressionTree {
            params,
            n_features,
            nodes: Vec::new(),
        };
        let idx: Vec<usize> = (0..y.len()).collect();
        tree.grow(x, y, idx, 0);
        Ok(tree)
    }

    fn grow(&mut self, x: &[Vec<f64>], y: &[f64], idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let n = idx.len() as f64;
        let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n;
        self.nodes.push(Node::Leaf {
            value: mean,
            samples: idx.len(),
        });
        let constant = idx.iter().all(|&i| y[i] == y[idx[0]]);
        if depth >= self.params.max_depth || constant || idx.len() < 2 * self.params.min_samples_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(x, y, &idx) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][feature] <= threshold);
        let left = self.grow(x, y, l, depth + 1);
        let right = self.grow(x, y, r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Largest squared-error reduction; ties keep the lowest feature, then
    /// the lowest threshold.
    fn best_split(&self, x: &[Vec<f64>], y: &[f64], idx: &[usize]) -> Option<(usize, f64)> {
        let min_leaf = self.params.min_samples_leaf;
        let n = idx.len();
        let total: f64 = idx.iter().map(|&i| y[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| y[i] * y[i]).sum();
        let parent_sse = total_sq - total * total / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..self.n_features {
            order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
            let (mut s, mut sq) = (0.0, 0.0);
            for k in 0..n - 1 {
                let v = y[order[k]];
                s += v;
                sq += v * v;
                let left_n = k + 1;
                let (a, b) = (x[order[k]][f], x[order[k + 1]][f]);
                if a == b || left_n < min_leaf || n - left_n < min_leaf {
                    continue;
                }
                let right_n = n - left_n;
                let left_sse = sq - s * s / left_n as f64;
                let rs = total - s;
                let right_sse = (total_sq - sq) - rs * rs / right_n as f64;
                let gain = parent_sse - left_sse - right_sse;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, a + (b - a) / 2.0));
                }
            }
        }
        // Splits that only shuffle rounding noise are not worth a node.
        let tol = 1e-12 * parent_sse.abs().max(1e-300);
        best.filter(|&(g, _, _)| g > tol).map(|(_, f, t)| (f, t))
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::Shape {
                expected: self.n_features.to_string(),
                found: x.len().to_string(),
            });
        }
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value, .. } => return Ok(*value),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
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

/// A tree over genome features, tied to one genome layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub genome_config: GenomeConfig,
    pub tree: RegressionTree,
}

impl Predictor {
    /// Fits on the measured f1 of `records`; degenerate records keep their
    /// sentinel targets.
    pub fn fit(records: &[EvaluationRecord], params: TreeParams) -> Result<Self> {
        let Some(first) = records.first() else {
            return Err(Error::Fit("no records to fit".into()));
        };
        let cfg = *first.genome.config();
        if let Some(r) = records.iter().find(|r| *r.genome.config() != cfg) {
            return Err(Error::Fit(format!(
                "records mix genome layouts {:?} and {:?}",
                cfg,
                r.genome.config()
            )));
        }
        let x: Vec<Vec<f64>> = records.iter().map(|r| features(&r.genome)).collect();
        let y: Vec<f64> = records.iter().map(|r| r.f1).collect();
        Ok(Predictor {
            genome_config: cfg,
            tree: RegressionTree::fit(&x, &y, params)?,
        })
    }

    pub fn predict(&self, genome: &Genome) -> Result<f64> {
        if *genome.config() != self.genome_config {
            return Err(Error::Config(format!(
                "predictor fitted on {:?}, genome uses {:?}",
                self.genome_config,
                genome.config()
            )));
        }
        self.tree.predict_row(&features(genome))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Rank agreement between predicted and measured f1 on `holdout`.
pub fn predictor_report(predictor: &Predictor, holdout: &[EvaluationRecord]) -> Result<Spearman> {
    let predicted = holdout
        .iter()
        .map(|r| predictor.predict(&r.genome))
        .collect::<Result<Vec<_>>>()?;
    let measured: Vec<f64> = holdout.iter().map(|r| r.f1).collect();
    spearman(&predicted, &measured)
}
