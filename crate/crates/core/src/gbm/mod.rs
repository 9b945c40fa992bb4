//! Gradient boosting over depth-limited regression trees.
//!
//! Boosting is second order: each round computes the gradient `g` and hessian
//! `h` of the loss at the current score, grows one tree by exact greedy search
//! on the unpenalized gain
//! `G_L^2/(H_L+eps) + G_R^2/(H_R+eps) - G^2/(H+eps)`, sets each leaf to
//! `-G/(H+eps)` and adds it scaled by the learning rate. There is no
//! subsampling and no regularization.

mod dump;
mod tree;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub use tree::{Node, Tree};

use crate::data::{check_dims, Dataset};
use crate::error::{Error, Result};
use crate::harness::metrics::{mae, rmse};
use crate::harness::report::{ExperimentReport, ReportRow};
use tree::{BinnedFeatures, GrowParams, Grower};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GbmObjective {
    /// Squared error on the raw score.
    SquaredErrorIdentity,
    /// Poisson deviance with the score as log-rate.
    PoissonLog,
}

impl GbmObjective {
    pub fn as_str(self) -> &'static str {
        match self {
            GbmObjective::SquaredErrorIdentity => "squared_error_identity",
            GbmObjective::PoissonLog => "poisson_log",
        }
    }

    fn inverse_link(self, score: f64) -> f64 {
        match self {
            GbmObjective::SquaredErrorIdentity => score,
            GbmObjective::PoissonLog => score.exp(),
        }
    }
}

impl fmt::Display for GbmObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GbmObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared_error_identity" | "squared_error" | "identity" | "gaussian" => {
                Ok(GbmObjective::SquaredErrorIdentity)
            }
            "poisson_log" | "poisson" | "log" => Ok(GbmObjective::PoissonLog),
            _ => Err(Error::usage(format!("unknown GBM objective `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbmConfig {
    pub max_depth: usize,
    pub n_trees: usize,
    pub learning_rate: f64,
    pub objective: GbmObjective,
    pub min_child_samples: usize,
    pub hessian_floor: f64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            max_depth: 3,
            n_trees: 100,
            learning_rate: 0.1,
            objective: GbmObjective::SquaredErrorIdentity,
            min_child_samples: 1,
            hessian_floor: 1e-16,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::usage("max_depth must be at least 1"));
        }
        if self.n_trees == 0 {
            return Err(Error::usage("n_trees must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::usage("learning_rate must be positive"));
        }
        if self.min_child_samples == 0 {
            return Err(Error::usage("min_child_samples must be at least 1"));
        }
        if !(self.hessian_floor >= 0.0) {
            return Err(Error::usage("hessian_floor must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbmModel {
    pub(crate) base_score: f64,
    pub(crate) learning_rate: f64,
    pub(crate) objective: GbmObjective,
    pub(crate) n_features: usize,
    pub(crate) trees: Vec<Tree>,
}

impl GbmModel {
    pub fn new(
        base_score: f64,
        learning_rate: f64,
        objective: GbmObjective,
        n_features: usize,
        trees: Vec<Tree>,
    ) -> Result<Self> {
        if !base_score.is_finite() || !learning_rate.is_finite() {
            return Err(Error::usage("base score and learning rate must be finite"));
        }
        if trees
            .iter()
            .any(|t| t.max_feature().is_some_and(|f| f >= n_features))
        {
            return Err(Error::usage("tree splits on a feature beyond n_features"));
        }
        Ok(GbmModel {
            base_score,
            learning_rate,
            objective,
            n_features,
            trees,
        })
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn objective(&self) -> GbmObjective {
        self.objective
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Deepest tree in the ensemble.
    pub fn max_tree_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }

    /// Score before the inverse link: `base + sum_t lr * leaf_t(x)`.
    pub fn raw_score(&self, x: &[f64]) -> Result<f64> {
        check_dims(self.n_features, x.len())?;
        Ok(self.raw_score_unchecked(x))
    }

    fn raw_score_unchecked(&self, x: &[f64]) -> f64 {
        self.trees
            .iter()
            .fold(self.base_score, |s, t| s + self.learning_rate * t.leaf_value(x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.objective.inverse_link(self.raw_score(x)?))
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        check_dims(self.n_features, data.n_features())?;
        Ok(data
            .rows()
            .map(|x| self.objective.inverse_link(self.raw_score_unchecked(x)))
            .collect())
    }
}

pub fn predict_gbm(model: &GbmModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

pub fn fit_gbm(dataset: &Dataset, config: &GbmConfig) -> Result<GbmModel> {
    config.validate()?;
    let objective = config.objective;
    let mean = dataset.mean_response();
    let base_score = match objective {
        GbmObjective::SquaredErrorIdentity => mean,
        GbmObjective::PoissonLog => {
            dataset.require_counts()?;
            if mean <= 0.0 {
                return Err(Error::usage("Poisson objective needs a positive mean response"));
            }
            mean.ln()
        }
    };

    let n = dataset.n_rows();
    let y = dataset.response();
    let binned = BinnedFeatures::new(dataset);
    let params = GrowParams {
        max_depth: config.max_depth,
        min_child_samples: config.min_child_samples,
        hessian_floor: config.hessian_floor,
    };
    let mut score = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(config.n_trees);

    for _ in 0..config.n_trees {
        match objective {
            GbmObjective::SquaredErrorIdentity => {
                for i in 0..n {
                    grad[i] = score[i] - y[i];
                    hess[i] = 1.0;
                }
            }
            GbmObjective::PoissonLog => {
                for i in 0..n {
                    let rate = score[i].exp();
                    grad[i] = rate - y[i];
                    hess[i] = rate;
                }
            }
        }
        let grower = Grower {
            binned: &binned,
            grad: &grad,
            hess: &hess,
            params: &params,
        };
        let (tree, leaves) = grower.grow((0..n as u32).collect());
        for (value, rows) in leaves {
            for r in rows {
                score[r as usize] += config.learning_rate * value;
            }
        }
        trees.push(tree);
    }

    GbmModel::new(
        base_score,
        config.learning_rate,
        objective,
        dataset.n_features(),
        trees,
    )
}

/// Fits one model per `(learning rate, depth)` cell on `train` and scores it
/// on `test`. Rows are labelled `d=<d>,LR=<lr>`, grouped by depth, and one
/// `Best d=<d>` row per depth reports that depth's lowest MAE.
pub fn depth_lr_sweep(
    train: &Dataset,
    test: &Dataset,
    depths: &[usize],
    learning_rates: &[f64],
    base: &GbmConfig,
) -> Result<ExperimentReport> {
    if depths.is_empty() || learning_rates.is_empty() {
        return Err(Error::usage("depth and learning-rate grids must be non-empty"));
    }
    let mut report = ExperimentReport::new(
        "MAE for depth and learning rate",
        format!(
            "train seed {}, test seed {}, {} trees, objective {}",
            train.seed(),
            test.seed(),
            base.n_trees,
            base.objective
        ),
    );
    for &lr in learning_rates {
        for &d in depths {
            let config = GbmConfig {
                max_depth: d,
                learning_rate: lr,
                ..base.clone()
            };
            let label = format!("d={d},LR={lr}");
            let start = Instant::now();
            let scored = fit_gbm(train, &config)
                .and_then(|m| m.predict_dataset(test))
                .and_then(|p| Ok((mae(&p, test.response())?, rmse(&p, test.response())?)));
            let seconds = start.elapsed().as_secs_f64();
            let row = match scored {
                Ok((a, r)) => ReportRow::from_replicates(label, vec![a], vec![r], seconds),
                Err(e) => ReportRow::failed(label, e.to_string()),
            };
            report.push(row.with_group(format!("d={d}")));
        }
    }
    report.add_best_rows();
    Ok(report)
}
