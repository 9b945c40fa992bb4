//! Unpenalized GLMs over every interaction of binary features up to order `d`.
//!
//! Over binary features a depth-`d` tree ensemble can only express sums of
//! products of at most `d` features, so this model is the limit a converged,
//! unregularized depth-`d` boosting run approaches.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::data::{check_dims, Dataset};
use crate::error::{Error, Result};
use crate::gbm::{fit_gbm, GbmConfig, GbmModel, GbmObjective};
use crate::glm::{ascend_glm, poisson_row_objective, FitConfig};
use crate::groups::RowGroups;

pub const IRLS_MAX_ITERATIONS: usize = 200;
pub const FALLBACK_EPOCHS: usize = 50_000;

/// Columns of an interaction model: every feature subset of size `0..=d`.
///
/// Subsets are ordered by size, then lexicographically by feature index, so
/// `B = 3, d = 2` gives `{}, {1}, {2}, {3}, {1,2}, {1,3}, {2,3}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDesign {
    n_features: usize,
    order: usize,
    columns: Vec<Vec<usize>>,
}

impl InteractionDesign {
    pub fn new(n_features: usize, order: usize) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::usage("interaction design needs at least one feature"));
        }
        if order == 0 || order > n_features {
            return Err(Error::usage(format!(
                "interaction order must lie in 1..={n_features}, got {order}"
            )));
        }
        let mut columns = Vec::new();
        for size in 0..=order {
            push_subsets(n_features, size, &mut Vec::new(), 0, &mut columns);
        }
        Ok(InteractionDesign {
            n_features,
            order,
            columns,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Zero-based feature subsets, the empty subset (intercept) first.
    pub fn columns(&self) -> &[Vec<usize>] {
        &self.columns
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    /// `intercept` for the empty subset, otherwise e.g. `x1*x3`.
    pub fn column_name(&self, j: usize) -> String {
        let subset = &self.columns[j];
        if subset.is_empty() {
            return "intercept".to_string();
        }
        subset
            .iter()
            .map(|i| format!("x{}", i + 1))
            .collect::<Vec<_>>()
            .join("*")
    }

    pub fn expand_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.n_features, x.len())?;
        Ok(self.expand_unchecked(x))
    }

    fn expand_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|subset| subset.iter().map(|&i| x[i]).product())
            .collect()
    }
}

fn push_subsets(n: usize, size: usize, current: &mut Vec<usize>, start: usize, out: &mut Vec<Vec<usize>>) {
    if current.len() == size {
        out.push(current.clone());
        return;
    }
    for i in start..n {
        current.push(i);
        push_subsets(n, size, current, i + 1, out);
        current.pop();
    }
}

/// `sum_{i <= d} C(b, i)`.
pub fn interaction_column_count(b: usize, d: usize) -> usize {
    let mut total = 0usize;
    let mut binom = 1usize;
    for i in 0..=d.min(b) {
        total += binom;
        binom = binom * (b - i) / (i + 1);
    }
    total
}

/// Expands a binary dataset into its order-`d` interaction design matrix,
/// one row per dataset row.
pub fn expand_interactions(dataset: &Dataset, d: usize) -> Result<(InteractionDesign, DMatrix<f64>)> {
    if !dataset.is_binary() {
        return Err(Error::usage("interaction expansion needs 0/1 features"));
    }
    let design = InteractionDesign::new(dataset.n_features(), d)?;
    let p = design.n_columns();
    let mut m = DMatrix::zeros(dataset.n_rows(), p);
    for (i, x) in dataset.rows().enumerate() {
        for (j, v) in design.expand_unchecked(x).into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok((design, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GlmFamily {
    GaussianIdentity,
    PoissonLog,
}

impl GlmFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            GlmFamily::GaussianIdentity => "gaussian_identity",
            GlmFamily::PoissonLog => "poisson_log",
        }
    }

    /// The boosting objective with the same loss and link.
    pub fn gbm_objective(self) -> GbmObjective {
        match self {
            GlmFamily::GaussianIdentity => GbmObjective::SquaredErrorIdentity,
            GlmFamily::PoissonLog => GbmObjective::PoissonLog,
        }
    }
}

impl fmt::Display for GlmFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GlmFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_identity" | "gaussian" | "identity" => Ok(GlmFamily::GaussianIdentity),
            "poisson_log" | "poisson" | "log" => Ok(GlmFamily::PoissonLog),
            _ => Err(Error::usage(format!("unknown GLM family `{s}`"))),
        }
    }
}

/// A fitted interaction GLM.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGlm {
    design: InteractionDesign,
    family: GlmFamily,
    coefficients: Vec<f64>,
    /// IRLS iterations used.
    pub iterations: usize,
    /// Numerical rank of the final weighted design.
    pub rank: usize,
    /// Whether IRLS hit its cap and gradient ascent finished the fit.
    pub used_fallback: bool,
}

impl InteractionGlm {
    pub fn design(&self) -> &InteractionDesign {
        &self.design
    }

    pub fn family(&self) -> GlmFamily {
        self.family
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        let row = self.design.expand_row(x)?;
        Ok(row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let eta = self.linear_predictor(x)?;
        Ok(match self.family {
            GlmFamily::GaussianIdentity => eta,
            GlmFamily::PoissonLog => eta.exp(),
        })
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        data.rows().map(|x| self.predict(x)).collect()
    }

    /// Mean per-row log-likelihood: the Poisson log-PMF, or minus half the
    /// squared error for the Gaussian family (unit variance, constants dropped).
    pub fn mean_log_likelihood(&self, data: &Dataset) -> Result<f64> {
        let mut total = 0.0;
        for (x, &y) in data.rows().zip(data.response()) {
            let mu = self.predict(x)?;
            total += match self.family {
                GlmFamily::GaussianIdentity => -0.5 * (y - mu) * (y - mu),
                GlmFamily::PoissonLog => poisson_row_objective(y, mu)?,
            };
        }
        Ok(total / data.n_rows() as f64)
    }

    /// CSV with header `subset,coefficient`, one row per design column.
    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        wtr.write_record(["subset", "coefficient"])?;
        for (j, c) in self.coefficients.iter().enumerate() {
            wtr.write_record([self.design.column_name(j), c.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Weighted least squares `min sum_g w_g (z_g - X_g b)^2` by SVD, taking the
/// minimum-norm solution when `X` is rank deficient. Returns `(b, rank)`.
fn weighted_least_squares(x: &DMatrix<f64>, w: &[f64], z: &[f64]) -> Result<(DVector<f64>, usize)> {
    let mut a = x.clone();
    let mut b = DVector::zeros(z.len());
    for (g, (&wg, &zg)) in w.iter().zip(z).enumerate() {
        let s = wg.sqrt();
        a.row_mut(g).scale_mut(s);
        b[g] = s * zg;
    }
    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * (x.nrows().max(x.ncols()) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let beta = svd
        .solve(&b, eps)
        .map_err(|e| Error::Training {
            epoch: 0,
            reason: format!("least-squares solve failed: {e}"),
        })?;
    Ok((beta, rank))
}

/// Fits the order-`d` interaction GLM by iteratively reweighted least
/// squares. Rank-deficient designs (interaction cells never observed) get the
/// minimum-norm solution and a logged warning. A Poisson fit still moving
/// after [`IRLS_MAX_ITERATIONS`] is finished by gradient ascent for up to
/// [`FALLBACK_EPOCHS`] epochs.
pub fn fit_interaction_glm(
    dataset: &Dataset,
    d: usize,
    family: GlmFamily,
    config: &FitConfig,
) -> Result<InteractionGlm> {
    config.validate()?;
    if !dataset.is_binary() {
        return Err(Error::usage("interaction GLM needs 0/1 features"));
    }
    if family == GlmFamily::PoissonLog {
        dataset.require_counts()?;
    }
    let design = InteractionDesign::new(dataset.n_features(), d)?;
    let groups = RowGroups::by_features(dataset);
    let p = design.n_columns();
    let n_groups = groups.len();
    let mut x = DMatrix::zeros(n_groups, p);
    for g in 0..n_groups {
        for (j, v) in design.expand_unchecked(groups.row(g)).into_iter().enumerate() {
            x[(g, j)] = v;
        }
    }
    let mean_y: Vec<f64> = groups
        .response_sum
        .iter()
        .zip(&groups.weight)
        .map(|(k, w)| k / w)
        .collect();

    let (beta, rank, iterations, converged) = match family {
        GlmFamily::GaussianIdentity => {
            let (beta, rank) = weighted_least_squares(&x, &groups.weight, &mean_y)?;
            (beta, rank, 1, true)
        }
        GlmFamily::PoissonLog => poisson_irls(&x, &groups, &mean_y)?,
    };
    if rank < p {
        warn!(
            "interaction GLM: design has rank {rank} < {p} columns; using the minimum-norm solution"
        );
    }

    let mut model = InteractionGlm {
        design,
        family,
        coefficients: beta.iter().copied().collect(),
        iterations,
        rank,
        used_fallback: false,
    };
    if !converged {
        warn!("interaction GLM: IRLS did not settle in {IRLS_MAX_ITERATIONS} iterations, continuing by gradient ascent");
        let expanded = expanded_dataset(dataset, &model.design)?;
        let fallback = FitConfig {
            max_epochs: FALLBACK_EPOCHS,
            ..config.clone()
        };
        let (params, trace) = ascend_glm(&expanded, model.coefficients.clone(), &fallback)?;
        if !trace.converged {
            return Err(Error::Training {
                epoch: trace.epochs,
                reason: format!(
                    "interaction GLM did not converge after {IRLS_MAX_ITERATIONS} IRLS iterations and {} ascent epochs (final mean objective {})",
                    trace.epochs,
                    trace.final_objective()
                ),
            });
        }
        model.coefficients = params;
        model.used_fallback = true;
    }
    Ok(model)
}

fn poisson_irls(
    x: &DMatrix<f64>,
    groups: &RowGroups,
    mean_y: &[f64],
) -> Result<(DVector<f64>, usize, usize, bool)> {
    let n_groups = groups.len();
    let objective = |eta: &DVector<f64>| -> f64 {
        (0..n_groups)
            .map(|g| groups.response_sum[g] * eta[g] - groups.weight[g] * eta[g].exp())
            .sum::<f64>()
            / groups.n_rows
    };
    let mut eta = DVector::from_iterator(n_groups, mean_y.iter().map(|y| (y + 0.1).ln()));
    let mut beta = DVector::zeros(x.ncols());
    let mut value = f64::NEG_INFINITY;
    let mut rank = x.ncols();
    for iter in 1..=IRLS_MAX_ITERATIONS {
        let mu: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
        let w: Vec<f64> = mu.iter().zip(&groups.weight).map(|(m, wg)| m * wg).collect();
        let z: Vec<f64> = (0..n_groups)
            .map(|g| eta[g] + (mean_y[g] - mu[g]) / mu[g])
            .collect();
        let (mut next, r) = weighted_least_squares(x, &w, &z)?;
        rank = r;
        let mut next_eta = x * &next;
        let mut next_value = objective(&next_eta);
        // Step halving keeps the likelihood from decreasing.
        let mut halvings = 0;
        while !(next_value >= value) && halvings < 30 && value.is_finite() {
            next = (&next + &beta) * 0.5;
            next_eta = x * &next;
            next_value = objective(&next_eta);
            halvings += 1;
        }
        if !next_value.is_finite() {
            return Err(Error::Training {
                epoch: iter,
                reason: "IRLS produced a non-finite likelihood".into(),
            });
        }
        let max_eta_change = (&next_eta - &eta).amax();
        let rel_change = (next_value - value).abs() / next_value.abs().max(1.0);
        beta = next;
        eta = next_eta;
        value = next_value;
        // Cells with zero counts drive their linear predictor to -infinity;
        // the likelihood still settles, so either test ends the loop.
        if iter > 1 && (max_eta_change < 1e-10 || rel_change < 1e-15) {
            return Ok((beta, rank, iter, true));
        }
    }
    Ok((beta, rank, IRLS_MAX_ITERATIONS, false))
}

/// The dataset re-expressed with every non-intercept design column as a feature.
fn expanded_dataset(dataset: &Dataset, design: &InteractionDesign) -> Result<Dataset> {
    let width = design.n_columns() - 1;
    let mut features = Vec::with_capacity(dataset.n_rows() * width);
    for x in dataset.rows() {
        features.extend_from_slice(&design.expand_unchecked(x)[1..]);
    }
    Dataset::new(width, features, dataset.response().to_vec())
}

/// The first sixteen primes, one per cell of a four-feature binary grid.
pub const HYPERCUBE_PRIMES: [f64; 16] = [
    2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0, 41.0, 43.0, 47.0, 53.0,
];
/// Learning rate and tree count of the converged boosting run.
pub const EQUIVALENCE_LEARNING_RATE: f64 = 0.5;
pub const EQUIVALENCE_TREES: usize = 4000;

/// The 16-cell grid in lexicographic order (`x1` the most significant bit),
/// cell `i` holding the `i`-th prime.
pub fn hypercube_dataset() -> Dataset {
    let rows: Vec<Vec<f64>> = (0..16)
        .map(|i| (0..4).map(|j| ((i >> (3 - j)) & 1) as f64).collect())
        .collect();
    Dataset::from_rows(&rows, HYPERCUBE_PRIMES.to_vec()).expect("grid is well formed")
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceCheck {
    pub order: usize,
    pub family: GlmFamily,
    pub gbm_predictions: Vec<f64>,
    pub glm_predictions: Vec<f64>,
    /// `max_i |gbm_i - glm_i| / |glm_i|` over the 16 cells.
    pub max_relative_difference: f64,
    /// Largest relative prediction change over the last 100 boosting rounds.
    pub gbm_final_change: f64,
}

impl EquivalenceCheck {
    /// Boosting counts as converged once its last 100 rounds move no
    /// prediction by more than 1e-9 relative.
    pub fn gbm_converged(&self) -> bool {
        self.gbm_final_change <= 1e-9
    }
}

fn max_relative_difference(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Fits an unregularized depth-`d` GBM and the order-`d` interaction GLM of
/// the same family to the prime hypercube and compares their predictions.
pub fn hypercube_equivalence_check(d: usize, family: GlmFamily) -> Result<EquivalenceCheck> {
    if !(1..=3).contains(&d) {
        return Err(Error::usage(format!("equivalence check takes d in 1..=3, got {d}")));
    }
    let data = hypercube_dataset();
    let gbm = fit_gbm(
        &data,
        &GbmConfig {
            max_depth: d,
            n_trees: EQUIVALENCE_TREES,
            learning_rate: EQUIVALENCE_LEARNING_RATE,
            objective: family.gbm_objective(),
            min_child_samples: 1,
            ..GbmConfig::default()
        },
    )?;
    let glm = fit_interaction_glm(&data, d, family, &FitConfig::default())?;
    let gbm_predictions = gbm.predict_dataset(&data)?;
    let glm_predictions = glm.predict_dataset(&data)?;
    let earlier = GbmModel::new(
        gbm.base_score(),
        gbm.learning_rate(),
        gbm.objective(),
        gbm.n_features(),
        gbm.trees()[..EQUIVALENCE_TREES - 100].to_vec(),
    )?
    .predict_dataset(&data)?;
    if gbm.max_tree_depth() > d {
        return Err(Error::Training {
            epoch: EQUIVALENCE_TREES,
            reason: "boosted tree exceeded its depth limit".into(),
        });
    }
    Ok(EquivalenceCheck {
        order: d,
        family,
        max_relative_difference: max_relative_difference(&gbm_predictions, &glm_predictions),
        gbm_final_change: max_relative_difference(&earlier, &gbm_predictions),
        gbm_predictions,
        glm_predictions,
    })
}
