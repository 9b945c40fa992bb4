//! Log-linked Poisson GLM: prediction, per-row objective, analytic gradient,
//! and fitting by gradient ascent.
//!
//! The per-row objective is the log of the Poisson PMF,
//! `k ln(rate) - rate - ln(k!)`, and it is *maximized*. It is called the
//! deviance throughout this crate even though it is a log-likelihood; the
//! sign convention is kept so reported values read the same everywhere.
//! During optimization the `ln(k!)` term is dropped since it does not depend
//! on the parameters.

use statrs::function::gamma::ln_gamma;

use crate::data::{check_dims, Dataset};
use crate::error::{Error, Result};
use crate::groups::RowGroups;
use crate::optim::{gradient_ascent, AscentTrace, Objective};

/// Added to the mean response before taking its log at initialization.
pub const INIT_EPSILON: f64 = 1e-9;

/// Intercept and per-feature coefficients of one log-linked linear predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmodelParams {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl SubmodelParams {
    pub fn new(intercept: f64, coefficients: Vec<f64>) -> Result<Self> {
        if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("submodel parameters must be finite"));
        }
        Ok(SubmodelParams {
            intercept,
            coefficients,
        })
    }

    pub fn zeros(n_features: usize) -> Self {
        SubmodelParams {
            intercept: 0.0,
            coefficients: vec![0.0; n_features],
        }
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    /// `intercept + coefficients . x`, without dimension checks.
    #[inline]
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .zip(x)
            .fold(self.intercept, |acc, (m, v)| acc + m * v)
    }

    pub(crate) fn from_flat(chunk: &[f64]) -> Self {
        SubmodelParams {
            intercept: chunk[0],
            coefficients: chunk[1..].to_vec(),
        }
    }

    pub(crate) fn csv_cells(&self) -> impl Iterator<Item = String> + '_ {
        std::iter::once(self.intercept)
            .chain(self.coefficients.iter().copied())
            .map(|v| v.to_string())
    }
}

/// Gradient of a row objective with respect to one submodel's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl ParamGradient {
    /// Gradient `scale * (1, x)`: every log-linked parameter enters through
    /// the linear predictor, so its gradient is the predictor's times `x_n`.
    pub(crate) fn scaled(scale: f64, x: &[f64]) -> Self {
        ParamGradient {
            intercept: scale,
            coefficients: x.iter().map(|v| scale * v).collect(),
        }
    }
}

/// Settings for the gradient-ascent fitters.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Initial step size in units of a curvature-scaled gradient step, so
    /// 1.0 is a diagonal Newton step; adapted during the run.
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop once the relative improvement of the mean row objective stays at
    /// or below this for five consecutive epochs.
    pub tolerance: f64,
    /// Half-width of the uniform coefficient initialization used to break
    /// symmetry between submodels.
    pub init_scale: f64,
    /// Independent random starts for the non-convex fitters (composite with
    /// more than one submodel, mixtures); the start with the highest final
    /// objective wins. Convex fits ignore it.
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            learning_rate: 1.0,
            max_epochs: 20_000,
            tolerance: 1e-10,
            init_scale: 0.1,
            n_starts: 8,
            seed: 0,
        }
    }
}

impl FitConfig {
    /// Defaults for two-population mixtures: coefficient starts spread over
    /// `[-1, 1]`, wide enough that the random starts reach different basins.
    pub fn for_mixture() -> Self {
        FitConfig {
            init_scale: 1.0,
            ..FitConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::usage("learning_rate must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::usage("max_epochs must be positive"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::usage("tolerance must be non-negative"));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::usage("init_scale must be non-negative"));
        }
        if self.n_starts == 0 {
            return Err(Error::usage("n_starts must be at least 1"));
        }
        Ok(())
    }
}

pub fn log_link_predict(params: &SubmodelParams, x: &[f64]) -> Result<f64> {
    check_dims(params.n_features(), x.len())?;
    Ok(params.linear_predictor(x).exp())
}

/// `ln(k!)`, exact for k in {0, 1}.
pub fn ln_factorial(k: f64) -> f64 {
    if k < 2.0 {
        0.0
    } else {
        ln_gamma(k + 1.0)
    }
}

pub(crate) fn check_count(k: f64) -> Result<()> {
    if k >= 0.0 && k.fract() == 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "count must be a non-negative integer, got {k}"
        )))
    }
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "rate must be positive and finite, got {rate}"
        )))
    }
}

/// Log Poisson PMF of count `k` at `rate`, `ln(k!)` included.
pub fn poisson_row_objective(k: f64, rate: f64) -> Result<f64> {
    check_count(k)?;
    check_rate(rate)?;
    Ok(xlogy(k, rate) - rate - ln_factorial(k))
}

/// `k ln(rate)` with the `0 ln 0 = 0` convention.
#[inline]
pub(crate) fn xlogy(k: f64, rate: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * rate.ln()
    }
}

/// Gradient of [`poisson_row_objective`] at `rate = exp(c + m.x)` with respect
/// to `c` and `m`: `(k - rate)` and `(k - rate) x`.
pub fn poisson_gradient(k: f64, rate: f64, x: &[f64]) -> Result<ParamGradient> {
    check_rate(rate)?;
    Ok(ParamGradient::scaled(k - rate, x))
}

/// Mean log-likelihood of `dataset` under per-row rates from `rate_of`,
/// `ln(k!)` included.
pub fn mean_poisson_objective<F>(dataset: &Dataset, mut rate_of: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut total = 0.0;
    for (x, &k) in dataset.rows().zip(dataset.response()) {
        total += poisson_row_objective(k, rate_of(x)?)?;
    }
    Ok(total / dataset.n_rows() as f64)
}

/// Single log-linked Poisson GLM objective over a dataset.
struct GlmObjective {
    groups: RowGroups,
}

impl Objective for GlmObjective {
    fn n_params(&self) -> usize {
        self.groups.n_features + 1
    }

    fn evaluate(&self, params: &[f64], grad: &mut [f64], curv: &mut [f64]) -> f64 {
        grad.fill(0.0);
        curv.fill(0.0);
        let (intercept, coefs) = params.split_first().expect("at least an intercept");
        let (g_intercept, g_coefs) = grad.split_first_mut().expect("same length");
        let (h_intercept, h_coefs) = curv.split_first_mut().expect("same length");
        let groups = &self.groups;
        let mut value = 0.0;
        for g in 0..groups.len() {
            let x = groups.row(g);
            let (w, k) = (groups.weight[g], groups.response_sum[g]);
            let eta = coefs.iter().zip(x).fold(*intercept, |a, (m, v)| a + m * v);
            let rate = eta.exp();
            value += k * eta - w * rate;
            let resid = k - w * rate;
            *g_intercept += resid;
            *h_intercept += w * rate;
            for ((gm, hm), v) in g_coefs.iter_mut().zip(h_coefs.iter_mut()).zip(x) {
                *gm += resid * v;
                *hm += w * rate * v * v;
            }
        }
        grad.iter_mut().for_each(|g| *g /= groups.n_rows);
        curv.iter_mut().for_each(|h| *h /= groups.n_rows);
        value / groups.n_rows
    }
}

/// Gradient ascent on the Poisson GLM objective from `init` (intercept first).
pub(crate) fn ascend_glm(
    dataset: &Dataset,
    init: Vec<f64>,
    config: &FitConfig,
) -> Result<(Vec<f64>, AscentTrace)> {
    let objective = GlmObjective {
        groups: RowGroups::by_features(dataset),
    };
    gradient_ascent(&objective, init, config)
}

/// Fits a single log-linked Poisson GLM. Starts from the intercept-only MLE.
pub fn fit_glm(dataset: &Dataset, config: &FitConfig) -> Result<SubmodelParams> {
    fit_glm_traced(dataset, config).map(|(p, _)| p)
}

pub fn fit_glm_traced(
    dataset: &Dataset,
    config: &FitConfig,
) -> Result<(SubmodelParams, AscentTrace)> {
    config.validate()?;
    dataset.require_counts()?;
    let mut init = Vec::with_capacity(dataset.n_features() + 1);
    init.push((dataset.mean_response() + INIT_EPSILON).ln());
    init.resize(dataset.n_features() + 1, 0.0);
    let (params, trace) = ascend_glm(dataset, init, config)?;
    Ok((SubmodelParams::from_flat(&params), trace))
}
