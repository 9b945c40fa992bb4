//! Two-population mixture of log-linked Poisson GLMs ("mixed GLM").
//!
//! Each row comes from component `s` with prevalence `f_s`; the row
//! likelihood is `sum_s f_s Poisson(k; rate_s)`. Prevalences are fixed
//! hyperparameters and are never updated by the optimizer. All mixture
//! quantities are evaluated in log space because `rate^k e^-rate` overflows
//! for counts beyond roughly 150.
//!
//! With `f = 0.5` and identical component means the labels are not
//! identifiable; fits there are still valid but the submodel order carries no
//! meaning.

use std::cell::Cell;
use std::io::{Read, Write};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{check_dims, Dataset};
use crate::error::{Error, Result};
use crate::groups::RowGroups;
use crate::glm::{check_count, check_rate, ln_factorial, xlogy, FitConfig, ParamGradient, SubmodelParams, INIT_EPSILON};
use crate::harness::metrics::{mae, rmse};
use crate::multiresp::{read_param_rows, EXPONENT_CLAMP};
use crate::optim::{best_of_starts, AscentTrace, Objective};

/// Prevalence grid used when none is given.
pub const DEFAULT_F_GRID: [f64; 5] = [0.05, 0.15, 0.25, 0.35, 0.45];

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    submodels: Vec<SubmodelParams>,
    prevalences: Vec<f64>,
}

impl MixtureModel {
    pub fn new(submodels: Vec<SubmodelParams>, prevalences: Vec<f64>) -> Result<Self> {
        if submodels.len() < 2 {
            return Err(Error::usage("a mixture needs at least two submodels"));
        }
        if submodels.len() != prevalences.len() {
            return Err(Error::usage("one prevalence per submodel"));
        }
        check_prevalences(&prevalences)?;
        let b = submodels[0].n_features();
        if submodels.iter().any(|s| s.n_features() != b) {
            return Err(Error::usage("submodels disagree on feature count"));
        }
        Ok(MixtureModel {
            submodels,
            prevalences,
        })
    }

    pub fn submodels(&self) -> &[SubmodelParams] {
        &self.submodels
    }

    pub fn prevalences(&self) -> &[f64] {
        &self.prevalences
    }

    pub fn n_features(&self) -> usize {
        self.submodels[0].n_features()
    }

    pub fn component_rates(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.n_features(), x.len())?;
        Ok(self
            .submodels
            .iter()
            .map(|s| s.linear_predictor(x).exp())
            .collect())
    }

    /// Mixture mean `sum_s f_s rate_s`, used as the point prediction.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self
            .component_rates(x)?
            .iter()
            .zip(&self.prevalences)
            .map(|(r, f)| f * r)
            .sum())
    }

    pub fn row_objective(&self, k: f64, x: &[f64]) -> Result<f64> {
        mixture_row_objective(k, &self.component_rates(x)?, &self.prevalences)
    }

    /// Mean log-likelihood over a dataset, `ln(k!)` included.
    pub fn mean_objective(&self, dataset: &Dataset) -> Result<f64> {
        let mut total = 0.0;
        for (x, &k) in dataset.rows().zip(dataset.response()) {
            total += self.row_objective(k, x)?;
        }
        Ok(total / dataset.n_rows() as f64)
    }

    /// One row per submodel, columns `f_s,c,m1,...,mB`.
    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header = vec!["f_s".to_string(), "c".to_string()];
        header.extend((1..=self.n_features()).map(|i| format!("m{i}")));
        wtr.write_record(&header)?;
        for (s, f) in self.submodels.iter().zip(&self.prevalences) {
            wtr.write_record(std::iter::once(f.to_string()).chain(s.csv_cells()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut submodels = Vec::new();
        let mut prevalences = Vec::new();
        for (lead, cells) in read_param_rows(reader, 1)? {
            prevalences.push(lead[0]);
            submodels.push(SubmodelParams::new(cells[0], cells[1..].to_vec())?);
        }
        MixtureModel::new(submodels, prevalences)
    }
}

fn check_prevalences(prevalences: &[f64]) -> Result<()> {
    if prevalences.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
        return Err(Error::domain("prevalences must lie strictly inside (0, 1)"));
    }
    let sum: f64 = prevalences.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!("prevalences sum to {sum}, not 1")));
    }
    Ok(())
}

fn check_mixture_inputs(k: f64, rates: &[f64], prevalences: &[f64]) -> Result<()> {
    check_count(k)?;
    if rates.len() != prevalences.len() || rates.is_empty() {
        return Err(Error::usage("one rate per prevalence required"));
    }
    rates.iter().try_for_each(|&r| check_rate(r))?;
    check_prevalences(prevalences)
}

/// Per-component log joint terms `ln f_s + k ln rate_s - rate_s` and their
/// log-sum-exp.
fn log_terms(k: f64, rates: &[f64], prevalences: &[f64], terms: &mut [f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for ((t, &r), &f) in terms.iter_mut().zip(rates).zip(prevalences) {
        *t = f.ln() + xlogy(k, r) - r;
        max = max.max(*t);
    }
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

/// `ln(sum_s f_s rate_s^k e^-rate_s) - ln(k!)`.
pub fn mixture_row_objective(k: f64, rates: &[f64], prevalences: &[f64]) -> Result<f64> {
    check_mixture_inputs(k, rates, prevalences)?;
    let mut terms = vec![0.0; rates.len()];
    Ok(log_terms(k, rates, prevalences, &mut terms) - ln_factorial(k))
}

/// Posterior probability of each component for count `k`.
pub fn responsibilities(k: f64, rates: &[f64], prevalences: &[f64]) -> Result<Vec<f64>> {
    check_mixture_inputs(k, rates, prevalences)?;
    let mut terms = vec![0.0; rates.len()];
    let lse = log_terms(k, rates, prevalences, &mut terms);
    Ok(terms.iter().map(|t| (t - lse).exp()).collect())
}

/// Gradient of [`mixture_row_objective`] with respect to every component:
/// `r_s (k - rate_s) (1, x)` with `r_s` the component's responsibility.
pub fn mixture_gradient(
    k: f64,
    rates: &[f64],
    prevalences: &[f64],
    x: &[f64],
) -> Result<Vec<ParamGradient>> {
    let resp = responsibilities(k, rates, prevalences)?;
    Ok(resp
        .iter()
        .zip(rates)
        .map(|(r, &rate)| ParamGradient::scaled(r * (k - rate), x))
        .collect())
}

struct MixtureObjective {
    groups: RowGroups,
    log_prevalences: Vec<f64>,
    clamped: Cell<bool>,
}

impl Objective for MixtureObjective {
    fn n_params(&self) -> usize {
        self.log_prevalences.len() * (self.groups.n_features + 1)
    }

    fn evaluate(&self, params: &[f64], grad: &mut [f64], curv: &mut [f64]) -> f64 {
        let width = self.groups.n_features + 1;
        let groups = &self.groups;
        let s = self.log_prevalences.len();
        grad.fill(0.0);
        curv.fill(0.0);
        let mut rates = vec![0.0; s];
        let mut terms = vec![0.0; s];
        let mut value = 0.0;
        for g in 0..groups.len() {
            let x = groups.row(g);
            let (w, k) = (groups.weight[g], groups.response[g]);
            let mut max = f64::NEG_INFINITY;
            for (((rate, term), p), lf) in rates
                .iter_mut()
                .zip(terms.iter_mut())
                .zip(params.chunks_exact(width))
                .zip(&self.log_prevalences)
            {
                let eta = p[1..].iter().zip(x).fold(p[0], |a, (m, v)| a + m * v);
                let eta = if eta.abs() > EXPONENT_CLAMP {
                    self.clamped.set(true);
                    eta.clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP)
                } else {
                    eta
                };
                *rate = eta.exp();
                *term = lf + k * eta - *rate;
                max = max.max(*term);
            }
            let lse = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
            value += w * lse;
            for (((rate, term), gs), hs) in rates
                .iter()
                .zip(&terms)
                .zip(grad.chunks_exact_mut(width))
                .zip(curv.chunks_exact_mut(width))
            {
                let resp = w * (term - lse).exp();
                let scale = resp * (k - rate);
                // Complete-data Fisher information weighted by responsibility.
                let info = resp * rate;
                gs[0] += scale;
                hs[0] += info;
                for ((gm, hm), v) in gs[1..].iter_mut().zip(hs[1..].iter_mut()).zip(x) {
                    *gm += scale * v;
                    *hm += info * v * v;
                }
            }
        }
        grad.iter_mut().for_each(|g| *g /= groups.n_rows);
        curv.iter_mut().for_each(|h| *h /= groups.n_rows);
        value / groups.n_rows
    }
}

/// Fits a two-component mixture with prevalences `(f, 1 - f)` held fixed.
///
/// Both components start at the single-population intercept `ln(mean)` with
/// coefficients drawn uniformly from `[-init_scale, init_scale]`. The
/// likelihood has several local maxima, so `config.n_starts` such starts are
/// drawn in turn from one ChaCha8 stream seeded with `config.seed` and the
/// best-scoring fit is kept.
pub fn fit_mixture(dataset: &Dataset, f: f64, config: &FitConfig) -> Result<MixtureModel> {
    fit_mixture_traced(dataset, f, config).map(|(m, _)| m)
}

pub fn fit_mixture_traced(
    dataset: &Dataset,
    f: f64,
    config: &FitConfig,
) -> Result<(MixtureModel, AscentTrace)> {
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::usage(format!("prevalence f must lie in (0, 1), got {f}")));
    }
    config.validate()?;
    dataset.require_counts()?;
    let prevalences = vec![f, 1.0 - f];
    let b = dataset.n_features();
    let intercept = (dataset.mean_response() + INIT_EPSILON).ln();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut draw_init = || {
        let mut init = Vec::with_capacity(2 * (b + 1));
        for _ in 0..2 {
            init.push(intercept);
            for _ in 0..b {
                init.push(if config.init_scale == 0.0 {
                    0.0
                } else {
                    rng.random_range(-config.init_scale..=config.init_scale)
                });
            }
        }
        init
    };
    let objective = MixtureObjective {
        groups: RowGroups::by_features_and_response(dataset),
        log_prevalences: prevalences.iter().map(|p| p.ln()).collect(),
        clamped: Cell::new(false),
    };
    let (params, trace) = best_of_starts(&objective, config.n_starts, &mut draw_init, config)?;
    if objective.clamped.get() {
        warn!("mixture GLM: linear predictor clamped to +/-{EXPONENT_CLAMP} during training");
    }
    let submodels = params.chunks_exact(b + 1).map(SubmodelParams::from_flat).collect();
    Ok((MixtureModel::new(submodels, prevalences)?, trace))
}

/// Held-out scores of one prevalence in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FScore {
    pub mae: f64,
    pub rmse: f64,
    /// Mean training log-likelihood, `ln(k!)` included.
    pub objective: f64,
    pub model: MixtureModel,
}

#[derive(Debug)]
pub struct FSweepRow {
    pub f: f64,
    pub outcome: Result<FScore>,
}

/// Fits one mixture per prevalence and scores it on `test`.
///
/// Cell `i` of `f_grid` (in the order given) fits with seed `config.seed + i`;
/// rows come back sorted by `f`. A failing cell does not stop the sweep.
pub fn sweep_f(train: &Dataset, test: &Dataset, f_grid: &[f64], config: &FitConfig) -> Result<Vec<FSweepRow>> {
    if f_grid.is_empty() {
        return Err(Error::usage("prevalence grid is empty"));
    }
    if let Some(f) = f_grid.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
        return Err(Error::usage(format!("prevalence {f} outside (0, 1)")));
    }
    let mut rows: Vec<FSweepRow> = f_grid
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let cell_config = FitConfig {
                seed: config.seed.wrapping_add(i as u64),
                ..config.clone()
            };
            let outcome = fit_mixture(train, f, &cell_config).and_then(|model| {
                let preds = test.rows().map(|x| model.predict(x)).collect::<Result<Vec<_>>>()?;
                Ok(FScore {
                    mae: mae(&preds, test.response())?,
                    rmse: rmse(&preds, test.response())?,
                    objective: model.mean_objective(train)?,
                    model,
                })
            });
            FSweepRow { f, outcome }
        })
        .collect();
    rows.sort_by(|a, b| a.f.total_cmp(&b.f));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{fit_glm, log_link_predict, poisson_gradient, poisson_row_objective};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn identical_components_collapse() {
        for f in [0.1, 0.5, 0.83] {
            for k in [0.0, 1.0, 7.0] {
                let m = mixture_row_objective(k, &[2.5, 2.5], &[f, 1.0 - f]).unwrap();
                assert_relative_eq!(m, poisson_row_objective(k, 2.5).unwrap(), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_prevalence_limit() {
        let f = 1.0 - 1e-15;
        for k in [0.0, 3.0, 12.0] {
            let m = mixture_row_objective(k, &[3.0, 9.0], &[f, 1.0 - f]).unwrap();
            assert!((m - poisson_row_objective(k, 3.0).unwrap()).abs() < 1e-9);

            let g = mixture_gradient(k, &[3.0, 9.0], &[f, 1.0 - f], &[1.0, 0.0]).unwrap();
            let p = poisson_gradient(k, 3.0, &[1.0, 0.0]).unwrap();
            assert!((g[0].intercept - p.intercept).abs() < 1e-9);
            assert!((g[0].coefficients[0] - p.coefficients[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn direct_evaluation_example() {
        // ln(0.25 * 1 * e^-1 + 0.75 * 16 * e^-4) - ln 2!
        let expected = (0.25 * (-1f64).exp() + 0.75 * 16.0 * (-4f64).exp()).ln() - 2f64.ln();
        let got = mixture_row_objective(2.0, &[1.0, 4.0], &[0.25, 0.75]).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-13);
    }

    #[test]
    fn large_counts_stay_finite() {
        let v = mixture_row_objective(400.0, &[380.0, 2.0], &[0.3, 0.7]).unwrap();
        assert!(v.is_finite());
        let r = responsibilities(400.0, &[380.0, 2.0], &[0.3, 0.7]).unwrap();
        assert!(r[0] > 0.999_999);
    }

    #[test]
    fn stationary_when_both_rates_equal_the_count() {
        let g = mixture_gradient(4.0, &[4.0, 4.0], &[0.3, 0.7], &[1.0, 1.0]).unwrap();
        assert!(g.iter().all(|s| s.intercept == 0.0 && s.coefficients.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn domain_errors() {
        assert!(mixture_row_objective(1.0, &[0.0, 1.0], &[0.5, 0.5]).is_err());
        assert!(mixture_row_objective(1.0, &[1.0, 1.0], &[0.5, 0.6]).is_err());
        assert!(mixture_row_objective(1.0, &[1.0, 1.0], &[1.0, 0.0]).is_err());
        assert!(mixture_row_objective(-1.0, &[1.0, 1.0], &[0.5, 0.5]).is_err());
    }

    fn mixture_objective_flat(k: f64, flat: &[f64], width: usize, x: &[f64], prev: &[f64]) -> f64 {
        let rates: Vec<f64> = flat
            .chunks_exact(width)
            .map(|p| SubmodelParams::from_flat(p).linear_predictor(x).exp())
            .collect();
        mixture_row_objective(k, &rates, prev).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn gradient_matches_finite_differences(
            seed in any::<u64>(),
            b in 1usize..=6,
            k in 0u32..=50,
            f in 0.02f64..0.98,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let width = b + 1;
            let flat: Vec<f64> = (0..2 * width).map(|_| rng.random_range(-0.8..0.8)).collect();
            let x: Vec<f64> = (0..b).map(|_| rng.random_range(0..=1) as f64).collect();
            let prev = [f, 1.0 - f];
            let k = k as f64;
            let model = MixtureModel::new(flat.chunks_exact(width).map(SubmodelParams::from_flat).collect(), prev.to_vec()).unwrap();
            let rates = model.component_rates(&x).unwrap();
            let analytic: Vec<f64> = mixture_gradient(k, &rates, &prev, &x)
                .unwrap()
                .into_iter()
                .flat_map(|g| std::iter::once(g.intercept).chain(g.coefficients))
                .collect();
            let h = 1e-5;
            for i in 0..flat.len() {
                let mut up = flat.clone();
                let mut dn = flat.clone();
                up[i] += h;
                dn[i] -= h;
                let numeric = (mixture_objective_flat(k, &up, width, &x, &prev)
                    - mixture_objective_flat(k, &dn, width, &x, &prev)) / (2.0 * h);
                let scale = analytic[i].abs().max(numeric.abs()).max(1.0);
                prop_assert!((analytic[i] - numeric).abs() / scale < 1e-6,
                    "param {}: {} vs {}", i, analytic[i], numeric);
            }
        }

        #[test]
        fn label_swap_is_exact(
            k in 0u32..60,
            ra in 0.01f64..80.0,
            rb in 0.01f64..80.0,
            f in 0.01f64..0.99,
        ) {
            let k = k as f64;
            let a = mixture_row_objective(k, &[ra, rb], &[f, 1.0 - f]).unwrap();
            let b = mixture_row_objective(k, &[rb, ra], &[1.0 - f, f]).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }

        #[test]
        fn responsibilities_form_a_distribution(
            k in 0u32..200,
            ra in 0.01f64..150.0,
            rb in 0.01f64..150.0,
            f in 0.01f64..0.99,
        ) {
            let r = responsibilities(k as f64, &[ra, rb], &[f, 1.0 - f]).unwrap();
            prop_assert!(r.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_parameters_collapse_to_glm() {
        let p = SubmodelParams::new(0.4, vec![0.3, -0.6]).unwrap();
        let m = MixtureModel::new(vec![p.clone(), p.clone()], vec![0.2, 0.8]).unwrap();
        for x in [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]] {
            let glm = log_link_predict(&p, &x).unwrap();
            assert_relative_eq!(m.predict(&x).unwrap(), glm, max_relative = 1e-14);
            for k in [0.0, 2.0, 5.0] {
                assert_relative_eq!(
                    m.row_objective(k, &x).unwrap(),
                    poisson_row_objective(k, glm).unwrap(),
                    max_relative = 1e-12
                );
            }
        }
    }

    fn homogeneous_poisson(n: usize, seed: u64) -> Dataset {
        use rand_distr::{Distribution, Poisson};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(0..=1) as f64).collect();
            let rate = (0.8 + 0.5 * x[0] - 0.3 * x[1]).exp();
            y.push(Poisson::new(rate).unwrap().sample(&mut rng));
            rows.push(x);
        }
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn homogeneous_data_matches_single_glm() {
        let ds = homogeneous_poisson(2000, 3);
        let glm = fit_glm(&ds, &FitConfig::default()).unwrap();
        let mean = ds.mean_response();
        for f in [0.25, 0.6] {
            let m = fit_mixture(&ds, f, &FitConfig { seed: 9, ..FitConfig::default() }).unwrap();
            for x in ds.rows().take(50) {
                let diff = (m.predict(x).unwrap() - log_link_predict(&glm, x).unwrap()).abs();
                assert!(diff < 0.05 * mean, "f={f}: diff {diff}");
            }
        }
    }

    #[test]
    fn sweep_single_cell_matches_direct_fit() {
        let train = homogeneous_poisson(500, 1);
        let test = homogeneous_poisson(500, 2);
        let config = FitConfig { seed: 4, ..FitConfig::default() };
        let rows = sweep_f(&train, &test, &[0.25], &config).unwrap();
        assert_eq!(rows.len(), 1);
        let direct = fit_mixture(&train, 0.25, &config).unwrap();
        assert_eq!(rows[0].outcome.as_ref().unwrap().model, direct);
    }

    #[test]
    fn sweep_sorts_by_prevalence() {
        let train = homogeneous_poisson(200, 1);
        let rows = sweep_f(&train, &train, &[0.4, 0.1, 0.25], &FitConfig::default()).unwrap();
        let fs: Vec<f64> = rows.iter().map(|r| r.f).collect();
        assert_eq!(fs, vec![0.1, 0.25, 0.4]);
        assert!(sweep_f(&train, &train, &[], &FitConfig::default()).is_err());
        assert!(sweep_f(&train, &train, &[1.0], &FitConfig::default()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let m = MixtureModel::new(
            vec![
                SubmodelParams::new(0.1, vec![0.5]).unwrap(),
                SubmodelParams::new(-0.2, vec![1.5]).unwrap(),
            ],
            vec![0.25, 0.75],
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_csv_to(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("f_s,c,m1\n"));
        assert_eq!(MixtureModel::from_csv_reader(&buf[..]).unwrap(), m);
    }
}
