//! Composite-response Poisson GLM ("multiresp").
//!
//! The observed count is modelled as the sum of `S` unobserved Poisson
//! sub-responses, each with its own log-linked rate. The total rate is
//! `sum_s exp(c_s + m_s . x)` and the likelihood is Poisson in that total.

use std::cell::Cell;
use std::io::{Read, Write};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{check_dims, Dataset};
use crate::error::{Error, Result};
use crate::groups::RowGroups;
use crate::glm::{check_rate, FitConfig, ParamGradient, SubmodelParams, INIT_EPSILON};
use crate::optim::{best_of_starts, AscentTrace, Objective};

/// Linear predictors are clamped to this range while training.
pub const EXPONENT_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MultirespModel {
    submodels: Vec<SubmodelParams>,
}

impl MultirespModel {
    pub fn new(submodels: Vec<SubmodelParams>) -> Result<Self> {
        let b = match submodels.first() {
            Some(s) => s.n_features(),
            None => return Err(Error::usage("multiresp model needs at least one submodel")),
        };
        if submodels.iter().any(|s| s.n_features() != b) {
            return Err(Error::usage("submodels disagree on feature count"));
        }
        Ok(MultirespModel { submodels })
    }

    pub fn submodels(&self) -> &[SubmodelParams] {
        &self.submodels
    }

    pub fn n_submodels(&self) -> usize {
        self.submodels.len()
    }

    pub fn n_features(&self) -> usize {
        self.submodels[0].n_features()
    }

    /// Free parameters: `S (B + 1)`.
    pub fn n_params(&self) -> usize {
        self.n_submodels() * (self.n_features() + 1)
    }

    pub fn submodel_rates(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.n_features(), x.len())?;
        Ok(self
            .submodels
            .iter()
            .map(|s| s.linear_predictor(x).exp())
            .collect())
    }

    /// Sum of the submodel rates, added in ascending order so the result
    /// does not depend on the order of the submodels.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut rates = self.submodel_rates(x)?;
        rates.sort_by(f64::total_cmp);
        Ok(rates.iter().sum())
    }

    /// One row per submodel, columns `c,m1,...,mB`.
    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header = vec!["c".to_string()];
        header.extend((1..=self.n_features()).map(|i| format!("m{i}")));
        wtr.write_record(&header)?;
        for s in &self.submodels {
            wtr.write_record(s.csv_cells())?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let rows = read_param_rows(reader, 0)?;
        let submodels = rows
            .into_iter()
            .map(|(_, cells)| SubmodelParams::new(cells[0], cells[1..].to_vec()))
            .collect::<Result<Vec<_>>>()?;
        MultirespModel::new(submodels)
    }
}

/// Reads parameter CSV rows, returning `(leading, params)` where `leading`
/// holds the first `lead` cells of each row.
pub(crate) fn read_param_rows<R: Read>(reader: R, lead: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let width = rdr.headers()?.len();
    if width < lead + 2 {
        return Err(Error::parse(1, "parameter file needs an intercept and a coefficient"));
    }
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != width {
            return Err(Error::parse(line, "row width differs from header"));
        }
        let values = record
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("bad number `{c}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let (head, tail) = values.split_at(lead);
        out.push((head.to_vec(), tail.to_vec()));
    }
    Ok(out)
}

pub fn multiresp_predict(model: &MultirespModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

/// Gradient of the composite row objective with respect to every submodel:
/// `((k - rate) / rate) * rate_s * (1, x)` where `rate = sum_s rate_s`.
pub fn multiresp_gradient(
    k: f64,
    submodel_rates: &[f64],
    total_rate: f64,
    x: &[f64],
) -> Result<Vec<ParamGradient>> {
    check_rate(total_rate)?;
    let ratio = (k - total_rate) / total_rate;
    Ok(submodel_rates
        .iter()
        .map(|&r| ParamGradient::scaled(ratio * r, x))
        .collect())
}

pub(crate) struct CompositeObjective {
    pub groups: RowGroups,
    pub n_submodels: usize,
    pub clamped: Cell<bool>,
}

impl CompositeObjective {
    pub fn new(data: &Dataset, n_submodels: usize) -> Self {
        CompositeObjective {
            groups: RowGroups::by_features(data),
            n_submodels,
            clamped: Cell::new(false),
        }
    }
}

impl Objective for CompositeObjective {
    fn n_params(&self) -> usize {
        self.n_submodels * (self.groups.n_features + 1)
    }

    fn evaluate(&self, params: &[f64], grad: &mut [f64], curv: &mut [f64]) -> f64 {
        let width = self.groups.n_features + 1;
        let groups = &self.groups;
        grad.fill(0.0);
        curv.fill(0.0);
        let mut rates = vec![0.0; self.n_submodels];
        let mut value = 0.0;
        for g in 0..groups.len() {
            let x = groups.row(g);
            let (w, k) = (groups.weight[g], groups.response_sum[g]);
            let mut total = 0.0;
            for (rate, p) in rates.iter_mut().zip(params.chunks_exact(width)) {
                let eta = p[1..].iter().zip(x).fold(p[0], |a, (m, v)| a + m * v);
                let eta = if eta.abs() > EXPONENT_CLAMP {
                    self.clamped.set(true);
                    eta.clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP)
                } else {
                    eta
                };
                *rate = eta.exp();
                total += *rate;
            }
            value += if k == 0.0 { -w * total } else { k * total.ln() - w * total };
            let ratio = (k - w * total) / total;
            for ((rate, gs), hs) in rates
                .iter()
                .zip(grad.chunks_exact_mut(width))
                .zip(curv.chunks_exact_mut(width))
            {
                let scale = ratio * rate;
                // Fisher information of the summed Poisson rate.
                let info = w * rate * rate / total;
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

/// Initial parameters for `S` submodels. A single submodel starts at the
/// intercept-only MLE; with more, each submodel gets `ln(mean / S)` and
/// coefficients drawn uniformly from `[-init_scale, init_scale]`, submodel by
/// submodel, from `rng`.
pub(crate) fn symmetry_broken_init(
    dataset: &Dataset,
    n_submodels: usize,
    init_scale: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let b = dataset.n_features();
    let intercept = (dataset.mean_response() / n_submodels as f64 + INIT_EPSILON).ln();
    let mut init = Vec::with_capacity(n_submodels * (b + 1));
    for _ in 0..n_submodels {
        init.push(intercept);
        for _ in 0..b {
            init.push(if n_submodels == 1 || init_scale == 0.0 {
                0.0
            } else {
                rng.random_range(-init_scale..=init_scale)
            });
        }
    }
    init
}

pub fn fit_multiresp(dataset: &Dataset, n_submodels: usize, config: &FitConfig) -> Result<MultirespModel> {
    fit_multiresp_traced(dataset, n_submodels, config).map(|(m, _)| m)
}

pub fn fit_multiresp_traced(
    dataset: &Dataset,
    n_submodels: usize,
    config: &FitConfig,
) -> Result<(MultirespModel, AscentTrace)> {
    if n_submodels == 0 {
        return Err(Error::usage("S must be at least 1"));
    }
    config.validate()?;
    dataset.require_counts()?;
    let objective = CompositeObjective::new(dataset, n_submodels);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // A single submodel starts at the same point every time.
    let starts = if n_submodels == 1 { 1 } else { config.n_starts };
    let (params, trace) = best_of_starts(
        &objective,
        starts,
        || symmetry_broken_init(dataset, n_submodels, config.init_scale, &mut rng),
        config,
    )?;
    if objective.clamped.get() {
        warn!("multiresp: linear predictor clamped to +/-{EXPONENT_CLAMP} during training");
    }
    let submodels = params
        .chunks_exact(dataset.n_features() + 1)
        .map(SubmodelParams::from_flat)
        .collect();
    Ok((MultirespModel::new(submodels)?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{fit_glm, log_link_predict, poisson_gradient, poisson_row_objective};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn composite_row_objective(k: f64, flat: &[f64], width: usize, x: &[f64]) -> f64 {
        let total: f64 = flat
            .chunks_exact(width)
            .map(|p| SubmodelParams::from_flat(p).linear_predictor(x).exp())
            .sum();
        poisson_row_objective(k, total).unwrap()
    }

    #[test]
    fn predict_examples() {
        let m = MultirespModel::new(vec![SubmodelParams::zeros(3); 2]).unwrap();
        assert_eq!(m.predict(&[1.0, 0.0, 1.0]).unwrap(), 2.0);

        let single = SubmodelParams::new(0.3, vec![-0.2, 0.7]).unwrap();
        let m = MultirespModel::new(vec![single.clone()]).unwrap();
        for x in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            assert_eq!(m.predict(&x).unwrap(), log_link_predict(&single, &x).unwrap());
        }
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn composite_generator_rates() {
        // Each sign pattern as a log-linear submodel: '+' means 2^(2x-1), so
        // c = -sum(s) ln 2 and m_i = 2 s_i ln 2.
        let patterns = [[1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0], [1.0, -1.0, -1.0, 1.0]];
        let ln2 = 2f64.ln();
        let submodels = patterns
            .iter()
            .map(|s| {
                SubmodelParams::new(
                    -s.iter().sum::<f64>() * ln2,
                    s.iter().map(|v| 2.0 * v * ln2).collect(),
                )
                .unwrap()
            })
            .collect();
        let m = MultirespModel::new(submodels).unwrap();
        // Four heads: every pattern has two doublings and two halvings.
        assert_relative_eq!(m.predict(&[1.0; 4]).unwrap(), 3.0, max_relative = 1e-12);
        // Heads, heads, tails, tails: A = 2^4, B = C = 1.
        assert_relative_eq!(
            m.predict(&[1.0, 1.0, 0.0, 0.0]).unwrap(),
            18.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn gradient_reduces_to_single_poisson() {
        let x = [1.0, 0.0, 1.0];
        let g = multiresp_gradient(4.0, &[2.5], 2.5, &x).unwrap();
        let p = poisson_gradient(4.0, 2.5, &x).unwrap();
        assert_relative_eq!(g[0].intercept, p.intercept, max_relative = 1e-15);
        for (a, b) in g[0].coefficients.iter().zip(&p.coefficients) {
            assert_relative_eq!(*a, *b, max_relative = 1e-15);
        }
        let g = multiresp_gradient(5.0, &[2.0, 3.0], 5.0, &x).unwrap();
        assert!(g.iter().all(|s| s.intercept == 0.0 && s.coefficients.iter().all(|&v| v == 0.0)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn gradient_matches_finite_differences(
            s in 1usize..=3,
            b in 1usize..=6,
            seed in any::<u64>(),
            k in 0u32..30,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let width = b + 1;
            let flat: Vec<f64> = (0..s * width).map(|_| rng.random_range(-0.7..0.7)).collect();
            let x: Vec<f64> = (0..b).map(|_| rng.random_range(0..=1) as f64).collect();
            let k = k as f64;
            let model = MultirespModel::new(flat.chunks_exact(width).map(SubmodelParams::from_flat).collect()).unwrap();
            let rates = model.submodel_rates(&x).unwrap();
            let total: f64 = rates.iter().sum();
            let analytic: Vec<f64> = multiresp_gradient(k, &rates, total, &x)
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
                let numeric = (composite_row_objective(k, &up, width, &x)
                    - composite_row_objective(k, &dn, width, &x)) / (2.0 * h);
                let scale = analytic[i].abs().max(numeric.abs()).max(1.0);
                prop_assert!((analytic[i] - numeric).abs() / scale < 1e-6,
                    "param {}: {} vs {}", i, analytic[i], numeric);
            }
        }

        #[test]
        fn permuting_submodels_keeps_predictions(seed in any::<u64>(), s in 2usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let subs: Vec<SubmodelParams> = (0..s)
                .map(|_| SubmodelParams::new(rng.random_range(-1.0..1.0), (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
                .collect();
            let mut reversed = subs.clone();
            reversed.reverse();
            let mut rotated = subs.clone();
            rotated.rotate_left(1);
            let a = MultirespModel::new(subs).unwrap();
            let b = MultirespModel::new(reversed).unwrap();
            let c = MultirespModel::new(rotated).unwrap();
            for mask in 0..8u32 {
                let x: Vec<f64> = (0..3).map(|i| ((mask >> i) & 1) as f64).collect();
                let pa = a.predict(&x).unwrap();
                prop_assert_eq!(pa.to_bits(), b.predict(&x).unwrap().to_bits());
                prop_assert_eq!(pa.to_bits(), c.predict(&x).unwrap().to_bits());
            }
        }
    }

    fn small_counts() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..16)
            .map(|i| (0..2).map(|j| ((i >> j) & 1) as f64).collect())
            .collect();
        let y = (0..16).map(|i| ((i * 7) % 5 + (i % 4)) as f64).collect();
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn single_submodel_matches_glm() {
        let ds = small_counts();
        let config = FitConfig::default();
        let m = fit_multiresp(&ds, 1, &config).unwrap();
        let g = fit_glm(&ds, &config).unwrap();
        for x in ds.rows() {
            let a = m.predict(x).unwrap();
            let b = log_link_predict(&g, x).unwrap();
            assert!((a - b).abs() <= 1e-8 * b, "{a} vs {b}");
        }
        assert_eq!(m.n_params(), 3);
    }

    #[test]
    fn csv_round_trip() {
        let m = MultirespModel::new(vec![
            SubmodelParams::new(0.1, vec![0.2, -0.3]).unwrap(),
            SubmodelParams::new(-1.0 / 3.0, vec![1e-17, 4.0]).unwrap(),
        ])
        .unwrap();
        let mut buf = Vec::new();
        m.write_csv_to(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("c,m1,m2\n"));
        assert_eq!(MultirespModel::from_csv_reader(&buf[..]).unwrap(), m);
    }

    #[test]
    fn rejects_zero_submodels() {
        assert!(fit_multiresp(&small_counts(), 0, &FitConfig::default()).is_err());
        assert!(MultirespModel::new(vec![]).is_err());
    }

    #[test]
    fn seeded_fits_are_deterministic() {
        let ds = small_counts();
        let config = FitConfig { seed: 5, ..FitConfig::default() };
        assert_eq!(fit_multiresp(&ds, 2, &config).unwrap(), fit_multiresp(&ds, 2, &config).unwrap());
    }
}
