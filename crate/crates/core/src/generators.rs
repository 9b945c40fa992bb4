//! Seeded synthetic benchmark generators.
//!
//! Every generator draws from a ChaCha8 stream seeded with the spec's seed
//! (`ChaCha8Rng::seed_from_u64`). Draws are row-major: all draws for row `j`
//! happen before any draw for row `j + 1`. Within a row the order is listed on
//! each generator. Coin flips are `u < p` for a uniform `u` in `[0, 1)`;
//! Gaussian and Poisson draws use `rand_distr`'s `StandardNormal` and
//! `Poisson`.
//!
//! Only the columns a model is allowed to see become features. Latent
//! quantities (true rates, population labels) are returned separately.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::data::{Dataset, Scenario};
use crate::error::{Error, Result};

/// Sign patterns of the three composite sub-responses over four coins.
/// `+1` doubles the rate on heads and halves it on tails; `-1` the reverse.
pub const COMPOSITE_PATTERNS: [[i8; 4]; 3] = [[1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]];

/// Eight-coin sign patterns: the four-coin patterns written out twice.
/// Coins 1 and 5 carry the same sign in all three sub-responses; the other
/// six differ between sub-responses.
pub const COMPOSITE_SCALED_PATTERNS: [[i8; 8]; 3] = [
    [1, 1, -1, -1, 1, 1, -1, -1],
    [1, -1, 1, -1, 1, -1, 1, -1],
    [1, -1, -1, 1, 1, -1, -1, 1],
];

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub seed: u64,
    /// Scenario parameters that replace the defaults, see [`ScenarioSpec::parameters`].
    pub overrides: BTreeMap<String, f64>,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, n: usize, seed: u64) -> Self {
        ScenarioSpec {
            scenario,
            n,
            seed,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_override(mut self, key: &str, value: f64) -> Self {
        self.overrides.insert(key.to_string(), value);
        self
    }

    /// Default parameters of each scenario and their allowed ranges.
    fn defaults(&self) -> Vec<(&'static str, f64, f64, f64)> {
        match self.scenario {
            Scenario::InsufficientLearning => vec![("m", 10.0, 1.0, 1e4), ("theta", 0.5, 0.0, 1.0)],
            Scenario::Mixture => vec![("prevalence", 0.25, 0.0, 1.0)],
            Scenario::MissingFeatures => vec![
                ("m", 6.0, 1.0, 60.0),
                ("visible", 3.0, 1.0, 60.0),
                ("flip", 0.1, 0.0, 1.0),
            ],
            _ => vec![],
        }
    }

    /// Effective parameters: defaults with overrides applied and validated.
    pub fn parameters(&self) -> Result<BTreeMap<String, f64>> {
        if self.n == 0 {
            return Err(Error::usage("n must be at least 1"));
        }
        if self.scenario == Scenario::External {
            return Err(Error::usage("external datasets are loaded, not generated"));
        }
        let defaults = self.defaults();
        let mut params: BTreeMap<String, f64> =
            defaults.iter().map(|(k, v, _, _)| (k.to_string(), *v)).collect();
        for (key, &value) in &self.overrides {
            let Some(&(_, _, lo, hi)) = defaults.iter().find(|(k, ..)| k == key) else {
                return Err(Error::usage(format!(
                    "scenario {} has no parameter `{key}`",
                    self.scenario
                )));
            };
            if !(value >= lo && value <= hi) {
                return Err(Error::usage(format!("{key}={value} outside [{lo}, {hi}]")));
            }
            params.insert(key.clone(), value);
        }
        for key in ["m", "visible"] {
            if let Some(v) = params.get(key) {
                if v.fract() != 0.0 {
                    return Err(Error::usage(format!("{key} must be an integer")));
                }
            }
        }
        if let (Some(&m), Some(&vis)) = (params.get("m"), params.get("visible")) {
            if vis > m {
                return Err(Error::usage("visible must not exceed m"));
            }
        }
        if self.scenario == Scenario::Mixture {
            let p = params["prevalence"];
            if p <= 0.0 || p >= 1.0 {
                return Err(Error::usage("prevalence must lie strictly inside (0, 1)"));
            }
        }
        Ok(params)
    }
}

/// A generated dataset with its latent per-row values.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub dataset: Dataset,
    pub parameters: BTreeMap<String, f64>,
    /// Per-row latent values keyed by name, e.g. `rate` (the mean the
    /// response was drawn around) or `k` (population label).
    pub latent: BTreeMap<String, Vec<f64>>,
}

impl Generated {
    /// Sidecar text: one `key=value` per line.
    pub fn metadata_text(&self) -> String {
        let ds = &self.dataset;
        let mut out = String::new();
        let _ = writeln!(out, "scenario={}", ds.scenario());
        let _ = writeln!(out, "seed={}", ds.seed());
        let _ = writeln!(out, "n={}", ds.n_rows());
        let _ = writeln!(out, "n_features={}", ds.n_features());
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "param.{k}={v}");
        }
        let _ = writeln!(out, "response.mean={}", ds.mean_response());
        for (name, values) in &self.latent {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let _ = writeln!(out, "latent.{name}.mean={mean}");
        }
        out
    }
}

fn coin(rng: &mut ChaCha8Rng, p: f64) -> bool {
    rng.random::<f64>() < p
}

fn poisson(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    Poisson::new(rate)
        .expect("generator rates are positive and finite")
        .sample(rng)
}

fn finish(
    spec: &ScenarioSpec,
    parameters: BTreeMap<String, f64>,
    n_features: usize,
    features: Vec<f64>,
    response: Vec<f64>,
    latent: BTreeMap<String, Vec<f64>>,
) -> Result<Generated> {
    let dataset = Dataset::new(n_features, features, response)?.with_provenance(spec.scenario, spec.seed);
    Ok(Generated {
        dataset,
        parameters,
        latent,
    })
}

fn expect_scenario(spec: &ScenarioSpec, scenario: Scenario) -> Result<BTreeMap<String, f64>> {
    if spec.scenario != scenario {
        return Err(Error::usage(format!(
            "spec is for {}, not {scenario}",
            spec.scenario
        )));
    }
    spec.parameters()
}

/// `m` coins with heads probability `theta`; `y = heads + N(0, 1)`.
///
/// Row draws: `m` coins, then one standard normal.
pub fn gen_insufficient_learning(spec: &ScenarioSpec) -> Result<Generated> {
    let params = expect_scenario(spec, Scenario::InsufficientLearning)?;
    let m = params["m"] as usize;
    let theta = params["theta"];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Vec::with_capacity(spec.n * m);
    let mut response = Vec::with_capacity(spec.n);
    let mut mean = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut heads = 0.0;
        for _ in 0..m {
            let x = if coin(&mut rng, theta) { 1.0 } else { 0.0 };
            heads += x;
            features.push(x);
        }
        let noise: f64 = StandardNormal.sample(&mut rng);
        response.push(heads + noise);
        mean.push(heads);
    }
    let latent = BTreeMap::from([("rate".to_string(), mean)]);
    finish(spec, params, m, features, response, latent)
}

/// Two fair coins (blue, large); price `100 * 2^blue * 3^large` exactly.
///
/// Row draws: blue, then large.
pub fn gen_gemstones(spec: &ScenarioSpec) -> Result<Generated> {
    let params = expect_scenario(spec, Scenario::Gemstones)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Vec::with_capacity(spec.n * 2);
    let mut response = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let blue = coin(&mut rng, 0.5);
        let large = coin(&mut rng, 0.5);
        features.push(if blue { 1.0 } else { 0.0 });
        features.push(if large { 1.0 } else { 0.0 });
        response.push(gemstone_price(blue, large));
    }
    let mut g = finish(spec, params, 2, features, response, BTreeMap::new())?;
    g.dataset = g
        .dataset
        .with_feature_names(vec!["blue".into(), "large".into()])?;
    Ok(g)
}

pub fn gemstone_price(blue: bool, large: bool) -> f64 {
    100.0 * if blue { 2.0 } else { 1.0 } * if large { 3.0 } else { 1.0 }
}

/// Rate of one sub-response: `2^(sum_i sign_i (2 x_i - 1))`.
pub fn pattern_rate(signs: &[i8], x: &[f64]) -> f64 {
    let exponent: i32 = signs
        .iter()
        .zip(x)
        .map(|(&s, &v)| if v == 1.0 { s as i32 } else { -(s as i32) })
        .sum();
    2f64.powi(exponent)
}

fn composite<const M: usize>(
    spec: &ScenarioSpec,
    scenario: Scenario,
    patterns: &[[i8; M]; 3],
) -> Result<Generated> {
    let params = expect_scenario(spec, scenario)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Vec::with_capacity(spec.n * M);
    let mut response = Vec::with_capacity(spec.n);
    let mut rates = Vec::with_capacity(spec.n);
    let mut row = [0.0; M];
    for _ in 0..spec.n {
        for x in row.iter_mut() {
            *x = if coin(&mut rng, 0.5) { 1.0 } else { 0.0 };
        }
        let mut y = 0.0;
        let mut total = 0.0;
        for signs in patterns {
            let rate = pattern_rate(signs, &row);
            total += rate;
            y += poisson(&mut rng, rate);
        }
        features.extend_from_slice(&row);
        response.push(y);
        rates.push(total);
    }
    let latent = BTreeMap::from([("rate".to_string(), rates)]);
    finish(spec, params, M, features, response, latent)
}

/// Four fair coins; `y` is the sum of three Poisson sub-responses whose rates
/// follow [`COMPOSITE_PATTERNS`].
///
/// Row draws: four coins, then the A, B and C Poisson draws.
pub fn gen_composite(spec: &ScenarioSpec) -> Result<Generated> {
    composite(spec, Scenario::Composite, &COMPOSITE_PATTERNS)
}

/// As [`gen_composite`] with eight coins and [`COMPOSITE_SCALED_PATTERNS`].
pub fn gen_composite_scaled(spec: &ScenarioSpec) -> Result<Generated> {
    composite(spec, Scenario::CompositeScaled, &COMPOSITE_SCALED_PATTERNS)
}

/// Twelve fair coins and a hidden label `k ~ Bern(prevalence)`.
/// `rate = 2^d 0.5^h f_A^{d_A} f_B^{d_B}` with `d`, `d_A`, `d_B`, `h` the heads
/// among coins 1-3, 4-6, 7-9 and 10-12, `f_A = 2^(2k-1)` and `f_B = 2 - 1.5k`.
///
/// Row draws: the label, then twelve coins, then the Poisson draw.
pub fn gen_mixture(spec: &ScenarioSpec) -> Result<Generated> {
    let params = expect_scenario(spec, Scenario::Mixture)?;
    let prevalence = params["prevalence"];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Vec::with_capacity(spec.n * 12);
    let mut response = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    let mut rates = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let k = if coin(&mut rng, prevalence) { 1.0 } else { 0.0 };
        let mut heads = [0i32; 4];
        for i in 0..12 {
            let x = coin(&mut rng, 0.5);
            features.push(if x { 1.0 } else { 0.0 });
            heads[i / 3] += x as i32;
        }
        let (f_a, f_b) = mixture_factors(k);
        let rate = 2f64.powi(heads[0]) * 0.5f64.powi(heads[3]) * f_a.powi(heads[1]) * f_b.powi(heads[2]);
        response.push(poisson(&mut rng, rate));
        labels.push(k);
        rates.push(rate);
    }
    let latent = BTreeMap::from([("k".to_string(), labels), ("rate".to_string(), rates)]);
    finish(spec, params, 12, features, response, latent)
}

/// `(f_A, f_B) = (2^(2k-1), 2 - 1.5k)`.
pub fn mixture_factors(k: f64) -> (f64, f64) {
    (2f64.powf(2.0 * k - 1.0), 2.0 - 1.5 * k)
}

/// `m` fair coins `h_i`, each recorded wrongly with probability `flip`;
/// `rate = 2^(sum of recorded heads)`. Only the first `visible` recorded
/// flips become features.
///
/// Row draws: `m` coins, then `m` corruption draws, then the Poisson draw.
pub fn gen_missing(spec: &ScenarioSpec) -> Result<Generated> {
    let params = expect_scenario(spec, Scenario::MissingFeatures)?;
    let m = params["m"] as usize;
    let visible = params["visible"] as usize;
    let flip = params["flip"];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Vec::with_capacity(spec.n * visible);
    let mut response = Vec::with_capacity(spec.n);
    let mut rates = Vec::with_capacity(spec.n);
    let mut hidden_heads = Vec::with_capacity(spec.n);
    let mut h = vec![false; m];
    for _ in 0..spec.n {
        for v in h.iter_mut() {
            *v = coin(&mut rng, 0.5);
        }
        let mut recorded = 0;
        let mut hidden = 0;
        for (i, &hi) in h.iter().enumerate() {
            let a = if coin(&mut rng, flip) { !hi } else { hi };
            recorded += a as i32;
            if i < visible {
                features.push(if a { 1.0 } else { 0.0 });
            } else {
                hidden += a as i32;
            }
        }
        let rate = 2f64.powi(recorded);
        response.push(poisson(&mut rng, rate));
        rates.push(rate);
        hidden_heads.push(hidden as f64);
    }
    let latent = BTreeMap::from([
        ("rate".to_string(), rates),
        ("hidden_heads".to_string(), hidden_heads),
    ]);
    finish(spec, params, visible, features, response, latent)
}

pub fn generate(spec: &ScenarioSpec) -> Result<Generated> {
    match spec.scenario {
        Scenario::InsufficientLearning => gen_insufficient_learning(spec),
        Scenario::Gemstones => gen_gemstones(spec),
        Scenario::Composite => gen_composite(spec),
        Scenario::Mixture => gen_mixture(spec),
        Scenario::MissingFeatures => gen_missing(spec),
        Scenario::CompositeScaled => gen_composite_scaled(spec),
        Scenario::External => Err(Error::usage("external datasets are loaded, not generated")),
    }
}

/// Independent train and test draws of the same spec with seeds `seed` and
/// `seed + 1`, the test draw of size `n_test`.
pub fn train_test(spec: &ScenarioSpec, n_test: usize) -> Result<(Generated, Generated)> {
    let train = generate(spec)?;
    let test_spec = ScenarioSpec {
        n: n_test,
        seed: spec.seed.wrapping_add(1),
        ..spec.clone()
    };
    Ok((train, generate(&test_spec)?))
}
