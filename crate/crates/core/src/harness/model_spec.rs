//! Textual model specifications such as `gbm:d=3,trees=100,lr=0.1` and the
//! fitted models they produce.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gbm::{fit_gbm, GbmConfig, GbmModel, GbmObjective};
use crate::glm::{fit_glm, FitConfig, SubmodelParams};
use crate::interaction::{fit_interaction_glm, GlmFamily, InteractionGlm};
use crate::kv::{parse_pairs, parse_value};
use crate::mixglm::{fit_mixture, MixtureModel};
use crate::multiresp::{fit_multiresp, MultirespModel};

/// One cell of an experiment grid.
///
/// | spec | keys (defaults) |
/// |---|---|
/// | `gbm` | `d` (1), `trees` (100), `lr` (0.1), `objective` (`poisson_log`), `min_child` (1) |
/// | `glm` | none |
/// | `multiresp` | `S` (1), `starts` (8) |
/// | `mixture` | `f` (0.25), `starts` (8) |
/// | `interaction_glm` | `d` (1), `family` (`poisson_log`) |
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Gbm(GbmConfig),
    Glm,
    Multiresp { n_submodels: usize, n_starts: usize },
    Mixture { f: f64, n_starts: usize },
    InteractionGlm { d: usize, family: GlmFamily },
}

impl ModelSpec {
    /// Stable key shared by cells that should be compared in one `Best` row;
    /// GBM cells group by depth.
    pub fn group(&self) -> Option<String> {
        match self {
            ModelSpec::Gbm(c) => Some(format!("gbm d={}", c.max_depth)),
            _ => None,
        }
    }

    /// Fits the spec on `train`. `seed` drives every random start.
    pub fn fit(&self, train: &Dataset, seed: u64) -> Result<FittedModel> {
        let base = FitConfig {
            seed,
            ..FitConfig::default()
        };
        Ok(match self {
            ModelSpec::Gbm(c) => FittedModel::Gbm(fit_gbm(train, c)?),
            ModelSpec::Glm => FittedModel::Glm(fit_glm(train, &base)?),
            ModelSpec::Multiresp { n_submodels, n_starts } => {
                let config = FitConfig {
                    n_starts: *n_starts,
                    ..base
                };
                FittedModel::Multiresp(fit_multiresp(train, *n_submodels, &config)?)
            }
            ModelSpec::Mixture { f, n_starts } => {
                let config = FitConfig {
                    seed,
                    n_starts: *n_starts,
                    ..FitConfig::for_mixture()
                };
                FittedModel::Mixture(fit_mixture(train, *f, &config)?)
            }
            ModelSpec::InteractionGlm { d, family } => {
                FittedModel::Interaction(fit_interaction_glm(train, *d, *family, &base)?)
            }
        })
    }
}

fn reject_unknown(kind: &str, key: &str) -> Error {
    Error::usage(format!("`{kind}` has no option `{key}`"))
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let pairs = parse_pairs(rest)?;
        match kind {
            "gbm" => {
                let mut c = GbmConfig {
                    max_depth: 1,
                    n_trees: 100,
                    learning_rate: 0.1,
                    objective: GbmObjective::PoissonLog,
                    ..GbmConfig::default()
                };
                for (k, v) in &pairs {
                    match k.as_str() {
                        "d" | "depth" => c.max_depth = parse_value(k, v)?,
                        "trees" => c.n_trees = parse_value(k, v)?,
                        "lr" => c.learning_rate = parse_value(k, v)?,
                        "objective" => c.objective = v.parse()?,
                        "min_child" => c.min_child_samples = parse_value(k, v)?,
                        _ => return Err(reject_unknown(kind, k)),
                    }
                }
                c.validate()?;
                Ok(ModelSpec::Gbm(c))
            }
            "glm" => match pairs.first() {
                Some((k, _)) => Err(reject_unknown(kind, k)),
                None => Ok(ModelSpec::Glm),
            },
            "multiresp" => {
                let (mut n_submodels, mut n_starts) = (1, FitConfig::default().n_starts);
                for (k, v) in &pairs {
                    match k.as_str() {
                        "S" | "s" => n_submodels = parse_value(k, v)?,
                        "starts" => n_starts = parse_value(k, v)?,
                        _ => return Err(reject_unknown(kind, k)),
                    }
                }
                if n_submodels == 0 || n_starts == 0 {
                    return Err(Error::usage("multiresp needs S >= 1 and starts >= 1"));
                }
                Ok(ModelSpec::Multiresp { n_submodels, n_starts })
            }
            "mixture" => {
                let (mut f, mut n_starts) = (0.25, FitConfig::for_mixture().n_starts);
                for (k, v) in &pairs {
                    match k.as_str() {
                        "f" => f = parse_value(k, v)?,
                        "starts" => n_starts = parse_value(k, v)?,
                        _ => return Err(reject_unknown(kind, k)),
                    }
                }
                if !(f > 0.0 && f < 1.0) || n_starts == 0 {
                    return Err(Error::usage("mixture needs f in (0, 1) and starts >= 1"));
                }
                Ok(ModelSpec::Mixture { f, n_starts })
            }
            "interaction_glm" => {
                let (mut d, mut family) = (1, GlmFamily::PoissonLog);
                for (k, v) in &pairs {
                    match k.as_str() {
                        "d" => d = parse_value(k, v)?,
                        "family" => family = v.parse()?,
                        _ => return Err(reject_unknown(kind, k)),
                    }
                }
                if d == 0 {
                    return Err(Error::usage("interaction_glm needs d >= 1"));
                }
                Ok(ModelSpec::InteractionGlm { d, family })
            }
            _ => Err(Error::usage(format!("unknown model kind `{kind}`"))),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Gbm(c) => write!(
                f,
                "gbm:d={},trees={},lr={},objective={}",
                c.max_depth, c.n_trees, c.learning_rate, c.objective
            ),
            ModelSpec::Glm => f.write_str("glm"),
            ModelSpec::Multiresp { n_submodels, .. } => write!(f, "multiresp:S={n_submodels}"),
            ModelSpec::Mixture { f: p, .. } => write!(f, "mixture:f={p}"),
            ModelSpec::InteractionGlm { d, family } => write!(f, "interaction_glm:d={d},family={family}"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Gbm(GbmModel),
    Glm(SubmodelParams),
    Multiresp(MultirespModel),
    Mixture(MixtureModel),
    Interaction(InteractionGlm),
}

impl FittedModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            FittedModel::Gbm(m) => m.predict(x),
            FittedModel::Glm(p) => crate::glm::log_link_predict(p, x),
            FittedModel::Multiresp(m) => m.predict(x),
            FittedModel::Mixture(m) => m.predict(x),
            FittedModel::Interaction(m) => m.predict(x),
        }
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        data.rows().map(|x| self.predict(x)).collect()
    }

    /// Writes the model in its native text format: the tree dump for GBMs,
    /// coefficient CSV for the linear models.
    pub fn write_to<W: Write>(&self, mut writer: W) -> Result<()> {
        match self {
            FittedModel::Gbm(m) => {
                writer.write_all(m.dump().as_bytes())?;
                Ok(())
            }
            FittedModel::Glm(p) => MultirespModel::new(vec![p.clone()])?.write_csv_to(writer),
            FittedModel::Multiresp(m) => m.write_csv_to(writer),
            FittedModel::Mixture(m) => m.write_csv_to(writer),
            FittedModel::Interaction(m) => m.write_csv_to(writer),
        }
    }
}
