//! Gradient-boosted trees, composite-response and mixture Poisson GLMs, and
//! seeded benchmarks that measure how much tree depth a model needs when its
//! link, population or response assumptions are wrong.

pub mod bounds;
pub mod data;
pub mod error;
pub mod gbm;
pub mod generators;
pub mod glm;
mod groups;
pub mod harness;
pub mod interaction;
pub mod kv;
pub mod mixglm;
pub mod multiresp;
pub mod optim;

pub use data::{Dataset, Scenario};
pub use error::{Error, Result};
pub use gbm::{fit_gbm, GbmConfig, GbmModel, GbmObjective};
pub use generators::{generate, train_test, Generated, ScenarioSpec};
pub use glm::{fit_glm, FitConfig, SubmodelParams};
pub use harness::config::ExperimentConfig;
pub use harness::experiment::run_experiment;
pub use harness::metrics::{mae, rmse};
pub use harness::model_spec::{FittedModel, ModelSpec};
pub use harness::report::{parse_report_csv, render_report, ExperimentReport, ReportFormat, ReportRow};
pub use interaction::{fit_interaction_glm, hypercube_equivalence_check, GlmFamily, InteractionGlm};
pub use mixglm::{fit_mixture, MixtureModel};
pub use multiresp::{fit_multiresp, MultirespModel};
pub use optim::AscentTrace;
