//! Experiment configuration read from flat `key=value` text.
//!
//! ```text
//! scenario=composite
//! n_train=10000
//! seed=7
//! replications=5
//! override.prevalence=0.25
//! model=gbm:d=1,trees=100
//! model=gbm:d=3,trees=100
//! model=multiresp:S=3
//! ```
//!
//! `n_test` defaults to `n_train`, `seed` to 0, `replications` to 5 and
//! `workers` to 1.

use std::path::Path;

use crate::data::Scenario;
use crate::error::{Error, Result};
use crate::generators::ScenarioSpec;
use crate::harness::model_spec::ModelSpec;
use crate::kv::{parse_kv, parse_value};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub title: Option<String>,
    /// Training draw; its `n` is the training size and its seed the base seed.
    pub scenario: ScenarioSpec,
    pub n_test: usize,
    pub replications: usize,
    /// Threads used to run grid cells; results do not depend on it.
    pub workers: usize,
    pub models: Vec<ModelSpec>,
}

impl ExperimentConfig {
    pub fn new(scenario: ScenarioSpec, models: Vec<ModelSpec>) -> Self {
        ExperimentConfig {
            title: None,
            n_test: scenario.n,
            scenario,
            replications: 5,
            workers: 1,
            models,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::usage("model grid is empty"));
        }
        if self.replications == 0 {
            return Err(Error::usage("replications must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::usage("workers must be at least 1"));
        }
        if self.n_test == 0 {
            return Err(Error::usage("n_test must be at least 1"));
        }
        self.scenario.parameters()?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut scenario = None;
        let mut n_train = None;
        let mut n_test = None;
        let mut seed = 0u64;
        let mut replications = 5usize;
        let mut workers = 1usize;
        let mut title = None;
        let mut models = Vec::new();
        let mut overrides = Vec::new();
        for e in parse_kv(text)? {
            let at_line = |err: Error| Error::parse(e.line, err.to_string());
            let k = e.key.as_str();
            let v = e.value.as_str();
            match k {
                "scenario" => scenario = Some(v.parse::<Scenario>().map_err(at_line)?),
                "n_train" | "n" => n_train = Some(parse_value::<usize>(k, v).map_err(at_line)?),
                "n_test" => n_test = Some(parse_value::<usize>(k, v).map_err(at_line)?),
                "seed" => seed = parse_value(k, v).map_err(at_line)?,
                "replications" => replications = parse_value(k, v).map_err(at_line)?,
                "workers" => workers = parse_value(k, v).map_err(at_line)?,
                "title" => title = Some(v.to_string()),
                "model" => models.push(v.parse::<ModelSpec>().map_err(at_line)?),
                _ => match k.strip_prefix("override.") {
                    Some(name) => overrides.push((name.to_string(), parse_value::<f64>(k, v).map_err(at_line)?)),
                    None => return Err(Error::parse(e.line, format!("unknown key `{k}`"))),
                },
            }
        }
        let scenario = scenario.ok_or_else(|| Error::usage("config has no `scenario`"))?;
        let n_train = n_train.ok_or_else(|| Error::usage("config has no `n_train`"))?;
        let mut spec = ScenarioSpec::new(scenario, n_train, seed);
        for (name, value) in overrides {
            spec = spec.with_override(&name, value);
        }
        let config = ExperimentConfig {
            title,
            n_test: n_test.unwrap_or(n_train),
            scenario: spec,
            replications,
            workers,
            models,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
