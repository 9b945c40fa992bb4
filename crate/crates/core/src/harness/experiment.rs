//! Grid runs: every model spec fitted on fresh train/test draws per
//! replication, scored on the test draw and averaged.

use std::time::Instant;

use log::info;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::{train_test, Generated, ScenarioSpec};
use crate::harness::config::ExperimentConfig;
use crate::harness::metrics::{mae, rmse};
use crate::harness::report::{ExperimentReport, ReportRow};

/// Base seed of replication `r`: train draws use `seed + 2r`, test draws
/// `seed + 2r + 1`, so no two draws share a seed.
pub fn replication_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add(2 * r as u64)
}

struct CellOutcome {
    mae: f64,
    rmse: f64,
    seconds: f64,
}

/// Runs the whole grid. Cells that fail are recorded as failed rows and the
/// run continues; only an invalid configuration is an error. The report is
/// identical for identical configurations whatever `workers` is.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let draws: Vec<(Generated, Generated)> = (0..config.replications)
        .map(|r| {
            let spec = ScenarioSpec {
                seed: replication_seed(config.scenario.seed, r),
                ..config.scenario.clone()
            };
            train_test(&spec, config.n_test)
        })
        .collect::<Result<_>>()?;

    let n_cells = config.models.len();
    let tasks: Vec<(usize, usize)> = (0..config.replications)
        .flat_map(|r| (0..n_cells).map(move |c| (c, r)))
        .collect();
    let run_task = |&(c, r): &(usize, usize)| -> Result<CellOutcome> {
        let (train, test) = &draws[r];
        let start = Instant::now();
        let fitted = config.models[c].fit(&train.dataset, train.dataset.seed())?;
        let preds = fitted.predict_dataset(&test.dataset)?;
        let outcome = CellOutcome {
            mae: mae(&preds, test.dataset.response())?,
            rmse: rmse(&preds, test.dataset.response())?,
            seconds: start.elapsed().as_secs_f64(),
        };
        info!("{} rep {r}: MAE {:.4}", config.models[c], outcome.mae);
        Ok(outcome)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::usage(format!("cannot start {} workers: {e}", config.workers)))?;
    let outcomes: Vec<Result<CellOutcome>> = pool.install(|| tasks.par_iter().map(run_task).collect());

    let title = config
        .title
        .clone()
        .unwrap_or_else(|| format!("{} benchmark", config.scenario.scenario));
    let overrides: String = config
        .scenario
        .overrides
        .iter()
        .map(|(k, v)| format!(", {k}={v}"))
        .collect();
    let mut report = ExperimentReport::new(
        title,
        format!(
            "scenario={}, n_train={}, n_test={}, seed={}, replications={}{overrides}",
            config.scenario.scenario, config.scenario.n, config.n_test, config.scenario.seed, config.replications
        ),
    );
    for (c, spec) in config.models.iter().enumerate() {
        let label = spec.to_string();
        let mut maes = Vec::with_capacity(config.replications);
        let mut rmses = Vec::with_capacity(config.replications);
        let mut seconds = 0.0;
        let mut failure = None;
        for r in 0..config.replications {
            match &outcomes[r * n_cells + c] {
                Ok(o) => {
                    maes.push(o.mae);
                    rmses.push(o.rmse);
                    seconds += o.seconds;
                }
                Err(e) => {
                    failure.get_or_insert_with(|| format!("replication {r}: {e}"));
                }
            }
        }
        let row = match failure {
            Some(e) => ReportRow::failed(label, e),
            None => ReportRow::from_replicates(label, maes, rmses, seconds),
        };
        report.push(match spec.group() {
            Some(g) => row.with_group(g),
            None => row,
        });
    }
    let repeated_group = config.models.iter().enumerate().any(|(i, a)| {
        a.group().is_some() && config.models[i + 1..].iter().any(|b| b.group() == a.group())
    });
    if repeated_group {
        report.add_best_rows();
    }
    Ok(report)
}
