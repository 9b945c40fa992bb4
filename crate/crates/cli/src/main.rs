use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::warn;

use treedepth::bounds::render_bounds_markdown;
use treedepth::interaction::EQUIVALENCE_TREES;
use treedepth::{
    generate, hypercube_equivalence_check, mae, parse_report_csv, render_report, rmse, run_experiment, Dataset,
    Error, ExperimentConfig, GlmFamily, ModelSpec, ReportFormat, Result, Scenario, ScenarioSpec,
};

/// Largest relative GBM/GLM gap `verify-equivalence` accepts.
const EQUIVALENCE_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "treedepth", version, about = "Tree depth versus model misspecification benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset and write it as CSV plus a `.meta` sidecar.
    Generate {
        scenario: Scenario,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Scenario parameter override, e.g. `--set prevalence=0.3`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Fit one model spec to a CSV dataset and write the fitted model.
    Fit {
        /// e.g. `gbm:d=3,trees=100,lr=0.1`, `multiresp:S=3`, `mixture:f=0.25`.
        spec: ModelSpec,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an experiment grid from a key=value config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compare a converged depth-d GBM with the order-d interaction GLM on
    /// the 16-cell prime hypercube.
    VerifyEquivalence {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value = "poisson_log")]
        family: GlmFamily,
    },
    /// Print the largest useful submodel counts for B = 1..b-max.
    Bounds {
        #[arg(long, default_value_t = 10)]
        b_max: u32,
    },
    /// Re-render a CSV report.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
    },
}

fn parse_override(text: &str) -> Result<(String, f64)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| Error::usage(format!("expected KEY=VALUE, got `{text}`")))?;
    let v = v
        .parse()
        .map_err(|_| Error::usage(format!("bad value `{v}` for `{k}`")))?;
    Ok((k.to_string(), v))
}

fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Runs a command; `Ok(false)` means it finished but something it measured failed.
fn run(command: Command) -> Result<bool> {
    match command {
        Command::Generate {
            scenario,
            n,
            seed,
            out,
            overrides,
        } => {
            let mut spec = ScenarioSpec::new(scenario, n, seed);
            for text in &overrides {
                let (k, v) = parse_override(text)?;
                spec = spec.with_override(&k, v);
            }
            let generated = generate(&spec)?;
            generated.dataset.write_csv(&out)?;
            fs::write(meta_path(&out), generated.metadata_text())?;
            println!("wrote {} rows to {}", generated.dataset.n_rows(), out.display());
            Ok(true)
        }
        Command::Fit { spec, data, out, seed } => {
            let dataset = Dataset::read_csv(&data)?;
            let model = spec.fit(&dataset, seed)?;
            model.write_to(BufWriter::new(File::create(&out)?))?;
            let preds = model.predict_dataset(&dataset)?;
            println!(
                "{spec}: training MAE {:.6}, RMSE {:.6}",
                mae(&preds, dataset.response())?,
                rmse(&preds, dataset.response())?
            );
            Ok(true)
        }
        Command::Sweep {
            config,
            format,
            out,
            workers,
        } => {
            let mut config = ExperimentConfig::read(&config)?;
            if let Some(w) = workers {
                config.workers = w;
            }
            let report = run_experiment(&config)?;
            write_output(out.as_deref(), &render_report(&report, format))?;
            let failures = report.failures().count();
            if failures > 0 {
                warn!("{failures} grid cells failed");
            }
            Ok(failures == 0)
        }
        Command::VerifyEquivalence { d, family } => {
            let check = hypercube_equivalence_check(d, family)?;
            println!("| cell | target | gbm | glm |\n|---|---|---|---|");
            let data = treedepth::interaction::hypercube_dataset();
            for (i, y) in data.response().iter().enumerate() {
                println!(
                    "| {i:04b} | {y} | {:.10} | {:.10} |",
                    check.gbm_predictions[i], check.glm_predictions[i]
                );
            }
            println!("max relative difference: {:e}", check.max_relative_difference);
            if !check.gbm_converged() {
                warn!(
                    "boosting still moving after {EQUIVALENCE_TREES} trees (last-100-round change {:e})",
                    check.gbm_final_change
                );
            }
            Ok(check.max_relative_difference <= EQUIVALENCE_TOLERANCE)
        }
        Command::Bounds { b_max } => {
            print!("{}", render_bounds_markdown(b_max)?);
            Ok(true)
        }
        Command::Report { input, format } => {
            let report = parse_report_csv(&fs::read_to_string(&input)?)?;
            if report.rows.is_empty() {
                return Err(Error::usage("report has no rows"));
            }
            print!("{}", render_report(&report, format));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() || matches!(e, Error::Io(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
