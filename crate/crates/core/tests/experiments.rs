use treedepth::harness::report::RowKind;
use treedepth::{
    parse_report_csv, render_report, run_experiment, ExperimentConfig, ReportFormat, Scenario, ScenarioSpec,
};

fn config(scenario: Scenario, n: usize, models: &[&str], reps: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(
        ScenarioSpec::new(scenario, n, 31),
        models.iter().map(|m| m.parse().unwrap()).collect(),
    );
    c.replications = reps;
    c
}

#[test]
fn glm_recovers_gemstone_prices() {
    // Prices are exactly log-linear; what remains is the stopping rule's slack.
    let report = run_experiment(&config(Scenario::Gemstones, 400, &["glm"], 1)).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert!(report.rows[0].mae < 1e-4 * 300.0, "MAE {}", report.rows[0].mae);
}

#[test]
fn composite_depth_beats_more_stumps() {
    let models = ["gbm:d=1,trees=100", "gbm:d=1,trees=200", "gbm:d=3,trees=100"];
    let report = run_experiment(&config(Scenario::Composite, 4000, &models, 2)).unwrap();
    let m: Vec<f64> = report.rows.iter().map(|r| r.mae).collect();
    assert!((m[1] - m[0]).abs() / m[0] < 0.01, "{m:?}");
    assert!((m[0] - m[2]) / m[0] > 0.2, "{m:?}");
}

#[test]
fn replications_keep_per_replicate_values() {
    let report = run_experiment(&config(Scenario::Composite, 300, &["glm", "multiresp:S=2"], 5)).unwrap();
    for row in &report.rows {
        assert_eq!(row.replicate_mae.len(), 5);
        assert_eq!(row.replicate_rmse.len(), 5);
        assert!(row.mae <= row.rmse);
        assert!(row.mae_sd() > 0.0);
    }
    assert!(render_report(&report, ReportFormat::Markdown).contains("MAE sd"));
}

#[test]
fn identical_configs_render_identically() {
    let text = "scenario=mixture\nn_train=300\nreplications=2\nseed=4\nmodel=gbm:d=2,trees=20\nmodel=mixture:f=0.25,starts=2\n";
    let a = run_experiment(&ExperimentConfig::parse(text).unwrap()).unwrap();
    let b = run_experiment(&ExperimentConfig::parse(text).unwrap()).unwrap();
    for format in [ReportFormat::Markdown, ReportFormat::Csv] {
        assert_eq!(render_report(&a, format), render_report(&b, format));
    }
}

#[test]
fn sweep_report_round_trips_through_csv() {
    let models: Vec<String> = [(1, 0.1), (1, 0.3), (2, 0.1), (2, 0.3)]
        .iter()
        .map(|(d, lr)| format!("gbm:d={d},trees=30,lr={lr},objective=squared_error"))
        .collect();
    let models: Vec<&str> = models.iter().map(String::as_str).collect();
    let report = run_experiment(&config(Scenario::InsufficientLearning, 300, &models, 2)).unwrap();
    assert_eq!(report.rows.iter().filter(|r| r.kind == RowKind::Best).count(), 2);
    let csv = render_report(&report, ReportFormat::Csv);
    let back = parse_report_csv(&csv).unwrap();
    assert_eq!(render_report(&back, ReportFormat::Csv), csv);
    assert_eq!(back.rows.len(), report.rows.len());
    for (x, y) in back.rows.iter().zip(&report.rows) {
        assert_eq!(x.mae.to_bits(), y.mae.to_bits());
        assert_eq!(x.replicate_rmse, y.replicate_rmse);
    }
}
