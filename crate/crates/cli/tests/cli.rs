use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn treedepth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treedepth"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mix.csv");
    let res = treedepth(&["generate", "mixture", "--n", "50", "--seed", "4", "--out", path(&out), "--set", "prevalence=0.4"]);
    assert_eq!(res.status.code(), Some(0));
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("x1,"));
    assert_eq!(csv.lines().count(), 51);
    let meta = fs::read_to_string(dir.path().join("mix.csv.meta")).unwrap();
    assert!(meta.contains("seed=4\n"));
    assert!(meta.contains("param.prevalence=0.4\n"));
}

#[test]
fn same_seed_same_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        assert!(treedepth(&["generate", "composite", "--n", "80", "--seed", "9", "--out", path(p)]).status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn fit_writes_models() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("gem.csv");
    assert!(treedepth(&["generate", "gemstones", "--n", "100", "--out", path(&data)]).status.success());
    for (spec, first_line) in [
        ("glm", "c,m1,m2"),
        ("multiresp:S=2", "c,m1,m2"),
        ("interaction_glm:d=2,family=poisson", "subset,coefficient"),
    ] {
        let model = dir.path().join("model.txt");
        let res = treedepth(&["fit", spec, "--data", path(&data), "--out", path(&model)]);
        assert_eq!(res.status.code(), Some(0), "{spec}");
        assert!(stdout(&res).contains("training MAE"));
        assert_eq!(fs::read_to_string(&model).unwrap().lines().next(), Some(first_line), "{spec}");
    }
    let model = dir.path().join("gbm.txt");
    assert!(treedepth(&["fit", "gbm:d=2,trees=5", "--data", path(&data), "--out", path(&model)]).status.success());
    assert!(!fs::read_to_string(&model).unwrap().is_empty());
}

#[test]
fn sweep_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.kv");
    fs::write(
        &config,
        "scenario=composite\nn_train=300\nreplications=2\nmodel=gbm:d=1,trees=20\nmodel=multiresp:S=2\n",
    )
    .unwrap();
    let csv = dir.path().join("report.csv");
    let res = treedepth(&["sweep", "--config", path(&config), "--format", "csv", "--out", path(&csv)]);
    assert_eq!(res.status.code(), Some(0));
    let md = treedepth(&["report", "--in", path(&csv), "--format", "markdown"]);
    assert_eq!(md.status.code(), Some(0));
    let direct = treedepth(&["sweep", "--config", path(&config), "--workers", "2"]);
    assert_eq!(stdout(&md), stdout(&direct));
    assert!(stdout(&md).contains("| multiresp:S=2 |"));
}

#[test]
fn failed_cell_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.kv");
    fs::write(&config, "scenario=composite\nn_train=100\nreplications=1\nmodel=glm\nmodel=interaction_glm:d=6\n").unwrap();
    let res = treedepth(&["sweep", "--config", path(&config)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stdout(&res).contains("failed"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.csv");
    let bad_config = dir.path().join("bad.kv");
    fs::write(&bad_config, "scenario=composite\nn_train=10\nreplications=0\nmodel=glm\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["generate", "unicorns", "--n", "5", "--out", "x.csv"],
        vec!["fit", "forest", "--data", path(&missing), "--out", "m"],
        vec!["fit", "glm", "--data", path(&missing), "--out", "m"],
        vec!["sweep", "--config", path(&bad_config)],
        vec!["verify-equivalence", "--d", "5"],
        vec!["bounds", "--b-max", "0"],
        vec!["frobnicate"],
    ];
    for args in cases {
        assert_eq!(treedepth(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn verify_equivalence_and_bounds() {
    let res = treedepth(&["verify-equivalence", "--d", "1", "--family", "gaussian"]);
    assert_eq!(res.status.code(), Some(0));
    assert!(stdout(&res).contains("max relative difference"));
    let res = treedepth(&["bounds", "--b-max", "10"]);
    assert!(stdout(&res).contains("| 10 | 93 |"));
    assert!(stdout(&res).contains("| 10 | 85 |"));
}
