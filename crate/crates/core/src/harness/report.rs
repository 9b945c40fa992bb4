//! Experiment reports and their markdown/CSV renderings.
//!
//! Wall-clock timings are kept on the in-memory rows but never rendered, so
//! the same configuration always renders the same text.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// A fitted model's scores.
    Cell,
    /// Lowest-MAE summary of a group of cells.
    Best,
}

impl RowKind {
    fn as_str(self) -> &'static str {
        match self {
            RowKind::Cell => "cell",
            RowKind::Best => "best",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub group: Option<String>,
    pub kind: RowKind,
    /// Mean over replications; NaN when the cell failed.
    pub mae: f64,
    pub rmse: f64,
    pub replicate_mae: Vec<f64>,
    pub replicate_rmse: Vec<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

impl ReportRow {
    pub fn from_replicates(
        label: impl Into<String>,
        replicate_mae: Vec<f64>,
        replicate_rmse: Vec<f64>,
        seconds: f64,
    ) -> Self {
        ReportRow {
            label: label.into(),
            group: None,
            kind: RowKind::Cell,
            mae: mean(&replicate_mae),
            rmse: mean(&replicate_rmse),
            replicate_mae,
            replicate_rmse,
            seconds,
            error: None,
        }
    }

    pub fn failed(label: impl Into<String>, error: impl Into<String>) -> Self {
        ReportRow {
            label: label.into(),
            group: None,
            kind: RowKind::Cell,
            mae: f64::NAN,
            rmse: f64::NAN,
            replicate_mae: Vec::new(),
            replicate_rmse: Vec::new(),
            seconds: 0.0,
            error: Some(error.into()),
        }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn mae_sd(&self) -> f64 {
        sample_sd(&self.replicate_mae)
    }

    pub fn rmse_sd(&self) -> f64 {
        sample_sd(&self.replicate_rmse)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub title: String,
    pub provenance: String,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn new(title: impl Into<String>, provenance: impl Into<String>) -> Self {
        ExperimentReport {
            title: title.into(),
            provenance: provenance.into(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn row(&self, label: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !r.is_ok())
    }

    /// Appends a `Best <group>` row per group holding the group's lowest MAE
    /// cell. Groups appear in first-seen order.
    pub fn add_best_rows(&mut self) {
        let mut groups: Vec<String> = Vec::new();
        for r in &self.rows {
            if let (RowKind::Cell, Some(g)) = (r.kind, &r.group) {
                if !groups.contains(g) {
                    groups.push(g.clone());
                }
            }
        }
        for g in groups {
            let best = self
                .rows
                .iter()
                .filter(|r| r.kind == RowKind::Cell && r.group.as_ref() == Some(&g) && r.is_ok())
                .min_by(|a, b| a.mae.total_cmp(&b.mae))
                .cloned();
            if let Some(b) = best {
                self.rows.push(ReportRow {
                    label: format!("Best {g}"),
                    group: Some(g),
                    kind: RowKind::Best,
                    ..b
                });
            }
        }
    }

    /// Index of the successful cell row minimizing `metric`.
    fn best_cell(&self, metric: impl Fn(&ReportRow) -> f64) -> Option<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.kind == RowKind::Cell && r.is_ok())
            .min_by(|a, b| metric(a.1).total_cmp(&metric(b.1)))
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::usage(format!("unknown report format `{s}`"))),
        }
    }
}

pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(report),
        ReportFormat::Csv => render_csv(report),
    }
}

/// Markdown table; the best MAE and RMSE among cells are bold.
fn render_markdown(report: &ExperimentReport) -> String {
    let best_mae = report.best_cell(|r| r.mae);
    let best_rmse = report.best_cell(|r| r.rmse);
    let spread = report.rows.iter().any(|r| r.replicate_mae.len() > 1);
    let mut out = String::new();
    if spread {
        out.push_str("| model | MAE | RMSE | MAE sd | RMSE sd | reps |\n");
        out.push_str("|---|---|---|---|---|---|\n");
    } else {
        out.push_str("| model | MAE | RMSE |\n|---|---|---|\n");
    }
    let cell = |v: f64, bold: bool| {
        if bold {
            format!("**{v:.4}**")
        } else {
            format!("{v:.4}")
        }
    };
    for (i, r) in report.rows.iter().enumerate() {
        if let Some(e) = &r.error {
            let pad = if spread { " | | | |" } else { "" };
            let _ = writeln!(out, "| {} | failed: {} | |{pad}", r.label, e.replace('|', "/"));
            continue;
        }
        let _ = write!(
            out,
            "| {} | {} | {} |",
            r.label,
            cell(r.mae, best_mae == Some(i)),
            cell(r.rmse, best_rmse == Some(i))
        );
        if spread {
            let _ = write!(out, " {:.4} | {:.4} | {} |", r.mae_sd(), r.rmse_sd(), r.replicate_mae.len());
        }
        out.push('\n');
    }
    out
}

const CSV_HEADER: [&str; 10] = [
    "label",
    "group",
    "kind",
    "mae",
    "rmse",
    "best_mae",
    "best_rmse",
    "replicate_mae",
    "replicate_rmse",
    "error",
];

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn metric_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

/// CSV with `#`-prefixed title and provenance lines ahead of the header.
fn render_csv(report: &ExperimentReport) -> String {
    let best_mae = report.best_cell(|r| r.mae);
    let best_rmse = report.best_cell(|r| r.rmse);
    let mut out = format!("# title: {}\n# provenance: {}\n", report.title, report.provenance);
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record(CSV_HEADER).expect("write to memory");
    for (i, r) in report.rows.iter().enumerate() {
        wtr.write_record([
            r.label.clone(),
            r.group.clone().unwrap_or_default(),
            r.kind.as_str().to_string(),
            metric_cell(r.mae),
            metric_cell(r.rmse),
            (best_mae == Some(i)).to_string(),
            (best_rmse == Some(i)).to_string(),
            join(&r.replicate_mae),
            join(&r.replicate_rmse),
            r.error.clone().unwrap_or_default(),
        ])
        .expect("write to memory");
    }
    let bytes = wtr.into_inner().expect("flush to memory");
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    out
}

/// Reads the CSV rendering back. Timings are not part of the rendering and
/// come back as zero.
pub fn parse_report_csv(text: &str) -> Result<ExperimentReport> {
    let mut title = String::new();
    let mut provenance = String::new();
    let mut body_start = 0;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim_start();
            if let Some(t) = rest.strip_prefix("title: ") {
                title = t.to_string();
            } else if let Some(p) = rest.strip_prefix("provenance: ") {
                provenance = p.to_string();
            }
            body_start += line.len() + 1;
        } else {
            break;
        }
    }
    let body = text.get(body_start..).unwrap_or("");
    let offset = text[..body_start.min(text.len())].lines().count();
    let mut rdr = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::parse(offset + 1, "unexpected report CSV header"));
    }
    let mut report = ExperimentReport::new(title, provenance);
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = offset + i + 2;
        let num = |s: &str| -> Result<f64> {
            if s.is_empty() {
                Ok(f64::NAN)
            } else {
                s.parse().map_err(|_| Error::parse(line, format!("bad number `{s}`")))
            }
        };
        let list = |s: &str| -> Result<Vec<f64>> {
            if s.is_empty() {
                Ok(Vec::new())
            } else {
                s.split(';').map(num).collect()
            }
        };
        let kind = match &rec[2] {
            "cell" => RowKind::Cell,
            "best" => RowKind::Best,
            other => return Err(Error::parse(line, format!("unknown row kind `{other}`"))),
        };
        report.push(ReportRow {
            label: rec[0].to_string(),
            group: (!rec[1].is_empty()).then(|| rec[1].to_string()),
            kind,
            mae: num(&rec[3])?,
            rmse: num(&rec[4])?,
            replicate_mae: list(&rec[7])?,
            replicate_rmse: list(&rec[8])?,
            seconds: 0.0,
            error: (!rec[9].is_empty()).then(|| rec[9].to_string()),
        });
    }
    Ok(report)
}
