//! Tabular datasets and their CSV representation.
//!
//! A [`Dataset`] is a dense row-major feature matrix plus a response column.
//! On disk it is a UTF-8 CSV with header `x1,...,xB,y`: every column but the
//! last is a feature and the last column is the response.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which generator produced a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    InsufficientLearning,
    Gemstones,
    Composite,
    Mixture,
    MissingFeatures,
    CompositeScaled,
    /// Loaded from a file rather than generated.
    External,
}

impl Scenario {
    pub const GENERATED: [Scenario; 6] = [
        Scenario::InsufficientLearning,
        Scenario::Gemstones,
        Scenario::Composite,
        Scenario::Mixture,
        Scenario::MissingFeatures,
        Scenario::CompositeScaled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::InsufficientLearning => "insufficient_learning",
            Scenario::Gemstones => "gemstones",
            Scenario::Composite => "composite",
            Scenario::Mixture => "mixture",
            Scenario::MissingFeatures => "missing_features",
            Scenario::CompositeScaled => "composite_scaled",
            Scenario::External => "external",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = Scenario::GENERATED.iter().chain(&[Scenario::External]);
        all.copied()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::usage(format!("unknown scenario `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_rows: usize,
    n_features: usize,
    response: Vec<f64>,
    feature_names: Vec<String>,
    seed: u64,
    scenario: Scenario,
}

impl Dataset {
    /// Builds a dataset from a row-major feature buffer of `response.len()` rows.
    pub fn new(n_features: usize, features: Vec<f64>, response: Vec<f64>) -> Result<Self> {
        let n_rows = response.len();
        if n_rows == 0 {
            return Err(Error::usage("dataset needs at least one row"));
        }
        if n_features == 0 {
            return Err(Error::usage("dataset needs at least one feature"));
        }
        if features.len() != n_rows * n_features {
            return Err(Error::usage(format!(
                "feature buffer has {} values, expected {} rows x {} features",
                features.len(),
                n_rows,
                n_features
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::usage(format!(
                "non-finite feature at row {}, column {}",
                i / n_features,
                i % n_features
            )));
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::usage(format!("non-finite response at row {i}")));
        }
        Ok(Dataset {
            features,
            n_rows,
            n_features,
            response,
            feature_names: default_feature_names(n_features),
            seed: 0,
            scenario: Scenario::External,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], response: Vec<f64>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if rows.len() != response.len() {
            return Err(Error::usage(format!(
                "{} feature rows but {} responses",
                rows.len(),
                response.len()
            )));
        }
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(Error::usage("ragged feature rows"));
        }
        Dataset::new(n_features, rows.concat(), response)
    }

    pub fn with_provenance(mut self, scenario: Scenario, seed: u64) -> Self {
        self.scenario = scenario;
        self.seed = seed;
        self
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::usage(format!(
                "{} feature names for {} features",
                names.len(),
                self.n_features
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    pub fn feature(&self, row: usize, col: usize) -> f64 {
        self.features[row * self.n_features + col]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn mean_response(&self) -> f64 {
        self.response.iter().sum::<f64>() / self.n_rows as f64
    }

    /// Errors unless every response is a non-negative integer.
    pub fn require_counts(&self) -> Result<()> {
        match self
            .response
            .iter()
            .position(|&y| y < 0.0 || y.fract() != 0.0)
        {
            Some(i) => Err(Error::usage(format!(
                "Poisson response must be a non-negative integer, row {i} has {}",
                self.response[i]
            ))),
            None => Ok(()),
        }
    }

    pub fn is_binary(&self) -> bool {
        self.features.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 2 {
            return Err(Error::parse(
                1,
                "need at least one feature column and a response column",
            ));
        }
        let n_features = header.len() - 1;
        let names = header.iter().take(n_features).map(str::to_owned).collect();
        let mut features = Vec::new();
        let mut response = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let line = i + 2;
            if record.len() != header.len() {
                return Err(Error::parse(
                    line,
                    format!("expected {} cells, found {}", header.len(), record.len()),
                ));
            }
            for (j, cell) in record.iter().enumerate() {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::parse(line, format!("bad number `{cell}`")))?;
                if j < n_features {
                    features.push(v);
                } else {
                    response.push(v);
                }
            }
        }
        Dataset::new(n_features, features, response)?.with_feature_names(names)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Dataset::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push("y");
        wtr.write_record(&header)?;
        let mut cells = Vec::with_capacity(self.n_features + 1);
        for (row, y) in self.rows().zip(&self.response) {
            cells.clear();
            cells.extend(row.iter().map(|v| v.to_string()));
            cells.push(y.to_string());
            wtr.write_record(&cells)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv_to(std::io::BufWriter::new(file))
    }
}

pub(crate) fn default_feature_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::usage(format!(
            "feature row has {got} values, model expects {expected}"
        )))
    }
}
