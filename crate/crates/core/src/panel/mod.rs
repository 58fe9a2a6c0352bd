//! Alpha return panels: ingest, pairwise correlation under missing data,
//! factor regression, sign canonicalisation and correlation repair.

mod correlation;
mod deform;
mod regress;
mod signs;

pub use correlation::{pairwise_correlation, CorrelationMatrix, DEFAULT_MIN_OVERLAP, PSD_REL_TOL};
pub use deform::{deform_correlation, DEFAULT_NOISE_FLOOR};
pub use regress::regress_out;
pub use signs::{canonicalize_signs, SignVector};

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::format::sig17;

/// How missing cells are spelled in a panel CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NaPolicy {
    /// An empty cell is missing; any other text must parse as a number.
    #[default]
    EmptyCell,
    /// The literal `NA` is missing; empty cells are rejected.
    LiteralNa,
}

/// `N` alpha return series over `M + 1` chronologically ascending observations.
///
/// Missing cells are stored as `NaN` and surfaced through [`AlphaPanel::get`].
#[derive(Debug, Clone)]
pub struct AlphaPanel {
    labels: Vec<String>,
    times: Vec<String>,
    /// `(M + 1) x N`, rows are time points.
    values: DMatrix<f64>,
}

impl AlphaPanel {
    /// Builds a panel, enforcing every panel invariant. `None` cells are missing.
    pub fn new(labels: Vec<String>, times: Vec<String>, rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let values = dense_values(&rows, labels.len())?;
        Self::from_matrix(labels, times, values)
    }

    /// Builds a panel from a dense matrix where `NaN` marks missing cells.
    pub fn from_matrix(labels: Vec<String>, times: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let panel = Self { labels, times, values };
        panel.validate(2)?;
        Ok(panel)
    }

    /// A factor-return panel: same layout as an alpha panel but a single column is allowed.
    pub fn factors_from_matrix(labels: Vec<String>, times: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let panel = Self { labels, times, values };
        panel.validate(1)?;
        Ok(panel)
    }

    fn validate(&self, min_columns: usize) -> Result<()> {
        let n = self.labels.len();
        if n < min_columns {
            return Err(Error::validation(format!("panel needs at least {min_columns} columns, got {n}")));
        }
        if self.times.len() < 2 {
            return Err(Error::validation(format!(
                "panel needs at least 2 observations, got {}",
                self.times.len()
            )));
        }
        if self.values.nrows() != self.times.len() || self.values.ncols() != n {
            return Err(Error::validation("value matrix shape does not match labels and times"));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &self.labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::validation(format!("duplicate alpha label '{l}'")));
            }
        }
        // numeric ordering when every time label is a number, lexicographic otherwise
        let numeric: Option<Vec<f64>> =
            self.times.iter().map(|t| t.parse::<f64>().ok().filter(|x| x.is_finite())).collect();
        for (k, w) in self.times.windows(2).enumerate() {
            let order = match &numeric {
                Some(x) => x[k].total_cmp(&x[k + 1]),
                None => w[0].cmp(&w[1]),
            };
            if order != Ordering::Less {
                return Err(Error::validation(format!(
                    "times must be strictly increasing: '{}' then '{}'",
                    w[0], w[1]
                )));
            }
        }
        for (i, label) in self.labels.iter().enumerate() {
            let count = self.column_observed(i).count();
            if count < 2 {
                return Err(Error::validation(format!(
                    "column '{label}' has {count} observations, need at least 2"
                )));
            }
        }
        Ok(())
    }

    pub fn n_alphas(&self) -> usize {
        self.labels.len()
    }

    /// Number of observations, `M + 1`.
    pub fn n_obs(&self) -> usize {
        self.times.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn times(&self) -> &[String] {
        &self.times
    }

    pub fn get(&self, t: usize, i: usize) -> Option<f64> {
        let x = self.values[(t, i)];
        (!x.is_nan()).then_some(x)
    }

    /// Raw matrix with `NaN` in missing cells.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// `(t, value)` pairs of the observed cells of column `i`.
    pub fn column_observed(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let m = self.values.nrows();
        (0..m).map(move |t| (t, self.values[(t, i)])).filter(|(_, x)| !x.is_nan())
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(|x| x.is_nan())
    }

    /// Column with the given label.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Reads a panel CSV: header `time,<label1>,...`, one row per time point.
    pub fn read_csv<R: Read>(reader: R, policy: NaPolicy) -> Result<Self> {
        let (labels, times, rows) = parse_panel_csv(reader, policy)?;
        let values = dense_values(&rows, labels.len())?;
        Self::from_matrix(labels, times, values)
    }

    /// [`AlphaPanel::read_csv`] for factor returns, which may have a single column.
    pub fn read_factors_csv<R: Read>(reader: R, policy: NaPolicy) -> Result<Self> {
        let (labels, times, rows) = parse_panel_csv(reader, policy)?;
        let values = dense_values(&rows, labels.len())?;
        Self::factors_from_matrix(labels, times, values)
    }

    pub fn write_csv<W: Write>(&self, writer: W, policy: NaPolicy) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io { path: "<panel csv>".into(), source: e.into() };
        let mut header = vec!["time".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).map_err(io)?;
        let missing = match policy {
            NaPolicy::EmptyCell => "",
            NaPolicy::LiteralNa => "NA",
        };
        for t in 0..self.n_obs() {
            let mut rec = vec![self.times[t].clone()];
            for i in 0..self.n_alphas() {
                rec.push(self.get(t, i).map_or_else(|| missing.to_string(), sig17));
            }
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<panel csv>".into(), source: e })
    }
}

type PanelRows = (Vec<String>, Vec<String>, Vec<Vec<Option<f64>>>);

fn parse_panel_csv<R: Read>(reader: R, policy: NaPolicy) -> Result<PanelRows> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(e, 1))?,
        None => return Err(Error::Parse { row: 1, column: 1, message: "empty file".into() }),
    };
    if header.len() < 2 {
        return Err(Error::Parse { row: 1, column: 1, message: "header needs a time column and at least one alpha".into() });
    }
    let labels: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let n = labels.len();
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (k, rec) in records.enumerate() {
        let row_no = k + 2;
        let rec = rec.map_err(|e| csv_error(e, row_no))?;
        if rec.len() != n + 1 {
            return Err(Error::Parse {
                row: row_no,
                column: rec.len().min(n + 1),
                message: format!("expected {} fields, found {}", n + 1, rec.len()),
            });
        }
        times.push(rec[0].trim().to_string());
        let mut row = Vec::with_capacity(n);
        for (j, field) in rec.iter().skip(1).enumerate() {
            row.push(parse_cell(field.trim(), policy).map_err(|message| Error::Parse {
                row: row_no,
                column: j + 2,
                message,
            })?);
        }
        rows.push(row);
    }
    Ok((labels, times, rows))
}

/// `None` cells become `NaN`; every row must have `n` cells.
fn dense_values(rows: &[Vec<Option<f64>>], n: usize) -> Result<DMatrix<f64>> {
    let mut values = DMatrix::from_element(rows.len(), n, f64::NAN);
    for (t, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::validation(format!("row {t} has {} values, expected {n}", row.len())));
        }
        for (i, cell) in row.iter().enumerate() {
            if let Some(x) = cell {
                if !x.is_finite() {
                    return Err(Error::validation(format!("non-finite value at row {t}, alpha {i}")));
                }
                values[(t, i)] = *x;
            }
        }
    }
    Ok(values)
}

/// Loads a panel CSV from disk.
pub fn load_panel(path: impl AsRef<Path>, policy: NaPolicy) -> Result<AlphaPanel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    AlphaPanel::read_csv(std::io::BufReader::new(file), policy)
}

/// Loads a factor-return panel CSV from disk.
pub fn load_factors(path: impl AsRef<Path>, policy: NaPolicy) -> Result<AlphaPanel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    AlphaPanel::read_factors_csv(std::io::BufReader::new(file), policy)
}

fn parse_cell(s: &str, policy: NaPolicy) -> std::result::Result<Option<f64>, String> {
    match (s, policy) {
        ("", NaPolicy::EmptyCell) | ("NA", NaPolicy::LiteralNa) => Ok(None),
        ("", NaPolicy::LiteralNa) => Err("empty cell (missing values must be spelled NA)".into()),
        _ => match s.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Some(x)),
            _ => Err(format!("'{s}' is not a finite number")),
        },
    }
}

fn csv_error(e: csv::Error, row: usize) -> Error {
    Error::Parse { row, column: 1, message: e.to_string() }
}
