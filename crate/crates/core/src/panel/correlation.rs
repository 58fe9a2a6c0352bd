use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::AlphaPanel;
use crate::error::{Error, Result};
use crate::format::sig17;
use crate::linalg::{check_symmetric, sym_eigenvalues, SYMMETRY_TOL};

/// Default minimum number of jointly observed rows per pair.
pub const DEFAULT_MIN_OVERLAP: usize = 12;

/// Relative eigenvalue floor used for the `psd` flag.
pub const PSD_REL_TOL: f64 = 1e-10;

/// Symmetric unit-diagonal correlation matrix with companion volatilities.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    labels: Vec<String>,
    psi: DMatrix<f64>,
    vols: Vec<f64>,
    psd: bool,
    min_overlap: usize,
}

impl CorrelationMatrix {
    /// Validates `psi` and computes the `psd` flag. Volatilities default to 1.
    pub fn new(labels: Vec<String>, psi: DMatrix<f64>, vols: Option<Vec<f64>>) -> Result<Self> {
        let n = psi.nrows();
        check_symmetric(&psi, SYMMETRY_TOL)?;
        if n < 1 || labels.len() != n {
            return Err(Error::validation(format!("{} labels for a {n}x{n} matrix", labels.len())));
        }
        for i in 0..n {
            if psi[(i, i)] != 1.0 {
                return Err(Error::validation(format!("diagonal entry {i} is {}, expected 1", psi[(i, i)])));
            }
            for j in 0..n {
                if psi[(i, j)].abs() > 1.0 + 1e-12 {
                    return Err(Error::validation(format!("|psi[{i}][{j}]| = {} exceeds 1", psi[(i, j)].abs())));
                }
            }
        }
        let vols = vols.unwrap_or_else(|| vec![1.0; n]);
        if vols.len() != n || vols.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::validation("volatilities must be positive and one per alpha"));
        }
        // Symmetrise exactly so downstream eigensolvers see a symmetric input.
        let psi = (&psi + psi.transpose()) * 0.5;
        let psd = is_positive_definite(&psi);
        Ok(Self { labels, psi, vols, psd, min_overlap: 0 })
    }

    /// Builds from a raw matrix with labels `a1..aN`.
    pub fn from_matrix(psi: DMatrix<f64>) -> Result<Self> {
        let labels = (1..=psi.nrows()).map(|i| format!("a{i}")).collect();
        Self::new(labels, psi, None)
    }

    /// Builds a matrix with every off-diagonal entry equal to `rho`.
    pub fn uniform(n: usize, rho: f64) -> Result<Self> {
        let mut m = DMatrix::from_element(n, n, rho);
        m.fill_diagonal(1.0);
        Self::from_matrix(m)
    }

    pub fn n(&self) -> usize {
        self.psi.nrows()
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn vols(&self) -> &[f64] {
        &self.vols
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// All eigenvalues exceed `1e-10 * λ_max`.
    pub fn psd(&self) -> bool {
        self.psd
    }

    /// Smallest pairwise observation count used in the estimate (0 when not estimated).
    pub fn min_overlap(&self) -> usize {
        self.min_overlap
    }

    /// `Σ_ij Ψ_ij`.
    pub fn total_sum(&self) -> f64 {
        self.psi.sum()
    }

    /// Replaces `psi`, keeping labels and volatilities.
    pub(crate) fn with_psi(&self, psi: DMatrix<f64>) -> Result<Self> {
        let mut out = Self::new(self.labels.clone(), psi, Some(self.vols.clone()))?;
        out.min_overlap = self.min_overlap;
        Ok(out)
    }

    /// Labelled CSV: header row and column of labels, 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io { path: "<correlation csv>".into(), source: e.into() };
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for i in 0..self.n() {
            let mut rec = vec![self.labels[i].clone()];
            rec.extend((0..self.n()).map(|j| sig17(self.psi[(i, j)])));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<correlation csv>".into(), source: e })
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut rows: Vec<csv::StringRecord> = Vec::new();
        for (k, r) in rdr.records().enumerate() {
            rows.push(r.map_err(|e| Error::Parse { row: k + 1, column: 1, message: e.to_string() })?);
        }
        let header = rows.first().ok_or(Error::Parse { row: 1, column: 1, message: "empty file".into() })?;
        let labels: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let n = labels.len();
        if rows.len() != n + 1 {
            return Err(Error::Parse {
                row: rows.len().min(n + 1) + 1,
                column: 1,
                message: format!("expected {n} matrix rows, found {}", rows.len() - 1),
            });
        }
        let mut m = DMatrix::zeros(n, n);
        for (i, rec) in rows.iter().skip(1).enumerate() {
            if rec.get(0).map(str::trim) != Some(labels[i].as_str()) {
                return Err(Error::Parse {
                    row: i + 2,
                    column: 1,
                    message: format!("row label should be '{}'", labels[i]),
                });
            }
            for j in 0..n {
                let cell = rec.get(j + 1).unwrap_or("").trim();
                m[(i, j)] = cell.parse::<f64>().map_err(|_| Error::Parse {
                    row: i + 2,
                    column: j + 2,
                    message: format!("'{cell}' is not a number"),
                })?;
            }
        }
        Self::new(labels, m, None)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

pub(crate) fn is_positive_definite(psi: &DMatrix<f64>) -> bool {
    let ev = sym_eigenvalues(psi);
    let top = ev[0];
    top > 0.0 && ev.iter().all(|&v| v > PSD_REL_TOL * top)
}

/// Pearson correlation over jointly observed rows of each pair.
///
/// Volatilities are full-sample standard deviations (`n - 1` denominator) of
/// each column over its own observed cells.
pub fn pairwise_correlation(panel: &AlphaPanel, min_overlap: usize) -> Result<CorrelationMatrix> {
    if min_overlap < 2 {
        return Err(Error::validation("min_overlap must be at least 2"));
    }
    let n = panel.n_alphas();
    let labels = panel.labels();
    let x = panel.values();
    let mut vols = Vec::with_capacity(n);
    for (i, label) in labels.iter().enumerate() {
        let obs: Vec<f64> = panel.column_observed(i).map(|(_, v)| v).collect();
        let sd = sample_sd(&obs);
        if !(sd > 0.0) {
            return Err(Error::validation(format!("column '{label}' has zero variance")));
        }
        vols.push(sd);
    }
    if !panel.has_missing() {
        if panel.n_obs() < min_overlap {
            return Err(Error::validation(format!(
                "pair ('{}', '{}') has {} joint observations, need {min_overlap}",
                labels[0],
                labels[1],
                panel.n_obs()
            )));
        }
        let mut out = CorrelationMatrix::new(labels.to_vec(), full_sample_pearson(x), Some(vols))?;
        out.min_overlap = panel.n_obs();
        return Ok(out);
    }
    let mut psi = DMatrix::identity(n, n);
    let mut smallest = usize::MAX;
    let mut a = Vec::with_capacity(panel.n_obs());
    let mut b = Vec::with_capacity(panel.n_obs());
    for i in 0..n {
        for j in (i + 1)..n {
            a.clear();
            b.clear();
            for t in 0..panel.n_obs() {
                let (u, v) = (x[(t, i)], x[(t, j)]);
                if !(u.is_nan() || v.is_nan()) {
                    a.push(u);
                    b.push(v);
                }
            }
            if a.len() < min_overlap {
                return Err(Error::validation(format!(
                    "pair ('{}', '{}') has {} joint observations, need {min_overlap}",
                    labels[i],
                    labels[j],
                    a.len()
                )));
            }
            smallest = smallest.min(a.len());
            let r = pearson(&a, &b).ok_or_else(|| {
                Error::validation(format!(
                    "pair ('{}', '{}') has zero variance over its overlap",
                    labels[i], labels[j]
                ))
            })?;
            psi[(i, j)] = r;
            psi[(j, i)] = r;
        }
    }
    let mut out = CorrelationMatrix::new(labels.to_vec(), psi, Some(vols))?;
    out.min_overlap = if n > 1 { smallest } else { panel.n_obs() };
    Ok(out)
}

/// Pearson correlations of all column pairs of a complete matrix via one
/// product of the centred, unit-norm columns.
fn full_sample_pearson(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = x.clone();
    for mut col in z.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        col /= norm;
    }
    let mut psi = z.transpose() * &z;
    let n = psi.nrows();
    for i in 0..n {
        psi[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let r = (0.5 * (psi[(i, j)] + psi[(j, i)])).clamp(-1.0, 1.0);
            psi[(i, j)] = r;
            psi[(j, i)] = r;
        }
    }
    psi
}

fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}
