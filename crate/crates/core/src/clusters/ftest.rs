use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::sig17;
use crate::linalg::{median, quantile_sorted};
use crate::panel::AlphaPanel;

/// Default winsorisation quantile (clip at the 5% and 95% quantiles).
pub const DEFAULT_WINSOR: f64 = 0.05;

/// Binary cluster membership keyed by alpha label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryLoadings {
    labels: Vec<String>,
    /// 0-based cluster per alpha.
    assignment: Vec<usize>,
    n_clusters: usize,
}

impl BinaryLoadings {
    /// Every cluster `0..n_clusters` must have at least one member.
    pub fn new(labels: Vec<String>, assignment: Vec<usize>, n_clusters: usize) -> Result<Self> {
        if labels.len() != assignment.len() {
            return Err(Error::validation("one cluster per alpha label required"));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::validation(format!("alpha {dup} assigned twice")));
        }
        if let Some(g) = assignment.iter().find(|&&g| g >= n_clusters) {
            return Err(Error::validation(format!("cluster {} exceeds the {n_clusters} clusters", g + 1)));
        }
        let mut counts = vec![0usize; n_clusters];
        assignment.iter().for_each(|&g| counts[g] += 1);
        if let Some(a) = counts.iter().position(|&c| c == 0) {
            return Err(Error::validation(format!("cluster column {} is empty", a + 1)));
        }
        Ok(Self { labels, assignment, n_clusters })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    /// CSV with header `alpha,cluster`; cluster indices are 1-based.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut records = rdr.records();
        let parse_err = |row: usize, column: usize, message: String| Error::Parse { row, column, message };
        let header = records
            .next()
            .ok_or_else(|| parse_err(1, 1, "empty file".into()))?
            .map_err(|e| parse_err(1, 1, e.to_string()))?;
        if header.len() != 2 || header[0].trim() != "alpha" || header[1].trim() != "cluster" {
            return Err(parse_err(1, 1, "header must be `alpha,cluster`".into()));
        }
        let mut labels = Vec::new();
        let mut assignment = Vec::new();
        for (k, rec) in records.enumerate() {
            let row = k + 2;
            let rec = rec.map_err(|e| parse_err(row, 1, e.to_string()))?;
            if rec.len() != 2 {
                return Err(parse_err(row, 1, format!("expected 2 fields, found {}", rec.len())));
            }
            let g: usize = rec[1]
                .trim()
                .parse()
                .ok()
                .filter(|&g| g >= 1)
                .ok_or_else(|| parse_err(row, 2, format!("invalid cluster index {:?}", &rec[1])))?;
            labels.push(rec[0].trim().to_string());
            assignment.push(g - 1);
        }
        let f = assignment.iter().copied().max().map_or(0, |g| g + 1);
        Self::new(labels, assignment, f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io { path: "<loadings csv>".into(), source: e.into() };
        w.write_record(["alpha", "cluster"]).map_err(io)?;
        for (l, g) in self.labels.iter().zip(&self.assignment) {
            w.write_record([l.clone(), (g + 1).to_string()]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<loadings csv>".into(), source: e })
    }

    /// Cluster of each panel column, in panel order.
    fn align(&self, panel: &AlphaPanel) -> Result<Vec<usize>> {
        if panel.n_alphas() != self.labels.len() {
            return Err(Error::validation(format!(
                "loadings list {} alphas, panel has {}",
                self.labels.len(),
                panel.n_alphas()
            )));
        }
        let lookup: std::collections::HashMap<&str, usize> =
            self.labels.iter().map(String::as_str).zip(self.assignment.iter().copied()).collect();
        panel
            .labels()
            .iter()
            .map(|l| lookup.get(l.as_str()).copied().ok_or_else(|| Error::validation(format!("alpha {l} has no cluster"))))
            .collect()
    }
}

/// F-statistics of the cross-sectional regressions on the old and new loadings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FTestReport {
    pub times: Vec<String>,
    pub f_old: Vec<f64>,
    pub f_new: Vec<f64>,
    /// Medians of the winsorised series.
    pub median_old: f64,
    pub median_new: f64,
    /// True when the new cluster is supported: `median_new > median_old`.
    pub verdict: bool,
    /// Time points skipped, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl FTestReport {
    /// CSV with header `time,f_old,f_new`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io { path: "<ftest csv>".into(), source: e.into() };
        w.write_record(["time", "f_old", "f_new"]).map_err(io)?;
        for ((t, a), b) in self.times.iter().zip(&self.f_old).zip(&self.f_new) {
            w.write_record([t.clone(), sig17(*a), sig17(*b)]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<ftest csv>".into(), source: e })
    }

    /// `{"median_old", "median_new", "verdict", "n_times", "skipped"}`.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "median_old": self.median_old,
            "median_new": self.median_new,
            "verdict": self.verdict,
            "n_times": self.times.len(),
            "skipped": self.skipped.iter().map(|(t, why)| serde_json::json!({"time": t, "reason": why})).collect::<Vec<_>>(),
        })
    }
}

/// F-statistic of the regression of `y` on binary loadings, without intercept:
/// `(ESS/p) / (RSS/(n−p))` with `ESS = Σ ŷ²`.
///
/// `NaN` entries of `y` are left out; clusters with no observed member drop out
/// of `p`. Returns an error message when the statistic is undefined.
pub fn cross_section_f_stat(y: &[f64], assignment: &[usize], n_clusters: usize) -> std::result::Result<f64, String> {
    let mut sum = vec![0.0; n_clusters];
    let mut count = vec![0usize; n_clusters];
    for (&v, &g) in y.iter().zip(assignment) {
        if !v.is_nan() {
            sum[g] += v;
            count[g] += 1;
        }
    }
    let n: usize = count.iter().sum();
    let p = count.iter().filter(|&&c| c > 0).count();
    if n <= p {
        return Err(format!("{n} observed alphas for {p} clusters"));
    }
    let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    let ess: f64 = mean.iter().zip(&count).map(|(m, &c)| c as f64 * m * m).sum();
    let rss: f64 = y.iter().zip(assignment).filter(|(v, _)| !v.is_nan()).map(|(v, &g)| (v - mean[g]).powi(2)).sum();
    if !(rss > 0.0) {
        return Err("zero residual sum of squares".into());
    }
    Ok((ess / p as f64) / (rss / (n - p) as f64))
}

fn winsorize(values: &[f64], q: f64) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&sorted, q);
    let hi = quantile_sorted(&sorted, 1.0 - q);
    values.iter().map(|v| v.clamp(lo, hi)).collect()
}

/// Compares per-time F-statistics of `panel` on `omega_old` (F clusters) with
/// `panel_new` (all N′ alphas) on `omega_new` (F+1 clusters).
pub fn new_cluster_ftest(
    panel: &AlphaPanel,
    omega_old: &BinaryLoadings,
    panel_new: &AlphaPanel,
    omega_new: &BinaryLoadings,
    winsor: f64,
) -> Result<FTestReport> {
    if !(0.0..0.5).contains(&winsor) {
        return Err(Error::validation(format!("winsor quantile {winsor} must lie in [0, 0.5)")));
    }
    if panel.times() != panel_new.times() {
        return Err(Error::validation("old and new panels have different time labels"));
    }
    if omega_new.n_clusters() != omega_old.n_clusters() + 1 {
        return Err(Error::validation(format!(
            "new loadings need {} clusters, found {}",
            omega_old.n_clusters() + 1,
            omega_new.n_clusters()
        )));
    }
    let old_assign = omega_old.align(panel)?;
    let new_assign = omega_new.align(panel_new)?;
    let mut report = FTestReport {
        times: vec![],
        f_old: vec![],
        f_new: vec![],
        median_old: f64::NAN,
        median_new: f64::NAN,
        verdict: false,
        skipped: vec![],
    };
    for (t, label) in panel.times().iter().enumerate() {
        let y_old: Vec<f64> = panel.values().row(t).iter().copied().collect();
        let y_new: Vec<f64> = panel_new.values().row(t).iter().copied().collect();
        let a = cross_section_f_stat(&y_old, &old_assign, omega_old.n_clusters());
        let b = cross_section_f_stat(&y_new, &new_assign, omega_new.n_clusters());
        match (a, b) {
            (Ok(a), Ok(b)) => {
                report.times.push(label.clone());
                report.f_old.push(a);
                report.f_new.push(b);
            }
            (Err(why), _) => report.skipped.push((label.clone(), format!("old regression: {why}"))),
            (_, Err(why)) => report.skipped.push((label.clone(), format!("new regression: {why}"))),
        }
    }
    if report.times.is_empty() {
        return Err(Error::validation("no time point admits both regressions"));
    }
    report.median_old = median(&winsorize(&report.f_old, winsor));
    report.median_new = median(&winsorize(&report.f_new, winsor));
    report.verdict = report.median_new > report.median_old;
    Ok(report)
}
