use nalgebra::{DMatrix, DVector};

use super::AlphaPanel;
use crate::error::{Error, Result};

/// Relative threshold on the QR diagonal below which the design is rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Residuals of each alpha's time-series regression (with intercept) on every
/// factor column. Each alpha uses the rows where it is observed; missing cells
/// stay missing.
pub fn regress_out(panel: &AlphaPanel, factors: &AlphaPanel) -> Result<AlphaPanel> {
    if panel.times() != factors.times() {
        return Err(Error::validation("factor panel time labels do not match the alpha panel"));
    }
    let k = factors.n_alphas();
    let fx = factors.values();
    let mut out = panel.values().clone();
    for i in 0..panel.n_alphas() {
        let rows: Vec<usize> = panel.column_observed(i).map(|(t, _)| t).collect();
        if let Some(&t) = rows.iter().find(|&&t| (0..k).any(|c| fx[(t, c)].is_nan())) {
            return Err(Error::validation(format!(
                "factors are missing at time '{}' where alpha '{}' is observed",
                panel.times()[t],
                panel.labels()[i]
            )));
        }
        if rows.len() < k + 1 {
            return Err(Error::validation(format!(
                "alpha '{}' has {} observations for {} regressors",
                panel.labels()[i],
                rows.len(),
                k + 1
            )));
        }
        let design = DMatrix::from_fn(rows.len(), k + 1, |r, c| if c == 0 { 1.0 } else { fx[(rows[r], c - 1)] });
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&t| out[(t, i)]));
        let beta = least_squares(&design, &y).map_err(|_| {
            Error::validation(format!(
                "factor matrix is rank deficient over the observed rows of '{}'",
                panel.labels()[i]
            ))
        })?;
        let fitted = &design * beta;
        for (r, &t) in rows.iter().enumerate() {
            out[(t, i)] = y[r] - fitted[r];
        }
    }
    AlphaPanel::from_matrix(panel.labels().to_vec(), panel.times().to_vec(), out)
}

/// Householder-QR least squares; `Err(())` when the design is rank deficient.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> std::result::Result<DVector<f64>, ()> {
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..r.ncols()).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if scale == 0.0 || (0..r.ncols()).any(|j| r[(j, j)].abs() <= RANK_TOL * scale) {
        return Err(());
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty).ok_or(())
}
