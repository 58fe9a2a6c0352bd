use serde::Serialize;

use super::SweepCurve;
use crate::error::{Error, Result};

pub const DEFAULT_REL_DROP: f64 = 0.05;
pub const DEFAULT_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KneeEstimate {
    pub knee: usize,
    /// False when the curve never flattened and `knee` is the last K.
    pub flat: bool,
}

/// Smallest K at which `|ζ₁|` falls by less than `rel_drop` (relative) over
/// the next `window` points of the curve.
pub fn knee_estimate(curve: &SweepCurve, rel_drop: f64, window: usize) -> Result<KneeEstimate> {
    if window == 0 || curve.len() < window + 1 {
        return Err(Error::validation(format!(
            "knee detection needs at least {} sweep points, got {}",
            window + 1,
            curve.len()
        )));
    }
    for j in 0..curve.len() - window {
        let now = curve.zeta1[j].abs();
        let later = curve.zeta1[j + window].abs();
        let drop = if now > 0.0 { (now - later) / now } else { 0.0 };
        if drop < rel_drop {
            return Ok(KneeEstimate { knee: curve.ks[j], flat: true });
        }
    }
    Ok(KneeEstimate { knee: *curve.ks.last().expect("non-empty curve"), flat: false })
}
