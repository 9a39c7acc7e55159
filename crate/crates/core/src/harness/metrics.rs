//! Fit statistics against ground truth.

use crate::error::{Error, Result};

/// Coefficient of determination of `(truth, measured)` pairs about the
/// identity line `measured = truth`. SS_tot is taken about the mean truth.
pub fn compute_r_squared(rows: &[(f64, f64)]) -> Result<f64> {
    if rows.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            got: rows.len(),
        });
    }
    let mean = rows.iter().map(|r| r.0).sum::<f64>() / rows.len() as f64;
    let ss_res: f64 = rows.iter().map(|(t, m)| (m - t).powi(2)).sum();
    let ss_tot: f64 = rows.iter().map(|(t, _)| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::InvalidParameter("truth values have no spread".into()));
    }
    Ok(1.0 - ss_res / ss_tot)
}
