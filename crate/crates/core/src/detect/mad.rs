//! Scaled median absolute deviation and the outlier rule built on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Consistency constant `-1 / (sqrt(2) * erfcinv(3/2))`, about 1.4826, which
/// makes the scaled MAD an estimator of the standard deviation under
/// normality.
pub fn c_mad() -> f64 {
    -1.0 / (std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(1.5))
}

/// Median of a non-empty slice (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("median of an empty series".into()));
    }
    let mut v = values.to_vec();
    let n = v.len();
    let mid = n / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        Ok(upper)
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(lower + (upper - lower) / 2.0)
    }
}

/// `c_mad * median(|a_i - median(A)|)`.
pub fn scaled_mad(series: &[f64]) -> Result<f64> {
    let m = median(series)?;
    let dev: Vec<f64> = series.iter().map(|a| (a - m).abs()).collect();
    Ok(c_mad() * median(&dev)?)
}

/// Where the outlier band is centred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    /// Centre on the series mean while the scale comes from the median
    /// (the rule as published).
    #[default]
    Mean,
    Median,
}

/// Flag `a_i` when `|a_i - centre| > multiplier * scaled_mad(series)`.
///
/// A zero scaled MAD flags every point that deviates from the centre at all.
pub fn detect_outliers(series: &[f64], multiplier: f64, centering: Centering) -> Result<Vec<bool>> {
    let scale = scaled_mad(series)?;
    if !scale.is_finite() {
        return Err(Error::Domain("scaled MAD is not finite".into()));
    }
    let centre = match centering {
        Centering::Mean => series.iter().sum::<f64>() / series.len() as f64,
        Centering::Median => median(series)?,
    };
    let threshold = multiplier * scale;
    Ok(series.iter().map(|a| (a - centre).abs() > threshold).collect())
}
