//! The 6 x 2500 classifier input.

use serde::{Deserialize, Serialize};

use crate::detect::DetectionEvent;
use crate::error::{Error, Result};

/// Number of columns every event is resampled to.
pub const WINDOW_SIZE: usize = 2500;
/// Three amplitude rows then three phase rows.
pub const IMAGE_ROWS: usize = 6;

/// How one row was standardised: `image = (raw - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowNorm {
    pub offset: f64,
    pub scale: f64,
}

/// A real-valued image, row-major. [`form_image`] always produces
/// `6 x 2500`; other sizes exist for small test networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierImage {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    norms: Vec<RowNorm>,
}

impl ClassifierImage {
    /// Wrap raw values without normalisation (metadata is identity).
    pub fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Shape(format!("{} values for a {rows}x{cols} image", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("image entries must be finite".into()));
        }
        Ok(Self {
            rows,
            cols,
            data,
            norms: vec![RowNorm { offset: 0.0, scale: 1.0 }; rows],
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn norms(&self) -> &[RowNorm] {
        &self.norms
    }
}

/// Linear resampling of `row` to `len` points; output `j` sits at input
/// position `j * (L - 1) / (len - 1)`.
pub fn resample_linear(row: &[f64], len: usize) -> Result<Vec<f64>> {
    let l = row.len();
    if l < 2 {
        return Err(Error::Degenerate(format!("cannot resample a row of {l} samples")));
    }
    if len == l {
        return Ok(row.to_vec());
    }
    if len == 1 {
        return Ok(vec![row[0]]);
    }
    let step = (l - 1) as f64 / (len - 1) as f64;
    Ok((0..len)
        .map(|j| {
            let pos = j as f64 * step;
            let i = (pos.floor() as usize).min(l - 2);
            let t = pos - i as f64;
            row[i] + t * (row[i + 1] - row[i])
        })
        .collect())
}

/// Standardise to zero mean and unit (population) variance. A constant row
/// becomes all zeros with scale 1.
pub fn standardize(row: &mut [f64]) -> RowNorm {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    // Relative floor: rows that are constant up to rounding count as constant.
    let floor = 1e-12 * row.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if sd <= floor {
        row.iter_mut().for_each(|v| *v = 0.0);
        return RowNorm { offset: mean, scale: 1.0 };
    }
    row.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    RowNorm { offset: mean, scale: sd }
}

/// Resample every row of an event to [`WINDOW_SIZE`] and standardise it.
pub fn form_image(event: &DetectionEvent) -> Result<ClassifierImage> {
    if event.amplitude_rows.len() != 3 || event.phase_rows.len() != 3 {
        return Err(Error::Shape(format!(
            "expected 3 amplitude and 3 phase rows, got {} and {}",
            event.amplitude_rows.len(),
            event.phase_rows.len()
        )));
    }
    let l = event.amplitude_rows[0].len();
    if event.amplitude_rows.iter().chain(&event.phase_rows).any(|r| r.len() != l) {
        return Err(Error::Shape("event rows differ in length".into()));
    }
    if l < 2 {
        return Err(Error::Degenerate(format!("event of {l} samples is too short")));
    }
    let mut data = Vec::with_capacity(IMAGE_ROWS * WINDOW_SIZE);
    let mut norms = Vec::with_capacity(IMAGE_ROWS);
    for row in event.amplitude_rows.iter().chain(&event.phase_rows) {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("event rows must be finite".into()));
        }
        let mut r = resample_linear(row, WINDOW_SIZE)?;
        norms.push(standardize(&mut r));
        data.extend(r);
    }
    Ok(ClassifierImage {
        rows: IMAGE_ROWS,
        cols: WINDOW_SIZE,
        data,
        norms,
    })
}
