//! k-nearest-neighbour baseline over standardised feature vectors.

use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use crate::error::{Error, Result};
use crate::trace::VehicleClass;

/// Training set with its per-feature z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub mean: [f64; FeatureVector::LEN],
    /// Population standard deviations; zero spreads are stored as 1.
    pub scale: [f64; FeatureVector::LEN],
    pub points: Vec<[f64; FeatureVector::LEN]>,
    pub labels: Vec<VehicleClass>,
}

impl KnnModel {
    pub fn fit(features: &[FeatureVector], labels: &[VehicleClass]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Data("kNN needs a non-empty training set".into()));
        }
        if features.len() != labels.len() {
            return Err(Error::Data(format!("{} feature vectors, {} labels", features.len(), labels.len())));
        }
        let raw: Vec<[f64; FeatureVector::LEN]> = features.iter().map(FeatureVector::to_array).collect();
        let n = raw.len() as f64;
        let mut mean = [0.0; FeatureVector::LEN];
        let mut scale = [0.0; FeatureVector::LEN];
        for j in 0..FeatureVector::LEN {
            mean[j] = raw.iter().map(|r| r[j]).sum::<f64>() / n;
            let sd = (raw.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
            scale[j] = if sd > 0.0 { sd } else { 1.0 };
        }
        let mut model = Self {
            mean,
            scale,
            points: Vec::new(),
            labels: labels.to_vec(),
        };
        model.points = raw.iter().map(|r| model.standardize(r)).collect();
        Ok(model)
    }

    pub fn standardize(&self, x: &[f64; FeatureVector::LEN]) -> [f64; FeatureVector::LEN] {
        std::array::from_fn(|j| (x[j] - self.mean[j]) / self.scale[j])
    }

    /// Majority vote among the `k` nearest training points. Ties go to the
    /// class with the smaller mean distance, then to the lower ordinal.
    pub fn classify(&self, query: &FeatureVector, k: usize) -> Result<VehicleClass> {
        if k == 0 || k > self.points.len() {
            return Err(Error::Domain(format!("k = {k} outside 1..={}", self.points.len())));
        }
        let q = self.standardize(&query.to_array());
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
            .collect();
        // Equal distances resolve by training order.
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = [0usize; 5];
        let mut sums = [0.0f64; 5];
        for &(d, i) in &dist[..k] {
            let c = self.labels[i].ordinal();
            votes[c] += 1;
            sums[c] += d;
        }
        let best = (0..5)
            .filter(|&c| votes[c] > 0)
            .min_by(|&a, &b| {
                votes[b]
                    .cmp(&votes[a])
                    .then((sums[a] / votes[a] as f64).total_cmp(&(sums[b] / votes[b] as f64)))
                    .then(a.cmp(&b))
            })
            .expect("k >= 1");
        Ok(VehicleClass::ALL[best])
    }
}

/// One-shot kNN: fit on `train`, classify `query`.
pub fn knn_classify(
    train: &[FeatureVector],
    labels: &[VehicleClass],
    query: &FeatureVector,
    k: usize,
) -> Result<VehicleClass> {
    KnnModel::fit(train, labels)?.classify(query, k)
}
