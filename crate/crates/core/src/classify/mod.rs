//! Event images, the CNN and its trainer, and the kNN baseline.

mod cnn;
mod features;
mod grouping;
mod image;
mod knn;
pub mod layers;
mod model_io;
mod train;

pub use cnn::{argmax, cnn_forward, cnn_forward_batch, Architecture, BlockParams, BlockShapes, BlockSpec, CnnModel};
pub use features::{extract_baseline_features, iqr, quantile_sorted, FeatureVector};
pub use grouping::{group_prediction, GroupScheme};
pub use image::{form_image, resample_linear, standardize, ClassifierImage, RowNorm, IMAGE_ROWS, WINDOW_SIZE};
pub use knn::{knn_classify, KnnModel};
pub use layers::{Mode, PoolSpec, Shape3};
pub use model_io::{load_model, read_model, save_model, write_model, ModelDescriptor, TensorInfo, MODEL_MAGIC, MODEL_VERSION};
pub use train::{
    batch_gradient, batch_loss, cnn_train, evaluate_split, inference_gradient, stratified_split, BatchGradient,
    EpochStats, LrSchedule, TrainConfig, TrainOutcome,
};

use crate::error::{Error, Result};
use crate::trace::VehicleClass;

/// Classify with several models and keep the single most confident answer.
pub fn fuse_max_probability(models: &[&CnnModel], image: &ClassifierImage) -> Result<(VehicleClass, Vec<f64>)> {
    let mut best: Option<(VehicleClass, Vec<f64>)> = None;
    for m in models {
        let (c, p) = m.predict(image)?;
        if best.as_ref().is_none_or(|(bc, bp)| p[c.ordinal()] > bp[bc.ordinal()]) {
            best = Some((c, p));
        }
    }
    best.ok_or_else(|| Error::Domain("no models to fuse".into()))
}
