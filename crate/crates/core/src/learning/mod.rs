//! Learned residual model: spline-smoothed labels, features, a small MLP
//! trained with Adam on an L1 loss, and the model file format.

mod dataset;
mod features;
mod mlp;
mod model;
mod spline;
mod train;

pub use dataset::{make_dataset, Dataset, FlightRecord, LabelMode, TrainingSample};
pub use features::{build_features, NormStats, FEATURE_DIM, FEATURE_NAMES, LABEL_DIM, LABEL_NAMES};
pub use mlp::{Adam, Mlp, LEAKY_SLOPE};
pub use model::{MlpModel, MODEL_MAGIC, MODEL_VERSION};
pub use spline::{fit_smoothing_spline, SmoothingSpline};
pub use train::{split_rows, train, train_network, EpochRecord, TrainConfig, TrainReport};

/// Default knot spacing for label smoothing, s.
pub const DEFAULT_KNOT_SPACING: f64 = 0.1;
