//! Prototype-based interpretable segmentation.
//!
//! Training clusters the latent features of each class separately and keeps
//! up to `L` prototypes per class. Each prototype carries its latent vector
//! and a raw band spectrum; prototypes drawn from real pixels also record
//! where they came from. Inference labels a pixel by majority vote of its `k`
//! nearest prototypes across all classes, and the share of agreeing votes is
//! the pixel's confidence.

mod bank;
mod kmeans;
mod kmedoids;
mod knn;
mod projection;
mod sampling;

pub use bank::{
    build_prototype_bank, nearest_real_pixel, BankConfig, ClusterMethod, Prototype, PrototypeBank,
    PrototypeMode, DEFAULT_PROTOTYPES_PER_CLASS,
};
pub use kmeans::{MiniBatchKMeans, DEFAULT_BATCH_SIZE, DEFAULT_ITERS_PER_CLUSTER};
pub use kmedoids::kmedoids;
pub use knn::{
    classify_pixel, explain_pixel, is_high_confidence, segment_features, segment_image,
    threshold_confidence, Classification, ExplainedNeighbor, Neighbor, PixelExplanation,
    PrototypeIndex, DEFAULT_CONFIDENCE_THRESHOLD, DEFAULT_K,
};
pub use projection::{project_prototypes_2d, project_rows_2d};
pub use sampling::{collect_class_pixels, ClassSampler, ClassSamples, Provenance};

/// Default reservoir size per class for mini-batch k-means training.
pub const DEFAULT_SAMPLE_CAP: usize = 20_000;
/// Default reservoir size per class for k-medoids, whose cost is quadratic.
pub const DEFAULT_MEDOID_SAMPLE_CAP: usize = 2_000;
