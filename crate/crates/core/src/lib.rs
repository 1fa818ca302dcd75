//! Adaptive persistence images of 2D segmentation maps.
//!
//! The pipeline runs contour extraction, a kernel-density filtration,
//! cubical persistent homology, and a lifetime-weighted persistence image.
//! On top of it sit the persistence-image dissimilarity and joint loss, the
//! adaptive weighting scheduler, and topological evaluation metrics.

pub mod cli;
pub mod error;
pub mod filtration;
pub mod labeling;
pub mod loss;
pub mod metrics;
pub mod persistence;
pub mod pimage;
pub mod segmap;
pub mod session;
pub mod synth;

pub use error::{Error, Result};
pub use filtration::{
    build_filtration, kde_density, neglog_filtration, DensityField, FiltrationField,
};
pub use loss::{
    epoch_loss, joint_loss, scheduler_update, topological_dissimilarity, LossConfig, SchedulerState,
};
pub use metrics::{betti_error, betti_matching_error, pixel_metrics, MetricReport};
pub use persistence::{
    betti_numbers, compute_persistence, persistence_dim0_unionfind, Bar, BettiPair,
    PersistenceDiagram,
};
pub use pimage::{persistence_image, PersistenceImage, PersistenceImageConfig, PipelineConfig};
pub use segmap::{
    extract_contours, filter_majority_overlap, load_segmap, ContourSet, MapFormat, SegMap,
};
