//! Gaze-weighted pooling of CNN feature maps for collage search tasks.
//!
//! Fixations are rendered into per-image density maps, used to reweight
//! feature maps before global average pooling, and the per-image posteriors
//! are fused across a collage.

pub mod collage;
pub mod encoding;
pub mod error;
pub mod io;
pub mod eval;
pub mod pooling;
pub mod types;

pub use collage::{
    integrate, run_collage, CollageOutcome, DensityMode, FeatureStore, ImageEvidence,
    IntegrationConfig,
};
pub use encoding::{
    assign_fixations, build_fdm, pool_fixations, render_fixation, uniform_fdm, EncodingConfig,
    FixationPooling, GridPoint, RawDensityMap,
};
pub use error::{Error, FormatError, Location, Result, Violation};
pub use pooling::{
    acam, class_activation_map, classify, gap, gaze_weighted_feature_map, logits, predict_image,
    softmax, AttendedClassActivationMap, GazeWeightedFeatureMap,
};
pub use types::{
    BoundingBox, ClassifierHead, CollageLayout, FeatureMap, Fixation, FixationDensityMap,
    FixationLog, GridDims, LayoutEntry, PredictionResult, Scope, Task, TaskKind,
};
