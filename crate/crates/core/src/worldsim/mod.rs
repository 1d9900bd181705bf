//! Synthetic ground plane, cameras, moving objects and the detection and
//! identification oracles that stand in for the vision models.

mod camera;
mod oracle;
mod trace;
mod world;

pub use camera::{CameraConfig, CameraModel, Homography, Projected, Projection};
pub use oracle::{
    detect, extract_id_feature, ground_embedding, similarity, CropRef, Detection,
    DetectionOracleConfig, IdFeature, IdOracle, IdOracleConfig, CONFUSED_LABEL,
    DEFAULT_FEATURE_DIM,
};
pub use trace::{ingest_trace, ingest_trace_with, Trace, TRACE_HEADER};
pub use world::{
    generate_world, Footprint, GroundTruthAnnotation, ObjectSpec, ObjectState, Trajectory,
    WorldConfig, WorldStream,
};
