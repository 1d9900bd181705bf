//! Camera and box inspection order, and identification workload
//! distribution across cameras.

mod distribution;
mod inspection;
mod profile;

pub use distribution::{
    batched_latency, completion_time, evaluate_assignment, plan_distribution, transmission_delay,
    DistributionPlan,
};
pub use inspection::{order_boxes, InspectionOrder, InspectionState, DEFAULT_ALPHA};
pub use profile::{
    ewma_update, head_camera, preset, CameraProfile, CropSpec, ProfileBook, ProfileSpec,
    DEFAULT_BANDWIDTH_BPS, DEFAULT_BETA, PRESETS,
};
