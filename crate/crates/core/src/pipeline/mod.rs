//! Per-bundle tracking strategies and their shared types.

mod argus;
mod baselines;
mod bundle;
mod types;

pub use argus::{refresh_limit, ArgusConfig, ArgusTracker, DEFAULT_OCCLUSION_LIMIT, DEFAULT_REFRESH_INTERVAL_S};
pub use baselines::{cells_of, learn_roi_masks, CameraFilter, ConvTracker, RoiMasks, ROI_COLS, ROI_ROWS};
pub use bundle::{align_frames, CameraFrame, FrameBundle, DEFAULT_ALIGNMENT_MS};
pub use types::*;

#[cfg(test)]
pub(crate) mod fixture;
