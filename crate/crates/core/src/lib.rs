//! Multi-camera, multi-target tracking with cross-camera collaboration.
//!
//! The library simulates a set of overlapping fixed cameras watching a
//! ground plane, and tracks query objects across them while trying to run
//! the identification model as rarely as possible.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod association;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod ids;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod scenario;
pub mod scheduler;
pub mod worldsim;

pub use error::{Error, Result};
pub use geometry::{BBox, FrameGeometry};
pub use ids::{CameraId, ObjectId};
