use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::association::{EntryId, RecordId};
use crate::error::Result;
use crate::geometry::{BBox, FrameGeometry};
use crate::ids::{CameraId, ObjectId};
use crate::rng::{stream_rng, Stream};
use crate::scheduler::CameraProfile;
use crate::worldsim::{detect, similarity, Detection, DetectionOracleConfig, IdFeature, IdOracle};

use super::{CameraFrame, FrameBundle};

/// A target to track: the object whose query image produced `feature`.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: ObjectId,
    pub label: String,
    pub feature: IdFeature,
    /// Minimum cosine similarity for a positive match.
    pub tau: f64,
}

impl Query {
    /// Query whose feature is the object's clean embedding.
    pub fn for_object(oracle: &IdOracle, id: ObjectId, label: &str, tau: f64) -> Self {
        Self {
            id,
            label: label.to_string(),
            feature: oracle.ground_embedding(id),
            tau,
        }
    }
}

/// How an identity was decided for a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IdMode {
    FeatureMatch,
    SpatialAssoc,
    TemporalAssoc,
    OcclusionInterp,
}

impl fmt::Display for IdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdMode::FeatureMatch => "FEATURE_MATCH",
            IdMode::SpatialAssoc => "SPATIAL_ASSOC",
            IdMode::TemporalAssoc => "TEMPORAL_ASSOC",
            IdMode::OcclusionInterp => "OCCLUSION_INTERP",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Citation {
    None,
    Entry(EntryId),
    Record(RecordId),
}

impl fmt::Display for Citation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Citation::None => Ok(()),
            Citation::Entry(e) => write!(f, "{e}"),
            Citation::Record(r) => write!(f, "{r}"),
        }
    }
}

/// One query located on one camera at one timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub query: ObjectId,
    pub camera: CameraId,
    pub bbox: BBox,
    pub mode: IdMode,
    pub source: Citation,
    pub score: Option<f64>,
}

/// Cost of one bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub step: u64,
    pub timestamp_ms: f64,
    /// Identification calls charged to the camera whose frame they came from.
    pub ids_per_camera: Vec<u64>,
    pub detected: Vec<bool>,
    pub detect_s: Vec<f64>,
    /// Identification time attributed to each camera's phase.
    pub id_s: Vec<f64>,
    pub latency_model: LatencyModel,
    /// Crops sent away from each camera.
    pub crops_tx: Vec<u64>,
    pub bytes_tx: Vec<u64>,
}

/// How per-camera components combine into a step latency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatencyModel {
    /// Each camera works alone: slowest camera wins.
    Independent,
    /// Parallel detection, then camera phases one after another.
    DetectThenSequential,
}

impl LedgerRow {
    pub fn new(step: u64, timestamp_ms: f64, cameras: usize, latency_model: LatencyModel) -> Self {
        Self {
            step,
            timestamp_ms,
            ids_per_camera: vec![0; cameras],
            detected: vec![false; cameras],
            detect_s: vec![0.0; cameras],
            id_s: vec![0.0; cameras],
            latency_model,
            crops_tx: vec![0; cameras],
            bytes_tx: vec![0; cameras],
        }
    }

    pub fn total_ids(&self) -> u64 {
        self.ids_per_camera.iter().sum()
    }

    pub fn total_crops_tx(&self) -> u64 {
        self.crops_tx.iter().sum()
    }

    pub fn detections(&self) -> u64 {
        self.detected.iter().filter(|d| **d).count() as u64
    }

    pub fn detect_phase_s(&self) -> f64 {
        self.detect_s.iter().copied().fold(0.0, f64::max)
    }

    pub fn latency_s(&self) -> f64 {
        match self.latency_model {
            LatencyModel::Independent => self
                .detect_s
                .iter()
                .zip(&self.id_s)
                .map(|(d, i)| d + i)
                .fold(0.0, f64::max),
            LatencyModel::DetectThenSequential => self.detect_phase_s() + self.id_s.iter().sum::<f64>(),
        }
    }

    pub fn id_phase_s(&self) -> f64 {
        self.latency_s() - self.detect_phase_s()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub step: u64,
    pub timestamp_ms: f64,
    pub assignments: Vec<Assignment>,
    pub ledger: LedgerRow,
}

impl StepOutput {
    /// Assignments of one camera keyed by query.
    pub fn on_camera(&self, camera: CameraId) -> BTreeMap<ObjectId, BBox> {
        self.assignments
            .iter()
            .filter(|a| a.camera == camera)
            .map(|a| (a.query, a.bbox))
            .collect()
    }
}

/// Everything a tracker may consult besides its own state.
#[derive(Debug)]
pub struct Environment {
    pub seed: u64,
    pub frames: Vec<FrameGeometry>,
    pub detection: DetectionOracleConfig,
    pub oracle: IdOracle,
    pub queries: Vec<Query>,
    /// Measured compute and network characteristics per camera.
    pub profiles: Vec<CameraProfile>,
}

impl Environment {
    pub fn cameras(&self) -> usize {
        self.frames.len()
    }

    /// Runs the detector on a frame. Draws come from a stream keyed by the
    /// frame, so every strategy sees the same detections.
    pub fn detect(&self, frame: &CameraFrame) -> Vec<Detection> {
        let mut rng = stream_rng(self.seed, Stream::Detection, &[frame.camera.0 as u64, frame.seq]);
        detect(frame, &self.detection, &mut rng)
    }

    /// Detections whose label some query is looking for.
    pub fn candidates(&self, frame: &CameraFrame) -> Vec<Detection> {
        let labels: HashSet<&str> = self.queries.iter().map(|q| q.label.as_str()).collect();
        self.detect(frame)
            .into_iter()
            .filter(|d| labels.contains(d.label.as_str()))
            .collect()
    }

    /// Best query for a feature among those `open`, if any clears its
    /// threshold.
    pub fn best_query(&self, feature: &IdFeature, label: &str, open: impl Fn(usize) -> bool) -> Result<Option<(usize, f64)>> {
        let mut best: Option<(usize, f64)> = None;
        for (qi, q) in self.queries.iter().enumerate() {
            if q.label != label || !open(qi) {
                continue;
            }
            let s = similarity(feature, &q.feature)?;
            if s >= q.tau && best.is_none_or(|(_, bs)| s > bs) {
                best = Some((qi, s));
            }
        }
        Ok(best)
    }

    /// All `(query, similarity)` pairs clearing the threshold.
    pub fn matching_queries(&self, feature: &IdFeature, label: &str) -> Result<Vec<(usize, f64)>> {
        let mut out = Vec::new();
        for (qi, q) in self.queries.iter().enumerate() {
            if q.label != label {
                continue;
            }
            let s = similarity(feature, &q.feature)?;
            if s >= q.tau {
                out.push((qi, s));
            }
        }
        Ok(out)
    }
}

/// Per-strategy tracking loop.
pub trait Tracker {
    fn name(&self) -> &'static str;
    fn step(&mut self, bundle: &FrameBundle, env: &Environment) -> Result<StepOutput>;
}

/// A query's path across time on every camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub query: ObjectId,
    pub points: Vec<TrackPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackPoint {
    pub step: u64,
    pub timestamp_ms: f64,
    pub camera: CameraId,
    pub bbox: BBox,
    pub mode: IdMode,
    pub source: Citation,
}

/// Groups step assignments into one tracklet per query.
pub fn build_tracklets(queries: &[Query], steps: &[StepOutput]) -> Vec<Tracklet> {
    queries
        .iter()
        .map(|q| Tracklet {
            query: q.id,
            points: steps
                .iter()
                .flat_map(|s| {
                    s.assignments.iter().filter(|a| a.query == q.id).map(|a| TrackPoint {
                        step: s.step,
                        timestamp_ms: s.timestamp_ms,
                        camera: a.camera,
                        bbox: a.bbox,
                        mode: a.mode,
                        source: a.source,
                    })
                })
                .collect(),
        })
        .collect()
}
