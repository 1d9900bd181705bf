use crate::geometry::{BBox, FrameGeometry};
use crate::ids::{CameraId, ObjectId};
use crate::scheduler::{preset, CameraProfile};
use crate::worldsim::{DetectionOracleConfig, GroundTruthAnnotation, IdOracle, IdOracleConfig};

use super::{CameraFrame, Environment, FrameBundle, Query};

pub fn geom() -> FrameGeometry {
    FrameGeometry::new(1280, 720, 0.03).unwrap()
}

pub fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
    BBox::new(x0, y0, x1, y1).unwrap()
}

/// Noiseless environment over `cams` cameras looking for `targets`.
pub fn env(cams: usize, targets: &[u32]) -> Environment {
    let oracle = IdOracle::new(7, IdOracleConfig::noiseless());
    let queries = targets
        .iter()
        .map(|t| Query::for_object(&oracle, ObjectId(*t), "person", 0.8))
        .collect();
    let spec = preset("jetson-agx-person").unwrap();
    Environment {
        seed: 7,
        frames: vec![geom(); cams],
        detection: DetectionOracleConfig::noiseless(),
        profiles: (0..cams)
            .map(|c| CameraProfile::from_spec(CameraId(c), &spec, &geom(), cams).unwrap())
            .collect(),
        oracle,
        queries,
    }
}

/// `(camera, object, box)` sightings at step `i`.
pub fn bundle(i: u64, cams: usize, seen: &[(usize, u32, BBox)]) -> FrameBundle {
    let ts = i as f64 * 100.0;
    FrameBundle {
        index: i,
        timestamp_ms: ts,
        frames: (0..cams)
            .map(|c| CameraFrame {
                camera: CameraId(c),
                seq: i,
                timestamp_ms: ts,
                annotations: seen
                    .iter()
                    .filter(|s| s.0 == c)
                    .map(|&(_, o, b)| GroundTruthAnnotation {
                        timestamp_ms: ts,
                        camera: CameraId(c),
                        object: ObjectId(o),
                        label: "person".into(),
                        bbox: b,
                        visibility: 1.0,
                    })
                    .collect(),
            })
            .collect(),
    }
}
