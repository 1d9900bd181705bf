use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FrameGeometry;
use crate::ids::CameraId;

pub const DEFAULT_BETA: f64 = 0.3;
pub const DEFAULT_BANDWIDTH_BPS: f64 = 1e9;

pub const PRESETS: [&str; 4] = [
    "jetson-nx-vehicle",
    "jetson-agx-vehicle",
    "jetson-nx-person",
    "jetson-agx-person",
];

/// Input size of the identification model; what one transmitted crop costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CropSpec {
    pub height: u32,
    pub width: u32,
    pub channels: u32,
    pub bytes_per_channel: u32,
}

impl Default for CropSpec {
    fn default() -> Self {
        Self {
            height: 128,
            width: 128,
            channels: 3,
            bytes_per_channel: 1,
        }
    }
}

impl CropSpec {
    pub fn bits(&self) -> f64 {
        self.height as f64 * self.width as f64 * self.channels as f64 * self.bytes_per_channel as f64 * 8.0
    }
}

/// Serializable latency tables for one camera. Resolution keys are
/// `"<width>x<height>"`, batch keys are batch sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub detection_latency_s: BTreeMap<String, f64>,
    pub id_latency_s: BTreeMap<String, f64>,
    #[serde(default)]
    pub bandwidth_bps: Option<Vec<f64>>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub crop: CropSpec,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

fn table(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Built-in Jetson profiles.
pub fn preset(name: &str) -> Result<ProfileSpec> {
    let nx_det = [("1920x1080", 0.359), ("1280x720", 0.073)];
    let agx_det = [("1920x1080", 0.084), ("1280x720", 0.038)];
    let (det, id) = match name {
        "jetson-nx-vehicle" => (nx_det, [0.119, 0.206, 0.399]),
        "jetson-agx-vehicle" => (agx_det, [0.065, 0.121, 0.217]),
        "jetson-nx-person" => (nx_det, [0.043, 0.045, 0.066]),
        "jetson-agx-person" => (agx_det, [0.018, 0.020, 0.028]),
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    Ok(ProfileSpec {
        detection_latency_s: table(&det),
        id_latency_s: table(&[("1", id[0]), ("2", id[1]), ("4", id[2])]),
        bandwidth_bps: None,
        beta: DEFAULT_BETA,
        crop: CropSpec::default(),
    })
}

/// Compute and network characteristics of one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraProfile {
    pub camera: CameraId,
    pub detection_latency_s: f64,
    /// `(batch size, latency)` sorted by batch size.
    pub id_latency_s: Vec<(u32, f64)>,
    pub n_batch: u32,
    /// Latency of one full batch, `T(C, n_batch)`.
    pub batch_latency_s: f64,
    /// Bandwidth to each camera; infinite to itself.
    pub bandwidth_bps: Vec<f64>,
    pub beta: f64,
    pub crop: CropSpec,
}

impl CameraProfile {
    pub fn new(
        camera: CameraId,
        detection_latency_s: f64,
        mut id_latency_s: Vec<(u32, f64)>,
        bandwidth_bps: Vec<f64>,
        beta: f64,
        crop: CropSpec,
    ) -> Result<Self> {
        let err = |m: String| Err(Error::Config(format!("profile for {camera}: {m}")));
        if !(detection_latency_s >= 0.0 && detection_latency_s.is_finite()) {
            return err("detection latency must be non-negative".into());
        }
        if id_latency_s.is_empty() {
            return err("identification latency table is empty".into());
        }
        id_latency_s.sort_by_key(|(b, _)| *b);
        for w in id_latency_s.windows(2) {
            if w[0].0 == w[1].0 {
                return err(format!("batch size {} listed twice", w[0].0));
            }
            if w[1].1 < w[0].1 {
                return err("identification latency must not decrease with batch size".into());
            }
        }
        if id_latency_s.iter().any(|&(b, t)| b == 0 || !(t > 0.0 && t.is_finite())) {
            return err("batch sizes and latencies must be positive".into());
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return err(format!("beta {beta} outside (0, 1]"));
        }
        if camera.0 >= bandwidth_bps.len() {
            return err("bandwidth row does not cover the camera itself".into());
        }
        let mut bandwidth_bps = bandwidth_bps;
        bandwidth_bps[camera.0] = f64::INFINITY;
        if bandwidth_bps.iter().any(|bw| !(*bw > 0.0)) {
            return err("bandwidths must be positive".into());
        }
        if crop.height == 0 || crop.width == 0 || crop.channels == 0 || crop.bytes_per_channel == 0 {
            return err("crop dimensions must be positive".into());
        }
        // best throughput b / T(b); ties to the smaller batch
        let &(n_batch, batch_latency_s) = id_latency_s
            .iter()
            .reduce(|best, cur| {
                if cur.0 as f64 / cur.1 > best.0 as f64 / best.1 {
                    cur
                } else {
                    best
                }
            })
            .expect("non-empty");
        Ok(Self {
            camera,
            detection_latency_s,
            id_latency_s,
            n_batch,
            batch_latency_s,
            bandwidth_bps,
            beta,
            crop,
        })
    }

    /// Resolves a spec for a camera with the given frame size among
    /// `n_cameras`.
    pub fn from_spec(camera: CameraId, spec: &ProfileSpec, frame: &FrameGeometry, n_cameras: usize) -> Result<Self> {
        let key = format!("{}x{}", frame.width, frame.height);
        let det = *spec.detection_latency_s.get(&key).ok_or_else(|| {
            Error::Config(format!("profile for {camera}: no detection latency for resolution {key}"))
        })?;
        let id = spec
            .id_latency_s
            .iter()
            .map(|(k, v)| {
                k.parse::<u32>()
                    .map(|b| (b, *v))
                    .map_err(|_| Error::Config(format!("profile for {camera}: bad batch size `{k}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let bw = match &spec.bandwidth_bps {
            Some(row) if row.len() != n_cameras => {
                return Err(Error::Config(format!(
                    "profile for {camera}: bandwidth row has {} values for {n_cameras} cameras",
                    row.len()
                )))
            }
            Some(row) => row.clone(),
            None => vec![DEFAULT_BANDWIDTH_BPS; n_cameras],
        };
        Self::new(camera, det, id, bw, spec.beta, spec.crop)
    }

    pub fn throughput(&self) -> f64 {
        self.n_batch as f64 / self.batch_latency_s
    }
}

/// The coordinating camera: highest identification throughput, ties to the
/// lower id.
pub fn head_camera(profiles: &[CameraProfile]) -> Option<CameraId> {
    profiles
        .iter()
        .reduce(|best, p| if p.throughput() > best.throughput() { p } else { best })
        .map(|p| p.camera)
}

pub fn ewma_update(old: f64, observation: f64, beta: f64) -> f64 {
    beta * observation + (1.0 - beta) * old
}

/// Measured profiles next to their running estimates. Plans use the
/// estimates; charged latency uses the measurements.
#[derive(Debug, Clone)]
pub struct ProfileBook {
    pub actual: Vec<CameraProfile>,
    pub estimate: Vec<CameraProfile>,
}

impl ProfileBook {
    pub fn new(actual: Vec<CameraProfile>) -> Self {
        Self {
            estimate: actual.clone(),
            actual,
        }
    }

    pub fn observe_inference(&mut self, camera: CameraId, batches: u64, total_latency_s: f64) {
        if batches == 0 {
            return;
        }
        if let Some(p) = self.estimate.get_mut(camera.0) {
            p.batch_latency_s = ewma_update(p.batch_latency_s, total_latency_s / batches as f64, p.beta);
        }
    }

    pub fn observe_transfer(&mut self, from: CameraId, to: CameraId, bits: f64, latency_s: f64) {
        if from == to || !(latency_s > 0.0) {
            return;
        }
        if let Some(p) = self.estimate.get_mut(from.0) {
            if let Some(bw) = p.bandwidth_bps.get_mut(to.0) {
                *bw = ewma_update(*bw, bits / latency_s, p.beta);
            }
        }
    }
}
