//! Stand-ins for the detection and identification networks.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::ids::{CameraId, ObjectId};
use crate::pipeline::CameraFrame;
use crate::rng::{stream_rng, Stream};

/// Label emitted when the detector confuses an object's class.
pub const CONFUSED_LABEL: &str = "unknown";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionOracleConfig {
    /// Std-dev of the Gaussian added to each box coordinate, pixels.
    pub jitter_sigma_px: f64,
    pub miss_probability: f64,
    /// Annotations less visible than this are never detected.
    pub occlusion_miss_threshold: f64,
    pub label_confusion_probability: f64,
}

impl DetectionOracleConfig {
    pub fn noiseless() -> Self {
        Self {
            jitter_sigma_px: 0.0,
            miss_probability: 0.0,
            occlusion_miss_threshold: 0.0,
            label_confusion_probability: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("detection.{name} must lie in [0, 1], got {p}")))
            }
        };
        prob("miss_probability", self.miss_probability)?;
        prob("occlusion_miss_threshold", self.occlusion_miss_threshold)?;
        prob("label_confusion_probability", self.label_confusion_probability)?;
        if !(self.jitter_sigma_px >= 0.0 && self.jitter_sigma_px.is_finite()) {
            return Err(Error::Config("detection.jitter_sigma_px must be non-negative".into()));
        }
        Ok(())
    }
}

/// Opaque link from a detection back to the crop it came from. Only the
/// identification oracle looks inside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CropRef {
    object: ObjectId,
    camera: CameraId,
    seq: u64,
}

impl CropRef {
    pub fn new(object: ObjectId, camera: CameraId, seq: u64) -> Self {
        Self {
            object,
            camera,
            seq,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub label: String,
    pub crop: CropRef,
}

/// Runs the detection oracle over one camera frame.
///
/// Each annotation consumes exactly six draws in a fixed order (miss,
/// four coordinate jitters, label), so the stream stays aligned whatever
/// gets dropped.
pub fn detect<R: Rng + ?Sized>(
    frame: &CameraFrame,
    oracle: &DetectionOracleConfig,
    rng: &mut R,
) -> Vec<Detection> {
    let mut out = Vec::with_capacity(frame.annotations.len());
    for ann in &frame.annotations {
        let miss: f64 = rng.random();
        let mut jitter = [0.0f64; 4];
        for j in &mut jitter {
            let z: f64 = StandardNormal.sample(rng);
            *j = z * oracle.jitter_sigma_px;
        }
        let confuse: f64 = rng.random();
        if miss < oracle.miss_probability || ann.visibility < oracle.occlusion_miss_threshold {
            continue;
        }
        let b = ann.bbox;
        let bbox = if oracle.jitter_sigma_px == 0.0 {
            b
        } else {
            match BBox::new(
                b.x_min() + jitter[0],
                b.y_min() + jitter[1],
                b.x_max() + jitter[2],
                b.y_max() + jitter[3],
            ) {
                Ok(j) => j,
                // jitter inverted a sliver of a box
                Err(_) => continue,
            }
        };
        let label = if confuse < oracle.label_confusion_probability {
            CONFUSED_LABEL.to_string()
        } else {
            ann.label.clone()
        };
        out.push(Detection {
            bbox,
            label,
            crop: CropRef::new(ann.object, frame.camera, frame.seq),
        });
    }
    out
}

pub const DEFAULT_FEATURE_DIM: usize = 64;

/// Unit-norm appearance embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct IdFeature(Vec<f64>);

const NORM_TOLERANCE: f64 = 1e-6;

impl IdFeature {
    /// Wraps an already-normalized vector.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let n = norm(&v);
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Contract(format!("feature norm {n} is not 1")));
        }
        Ok(Self(v))
    }

    /// Normalizes `v`. Fails for a zero or non-finite vector.
    pub fn normalized(mut v: Vec<f64>) -> Result<Self> {
        let n = norm(&v);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Contract("cannot normalize a zero vector".into()));
        }
        v.iter_mut().for_each(|x| *x /= n);
        Ok(Self(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl std::ops::Neg for &IdFeature {
    type Output = IdFeature;

    fn neg(self) -> IdFeature {
        IdFeature(self.0.iter().map(|x| -x).collect())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity of two unit features.
pub fn similarity(a: &IdFeature, b: &IdFeature) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Contract(format!(
            "feature dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdOracleConfig {
    pub sigma_base: f64,
    /// Box area (px^2) at which the noise std-dev equals `sigma_base`.
    pub reference_area_px: f64,
    pub exponent: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_dim() -> usize {
    DEFAULT_FEATURE_DIM
}

impl IdOracleConfig {
    pub fn noiseless() -> Self {
        Self {
            sigma_base: 0.0,
            reference_area_px: 4096.0,
            exponent: 1.0,
            dim: DEFAULT_FEATURE_DIM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_base >= 0.0 && self.sigma_base.is_finite()) {
            return Err(Error::Config("id_oracle.sigma_base must be non-negative".into()));
        }
        if !(self.reference_area_px > 0.0) {
            return Err(Error::Config("id_oracle.reference_area_px must be positive".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("id_oracle.dim must be positive".into()));
        }
        Ok(())
    }

    /// Noise std-dev for a crop of the given box.
    pub fn sigma_for(&self, bbox: &BBox) -> f64 {
        self.sigma_base * (self.reference_area_px / bbox.area()).powf(self.exponent)
    }
}

/// Hidden per-identity embedding, a uniform draw on the unit sphere.
pub fn ground_embedding(seed: u64, object: ObjectId, dim: usize) -> IdFeature {
    let mut rng = stream_rng(seed, Stream::Embedding, &[object.0 as u64]);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        if let Ok(f) = IdFeature::normalized(v) {
            return f;
        }
    }
}

/// Draws `normalize(ground + eps)` with `eps ~ N(0, sigma^2 I)` and `sigma`
/// growing as the box shrinks.
pub fn extract_id_feature<R: Rng + ?Sized>(
    ground: &IdFeature,
    bbox: &BBox,
    oracle: &IdOracleConfig,
    rng: &mut R,
) -> IdFeature {
    let sigma = oracle.sigma_for(bbox);
    if sigma == 0.0 {
        return ground.clone();
    }
    let v: Vec<f64> = ground
        .as_slice()
        .iter()
        .map(|g| {
            let z: f64 = StandardNormal.sample(rng);
            g + sigma * z
        })
        .collect();
    IdFeature::normalized(v).unwrap_or_else(|_| ground.clone())
}

/// Identification oracle bound to a run seed. Counts invocations so cost
/// ledgers can be audited against it.
#[derive(Debug)]
pub struct IdOracle {
    seed: u64,
    config: IdOracleConfig,
    calls: Cell<u64>,
    embeddings: RefCell<HashMap<ObjectId, IdFeature>>,
}

impl IdOracle {
    pub fn new(seed: u64, config: IdOracleConfig) -> Self {
        Self {
            seed,
            config,
            calls: Cell::new(0),
            embeddings: RefCell::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &IdOracleConfig {
        &self.config
    }

    pub fn ground_embedding(&self, object: ObjectId) -> IdFeature {
        self.embeddings
            .borrow_mut()
            .entry(object)
            .or_insert_with(|| ground_embedding(self.seed, object, self.config.dim))
            .clone()
    }

    /// One identification-model invocation on a detected crop.
    pub fn extract(&self, det: &Detection) -> IdFeature {
        self.calls.set(self.calls.get() + 1);
        let CropRef {
            object,
            camera,
            seq,
        } = det.crop;
        let ground = self.ground_embedding(object);
        let mut rng = stream_rng(
            self.seed,
            Stream::IdNoise,
            &[object.0 as u64, camera.0 as u64, seq],
        );
        extract_id_feature(&ground, &det.bbox, &self.config, &mut rng)
    }

    pub fn calls(&self) -> u64 {
        self.calls.get()
    }
}
