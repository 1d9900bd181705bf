use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, FrameGeometry};
use crate::ids::CameraId;

/// Projective map from ground-plane meters to image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

/// Homogeneous weights at or below this are treated as behind the camera.
const MIN_W: f64 = 1e-9;

impl Homography {
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        let m = Matrix3::from_fn(|r, c| rows[r][c]);
        let det = m.determinant();
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(Error::Config(format!(
                "homography must be invertible (det = {det})"
            )));
        }
        Ok(Self { m })
    }

    /// Solves for the homography that maps each `ground[i]` onto `image[i]`.
    pub fn from_correspondences(ground: [[f64; 2]; 4], image: [[f64; 2]; 4]) -> Result<Self> {
        let mut a = SMatrix::<f64, 8, 8>::zeros();
        let mut b = SVector::<f64, 8>::zeros();
        for i in 0..4 {
            let [x, y] = ground[i];
            let [u, v] = image[i];
            let r = 2 * i;
            a.row_mut(r)
                .copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]);
            a.row_mut(r + 1)
                .copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]);
            b[r] = u;
            b[r + 1] = v;
        }
        let h = a.lu().solve(&b).ok_or_else(|| {
            Error::Config("degenerate point correspondences for homography".into())
        })?;
        Self::from_rows([[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]])
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    /// Image position of a ground point, `None` if it falls behind the camera.
    pub fn project(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let p = self.m * Vector3::new(x, y, 1.0);
        if p.z <= MIN_W {
            return None;
        }
        Some((p.x / p.z, p.y / p.z))
    }

    /// Local pixels-per-meter at a ground point: square root of the
    /// Jacobian determinant of the projection.
    pub fn local_scale(&self, x: f64, y: f64) -> Option<f64> {
        let m = &self.m;
        let p = m * Vector3::new(x, y, 1.0);
        if p.z <= MIN_W {
            return None;
        }
        let w2 = p.z * p.z;
        let du_dx = (m[(0, 0)] * p.z - p.x * m[(2, 0)]) / w2;
        let du_dy = (m[(0, 1)] * p.z - p.x * m[(2, 1)]) / w2;
        let dv_dx = (m[(1, 0)] * p.z - p.y * m[(2, 0)]) / w2;
        let dv_dy = (m[(1, 1)] * p.z - p.y * m[(2, 1)]) / w2;
        Some((du_dx * dv_dy - du_dy * dv_dx).abs().sqrt())
    }
}

/// How a camera's homography is specified in configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Projection {
    Matrix {
        matrix: [[f64; 3]; 3],
    },
    /// Four ground points (meters) and where they land in the image (pixels).
    Quad {
        ground: [[f64; 2]; 4],
        image: [[f64; 2]; 4],
    },
}

impl Projection {
    pub fn homography(&self) -> Result<Homography> {
        match self {
            Projection::Matrix { matrix } => Homography::from_rows(*matrix),
            Projection::Quad { ground, image } => Homography::from_correspondences(*ground, *image),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub projection: Projection,
    pub frame: FrameGeometry,
    #[serde(default = "default_frame_rate")]
    pub frame_rate_hz: f64,
    #[serde(default)]
    pub clock_offset_ms: f64,
    /// Multiplier applied to the local ground scale when converting object
    /// height to pixels.
    #[serde(default = "default_height_scale")]
    pub height_scale: f64,
}

fn default_frame_rate() -> f64 {
    10.0
}

fn default_height_scale() -> f64 {
    1.0
}

/// A fixed camera observing the ground plane.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub id: CameraId,
    pub homography: Homography,
    pub height_scale: f64,
    pub frame: FrameGeometry,
    pub frame_rate_hz: f64,
    pub clock_offset_ms: f64,
}

/// An object's projection before clipping, with its depth ordering key.
#[derive(Debug, Clone, Copy)]
pub struct Projected {
    pub bbox: BBox,
    /// Image row of the object's lowest footprint point. Larger is nearer.
    pub foot_v: f64,
}

impl CameraModel {
    pub fn from_config(id: CameraId, cfg: &CameraConfig) -> Result<Self> {
        cfg.frame.validate()?;
        if !(cfg.frame_rate_hz > 0.0 && cfg.frame_rate_hz.is_finite()) {
            return Err(Error::Config(format!(
                "{id}: frame_rate_hz must be positive"
            )));
        }
        if !(cfg.height_scale >= 0.0 && cfg.height_scale.is_finite()) {
            return Err(Error::Config(format!(
                "{id}: height_scale must be non-negative"
            )));
        }
        Ok(Self {
            id,
            homography: cfg.projection.homography()?,
            height_scale: cfg.height_scale,
            frame: cfg.frame,
            frame_rate_hz: cfg.frame_rate_hz,
            clock_offset_ms: cfg.clock_offset_ms,
        })
    }

    /// Projects an oriented footprint of `length x width` meters plus an
    /// object height. The result is not clipped to the frame.
    pub fn project_object(
        &self,
        center: [f64; 2],
        heading: f64,
        length: f64,
        width: f64,
        height: f64,
    ) -> Option<Projected> {
        let (s, c) = heading.sin_cos();
        let (hl, hw) = (length / 2.0, width / 2.0);
        let mut u_min = f64::INFINITY;
        let mut u_max = f64::NEG_INFINITY;
        let mut v_min = f64::INFINITY;
        let mut v_max = f64::NEG_INFINITY;
        for (dl, dw) in [(hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw)] {
            let x = center[0] + dl * c - dw * s;
            let y = center[1] + dl * s + dw * c;
            let (u, v) = self.homography.project(x, y)?;
            u_min = u_min.min(u);
            u_max = u_max.max(u);
            v_min = v_min.min(v);
            v_max = v_max.max(v);
        }
        let scale = self.homography.local_scale(center[0], center[1])?;
        let height_px = height * self.height_scale * scale;
        let bbox = BBox::new(u_min, v_min - height_px, u_max, v_max).ok()?;
        Some(Projected { bbox, foot_v: v_max })
    }
}
