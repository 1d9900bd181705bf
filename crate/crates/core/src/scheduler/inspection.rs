use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{min_dist, BBox, FrameGeometry};
use crate::ids::CameraId;

pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InspectionOrder {
    /// Most promising camera first.
    #[default]
    Priority,
    /// Least promising camera first (ablation).
    Reverse,
}

/// What the previous timestamp revealed about each camera.
#[derive(Debug, Clone)]
pub struct InspectionState {
    pub alpha: f64,
    pub n_queries: usize,
    /// Box-size normalization per camera, 1 / px^2.
    pub size_coeff: Vec<f64>,
    /// Boxes of targets found on each camera at the previous timestamp.
    pub previous: Vec<Vec<BBox>>,
}

impl InspectionState {
    pub fn new(frames: &[FrameGeometry], n_queries: usize, alpha: f64) -> Self {
        Self {
            alpha,
            n_queries,
            size_coeff: frames.iter().map(|f| 1.0 / f.area()).collect(),
            previous: vec![Vec::new(); frames.len()],
        }
    }

    pub fn previous(&self, camera: CameraId) -> &[BBox] {
        self.previous.get(camera.0).map_or(&[], Vec::as_slice)
    }

    pub fn set_found(&mut self, camera: CameraId, boxes: Vec<BBox>) {
        if let Some(slot) = self.previous.get_mut(camera.0) {
            *slot = boxes;
        }
    }

    /// `alpha * N_prev / N_Q + (1 - alpha) * sum(c * size)` over the
    /// camera's previously found boxes.
    pub fn camera_priority(&self, camera: CameraId) -> Result<f64> {
        if self.n_queries == 0 {
            return Err(Error::Contract("camera priority needs at least one query".into()));
        }
        let prev = self.previous(camera);
        let c = self.size_coeff.get(camera.0).copied().unwrap_or(0.0);
        let ratio = prev.len() as f64 / self.n_queries as f64;
        let size: f64 = prev.iter().map(|b| c * b.area()).sum();
        Ok(self.alpha * ratio + (1.0 - self.alpha) * size)
    }

    /// Cameras by descending priority, ties to the lower id.
    pub fn order_cameras(&self, cameras: &[CameraId]) -> Result<Vec<CameraId>> {
        let mut keyed = cameras
            .iter()
            .map(|&c| Ok((self.camera_priority(c)?, c)))
            .collect::<Result<Vec<_>>>()?;
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        Ok(keyed.into_iter().map(|(_, c)| c).collect())
    }

    pub fn order_cameras_with(&self, cameras: &[CameraId], order: InspectionOrder) -> Result<Vec<CameraId>> {
        let mut v = self.order_cameras(cameras)?;
        if order == InspectionOrder::Reverse {
            v.reverse();
        }
        Ok(v)
    }
}

/// Permutation of `boxes` by ascending distance to the previous targets,
/// ties by `x_min` then `y_min`, then input position.
pub fn order_boxes(boxes: &[BBox], previous: &[BBox]) -> Vec<usize> {
    let keys: Vec<f64> = boxes.iter().map(|b| min_dist(b, previous)).collect();
    let mut idx: Vec<usize> = (0..boxes.len()).collect();
    idx.sort_by(|&i, &j| {
        keys[i]
            .total_cmp(&keys[j])
            .then(boxes[i].x_min().total_cmp(&boxes[j].x_min()))
            .then(boxes[i].y_min().total_cmp(&boxes[j].y_min()))
            .then(i.cmp(&j))
    });
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame() -> FrameGeometry {
        FrameGeometry::new(100, 100, 0.03).unwrap()
    }

    fn state(alpha: f64, nq: usize, prev: Vec<Vec<BBox>>) -> InspectionState {
        let mut s = InspectionState::new(&vec![frame(); prev.len()], nq, alpha);
        s.previous = prev;
        s
    }

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    // independent transcription of the priority formula
    fn priority_oracle(alpha: f64, found: usize, nq: usize, areas: &[f64], frame_area: f64) -> f64 {
        let mut size_term = 0.0;
        for a in areas {
            size_term += a / frame_area;
        }
        alpha * (found as f64) / (nq as f64) + (1.0 - alpha) * size_term
    }

    #[test]
    fn priority_examples() {
        let s = state(1.0, 4, vec![vec![bb(0.0, 0.0, 1.0, 1.0), bb(5.0, 5.0, 6.0, 6.0)]]);
        assert_eq!(s.camera_priority(CameraId(0)).unwrap(), 0.5);
        let s = state(0.0, 1, vec![vec![bb(0.0, 0.0, 100.0, 100.0)]]);
        assert_eq!(s.camera_priority(CameraId(0)).unwrap(), 1.0);
        let s = state(0.5, 2, vec![vec![bb(0.0, 0.0, 50.0, 50.0)]]);
        let p = s.camera_priority(CameraId(0)).unwrap();
        assert_eq!(p, 0.375);
        assert_eq!(p, priority_oracle(0.5, 1, 2, &[2500.0], 10_000.0));
        assert!(state(0.5, 0, vec![vec![]]).camera_priority(CameraId(0)).is_err());
    }

    #[test]
    fn camera_order_examples() {
        let cams = [CameraId(0), CameraId(1), CameraId(2)];
        let s = state(0.5, 2, vec![vec![]; 3]);
        assert_eq!(s.order_cameras(&cams).unwrap(), cams.to_vec());

        // priorities 0.9, 0.1, 0.5 with alpha = 0 via box areas
        let side = |p: f64| (p * 10_000.0f64).sqrt();
        let s = state(
            0.0,
            1,
            [0.9, 0.1, 0.5]
                .iter()
                .map(|&p| vec![bb(0.0, 0.0, side(p), side(p))])
                .collect(),
        );
        assert_eq!(s.order_cameras(&cams).unwrap(), vec![CameraId(0), CameraId(2), CameraId(1)]);
        assert_eq!(
            s.order_cameras_with(&cams, InspectionOrder::Reverse).unwrap(),
            vec![CameraId(1), CameraId(2), CameraId(0)]
        );

        // the camera holding the largest target box goes first
        let s = state(
            0.0,
            1,
            vec![vec![bb(0.0, 0.0, 10.0, 10.0)], vec![bb(0.0, 0.0, 20.0, 20.0)], vec![bb(0.0, 0.0, 40.0, 40.0)]],
        );
        assert_eq!(s.order_cameras(&cams).unwrap()[0], CameraId(2));
    }

    #[test]
    fn box_order_examples() {
        let prev = [bb(0.0, 0.0, 10.0, 10.0)];
        let boxes = [bb(100.0, 0.0, 110.0, 10.0), bb(5.0, 5.0, 15.0, 15.0)];
        assert_eq!(order_boxes(&boxes, &prev), vec![1, 0]);

        let boxes = [bb(50.0, 0.0, 60.0, 10.0), bb(10.0, 30.0, 20.0, 40.0), bb(10.0, 0.0, 20.0, 10.0)];
        assert_eq!(order_boxes(&boxes, &[]), vec![2, 1, 0]);

        // keys 30.4 vs 12.0
        let prev = [bb(0.0, 0.0, 10.0, 10.0)];
        let far = bb(30.0, 5.0, 40.0, 15.0);
        let near = bb(12.0, 0.0, 22.0, 10.0);
        assert!((min_dist(&far, &prev) - 30.4138).abs() < 1e-3);
        assert_eq!(min_dist(&near, &prev), 12.0);
        assert_eq!(order_boxes(&[far, near], &prev), vec![1, 0]);
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0..90.0f64, 0.0..90.0f64, 1.0..10.0f64, 1.0..10.0f64)
            .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
    }

    proptest! {
        #[test]
        fn order_boxes_is_a_permutation(boxes in prop::collection::vec(arb_box(), 0..20), prev in prop::collection::vec(arb_box(), 0..4)) {
            let mut idx = order_boxes(&boxes, &prev);
            idx.sort_unstable();
            prop_assert_eq!(idx, (0..boxes.len()).collect::<Vec<_>>());
        }

        #[test]
        fn scaling_sizes_and_coefficient_keeps_order(
            prev in prop::collection::vec(prop::collection::vec(arb_box(), 0..3), 1..5),
            alpha in 0.0..1.0f64,
            k in 0.5..4.0f64,
        ) {
            let n = prev.len();
            let cams: Vec<CameraId> = (0..n).map(CameraId).collect();
            let s = state(alpha, 3, prev.clone());
            let mut scaled = s.clone();
            scaled.previous = prev
                .iter()
                .map(|bs| bs.iter().map(|b| BBox::new(b.x_min() * k, b.y_min() * k, b.x_max() * k, b.y_max() * k).unwrap()).collect())
                .collect();
            scaled.size_coeff = s.size_coeff.iter().map(|c| c / (k * k)).collect();
            let a = s.order_cameras(&cams).unwrap();
            let b = scaled.order_cameras(&cams).unwrap();
            // equal up to float rounding of near-tied priorities
            let pa: Vec<f64> = a.iter().map(|c| s.camera_priority(*c).unwrap()).collect();
            let pb: Vec<f64> = b.iter().map(|c| s.camera_priority(*c).unwrap()).collect();
            for (x, y) in pa.iter().zip(&pb) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
