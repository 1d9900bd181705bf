//! Axis-aligned bounding-box arithmetic.
//!
//! Boxes live in image pixel coordinates with the origin at the top-left
//! corner. Every association and ordering decision in the tracker reduces to
//! the handful of functions in this module.

use std::fmt;

use crate::error::{Error, Result};

/// IoU above which two boxes are considered the same location.
pub const DEFAULT_MATCH_IOU: f64 = 0.5;

/// Default width of the frame-edge band as a fraction of the shorter side.
pub const DEFAULT_EDGE_BAND: f64 = 0.03;

/// An axis-aligned box with strictly positive area and finite corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let invalid = |reason| Error::InvalidBox {
            x_min,
            y_min,
            x_max,
            y_max,
            reason,
        };
        if !(x_min.is_finite() && y_min.is_finite() && x_max.is_finite() && y_max.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        if x_min >= x_max || y_min >= y_max {
            return Err(invalid("non-positive area"));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Builds a box from its center and size.
    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(
            cx - width / 2.0,
            cy - height / 2.0,
            cx + width / 2.0,
            cy + height / 2.0,
        )
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    /// Area of the overlap with `other`, 0 when disjoint.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// The overlapping region, if it has positive area.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        BBox::new(
            self.x_min.max(other.x_min),
            self.y_min.max(other.y_min),
            self.x_max.min(other.x_max),
            self.y_max.min(other.y_max),
        )
        .ok()
    }

    /// Clips the box to `[0, width] x [0, height]`. Returns `None` when
    /// nothing of the box remains inside the frame.
    pub fn clip_to(&self, frame: &FrameGeometry) -> Option<BBox> {
        BBox::new(
            self.x_min.max(0.0),
            self.y_min.max(0.0),
            self.x_max.min(frame.width as f64),
            self.y_max.min(frame.height as f64),
        )
        .ok()
    }

    /// Shifts every coordinate by the given offsets. Fails if the result
    /// collapses, which only happens for non-finite offsets.
    pub fn translated(&self, dx: f64, dy: f64) -> Result<BBox> {
        BBox::new(
            self.x_min + dx,
            self.y_min + dy,
            self.x_max + dx,
            self.y_max + dy,
        )
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({:.2}, {:.2}, {:.2}, {:.2})",
            self.x_min, self.y_min, self.x_max, self.y_max
        )
    }
}

/// Frame dimensions plus the width of the band treated as "the edge".
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameGeometry {
    pub width: u32,
    pub height: u32,
    #[serde(default = "default_edge_band")]
    pub edge_band_fraction: f64,
}

fn default_edge_band() -> f64 {
    DEFAULT_EDGE_BAND
}

impl FrameGeometry {
    pub fn new(width: u32, height: u32, edge_band_fraction: f64) -> Result<Self> {
        let g = Self {
            width,
            height,
            edge_band_fraction,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config(format!(
                "frame must be at least 1x1, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.edge_band_fraction > 0.0 && self.edge_band_fraction < 0.5) {
            return Err(Error::Config(format!(
                "edge_band_fraction must lie in (0, 0.5), got {}",
                self.edge_band_fraction
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }

    /// Edge band width in pixels.
    pub fn edge_band(&self) -> f64 {
        self.edge_band_fraction * self.width.min(self.height) as f64
    }

    pub fn full_frame(&self) -> BBox {
        BBox {
            x_min: 0.0,
            y_min: 0.0,
            x_max: self.width as f64,
            y_max: self.height as f64,
        }
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// True iff `iou(a, b) > threshold`.
pub fn boxes_match(a: &BBox, b: &BBox, threshold: f64) -> bool {
    iou(a, b) > threshold
}

/// Smallest center-to-center distance from `b` to any member of `set`.
///
/// Overlapping boxes are at distance 0. The empty set yields `+inf` so such
/// keys sort last.
pub fn min_dist(b: &BBox, set: &[BBox]) -> f64 {
    let (cx, cy) = b.center();
    set.iter()
        .map(|other| {
            if iou(b, other) > 0.0 {
                0.0
            } else {
                let (ox, oy) = other.center();
                (cx - ox).hypot(cy - oy)
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// True iff any side of `b` lies within the edge band of the matching frame
/// border.
pub fn touches_edge(b: &BBox, g: &FrameGeometry) -> bool {
    let band = g.edge_band();
    let (w, h) = (g.width as f64, g.height as f64);
    b.x_min <= band || b.y_min <= band || b.x_max >= w - band || b.y_max >= h - band
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    /// Counts 0.01-pixel grid cells whose centers fall inside the boxes.
    fn raster_iou(a: &BBox, b: &BBox) -> f64 {
        const STEP: f64 = 0.01;
        let count_axis = |lo: f64, hi: f64, lo2: f64, hi2: f64| -> (u64, u64, u64) {
            let start = (lo.min(lo2) / STEP).floor() as i64;
            let end = (hi.max(hi2) / STEP).ceil() as i64;
            let (mut in_a, mut in_b, mut both) = (0u64, 0u64, 0u64);
            for k in start..end {
                let c = (k as f64 + 0.5) * STEP;
                let ia = c >= lo && c < hi;
                let ib = c >= lo2 && c < hi2;
                in_a += ia as u64;
                in_b += ib as u64;
                both += (ia && ib) as u64;
            }
            (in_a, in_b, both)
        };
        let (ax, bx, ix) = count_axis(a.x_min, a.x_max, b.x_min, b.x_max);
        let (ay, by, iy) = count_axis(a.y_min, a.y_max, b.y_min, b.y_max);
        let inter = (ix * iy) as f64;
        let union = (ax * ay + bx * by) as f64 - inter;
        inter / union
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(BBox::new(0.0, 0.0, 0.0, 10.0).is_err());
        assert!(BBox::new(5.0, 0.0, 1.0, 10.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::NAN, 10.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::INFINITY, 10.0).is_err());
    }

    #[test]
    fn iou_examples() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(20.0, 20.0, 30.0, 30.0)), 0.0);
        let b = bb(5.0, 5.0, 15.0, 15.0);
        let oracle = raster_iou(&a, &b);
        assert_abs_diff_eq!(oracle, 25.0 / 175.0, epsilon = 1e-3);
        assert_abs_diff_eq!(iou(&a, &b), oracle, epsilon = 1e-3);
        assert_abs_diff_eq!(iou(&a, &b), 0.142857, epsilon = 1e-6);
    }

    #[test]
    fn touching_boxes_do_not_overlap() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(10.0, 0.0, 20.0, 10.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn boxes_match_examples() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert!(boxes_match(&a, &a, 0.5));
        assert!(!boxes_match(&a, &bb(20.0, 20.0, 30.0, 30.0), 0.5));
        assert!(!boxes_match(&a, &bb(5.0, 5.0, 15.0, 15.0), 0.5));
    }

    #[test]
    fn min_dist_examples() {
        let b = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(min_dist(&b, &[b]), 0.0);
        assert_eq!(min_dist(&b, &[]), f64::INFINITY);
        let set = [bb(30.0, 5.0, 40.0, 15.0), bb(100.0, 100.0, 110.0, 110.0)];
        // pairwise oracle over the set
        let brute = set
            .iter()
            .map(|s| {
                let (x, y) = s.center();
                ((x - 5.0).powi(2) + (y - 5.0).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(min_dist(&b, &set), brute, epsilon = 1e-12);
        assert_abs_diff_eq!(min_dist(&b, &set), 30.414, epsilon = 1e-3);
    }

    #[test]
    fn touches_edge_examples() {
        let g = FrameGeometry::new(1920, 1080, 0.03).unwrap();
        assert_abs_diff_eq!(g.edge_band(), 32.4, epsilon = 1e-9);
        assert!(touches_edge(&bb(0.0, 100.0, 50.0, 200.0), &g));
        assert!(!touches_edge(&bb(900.0, 500.0, 1000.0, 600.0), &g));
        assert!(touches_edge(&bb(1890.0, 500.0, 1920.0, 600.0), &g));
    }

    #[test]
    fn frame_geometry_validation() {
        assert!(FrameGeometry::new(0, 10, 0.03).is_err());
        assert!(FrameGeometry::new(10, 10, 0.5).is_err());
        assert!(FrameGeometry::new(10, 10, 0.0).is_err());
    }

    #[test]
    fn clip_drops_out_of_frame_boxes() {
        let g = FrameGeometry::new(100, 100, 0.03).unwrap();
        assert!(bb(120.0, 10.0, 130.0, 20.0).clip_to(&g).is_none());
        let c = bb(-5.0, 90.0, 10.0, 120.0).clip_to(&g).unwrap();
        assert_eq!((c.x_min(), c.y_max()), (0.0, 100.0));
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0..200.0f64, 0.0..200.0f64, 1.0..80.0f64, 1.0..80.0f64)
            .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(iou(&a, &a), 1.0);
        }

        #[test]
        fn min_dist_zero_iff_overlap_and_monotone(b in arb_box(), set in prop::collection::vec(arb_box(), 0..6), extra in arb_box()) {
            let d = min_dist(&b, &set);
            let overlaps = set.iter().any(|s| iou(&b, s) > 0.0);
            prop_assert_eq!(d == 0.0, overlaps);
            let mut bigger = set.clone();
            bigger.push(extra);
            prop_assert!(min_dist(&b, &bigger) <= d);
        }

        #[test]
        fn touches_edge_reflection_invariant(x in 0.0..1800.0f64, y in 0.0..1000.0f64, w in 1.0..120.0f64, h in 1.0..80.0f64) {
            let g = FrameGeometry::new(1920, 1080, 0.03).unwrap();
            let b = bb(x, y, x + w, y + h);
            let (fw, fh) = (1920.0, 1080.0);
            let mirror_x = bb(fw - (x + w), y, fw - x, y + h);
            let mirror_y = bb(x, fh - (y + h), x + w, fh - y);
            prop_assert_eq!(touches_edge(&b, &g), touches_edge(&mirror_x, &g));
            prop_assert_eq!(touches_edge(&b, &g), touches_edge(&mirror_y, &g));
        }
    }
}
