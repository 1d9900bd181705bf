use std::collections::{BTreeMap, HashSet};

use crate::error::Result;
use crate::geometry::{BBox, FrameGeometry};
use crate::ids::{CameraId, ObjectId};
use crate::scheduler::batched_latency;
use crate::worldsim::similarity;

use super::types::{Assignment, Citation, Environment, IdMode, LatencyModel, LedgerRow, StepOutput, Tracker};
use super::FrameBundle;

pub const ROI_COLS: usize = 6;
pub const ROI_ROWS: usize = 4;
const FULL_MASK: u32 = (1 << (ROI_COLS * ROI_ROWS)) - 1;

/// Per-camera grid of selected cells. Bit `row * ROI_COLS + col` marks a cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMasks {
    pub cells: Vec<u32>,
    /// Targets never visible in training; no mask can cover them.
    pub uncoverable: Vec<ObjectId>,
}

impl RoiMasks {
    pub fn full(cameras: usize) -> Self {
        Self {
            cells: vec![FULL_MASK; cameras],
            uncoverable: Vec::new(),
        }
    }

    pub fn is_selected(&self, camera: CameraId, cell: usize) -> bool {
        self.cells.get(camera.0).is_some_and(|m| m & (1 << cell) != 0)
    }

    pub fn selected_count(&self) -> u32 {
        self.cells.iter().map(|m| m.count_ones()).sum()
    }

    /// Whether the box center lies in a selected cell.
    pub fn admits(&self, camera: CameraId, frame: &FrameGeometry, bbox: &BBox) -> bool {
        let (cx, cy) = bbox.center();
        let col = ((cx / frame.width as f64 * ROI_COLS as f64).floor() as isize).clamp(0, ROI_COLS as isize - 1);
        let row = ((cy / frame.height as f64 * ROI_ROWS as f64).floor() as isize).clamp(0, ROI_ROWS as isize - 1);
        self.is_selected(camera, row as usize * ROI_COLS + col as usize)
    }
}

/// Cells a box overlaps with positive area.
pub fn cells_of(frame: &FrameGeometry, bbox: &BBox) -> u32 {
    let cw = frame.width as f64 / ROI_COLS as f64;
    let ch = frame.height as f64 / ROI_ROWS as f64;
    let span = |lo: f64, hi: f64, size: f64, n: usize| {
        let a = (lo / size).floor().max(0.0) as usize;
        let b = ((hi / size).ceil() as usize).min(n);
        a..b.max(a)
    };
    let mut mask = 0;
    for r in span(bbox.y_min(), bbox.y_max(), ch, ROI_ROWS) {
        for c in span(bbox.x_min(), bbox.x_max(), cw, ROI_COLS) {
            mask |= 1 << (r * ROI_COLS + c);
        }
    }
    mask
}

/// Greedy minimum-cell cover over training ground truth. Each
/// `(target, timestamp)` must lie wholly inside the selected cells of at
/// least one camera that sees it. Each round adds the camera box footprint
/// with the most newly covered elements per added cell; ties go to the lower
/// camera, then the lower cell index.
pub fn learn_roi_masks(training: &[FrameBundle], frames: &[FrameGeometry], targets: &[ObjectId]) -> RoiMasks {
    let wanted: HashSet<ObjectId> = targets.iter().copied().collect();
    // element -> its options; identical option sets are merged with a weight
    let mut weights: BTreeMap<Vec<(usize, u32)>, u64> = BTreeMap::new();
    let mut seen: HashSet<ObjectId> = HashSet::new();
    for bundle in training {
        let mut per_object: BTreeMap<ObjectId, Vec<(usize, u32)>> = BTreeMap::new();
        for frame in &bundle.frames {
            let Some(geom) = frames.get(frame.camera.0) else { continue };
            for a in &frame.annotations {
                if wanted.contains(&a.object) {
                    let m = cells_of(geom, &a.bbox);
                    if m != 0 {
                        per_object.entry(a.object).or_default().push((frame.camera.0, m));
                    }
                }
            }
        }
        for (obj, mut opts) in per_object {
            seen.insert(obj);
            opts.sort_unstable();
            opts.dedup();
            *weights.entry(opts).or_insert(0) += 1;
        }
    }

    let mut selected = vec![0u32; frames.len()];
    let mut open: Vec<(Vec<(usize, u32)>, u64)> = weights.into_iter().collect();
    while !open.is_empty() {
        let moves: BTreeMap<(usize, u32), ()> =
            open.iter().flat_map(|(o, _)| o.iter().map(|&m| (m, ()))).collect();
        // (benefit, cost, camera, first new cell, mask)
        let mut best: Option<(u64, u32, usize, u32, u32)> = None;
        for &(cam, mask) in moves.keys() {
            let grown = selected[cam] | mask;
            let added = mask & !selected[cam];
            let cost = added.count_ones();
            let benefit: u64 = open
                .iter()
                .filter(|(o, _)| o.iter().any(|&(c, m)| c == cam && m & !grown == 0))
                .map(|(_, w)| *w)
                .sum();
            let first = added.trailing_zeros();
            let better = match best {
                None => true,
                Some((bb, bc, bcam, bfirst, bmask)) => {
                    let lhs = benefit * bc as u64;
                    let rhs = bb * cost as u64;
                    lhs > rhs || (lhs == rhs && (cam, first, mask) < (bcam, bfirst, bmask))
                }
            };
            if better {
                best = Some((benefit, cost, cam, first, mask));
            }
        }
        let (_, _, cam, _, mask) = best.expect("open elements have options");
        selected[cam] |= mask;
        open.retain(|(o, _)| !o.iter().any(|&(c, m)| m & !selected[c] == 0));
    }

    let mut uncoverable: Vec<ObjectId> = targets.iter().copied().filter(|t| !seen.contains(t)).collect();
    uncoverable.sort_unstable();
    uncoverable.dedup();
    RoiMasks {
        cells: selected,
        uncoverable,
    }
}

/// Which cameras and detections an exhaustive tracker processes.
#[derive(Debug, Clone, PartialEq)]
pub enum CameraFilter {
    All,
    /// Cameras whose ground truth holds at least one target.
    TargetPresence,
    Roi(RoiMasks),
}

/// Per-camera exhaustive identification. The filter turns it into the
/// presence-oracle or RoI-mask variant.
#[derive(Debug, Clone)]
pub struct ConvTracker {
    filter: CameraFilter,
}

impl ConvTracker {
    pub fn conv() -> Self {
        Self { filter: CameraFilter::All }
    }

    pub fn spatula() -> Self {
        Self {
            filter: CameraFilter::TargetPresence,
        }
    }

    pub fn crossroi(masks: RoiMasks) -> Self {
        Self {
            filter: CameraFilter::Roi(masks),
        }
    }

    pub fn filter(&self) -> &CameraFilter {
        &self.filter
    }
}

impl Tracker for ConvTracker {
    fn name(&self) -> &'static str {
        match self.filter {
            CameraFilter::All => "conv",
            CameraFilter::TargetPresence => "spatula",
            CameraFilter::Roi(_) => "crossroi",
        }
    }

    fn step(&mut self, bundle: &FrameBundle, env: &Environment) -> Result<StepOutput> {
        let mut row = LedgerRow::new(bundle.index, bundle.timestamp_ms, env.cameras(), LatencyModel::Independent);
        let targets: HashSet<ObjectId> = env.queries.iter().map(|q| q.id).collect();
        let mut assignments = Vec::new();
        for frame in &bundle.frames {
            let cam = frame.camera;
            let keep = match &self.filter {
                CameraFilter::All => true,
                CameraFilter::TargetPresence => frame.annotations.iter().any(|a| targets.contains(&a.object)),
                CameraFilter::Roi(m) => m.cells.get(cam.0).is_some_and(|c| *c != 0),
            };
            if !keep || env.queries.is_empty() {
                continue;
            }
            let profile = &env.profiles[cam.0];
            row.detected[cam.0] = true;
            row.detect_s[cam.0] = profile.detection_latency_s;
            let mut dets = env.candidates(frame);
            if let CameraFilter::Roi(m) = &self.filter {
                dets.retain(|d| m.admits(cam, &env.frames[cam.0], &d.bbox));
            }

            let mut pairs = Vec::new();
            for (di, d) in dets.iter().enumerate() {
                let f = env.oracle.extract(d);
                for (qi, q) in env.queries.iter().enumerate() {
                    if q.label != d.label {
                        continue;
                    }
                    let s = similarity(&f, &q.feature)?;
                    if s >= q.tau {
                        pairs.push((s, qi, di));
                    }
                }
            }
            pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut q_used = vec![false; env.queries.len()];
            let mut d_used = vec![false; dets.len()];
            for (s, qi, di) in pairs {
                if q_used[qi] || d_used[di] {
                    continue;
                }
                q_used[qi] = true;
                d_used[di] = true;
                assignments.push(Assignment {
                    query: env.queries[qi].id,
                    camera: cam,
                    bbox: dets[di].bbox,
                    mode: IdMode::FeatureMatch,
                    source: Citation::None,
                    score: Some(s),
                });
            }
            row.ids_per_camera[cam.0] = dets.len() as u64;
            row.id_s[cam.0] = batched_latency(profile, dets.len());
        }
        Ok(StepOutput {
            step: bundle.index,
            timestamp_ms: bundle.timestamp_ms,
            assignments,
            ledger: row,
        })
    }
}
