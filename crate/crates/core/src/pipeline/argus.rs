//! Cross-camera collaborative tracking.
//!
//! Per bundle: order the cameras, then on each camera reuse last frame's
//! decisions from the temporal cache, resolve boxes predicted by mapping
//! entries found on earlier cameras, and identify the rest in distance order
//! until every query is located. Identification work leaving a camera is
//! split across peers by the distribution planner.

use serde::{Deserialize, Serialize};

use crate::association::{
    predict_slots, CacheLookup, EntryId, MappingTable, Slot, SlotPrediction, TemporalCache,
    DEFAULT_CAPACITY, DEFAULT_PRUNE_IOU,
};
use crate::error::Result;
use crate::geometry::{iou, touches_edge, BBox, DEFAULT_MATCH_IOU};
use crate::ids::CameraId;
use crate::scheduler::{
    evaluate_assignment, order_boxes, plan_distribution, InspectionOrder, InspectionState,
    ProfileBook, DEFAULT_ALPHA,
};
use crate::worldsim::{similarity, Detection, IdFeature};

use super::types::{Assignment, Citation, Environment, IdMode, LatencyModel, LedgerRow, StepOutput, Tracker};
use super::FrameBundle;

pub const DEFAULT_REFRESH_INTERVAL_S: f64 = 2.0;
pub const DEFAULT_OCCLUSION_LIMIT: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArgusConfig {
    pub inspection_order: InspectionOrder,
    pub alpha: f64,
    pub match_iou: f64,
    pub prune_iou: f64,
    pub capacity: usize,
    /// Forced re-identification interval, seconds.
    pub refresh_interval_s: f64,
    /// Consecutive frames a target may be carried through occlusion.
    pub occlusion_limit: u32,
    pub detect_on_skipped_cameras: bool,
    /// Learn new mapping entries while tracking.
    pub learn_entries: bool,
}

impl Default for ArgusConfig {
    fn default() -> Self {
        Self {
            inspection_order: InspectionOrder::Priority,
            alpha: DEFAULT_ALPHA,
            match_iou: DEFAULT_MATCH_IOU,
            prune_iou: DEFAULT_PRUNE_IOU,
            capacity: DEFAULT_CAPACITY,
            refresh_interval_s: DEFAULT_REFRESH_INTERVAL_S,
            occlusion_limit: DEFAULT_OCCLUSION_LIMIT,
            detect_on_skipped_cameras: false,
            learn_entries: true,
        }
    }
}

/// Frames between forced re-identifications at a frame rate.
pub fn refresh_limit(interval_s: f64, frame_rate_hz: f64) -> u32 {
    ((interval_s * frame_rate_hz).round() as u32).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Plan {
    Unknown,
    Expect(BBox, EntryId),
    Skip,
}

#[derive(Debug, Clone, Copy)]
struct LastSeen {
    seq: u64,
    bbox: BBox,
    streak: u32,
}

#[derive(Debug, Clone)]
struct BoxDecision {
    query: Option<usize>,
    mode: IdMode,
    source: Citation,
    feature: Option<IdFeature>,
    score: Option<f64>,
    was_skip: bool,
}

/// A detection's index paired with what was decided for it.
type Decided = Option<(usize, BoxDecision)>;

pub struct ArgusTracker {
    cfg: ArgusConfig,
    table: MappingTable,
    cache: TemporalCache,
    inspection: InspectionState,
    book: ProfileBook,
    /// Indexed `[query][camera]`.
    last: Vec<Vec<Option<LastSeen>>>,
}

impl ArgusTracker {
    pub fn new(cfg: ArgusConfig, env: &Environment, frame_rates_hz: &[f64]) -> Self {
        let k = env.cameras();
        let limits = frame_rates_hz
            .iter()
            .map(|r| refresh_limit(cfg.refresh_interval_s, *r))
            .collect();
        Self {
            table: MappingTable::with_thresholds(k, cfg.capacity, cfg.prune_iou, cfg.match_iou),
            cache: TemporalCache::with_limits(limits, cfg.match_iou),
            inspection: InspectionState::new(&env.frames, env.queries.len(), cfg.alpha),
            book: ProfileBook::new(env.profiles.clone()),
            last: vec![vec![None; k]; env.queries.len()],
            cfg,
        }
    }

    pub fn table(&self) -> &MappingTable {
        &self.table
    }

    /// Seeds the table with offline-learned entries.
    pub fn table_mut(&mut self) -> &mut MappingTable {
        &mut self.table
    }

    pub fn profiles(&self) -> &ProfileBook {
        &self.book
    }

    fn identify(
        &self,
        env: &Environment,
        det: &Detection,
        bound: &[Option<(usize, IdMode, f64)>],
        skip: &[bool],
        feature: &IdFeature,
    ) -> Result<Option<(usize, f64)>> {
        let mut best: Option<(usize, f64)> = None;
        for (qi, s) in env.matching_queries(feature, &det.label)? {
            if skip[qi] {
                continue;
            }
            let open = match bound[qi] {
                None => true,
                Some((_, IdMode::FeatureMatch, prev)) => s > prev,
                Some(_) => false,
            };
            if open && best.is_none_or(|(_, bs)| s > bs) {
                best = Some((qi, s));
            }
        }
        Ok(best)
    }

    /// Inspects one camera. Returns per-query box decisions and the number of
    /// identification calls made.
    fn inspect_camera(
        &mut self,
        env: &Environment,
        cam: CameraId,
        seq: u64,
        dets: &[Detection],
        plans: &[Plan],
    ) -> Result<(Vec<Decided>, u64)> {
        let nq = env.queries.len();
        let boxes: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
        let frame = env.frames[cam.0];
        let skip: Vec<bool> = plans.iter().map(|p| matches!(p, Plan::Skip)).collect();
        let mut decided: Vec<Option<BoxDecision>> = vec![None; dets.len()];
        // (box, mode, score used for re-binding)
        let mut bound: Vec<Option<(usize, IdMode, f64)>> = vec![None; nq];
        let mut calls = 0u64;

        // pair predicted boxes with detections, best overlap first
        let mut pairs = Vec::new();
        for (qi, p) in plans.iter().enumerate() {
            if let Plan::Expect(b, e) = p {
                for (di, d) in dets.iter().enumerate() {
                    let v = iou(b, &d.bbox);
                    if v > self.cfg.match_iou && d.label == env.queries[qi].label {
                        pairs.push((v, qi, di, *e));
                    }
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut expected: Vec<Option<(usize, EntryId)>> = vec![None; dets.len()];
        let mut taken = vec![false; nq];
        for (_, qi, di, e) in pairs {
            if !taken[qi] && expected[di].is_none() {
                taken[qi] = true;
                expected[di] = Some((qi, e));
            }
        }

        let mut order = order_boxes(&boxes, self.inspection.previous(cam));
        if self.cfg.inspection_order == InspectionOrder::Reverse {
            order.reverse();
        }
        let prepass: Vec<usize> = order.iter().copied().filter(|&di| expected[di].is_some()).collect();
        let all_bound = |bound: &[Option<(usize, IdMode, f64)>]| (0..nq).all(|qi| skip[qi] || bound[qi].is_some());

        for (pass, list) in [(0, &prepass), (1, &order)] {
            for &di in list.iter() {
                if decided[di].is_some() {
                    continue;
                }
                if pass == 1 && all_bound(&bound) {
                    break;
                }
                let det = &dets[di];
                let lookup = self.cache.temporal_lookup(cam, &det.bbox, seq);
                let expect = expected[di];
                let decision = match lookup {
                    CacheLookup::Hit(rec) => {
                        let q = rec
                            .identity
                            .and_then(|id| env.queries.iter().position(|q| q.id == id))
                            .filter(|&qi| bound[qi].is_none());
                        let score = match (&rec.feature, q) {
                            (Some(f), Some(qi)) => Some(similarity(f, &env.queries[qi].feature)?),
                            _ => None,
                        };
                        BoxDecision {
                            query: q,
                            mode: IdMode::TemporalAssoc,
                            source: Citation::Record(rec.id),
                            feature: rec.feature.clone(),
                            score,
                            was_skip: true,
                        }
                    }
                    CacheLookup::Miss if expect.is_some() && !touches_edge(&det.bbox, &frame) => {
                        let (qi, e) = expect.expect("checked");
                        BoxDecision {
                            query: Some(qi),
                            mode: IdMode::SpatialAssoc,
                            source: Citation::Entry(e),
                            feature: None,
                            score: None,
                            was_skip: true,
                        }
                    }
                    _ => {
                        let feature = env.oracle.extract(det);
                        calls += 1;
                        match self.identify(env, det, &bound, &skip, &feature)? {
                            Some((qi, s)) => BoxDecision {
                                query: Some(qi),
                                mode: IdMode::FeatureMatch,
                                source: Citation::None,
                                feature: Some(feature),
                                score: Some(s),
                                was_skip: false,
                            },
                            // an inconclusive refresh keeps the entry's answer
                            None if matches!(lookup, CacheLookup::RefreshDue(_))
                                && expect.is_some_and(|(qi, _)| bound[qi].is_none()) =>
                            {
                                let (qi, e) = expect.expect("checked");
                                BoxDecision {
                                    query: Some(qi),
                                    mode: IdMode::SpatialAssoc,
                                    source: Citation::Entry(e),
                                    feature: Some(feature),
                                    score: None,
                                    was_skip: false,
                                }
                            }
                            None => BoxDecision {
                                query: None,
                                mode: IdMode::FeatureMatch,
                                source: Citation::None,
                                feature: Some(feature),
                                score: None,
                                was_skip: false,
                            },
                        }
                    }
                };
                if let Some(qi) = decision.query {
                    if let Some((prev, _, _)) = bound[qi] {
                        // a better feature match displaces the earlier box
                        if let Some(d) = decided[prev].as_mut() {
                            d.query = None;
                        }
                    }
                    let rank = if decision.mode == IdMode::FeatureMatch {
                        decision.score.unwrap_or(f64::NEG_INFINITY)
                    } else {
                        f64::INFINITY
                    };
                    bound[qi] = Some((di, decision.mode, rank));
                }
                decided[di] = Some(decision);
            }
        }

        let mut out: Vec<Option<(usize, BoxDecision)>> = vec![None; nq];
        for (di, d) in decided.into_iter().enumerate() {
            let Some(d) = d else { continue };
            let identity = d.query.map(|qi| env.queries[qi].id);
            self.cache
                .temporal_update(cam, boxes[di], d.feature.clone(), identity, seq, d.was_skip);
            if let Some(qi) = d.query {
                out[qi] = Some((di, d));
            }
        }
        Ok((out, calls))
    }
}

impl Tracker for ArgusTracker {
    fn name(&self) -> &'static str {
        "argus"
    }

    fn step(&mut self, bundle: &FrameBundle, env: &Environment) -> Result<StepOutput> {
        let k = env.cameras();
        let nq = env.queries.len();
        let mut row = LedgerRow::new(bundle.index, bundle.timestamp_ms, k, LatencyModel::DetectThenSequential);
        let mut assignments: Vec<Vec<Option<Assignment>>> = vec![vec![None; k]; nq];
        if nq == 0 {
            return Ok(StepOutput {
                step: bundle.index,
                timestamp_ms: bundle.timestamp_ms,
                assignments: Vec::new(),
                ledger: row,
            });
        }

        let order = self
            .inspection
            .order_cameras_with(&bundle.cameras(), self.cfg.inspection_order)?;
        let mut plans = vec![vec![Plan::Unknown; k]; nq];
        let mut entry: Vec<Option<EntryId>> = vec![None; nq];
        let mut contradicted = vec![false; nq];
        let mut observed: Vec<Vec<(CameraId, Slot)>> = vec![Vec::new(); nq];
        let mut detections: Vec<Option<Vec<Detection>>> = vec![None; k];

        for (pos, &cam) in order.iter().enumerate() {
            let frame = bundle.frame(cam).expect("camera from bundle");
            let cam_plans: Vec<Plan> = (0..nq).map(|qi| plans[qi][cam.0]).collect();
            let all_skip = cam_plans.iter().all(|p| matches!(p, Plan::Skip));
            if !(all_skip && !self.cfg.detect_on_skipped_cameras) {
                let dets = env.candidates(frame);
                row.detected[cam.0] = true;
                row.detect_s[cam.0] = self.book.actual[cam.0].detection_latency_s;
                let (found, calls) = self.inspect_camera(env, cam, frame.seq, &dets, &cam_plans)?;
                for (qi, f) in found.into_iter().enumerate() {
                    if let Some((di, d)) = f {
                        assignments[qi][cam.0] = Some(Assignment {
                            query: env.queries[qi].id,
                            camera: cam,
                            bbox: dets[di].bbox,
                            mode: d.mode,
                            source: d.source,
                            score: d.score,
                        });
                    }
                }
                self.charge_phase(cam, calls as usize, &mut row)?;
                detections[cam.0] = Some(dets);
            }

            let remaining: Vec<CameraId> = order[pos + 1..].to_vec();
            for qi in 0..nq {
                let slot = match &assignments[qi][cam.0] {
                    Some(a) => Slot::Box(a.bbox),
                    None => Slot::Absent,
                };
                observed[qi].push((cam, slot));
                if let Some(e) = entry[qi] {
                    if !self.table.agrees(e, &observed[qi]) {
                        contradicted[qi] = true;
                        entry[qi] = None;
                        for c in &remaining {
                            plans[qi][c.0] = Plan::Unknown;
                        }
                    }
                }
                if entry[qi].is_some() || remaining.is_empty() {
                    continue;
                }
                if !observed[qi].iter().any(|(_, s)| matches!(s, Slot::Box(_))) {
                    continue;
                }
                if let Some(e) = self.table.lookup_entry(&observed[qi]) {
                    entry[qi] = Some(e.id);
                    for (c, p) in predict_slots(e, &remaining) {
                        plans[qi][c.0] = match p {
                            SlotPrediction::Expect(b) => Plan::Expect(b, e.id),
                            SlotPrediction::SkipCamera => Plan::Skip,
                        };
                    }
                }
            }
        }

        self.interpolate_occlusions(env, bundle, &row, &detections, &mut assignments);

        if self.cfg.learn_entries && bundle.frames.len() == k {
            for qi in 0..nq {
                if entry[qi].is_some() && !contradicted[qi] {
                    continue;
                }
                let row_q = &assignments[qi];
                if row_q.iter().flatten().any(|a| a.mode == IdMode::OcclusionInterp) {
                    continue;
                }
                let slots = row_q
                    .iter()
                    .map(|a| a.as_ref().map_or(Slot::Absent, |a| Slot::Box(a.bbox)))
                    .collect();
                let scores = row_q.iter().map(|a| a.as_ref().and_then(|a| a.score)).collect();
                // a single sighting carries no cross-camera information
                let _ = self.table.record_association(slots, scores, bundle.timestamp_ms);
            }
        }

        for frame in &bundle.frames {
            let cam = frame.camera;
            let found: Vec<BBox> = (0..nq)
                .filter_map(|qi| assignments[qi][cam.0].as_ref().map(|a| a.bbox))
                .collect();
            self.inspection.set_found(cam, found);
            for (last, assigned) in self.last.iter_mut().zip(&assignments) {
                last[cam.0] = assigned[cam.0].as_ref().map(|a| LastSeen {
                    seq: frame.seq,
                    bbox: a.bbox,
                    streak: match (a.mode, last[cam.0]) {
                        (IdMode::OcclusionInterp, Some(l)) => l.streak + 1,
                        (IdMode::OcclusionInterp, None) => 1,
                        _ => 0,
                    },
                });
            }
        }

        Ok(StepOutput {
            step: bundle.index,
            timestamp_ms: bundle.timestamp_ms,
            assignments: assignments.into_iter().flatten().flatten().collect(),
            ledger: row,
        })
    }
}

impl ArgusTracker {
    fn charge_phase(&mut self, cam: CameraId, calls: usize, row: &mut LedgerRow) -> Result<()> {
        row.ids_per_camera[cam.0] = calls as u64;
        if calls == 0 {
            return Ok(());
        }
        let plan = plan_distribution(cam, calls, &self.book.estimate)?;
        let actual = evaluate_assignment(cam, &plan.assignment, &self.book.actual)?;
        row.id_s[cam.0] = actual.makespan_s;
        let tx = plan.transmitted() as u64;
        let host = &self.book.actual[cam.0];
        row.crops_tx[cam.0] += tx;
        row.bytes_tx[cam.0] += tx * (host.crop.bits() / 8.0) as u64;
        let bits = host.crop.bits();
        for (j, &n) in plan.assignment.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let peer = CameraId(j);
            let batches = n.div_ceil(self.book.actual[j].n_batch as usize) as u64;
            self.book.observe_inference(peer, batches, actual.processing_s[j]);
            if peer != cam {
                self.book
                    .observe_transfer(cam, peer, bits * n as f64, actual.transmission_s[j]);
            }
        }
        Ok(())
    }

    fn interpolate_occlusions(
        &self,
        env: &Environment,
        bundle: &FrameBundle,
        row: &LedgerRow,
        detections: &[Option<Vec<Detection>>],
        assignments: &mut [Vec<Option<Assignment>>],
    ) {
        let current: Vec<(CameraId, Vec<BBox>)> = detections
            .iter()
            .enumerate()
            .filter_map(|(c, d)| d.as_ref().map(|d| (CameraId(c), d.iter().map(|x| x.bbox).collect())))
            .collect();
        for (qi, q_assign) in assignments.iter_mut().enumerate() {
            for frame in &bundle.frames {
                let cam = frame.camera;
                if q_assign[cam.0].is_some() || !row.detected[cam.0] {
                    continue;
                }
                let Some(last) = self.last[qi][cam.0] else { continue };
                if last.seq + 1 != frame.seq
                    || last.streak >= self.cfg.occlusion_limit
                    || touches_edge(&last.bbox, &env.frames[cam.0])
                {
                    continue;
                }
                let others: Vec<(CameraId, Vec<BBox>)> =
                    current.iter().filter(|(c, _)| *c != cam).cloned().collect();
                let Some((eid, expect)) = self.table.interpolate_occlusion(cam, &last.bbox, &others) else {
                    continue;
                };
                // the query must have been located where the entry expects it
                let mut confirmed = 0;
                let mut consistent = true;
                for (c, b) in &expect {
                    if let Some(a) = &q_assign[c.0] {
                        if iou(&a.bbox, b) > self.cfg.match_iou {
                            confirmed += 1;
                        } else {
                            consistent = false;
                        }
                    }
                }
                if consistent && confirmed > 0 {
                    q_assign[cam.0] = Some(Assignment {
                        query: env.queries[qi].id,
                        camera: cam,
                        bbox: last.bbox,
                        mode: IdMode::OcclusionInterp,
                        source: Citation::Entry(eid),
                        score: None,
                    });
                }
            }
        }
    }
}
