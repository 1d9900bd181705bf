use std::fmt;

use crate::geometry::{iou, BBox, DEFAULT_MATCH_IOU};
use crate::ids::{CameraId, ObjectId};
use crate::worldsim::IdFeature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecordId(pub u64);

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalCacheRecord {
    pub id: RecordId,
    pub camera: CameraId,
    pub bbox: BBox,
    /// `None` when the identity came from spatial association.
    pub feature: Option<IdFeature>,
    /// Query object matched to this box, `None` for non-targets.
    pub identity: Option<ObjectId>,
    pub last_update: u64,
    pub consecutive_skips: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CacheLookup<'a> {
    Hit(&'a TemporalCacheRecord),
    /// A live record exists but has been reused too often in a row.
    RefreshDue(&'a TemporalCacheRecord),
    Miss,
}

impl<'a> CacheLookup<'a> {
    pub fn hit(&self) -> Option<&'a TemporalCacheRecord> {
        match self {
            CacheLookup::Hit(r) => Some(r),
            _ => None,
        }
    }

    pub fn record(&self) -> Option<&'a TemporalCacheRecord> {
        match self {
            CacheLookup::Hit(r) | CacheLookup::RefreshDue(r) => Some(r),
            CacheLookup::Miss => None,
        }
    }
}

/// Per-camera cache of last-frame identification results.
///
/// A record written at frame `f` is visible only to lookups at `f + 1`.
/// With refresh limit `R` a box reuses its record at most `R - 1` frames in
/// a row, so each tracked box is re-identified once every `R` frames.
#[derive(Debug, Clone)]
pub struct TemporalCache {
    records: Vec<Vec<TemporalCacheRecord>>,
    refresh_limits: Vec<u32>,
    match_iou: f64,
    next_id: u64,
}

impl TemporalCache {
    pub fn new(cameras: usize, refresh_limit: u32) -> Self {
        Self::with_threshold(cameras, refresh_limit, DEFAULT_MATCH_IOU)
    }

    pub fn with_threshold(cameras: usize, refresh_limit: u32, match_iou: f64) -> Self {
        Self::with_limits(vec![refresh_limit; cameras], match_iou)
    }

    /// One refresh limit per camera.
    pub fn with_limits(refresh_limits: Vec<u32>, match_iou: f64) -> Self {
        Self {
            records: vec![Vec::new(); refresh_limits.len()],
            refresh_limits: refresh_limits.into_iter().map(|r| r.max(1)).collect(),
            match_iou,
            next_id: 0,
        }
    }

    pub fn refresh_limit(&self, camera: CameraId) -> u32 {
        self.refresh_limits.get(camera.0).copied().unwrap_or(1)
    }

    pub fn records(&self, camera: CameraId) -> &[TemporalCacheRecord] {
        self.records.get(camera.0).map_or(&[], Vec::as_slice)
    }

    fn live_match(&self, camera: CameraId, bbox: &BBox, frame: u64) -> Option<usize> {
        let recs = self.records.get(camera.0)?;
        let mut best: Option<(f64, usize)> = None;
        for (i, r) in recs.iter().enumerate() {
            if r.last_update + 1 != frame {
                continue;
            }
            let v = iou(&r.bbox, bbox);
            if v > self.match_iou && best.is_none_or(|(bv, bi)| v > bv || (v == bv && r.id < recs[bi].id)) {
                best = Some((v, i));
            }
        }
        best.map(|(_, i)| i)
    }

    pub fn temporal_lookup(&self, camera: CameraId, bbox: &BBox, frame: u64) -> CacheLookup<'_> {
        match self.live_match(camera, bbox, frame) {
            None => CacheLookup::Miss,
            Some(i) => {
                let r = &self.records[camera.0][i];
                if r.consecutive_skips + 1 >= self.refresh_limit(camera) {
                    CacheLookup::RefreshDue(r)
                } else {
                    CacheLookup::Hit(r)
                }
            }
        }
    }

    /// Upserts the record for `bbox`. The predecessor is the live record the
    /// box matches; an identity also displaces older records carrying it.
    #[allow(clippy::too_many_arguments)]
    pub fn temporal_update(
        &mut self,
        camera: CameraId,
        bbox: BBox,
        feature: Option<IdFeature>,
        identity: Option<ObjectId>,
        frame: u64,
        was_skip: bool,
    ) -> RecordId {
        let pred = self.live_match(camera, &bbox, frame);
        let recs = &mut self.records[camera.0];
        let prev_skips = pred.map(|i| recs[i].consecutive_skips);
        let pred_id = pred.map(|i| recs[i].id);
        recs.retain(|r| {
            r.last_update + 1 >= frame
                && Some(r.id) != pred_id
                && !(identity.is_some() && r.identity == identity && r.last_update < frame)
        });
        let consecutive_skips = if was_skip {
            prev_skips.map_or(1, |s| s + 1)
        } else {
            0
        };
        let id = RecordId(self.next_id);
        self.next_id += 1;
        recs.push(TemporalCacheRecord {
            id,
            camera,
            bbox,
            feature,
            identity,
            last_update: frame,
            consecutive_skips,
        });
        id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x: f64) -> BBox {
        BBox::new(x, 0.0, x + 50.0, 100.0).unwrap()
    }

    fn feat() -> IdFeature {
        IdFeature::new(vec![1.0, 0.0]).unwrap()
    }

    const C0: CameraId = CameraId(0);

    #[test]
    fn expires_after_one_frame() {
        let mut c = TemporalCache::new(1, 10);
        c.temporal_update(C0, bb(0.0), Some(feat()), None, 10, false);
        assert!(c.temporal_lookup(C0, &bb(1.0), 11).hit().is_some());
        assert_eq!(c.temporal_lookup(C0, &bb(1.0), 12), CacheLookup::Miss);
        assert_eq!(c.temporal_lookup(C0, &bb(1.0), 10), CacheLookup::Miss);
        assert_eq!(c.temporal_lookup(C0, &bb(200.0), 11), CacheLookup::Miss);
    }

    #[test]
    fn skip_counter() {
        let mut c = TemporalCache::new(1, 10);
        c.temporal_update(C0, bb(0.0), Some(feat()), Some(ObjectId(1)), 0, false);
        assert_eq!(c.records(C0)[0].consecutive_skips, 0);
        for f in 1..=3 {
            assert!(c.temporal_lookup(C0, &bb(0.0), f).hit().is_some());
            c.temporal_update(C0, bb(0.0), Some(feat()), Some(ObjectId(1)), f, true);
        }
        assert_eq!(c.records(C0).len(), 1);
        assert_eq!(c.records(C0)[0].consecutive_skips, 3);
        assert_eq!(c.records(C0)[0].identity, Some(ObjectId(1)));
    }

    #[test]
    fn refresh_forces_identification_every_r_frames() {
        let r = 4;
        let mut c = TemporalCache::new(1, r);
        let mut ids = 0;
        for f in 0..40u64 {
            let was_skip = match c.temporal_lookup(C0, &bb(0.0), f) {
                CacheLookup::Hit(_) => true,
                CacheLookup::RefreshDue(_) | CacheLookup::Miss => {
                    ids += 1;
                    false
                }
            };
            c.temporal_update(C0, bb(0.0), Some(feat()), None, f, was_skip);
            assert!(c.records(C0)[0].consecutive_skips < r);
        }
        assert_eq!(ids, 40 / r as usize);
    }

    #[test]
    fn records_updated_this_frame_are_not_matched_again() {
        let mut c = TemporalCache::new(1, 10);
        c.temporal_update(C0, bb(0.0), None, None, 0, false);
        c.temporal_update(C0, bb(2.0), None, None, 1, true);
        // a second box at the same spot this frame sees no live record
        assert_eq!(c.temporal_lookup(C0, &bb(1.0), 1), CacheLookup::Miss);
        assert_eq!(c.records(C0).len(), 1);
    }

    #[test]
    fn distinct_boxes_keep_distinct_records() {
        let mut c = TemporalCache::new(2, 10);
        c.temporal_update(C0, bb(0.0), None, None, 0, false);
        c.temporal_update(C0, bb(300.0), None, Some(ObjectId(2)), 0, false);
        c.temporal_update(CameraId(1), bb(0.0), None, Some(ObjectId(2)), 0, false);
        assert_eq!(c.records(C0).len(), 2);
        assert_eq!(
            c.temporal_lookup(C0, &bb(300.0), 1).hit().unwrap().identity,
            Some(ObjectId(2))
        );
        assert_eq!(c.temporal_lookup(C0, &bb(0.0), 1).hit().unwrap().identity, None);
    }
}
