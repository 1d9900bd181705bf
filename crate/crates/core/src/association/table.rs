use std::collections::HashMap;
use std::fmt;

use crate::geometry::{iou, BBox, DEFAULT_MATCH_IOU};
use crate::ids::CameraId;

pub const DEFAULT_CAPACITY: usize = 100;
pub const DEFAULT_PRUNE_IOU: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntryId(pub u64);

impl fmt::Display for EntryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Where an identity sits on one camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    Box(BBox),
    Absent,
}

impl Slot {
    pub fn bbox(&self) -> Option<&BBox> {
        match self {
            Slot::Box(b) => Some(b),
            Slot::Absent => None,
        }
    }
}

/// A per-identity tuple of boxes observed at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingEntry {
    pub id: EntryId,
    /// Indexed by camera.
    pub slots: Vec<Slot>,
    /// Identity-matching score per slot, `None` on absent slots.
    pub scores: Vec<Option<f64>>,
    pub created_ms: f64,
    pub hit_count: u64,
}

impl MappingEntry {
    pub fn present_count(&self) -> usize {
        self.slots.iter().filter(|s| matches!(s, Slot::Box(_))).count()
    }

    pub fn slot(&self, camera: CameraId) -> Option<&Slot> {
        self.slots.get(camera.0)
    }

    pub fn average_score(&self) -> f64 {
        let (sum, n) = self
            .slots
            .iter()
            .zip(&self.scores)
            .filter_map(|(slot, s)| match slot {
                Slot::Box(_) => *s,
                Slot::Absent => None,
            })
            .fold((0.0, 0usize), |(acc, n), s| (acc + s, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// True when every camera where both entries hold a box overlaps above
    /// `threshold`, and there is at least one such camera.
    fn overlaps(&self, other: &MappingEntry, threshold: f64) -> bool {
        let mut shared = 0;
        for (a, b) in self.slots.iter().zip(&other.slots) {
            if let (Slot::Box(a), Slot::Box(b)) = (a, b) {
                if iou(a, b) <= threshold {
                    return false;
                }
                shared += 1;
            }
        }
        shared > 0
    }

    /// Suppression rank: more present slots first, then higher average
    /// score, then newer, then lower id.
    fn outranks(&self, other: &MappingEntry) -> bool {
        self.present_count()
            .cmp(&other.present_count())
            .then(self.average_score().total_cmp(&other.average_score()))
            .then(self.created_ms.total_cmp(&other.created_ms))
            .then(other.id.cmp(&self.id))
            .is_gt()
    }
}

/// Prediction for a camera not yet inspected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlotPrediction {
    Expect(BBox),
    SkipCamera,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecordError {
    #[error("an entry needs at least two present slots, got {0}")]
    TooFewSlots(usize),
    #[error("expected {expected} slots, got {got}")]
    SlotCount { expected: usize, got: usize },
}

/// Hash-indexed store of mapping entries.
#[derive(Debug, Clone)]
pub struct MappingTable {
    cameras: usize,
    entries: HashMap<EntryId, MappingEntry>,
    next_id: u64,
    capacity: usize,
    prune_iou: f64,
    match_iou: f64,
}

impl MappingTable {
    pub fn new(cameras: usize) -> Self {
        Self::with_thresholds(cameras, DEFAULT_CAPACITY, DEFAULT_PRUNE_IOU, DEFAULT_MATCH_IOU)
    }

    pub fn with_thresholds(cameras: usize, capacity: usize, prune_iou: f64, match_iou: f64) -> Self {
        Self {
            cameras,
            entries: HashMap::new(),
            next_id: 0,
            capacity: capacity.max(1),
            prune_iou,
            match_iou,
        }
    }

    pub fn cameras(&self) -> usize {
        self.cameras
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, id: EntryId) -> Option<&MappingEntry> {
        self.entries.get(&id)
    }

    /// Entries in id order.
    pub fn entries(&self) -> Vec<&MappingEntry> {
        let mut v: Vec<_> = self.entries.values().collect();
        v.sort_by_key(|e| e.id);
        v
    }

    /// Stores a new association. Prunes before returning if the table
    /// overflows.
    pub fn record_association(
        &mut self,
        slots: Vec<Slot>,
        scores: Vec<Option<f64>>,
        created_ms: f64,
    ) -> Result<EntryId, RecordError> {
        if slots.len() != self.cameras || scores.len() != self.cameras {
            return Err(RecordError::SlotCount {
                expected: self.cameras,
                got: slots.len().min(scores.len()),
            });
        }
        let present = slots.iter().filter(|s| matches!(s, Slot::Box(_))).count();
        if present < 2 {
            return Err(RecordError::TooFewSlots(present));
        }
        let scores = slots
            .iter()
            .zip(scores)
            .map(|(slot, s)| match slot {
                Slot::Box(_) => s,
                Slot::Absent => None,
            })
            .collect();
        let id = EntryId(self.next_id);
        self.next_id += 1;
        self.entries.insert(
            id,
            MappingEntry {
                id,
                slots,
                scores,
                created_ms,
                hit_count: 0,
            },
        );
        self.enforce_capacity();
        Ok(id)
    }

    /// Inserts an entry as-is, keeping its id. Used when loading snapshots.
    pub(crate) fn insert_raw(&mut self, entry: MappingEntry) {
        self.next_id = self.next_id.max(entry.id.0 + 1);
        self.entries.insert(entry.id, entry);
    }

    /// Mean IoU over observed boxes if `entry` agrees with every observed
    /// slot, `None` otherwise. Cameras missing from `observed` are unknown
    /// and match anything.
    fn agreement(&self, entry: &MappingEntry, observed: &[(CameraId, Slot)]) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (cam, obs) in observed {
            match (entry.slot(*cam)?, obs) {
                (Slot::Box(e), Slot::Box(o)) => {
                    let v = iou(e, o);
                    if v <= self.match_iou {
                        return None;
                    }
                    sum += v;
                    n += 1;
                }
                (Slot::Absent, Slot::Absent) => {}
                _ => return None,
            }
        }
        Some(if n == 0 { 0.0 } else { sum / n as f64 })
    }

    /// True when entry `id` agrees with every observed slot.
    pub fn agrees(&self, id: EntryId, observed: &[(CameraId, Slot)]) -> bool {
        self.entries
            .get(&id)
            .is_some_and(|e| self.agreement(e, observed).is_some())
    }

    fn best_match(&self, observed: &[(CameraId, Slot)]) -> Option<EntryId> {
        let mut best: Option<(f64, &MappingEntry)> = None;
        for e in self.entries.values() {
            let Some(score) = self.agreement(e, observed) else {
                continue;
            };
            let better = match best {
                None => true,
                Some((bs, be)) => score
                    .total_cmp(&bs)
                    .then(e.hit_count.cmp(&be.hit_count))
                    .then(e.created_ms.total_cmp(&be.created_ms))
                    .then(be.id.cmp(&e.id))
                    .is_gt(),
            };
            if better {
                best = Some((score, e));
            }
        }
        best.map(|(_, e)| e.id)
    }

    /// Finds the entry agreeing with `observed` on every inspected camera and
    /// bumps its hit count.
    pub fn lookup_entry(&mut self, observed: &[(CameraId, Slot)]) -> Option<&MappingEntry> {
        let id = self.best_match(observed)?;
        let e = self.entries.get_mut(&id).expect("id from table");
        e.hit_count += 1;
        Some(e)
    }

    /// Suppresses overlapping entries, keeping the better-ranked of each
    /// overlapping pair. Returns how many were removed.
    pub fn prune_entries(&mut self) -> usize {
        let mut ranked: Vec<&MappingEntry> = self.entries.values().collect();
        ranked.sort_by(|a, b| {
            if a.outranks(b) {
                std::cmp::Ordering::Less
            } else if b.outranks(a) {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        });
        let mut kept: Vec<&MappingEntry> = Vec::new();
        let mut removed = Vec::new();
        for e in ranked {
            if kept.iter().any(|k| k.overlaps(e, self.prune_iou)) {
                removed.push(e.id);
            } else {
                kept.push(e);
            }
        }
        for id in &removed {
            self.entries.remove(id);
        }
        removed.len()
    }

    /// Prunes, then evicts the least-hit, oldest entries until the table fits.
    fn enforce_capacity(&mut self) {
        if self.entries.len() <= self.capacity {
            return;
        }
        self.prune_entries();
        if self.entries.len() <= self.capacity {
            return;
        }
        let mut order: Vec<(u64, f64, EntryId)> = self
            .entries
            .values()
            .map(|e| (e.hit_count, e.created_ms, e.id))
            .collect();
        order.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        let excess = self.entries.len() - self.capacity;
        for (_, _, id) in order.into_iter().take(excess) {
            self.entries.remove(&id);
        }
    }

    /// Looks for an entry holding `last_box` on `camera` whose boxes on every
    /// other camera are matched by a current detection. Returns that entry's
    /// other-camera boxes.
    pub fn interpolate_occlusion(
        &self,
        camera: CameraId,
        last_box: &BBox,
        current: &[(CameraId, Vec<BBox>)],
    ) -> Option<(EntryId, Vec<(CameraId, BBox)>)> {
        let mut candidates: Vec<(f64, &MappingEntry)> = self
            .entries
            .values()
            .filter_map(|e| match e.slot(camera)? {
                Slot::Box(b) => {
                    let v = iou(b, last_box);
                    (v > self.match_iou).then_some((v, e))
                }
                Slot::Absent => None,
            })
            .collect();
        candidates.sort_by(|(va, a), (vb, b)| {
            vb.total_cmp(va)
                .then(b.hit_count.cmp(&a.hit_count))
                .then(b.created_ms.total_cmp(&a.created_ms))
                .then(a.id.cmp(&b.id))
        });
        'entries: for (_, e) in candidates {
            let mut expect = Vec::new();
            for (k, slot) in e.slots.iter().enumerate() {
                let cam = CameraId(k);
                let Slot::Box(b) = slot else { continue };
                if cam == camera {
                    continue;
                }
                let found = current
                    .iter()
                    .find(|(c, _)| *c == cam)
                    .is_some_and(|(_, dets)| dets.iter().any(|d| iou(d, b) > self.match_iou));
                if !found {
                    continue 'entries;
                }
                expect.push((cam, *b));
            }
            if !expect.is_empty() {
                return Some((e.id, expect));
            }
        }
        None
    }
}

/// Per-camera predictions for the cameras still to inspect.
pub fn predict_slots(entry: &MappingEntry, remaining: &[CameraId]) -> Vec<(CameraId, SlotPrediction)> {
    remaining
        .iter()
        .filter_map(|&cam| {
            let p = match entry.slot(cam)? {
                Slot::Box(b) => SlotPrediction::Expect(*b),
                Slot::Absent => SlotPrediction::SkipCamera,
            };
            Some((cam, p))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x: f64, y: f64) -> BBox {
        BBox::new(x, y, x + 40.0, y + 80.0).unwrap()
    }

    fn table3() -> MappingTable {
        MappingTable::new(3)
    }

    #[test]
    fn records_absent_slots() {
        let mut t = table3();
        let id = t
            .record_association(
                vec![Slot::Box(bb(0.0, 0.0)), Slot::Box(bb(100.0, 0.0)), Slot::Absent],
                vec![Some(0.9), Some(0.8), Some(0.5)],
                0.0,
            )
            .unwrap();
        let e = t.get(id).unwrap();
        assert_eq!(e.slots[2], Slot::Absent);
        assert_eq!(e.scores[2], None);
    }

    #[test]
    fn rejects_single_slot_entries() {
        let mut t = table3();
        let r = t.record_association(
            vec![Slot::Box(bb(0.0, 0.0)), Slot::Absent, Slot::Absent],
            vec![Some(0.9), None, None],
            0.0,
        );
        assert_eq!(r, Err(RecordError::TooFewSlots(1)));
        assert!(t.is_empty());
    }

    #[test]
    fn capacity_enforced_on_insert() {
        let mut t = MappingTable::new(2);
        for i in 0..101 {
            let x = i as f64 * 100.0;
            t.record_association(
                vec![Slot::Box(bb(x, 0.0)), Slot::Box(bb(x, 500.0))],
                vec![Some(0.9), Some(0.9)],
                i as f64,
            )
            .unwrap();
            assert!(t.len() <= 100);
        }
        assert_eq!(t.len(), 100);
        // oldest of the never-hit entries went first
        assert!(t.get(EntryId(0)).is_none());
    }

    #[test]
    fn lookup_exact_and_misses() {
        let mut t = table3();
        let slots = vec![Slot::Box(bb(0.0, 0.0)), Slot::Box(bb(100.0, 0.0)), Slot::Absent];
        let id = t
            .record_association(slots.clone(), vec![Some(0.9); 3], 0.0)
            .unwrap();
        let observed: Vec<_> = slots.iter().enumerate().map(|(i, s)| (CameraId(i), *s)).collect();
        assert_eq!(t.lookup_entry(&observed).unwrap().id, id);
        assert_eq!(t.get(id).unwrap().hit_count, 1);

        // IoU 0.3 against the stored cam0 slot: 40x80 boxes shifted 18.46 px in x
        let shift = 40.0 * (1.0 - 0.3) / 1.3;
        let shifted = bb(shift, 0.0);
        assert!((iou(&shifted, &bb(0.0, 0.0)) - 0.3).abs() < 1e-9);
        assert!(t.lookup_entry(&[(CameraId(0), Slot::Box(shifted))]).is_none());

        // box observed where the entry says absent
        assert!(t
            .lookup_entry(&[(CameraId(2), Slot::Box(bb(0.0, 0.0)))])
            .is_none());
        // absent matches absent, and uninspected cameras are unknown
        assert_eq!(
            t.lookup_entry(&[(CameraId(0), Slot::Box(bb(0.0, 0.0))), (CameraId(2), Slot::Absent)])
                .unwrap()
                .id,
            id
        );
    }

    #[test]
    fn lookup_prefers_higher_iou_then_hits() {
        let mut t = MappingTable::new(2);
        let a = t
            .record_association(vec![Slot::Box(bb(0.0, 0.0)), Slot::Box(bb(0.0, 300.0))], vec![Some(1.0); 2], 0.0)
            .unwrap();
        let b = t
            .record_association(vec![Slot::Box(bb(4.0, 0.0)), Slot::Box(bb(0.0, 600.0))], vec![Some(1.0); 2], 1.0)
            .unwrap();
        assert_eq!(t.lookup_entry(&[(CameraId(0), Slot::Box(bb(1.0, 0.0)))]).unwrap().id, a);
        assert_eq!(t.lookup_entry(&[(CameraId(0), Slot::Box(bb(3.0, 0.0)))]).unwrap().id, b);
        // equidistant: a has more hits now? a=1, b=1 -> newer wins
        assert_eq!(t.lookup_entry(&[(CameraId(0), Slot::Box(bb(2.0, 0.0)))]).unwrap().id, b);
        assert_eq!(t.lookup_entry(&[(CameraId(0), Slot::Box(bb(2.0, 0.0)))]).unwrap().id, b);
    }

    #[test]
    fn predict_slots_examples() {
        let e = MappingEntry {
            id: EntryId(0),
            slots: vec![Slot::Box(bb(0.0, 0.0)), Slot::Box(bb(5.0, 5.0)), Slot::Absent],
            scores: vec![Some(1.0), Some(1.0), None],
            created_ms: 0.0,
            hit_count: 0,
        };
        assert_eq!(
            predict_slots(&e, &[CameraId(1), CameraId(2)]),
            vec![
                (CameraId(1), SlotPrediction::Expect(bb(5.0, 5.0))),
                (CameraId(2), SlotPrediction::SkipCamera)
            ]
        );
        assert_eq!(predict_slots(&e, &[CameraId(2)]), vec![(CameraId(2), SlotPrediction::SkipCamera)]);
        assert!(predict_slots(&e, &[]).is_empty());
    }

    #[test]
    fn prune_prefers_score_then_slot_count() {
        let mut t = table3();
        let full = vec![Slot::Box(bb(0.0, 0.0)), Slot::Box(bb(100.0, 0.0)), Slot::Absent];
        let hi = t.record_association(full.clone(), vec![Some(0.9); 3], 0.0).unwrap();
        let lo = t.record_association(full.clone(), vec![Some(0.7); 3], 1.0).unwrap();
        assert_eq!(t.prune_entries(), 1);
        assert!(t.get(hi).is_some() && t.get(lo).is_none());

        let mut t = table3();
        let three = t
            .record_association(
                vec![Slot::Box(bb(0.0, 0.0)), Slot::Box(bb(100.0, 0.0)), Slot::Box(bb(200.0, 0.0))],
                vec![Some(0.5); 3],
                0.0,
            )
            .unwrap();
        let two = t
            .record_association(
                vec![Slot::Box(bb(1.0, 0.0)), Slot::Box(bb(101.0, 0.0)), Slot::Absent],
                vec![Some(0.99); 3],
                1.0,
            )
            .unwrap();
        assert_eq!(t.prune_entries(), 1);
        assert!(t.get(three).is_some() && t.get(two).is_none());

        let mut t = table3();
        t.record_association(full, vec![Some(0.9); 3], 0.0).unwrap();
        t.record_association(
            vec![Slot::Box(bb(500.0, 0.0)), Slot::Box(bb(700.0, 0.0)), Slot::Absent],
            vec![Some(0.9); 3],
            0.0,
        )
        .unwrap();
        assert_eq!(t.prune_entries(), 0);
    }

    #[test]
    fn occlusion_interpolation() {
        let mut t = table3();
        let id = t
            .record_association(
                vec![Slot::Box(bb(0.0, 0.0)), Slot::Box(bb(100.0, 0.0)), Slot::Box(bb(300.0, 0.0))],
                vec![Some(0.9); 3],
                0.0,
            )
            .unwrap();
        let all = vec![
            (CameraId(1), vec![bb(101.0, 0.0)]),
            (CameraId(2), vec![bb(299.0, 0.0), bb(900.0, 0.0)]),
        ];
        let (eid, expect) = t.interpolate_occlusion(CameraId(0), &bb(1.0, 0.0), &all).unwrap();
        assert_eq!(eid, id);
        assert_eq!(expect, vec![(CameraId(1), bb(100.0, 0.0)), (CameraId(2), bb(300.0, 0.0))]);

        assert!(t.interpolate_occlusion(CameraId(0), &bb(600.0, 0.0), &all).is_none());
        let partial = vec![(CameraId(1), vec![bb(101.0, 0.0)]), (CameraId(2), vec![bb(900.0, 0.0)])];
        assert!(t.interpolate_occlusion(CameraId(0), &bb(1.0, 0.0), &partial).is_none());
    }

    fn arb_entry() -> impl Strategy<Value = (Vec<Slot>, Vec<Option<f64>>)> {
        prop::collection::vec(
            (any::<bool>(), 0..20u32, 0..4u32, 0.1..1.0f64),
            3,
        )
        .prop_map(|v| {
            let slots = v
                .iter()
                .enumerate()
                .map(|(k, (present, gx, gy, _))| {
                    if *present || k < 2 {
                        Slot::Box(bb(*gx as f64 * 15.0, *gy as f64 * 30.0 + k as f64 * 1000.0))
                    } else {
                        Slot::Absent
                    }
                })
                .collect();
            let scores = v.iter().map(|x| Some(x.3)).collect();
            (slots, scores)
        })
    }

    proptest! {
        #[test]
        fn prune_is_idempotent_and_leaves_no_overlaps(entries in prop::collection::vec(arb_entry(), 1..40)) {
            let mut t = MappingTable::with_thresholds(3, 1000, DEFAULT_PRUNE_IOU, DEFAULT_MATCH_IOU);
            for (i, (s, sc)) in entries.into_iter().enumerate() {
                t.record_association(s, sc, i as f64).unwrap();
            }
            t.prune_entries();
            let snapshot: Vec<EntryId> = t.entries().iter().map(|e| e.id).collect();
            prop_assert_eq!(t.prune_entries(), 0);
            let after: Vec<EntryId> = t.entries().iter().map(|e| e.id).collect();
            prop_assert_eq!(&snapshot, &after);
            let es = t.entries();
            for (i, a) in es.iter().enumerate() {
                for b in &es[i + 1..] {
                    prop_assert!(!a.overlaps(b, DEFAULT_PRUNE_IOU));
                }
            }
        }

        #[test]
        fn lookup_of_fresh_entry_returns_it((slots, scores) in arb_entry()) {
            let mut t = MappingTable::new(3);
            let id = t.record_association(slots.clone(), scores, 0.0).unwrap();
            let observed: Vec<_> = slots.iter().enumerate().map(|(i, s)| (CameraId(i), *s)).collect();
            prop_assert_eq!(t.lookup_entry(&observed).map(|e| e.id), Some(id));
        }

        #[test]
        fn size_never_exceeds_capacity(n in 1..60usize, cap in 1..20usize) {
            let mut t = MappingTable::with_thresholds(2, cap, DEFAULT_PRUNE_IOU, DEFAULT_MATCH_IOU);
            for i in 0..n {
                let x = (i % 7) as f64 * 50.0;
                let _ = t.record_association(vec![Slot::Box(bb(x, 0.0)), Slot::Box(bb(x, 200.0))], vec![Some(0.5); 2], i as f64);
                prop_assert!(t.len() <= cap);
            }
        }
    }
}
