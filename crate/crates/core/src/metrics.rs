//! CLEAR-MOT scoring per camera and run-level cost summaries.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use crate::error::Result;
use crate::geometry::{iou, BBox};
use crate::ids::{CameraId, ObjectId};
use crate::pipeline::{FrameBundle, LedgerRow, StepOutput};
use crate::worldsim::GroundTruthAnnotation;

pub const MATCH_IOU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameScore {
    pub camera: CameraId,
    pub matches: u64,
    /// Summed IoU of matched pairs.
    pub iou_sum: f64,
    pub false_negatives: u64,
    pub false_positives: u64,
    pub mismatches: u64,
    pub truths: u64,
}

impl FrameScore {
    pub fn errors(&self) -> u64 {
        self.false_negatives + self.false_positives + self.mismatches
    }
}

/// Scores one camera frame. `truth` holds target annotations only.
///
/// A prediction matches the truth of its own query above the IoU gate. An
/// unmatched prediction that covers another target's unclaimed truth box is
/// a mismatch and claims that box; any other unmatched prediction is a false
/// positive. Truth boxes left unclaimed are false negatives.
pub fn match_frame(
    camera: CameraId,
    predicted: &BTreeMap<ObjectId, BBox>,
    truth: &[GroundTruthAnnotation],
) -> FrameScore {
    let mut s = FrameScore {
        camera,
        truths: truth.len() as u64,
        ..FrameScore::default()
    };
    let mut claimed = vec![false; truth.len()];
    let mut unmatched = Vec::new();
    for (q, b) in predicted {
        let own = truth
            .iter()
            .enumerate()
            .find(|(i, t)| !claimed[*i] && t.object == *q && iou(b, &t.bbox) > MATCH_IOU);
        match own {
            Some((i, t)) => {
                claimed[i] = true;
                s.matches += 1;
                s.iou_sum += iou(b, &t.bbox);
            }
            None => unmatched.push((*q, *b)),
        }
    }
    let mut swaps = Vec::new();
    for (pi, (q, b)) in unmatched.iter().enumerate() {
        for (ti, t) in truth.iter().enumerate() {
            let v = iou(b, &t.bbox);
            if !claimed[ti] && t.object != *q && v > MATCH_IOU {
                swaps.push((v, pi, ti));
            }
        }
    }
    swaps.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used = vec![false; unmatched.len()];
    for (_, pi, ti) in swaps {
        if !used[pi] && !claimed[ti] {
            used[pi] = true;
            claimed[ti] = true;
            s.mismatches += 1;
        }
    }
    s.false_positives = used.iter().filter(|u| !**u).count() as u64;
    s.false_negatives = claimed.iter().filter(|c| !**c).count() as u64;
    s
}

fn per_camera<F: Fn(&[&FrameScore]) -> Option<f64>>(scores: &[FrameScore], f: F) -> Option<f64> {
    let mut by_cam: BTreeMap<CameraId, Vec<&FrameScore>> = BTreeMap::new();
    for s in scores {
        by_cam.entry(s.camera).or_default().push(s);
    }
    let vals: Vec<f64> = by_cam.values().filter_map(|v| f(v)).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Mean matched IoU per camera, averaged over cameras with matches.
pub fn motp(scores: &[FrameScore]) -> Option<f64> {
    per_camera(scores, |v| {
        let c: u64 = v.iter().map(|s| s.matches).sum();
        (c > 0).then(|| v.iter().map(|s| s.iou_sum).sum::<f64>() / c as f64)
    })
}

/// `1 - errors / truths` per camera, averaged over cameras with truths.
/// Unbounded below.
pub fn mota(scores: &[FrameScore]) -> Option<f64> {
    per_camera(scores, |v| {
        let t: u64 = v.iter().map(|s| s.truths).sum();
        (t > 0).then(|| 1.0 - v.iter().map(|s| s.errors()).sum::<u64>() as f64 / t as f64)
    })
}

/// Scores every camera frame of a run.
pub fn score_run(steps: &[StepOutput], bundles: &[FrameBundle], targets: &[ObjectId]) -> Vec<FrameScore> {
    let wanted: HashSet<ObjectId> = targets.iter().copied().collect();
    let mut out = Vec::new();
    for (step, bundle) in steps.iter().zip(bundles) {
        for f in &bundle.frames {
            let t: Vec<GroundTruthAnnotation> = f
                .annotations
                .iter()
                .filter(|a| wanted.contains(&a.object))
                .cloned()
                .collect();
            out.push(match_frame(f.camera, &step.on_camera(f.camera), &t));
        }
    }
    out
}

pub const REPORT_HEADER: [&str; 10] = [
    "strategy",
    "scenario",
    "seed",
    "mean_ids",
    "mean_latency_s",
    "detect_latency_s",
    "id_latency_s",
    "motp",
    "mota",
    "crops_tx",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub strategy: String,
    pub scenario: String,
    pub seed: u64,
    pub steps: usize,
    pub mean_ids: f64,
    pub max_ids: u64,
    pub mean_latency_s: f64,
    pub detect_latency_s: f64,
    pub id_latency_s: f64,
    pub motp: Option<f64>,
    pub mota: Option<f64>,
    pub crops_tx: u64,
}

pub fn summarize(strategy: &str, scenario: &str, seed: u64, ledger: &[LedgerRow], scores: &[FrameScore]) -> Report {
    let n = ledger.len();
    let mean = |f: &dyn Fn(&LedgerRow) -> f64| {
        if n == 0 {
            0.0
        } else {
            ledger.iter().map(f).sum::<f64>() / n as f64
        }
    };
    Report {
        strategy: strategy.to_string(),
        scenario: scenario.to_string(),
        seed,
        steps: n,
        mean_ids: mean(&|r| r.total_ids() as f64),
        max_ids: ledger.iter().map(LedgerRow::total_ids).max().unwrap_or(0),
        mean_latency_s: mean(&|r| r.latency_s()),
        detect_latency_s: mean(&|r| r.detect_phase_s()),
        id_latency_s: mean(&|r| r.id_phase_s()),
        motp: motp(scores),
        mota: mota(scores),
        crops_tx: ledger.iter().map(LedgerRow::total_crops_tx).sum(),
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl Report {
    pub fn record(&self) -> [String; 10] {
        [
            self.strategy.clone(),
            self.scenario.clone(),
            self.seed.to_string(),
            fmt_f64(self.mean_ids),
            fmt_f64(self.mean_latency_s),
            fmt_f64(self.detect_latency_s),
            fmt_f64(self.id_latency_s),
            fmt_opt(self.motp),
            fmt_opt(self.mota),
            self.crops_tx.to_string(),
        ]
    }
}

pub fn write_reports<W: Write>(reports: &[Report], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}
