use crate::ids::CameraId;
use crate::worldsim::GroundTruthAnnotation;

/// Frames closer than this (milliseconds) are treated as simultaneous.
pub const DEFAULT_ALIGNMENT_MS: f64 = 3.0;

/// One camera's frame. Annotations feed the oracles and the scorer only.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraFrame {
    pub camera: CameraId,
    /// Position of this frame in its camera's stream.
    pub seq: u64,
    pub timestamp_ms: f64,
    pub annotations: Vec<GroundTruthAnnotation>,
}

/// Time-aligned frames processed as one tracking timestamp, at most one per
/// camera, sorted by camera id.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBundle {
    pub index: u64,
    pub timestamp_ms: f64,
    pub frames: Vec<CameraFrame>,
}

impl FrameBundle {
    pub fn frame(&self, camera: CameraId) -> Option<&CameraFrame> {
        self.frames.iter().find(|f| f.camera == camera)
    }

    pub fn cameras(&self) -> Vec<CameraId> {
        self.frames.iter().map(|f| f.camera).collect()
    }
}

/// Groups per-camera streams into bundles.
///
/// The earliest pending frame anchors each bundle; every other camera
/// contributes its pending frame nearest to the anchor when the difference is
/// within `threshold_ms`. Cameras with no such frame are absent from the
/// bundle, so surplus frames of a faster camera come out as single-camera
/// bundles. Streams must be sorted by timestamp.
pub fn align_frames(streams: Vec<Vec<CameraFrame>>, threshold_ms: f64) -> Vec<FrameBundle> {
    let mut queues: Vec<std::collections::VecDeque<CameraFrame>> =
        streams.into_iter().map(Into::into).collect();
    let mut out = Vec::new();
    loop {
        let anchor = queues
            .iter()
            .enumerate()
            .filter_map(|(i, q)| q.front().map(|f| (i, f.timestamp_ms, f.camera)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.2.cmp(&b.2)));
        let Some((anchor_idx, anchor_ts, _)) = anchor else {
            break;
        };
        let mut frames = vec![queues[anchor_idx].pop_front().expect("anchor exists")];
        for (i, q) in queues.iter_mut().enumerate() {
            if i == anchor_idx {
                continue;
            }
            // the head is the nearest pending frame: all pending frames are
            // at or after the anchor
            let take = q
                .front()
                .is_some_and(|f| (f.timestamp_ms - anchor_ts).abs() <= threshold_ms);
            if take {
                frames.push(q.pop_front().expect("checked"));
            }
        }
        frames.sort_by_key(|f| f.camera);
        out.push(FrameBundle {
            index: out.len() as u64,
            timestamp_ms: anchor_ts,
            frames,
        });
    }
    out
}
