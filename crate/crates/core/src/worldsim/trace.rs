//! Replay of externally recorded detections.
//!
//! Format: one annotation per row, header required,
//! `timestamp_ms,camera_id,object_id,x_min,y_min,x_max,y_max,label,visibility`.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::ids::{CameraId, ObjectId};
use crate::pipeline::{align_frames, CameraFrame, FrameBundle, DEFAULT_ALIGNMENT_MS};

use super::GroundTruthAnnotation;

pub const TRACE_HEADER: [&str; 9] = [
    "timestamp_ms",
    "camera_id",
    "object_id",
    "x_min",
    "y_min",
    "x_max",
    "y_max",
    "label",
    "visibility",
];

/// A replayed trace. Camera and object names are numbered in order of first
/// appearance.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub cameras: Vec<String>,
    pub objects: Vec<(String, String)>,
    pub bundles: Vec<FrameBundle>,
}

impl Trace {
    pub fn object_id(&self, name: &str) -> Option<ObjectId> {
        self.objects
            .iter()
            .position(|(n, _)| n == name)
            .map(|i| ObjectId(i as u32))
    }
}

pub fn ingest_trace(path: impl AsRef<Path>) -> Result<Trace> {
    ingest_trace_with(std::fs::File::open(path)?, DEFAULT_ALIGNMENT_MS)
}

pub fn ingest_trace_with<R: Read>(reader: R, alignment_ms: f64) -> Result<Trace> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut cameras: Vec<String> = Vec::new();
    let mut cam_index: HashMap<String, usize> = HashMap::new();
    let mut objects: Vec<(String, String)> = Vec::new();
    let mut obj_index: HashMap<String, usize> = HashMap::new();
    let mut streams: Vec<Vec<CameraFrame>> = Vec::new();
    let mut header_seen = false;

    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::TraceParse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if !header_seen {
            let fields: Vec<&str> = rec.iter().collect();
            if fields != TRACE_HEADER {
                return Err(Error::TraceParse {
                    line,
                    message: format!("expected header `{}`", TRACE_HEADER.join(",")),
                });
            }
            header_seen = true;
            continue;
        }
        let parse_err = |message: String| Error::TraceParse { line, message };
        if rec.len() != TRACE_HEADER.len() {
            return Err(parse_err(format!(
                "expected {} fields, found {}",
                TRACE_HEADER.len(),
                rec.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            let s = &rec[i];
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(format!("field `{}`: bad number `{s}`", TRACE_HEADER[i])))
        };
        let ts = num(0)?;
        let (cam_name, obj_name, label) = (&rec[1], &rec[2], &rec[7]);
        if cam_name.is_empty() || obj_name.is_empty() {
            return Err(parse_err("empty camera or object id".into()));
        }
        let bbox = BBox::new(num(3)?, num(4)?, num(5)?, num(6)?)
            .map_err(|e| parse_err(e.to_string()))?;
        let visibility = num(8)?;
        if !(0.0..=1.0).contains(&visibility) {
            return Err(parse_err(format!("visibility {visibility} outside [0, 1]")));
        }

        let cam = *cam_index.entry(cam_name.to_string()).or_insert_with(|| {
            cameras.push(cam_name.to_string());
            streams.push(Vec::new());
            cameras.len() - 1
        });
        let obj = *obj_index.entry(obj_name.to_string()).or_insert_with(|| {
            objects.push((obj_name.to_string(), label.to_string()));
            objects.len() - 1
        });

        let stream = &mut streams[cam];
        match stream.last() {
            Some(last) if ts < last.timestamp_ms => {
                return Err(Error::TraceValidation {
                    line,
                    message: format!(
                        "timestamp {ts} ms on `{cam_name}` precedes {} ms",
                        last.timestamp_ms
                    ),
                })
            }
            Some(last) if ts == last.timestamp_ms => {}
            _ => {
                let seq = stream.len() as u64;
                stream.push(CameraFrame {
                    camera: CameraId(cam),
                    seq,
                    timestamp_ms: ts,
                    annotations: Vec::new(),
                });
            }
        }
        let frame = stream.last_mut().expect("frame pushed above");
        if frame.annotations.iter().any(|a| a.object == ObjectId(obj as u32)) {
            return Err(Error::TraceValidation {
                line,
                message: format!("duplicate annotation for `{obj_name}` on `{cam_name}` at {ts} ms"),
            });
        }
        if visibility > 0.0 {
            frame.annotations.push(GroundTruthAnnotation {
                timestamp_ms: ts,
                camera: CameraId(cam),
                object: ObjectId(obj as u32),
                label: label.to_string(),
                bbox,
                visibility,
            });
        }
    }

    Ok(Trace {
        cameras,
        objects,
        bundles: align_frames(streams, alignment_ms),
    })
}
