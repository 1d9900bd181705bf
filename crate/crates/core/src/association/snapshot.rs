//! Mapping-table snapshot CSV, one row per slot:
//! `entry_id,camera_id,x_min,y_min,x_max,y_max,score,created_ms`.
//! Absent slots write `ABSENT` in `x_min` and leave the other box fields and
//! the score empty.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::geometry::BBox;

use super::table::{EntryId, MappingEntry, MappingTable, Slot};

pub const SNAPSHOT_HEADER: [&str; 8] = [
    "entry_id",
    "camera_id",
    "x_min",
    "y_min",
    "x_max",
    "y_max",
    "score",
    "created_ms",
];

const ABSENT: &str = "ABSENT";

pub fn write_snapshot<W: Write>(table: &MappingTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SNAPSHOT_HEADER)?;
    for e in table.entries() {
        for (cam, (slot, score)) in e.slots.iter().zip(&e.scores).enumerate() {
            let mut row = vec![e.id.0.to_string(), cam.to_string()];
            match slot {
                Slot::Box(b) => {
                    row.extend([b.x_min(), b.y_min(), b.x_max(), b.y_max()].map(|v| v.to_string()));
                    row.push(score.map(|s| s.to_string()).unwrap_or_default());
                }
                Slot::Absent => {
                    row.extend([ABSENT.to_string(), String::new(), String::new(), String::new(), String::new()]);
                }
            }
            row.push(e.created_ms.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Slots, scores and creation time gathered for one entry id.
type PartialEntry = (Vec<Option<Slot>>, Vec<Option<f64>>, f64);

/// Reads a snapshot into `table`. Every entry must list each of the table's
/// cameras exactly once.
pub fn read_snapshot<R: Read>(table: &mut MappingTable, input: R) -> Result<usize> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let cams = table.cameras();
    let mut partial: BTreeMap<u64, PartialEntry> = BTreeMap::new();
    let mut header_seen = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::SnapshotParse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| Error::SnapshotParse { line, message };
        if !header_seen {
            if rec.iter().collect::<Vec<_>>() != SNAPSHOT_HEADER {
                return Err(err(format!("expected header `{}`", SNAPSHOT_HEADER.join(","))));
            }
            header_seen = true;
            continue;
        }
        if rec.len() != SNAPSHOT_HEADER.len() {
            return Err(err(format!("expected {} fields, found {}", SNAPSHOT_HEADER.len(), rec.len())));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("field `{}`: bad number `{}`", SNAPSHOT_HEADER[i], &rec[i])))
        };
        let id: u64 = rec[0].parse().map_err(|_| err(format!("bad entry id `{}`", &rec[0])))?;
        let cam: usize = rec[1].parse().map_err(|_| err(format!("bad camera id `{}`", &rec[1])))?;
        if cam >= cams {
            return Err(err(format!("camera {cam} outside the {cams} configured cameras")));
        }
        let created = num(7)?;
        let (slot, score) = if &rec[2] == ABSENT {
            (Slot::Absent, None)
        } else {
            let b = BBox::new(num(2)?, num(3)?, num(4)?, num(5)?).map_err(|e| err(e.to_string()))?;
            let score = if rec[6].is_empty() { None } else { Some(num(6)?) };
            (Slot::Box(b), score)
        };
        let e = partial
            .entry(id)
            .or_insert_with(|| (vec![None; cams], vec![None; cams], created));
        if e.0[cam].is_some() {
            return Err(err(format!("entry {id} lists camera {cam} twice")));
        }
        e.0[cam] = Some(slot);
        e.1[cam] = score;
    }
    let n = partial.len();
    for (id, (slots, scores, created_ms)) in partial {
        let slots: Option<Vec<Slot>> = slots.into_iter().collect();
        let slots = slots.ok_or_else(|| Error::SnapshotParse {
            line: 0,
            message: format!("entry {id} does not cover every camera"),
        })?;
        let present = slots.iter().filter(|s| matches!(s, Slot::Box(_))).count();
        if present < 2 {
            return Err(Error::SnapshotParse {
                line: 0,
                message: format!("entry {id} has fewer than two boxes"),
            });
        }
        table.insert_raw(MappingEntry {
            id: EntryId(id),
            slots,
            scores,
            created_ms,
            hit_count: 0,
        });
    }
    Ok(n)
}
