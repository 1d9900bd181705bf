//! Deterministic workloads shared by the benchmarks.

use argus_core::association::{MappingTable, Slot};
use argus_core::scenario::{Scenario, Timeline};
use argus_core::scheduler::{CameraProfile, CropSpec};
use argus_core::{BBox, CameraId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_boxes(seed: u64, n: usize) -> Vec<BBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (x, y) = (rng.random_range(0.0..1800.0), rng.random_range(0.0..1000.0));
            let (w, h) = (rng.random_range(10.0..120.0), rng.random_range(10.0..80.0));
            BBox::new(x, y, x + w, y + h).expect("positive size")
        })
        .collect()
}

pub fn random_profiles(seed: u64, k: usize) -> Vec<CameraProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|c| {
            let t1 = rng.random_range(0.02..0.12);
            let table = vec![(1, t1), (2, t1 * 1.7), (4, t1 * 3.2)];
            let bw = (0..k).map(|_| rng.random_range(2e7..2e8)).collect();
            CameraProfile::new(CameraId(c), 0.05, table, bw, 0.3, CropSpec::default()).expect("valid profile")
        })
        .collect()
}

/// A table with `entries` associations spread over `cameras` cameras.
pub fn filled_table(seed: u64, cameras: usize, entries: usize) -> MappingTable {
    let mut table = MappingTable::with_thresholds(cameras, entries.max(1), 0.9, 0.5);
    let boxes = random_boxes(seed, entries * cameras);
    for (i, chunk) in boxes.chunks(cameras).enumerate() {
        let slots = chunk.iter().map(|b| Slot::Box(*b)).collect();
        let _ = table.record_association(slots, vec![Some(0.9); cameras], i as f64);
    }
    table
}

/// A builtin scenario cut to `steps` steps with all strategies enabled.
pub fn scenario(name: &str, steps: usize) -> (Scenario, Timeline) {
    let scn = Scenario::load(name, &[("steps".into(), steps.to_string())]).expect("builtin loads");
    let tl = scn.timeline(scn.config.seeds[0], None).expect("timeline builds");
    (scn, tl)
}
