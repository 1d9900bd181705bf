#![allow(dead_code)]

use argus_core::scheduler::CameraProfile;

/// Corner-sampled raster IoU on a grid of `step` pixels.
pub fn raster_iou(a: [f64; 4], b: [f64; 4], step: f64) -> f64 {
    let lo_x = a[0].min(b[0]);
    let lo_y = a[1].min(b[1]);
    let hi_x = a[2].max(b[2]);
    let hi_y = a[3].max(b[3]);
    let inside = |r: [f64; 4], x: f64, y: f64| x >= r[0] && x < r[2] && y >= r[1] && y < r[3];
    let (mut inter, mut union) = (0u64, 0u64);
    let mut y = lo_y + step / 2.0;
    while y < hi_y {
        let mut x = lo_x + step / 2.0;
        while x < hi_x {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
            x += step;
        }
        y += step;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Makespan of a fixed split, recomputed from the profile fields.
pub fn makespan(host: usize, split: &[usize], profiles: &[CameraProfile]) -> f64 {
    let h = &profiles[host];
    let mut worst = 0.0f64;
    for (j, (&n, p)) in split.iter().zip(profiles).enumerate() {
        let tx = if j == host || n == 0 {
            0.0
        } else {
            h.crop.bits() * n as f64 / h.bandwidth_bps[j]
        };
        let batches = n.div_ceil(p.n_batch as usize);
        worst = worst.max(tx + batches as f64 * p.batch_latency_s);
    }
    worst
}

/// Every way to put `n` identical crops into `k` cameras.
pub fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in compositions(n - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

pub fn brute_force_makespan(host: usize, n: usize, profiles: &[CameraProfile]) -> f64 {
    compositions(n, profiles.len())
        .iter()
        .map(|s| makespan(host, s, profiles))
        .fold(f64::INFINITY, f64::min)
}

/// `(TP-free) errors / truths` written out directly.
pub fn hand_mota(truths: u64, fn_: u64, fp: u64, mm: u64) -> f64 {
    1.0 - (fn_ + fp + mm) as f64 / truths as f64
}
