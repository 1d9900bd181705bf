use crate::error::{Error, Result};
use crate::ids::CameraId;

use super::profile::{CameraProfile, CropSpec};

/// Seconds to ship `n` crops from `from` to `to`.
pub fn transmission_delay(from: &CameraProfile, to: &CameraProfile, n: usize, crop: &CropSpec) -> Result<f64> {
    let bw = *from.bandwidth_bps.get(to.camera.0).ok_or(Error::UnknownPeer(to.camera.0))?;
    if from.camera == to.camera || n == 0 {
        return Ok(0.0);
    }
    Ok(crop.bits() * n as f64 / bw)
}

/// `ceil(n / n_batch) * T(n_batch)`.
pub fn batched_latency(profile: &CameraProfile, n: usize) -> f64 {
    let batches = n.div_ceil(profile.n_batch as usize);
    batches as f64 * profile.batch_latency_s
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionPlan {
    pub host: CameraId,
    /// Crops per camera, indexed like the profiles.
    pub assignment: Vec<usize>,
    pub transmission_s: Vec<f64>,
    pub processing_s: Vec<f64>,
    pub makespan_s: f64,
}

impl DistributionPlan {
    pub fn total(&self) -> usize {
        self.assignment.iter().sum()
    }

    /// Crops leaving the host.
    pub fn transmitted(&self) -> usize {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != self.host.0)
            .map(|(_, n)| n)
            .sum()
    }
}

/// Completion time of `n` crops on `to` when sent from `host`.
pub fn completion_time(host: &CameraProfile, to: &CameraProfile, n: usize) -> Result<f64> {
    Ok(transmission_delay(host, to, n, &host.crop)? + batched_latency(to, n))
}

/// Evaluates a fixed assignment.
pub fn evaluate_assignment(host: CameraId, assignment: &[usize], profiles: &[CameraProfile]) -> Result<DistributionPlan> {
    let h = profiles.get(host.0).ok_or(Error::UnknownPeer(host.0))?;
    let mut td = Vec::with_capacity(profiles.len());
    let mut bp = Vec::with_capacity(profiles.len());
    let mut makespan = 0.0f64;
    for (p, &n) in profiles.iter().zip(assignment) {
        let t = transmission_delay(h, p, n, &h.crop)?;
        let b = batched_latency(p, n);
        makespan = makespan.max(t + b);
        td.push(t);
        bp.push(b);
    }
    Ok(DistributionPlan {
        host,
        assignment: assignment.to_vec(),
        transmission_s: td,
        processing_s: bp,
        makespan_s: makespan,
    })
}

/// Splits `n` identification crops over the cameras to minimise the
/// makespan. Exact.
///
/// Each camera's completion time is non-decreasing in its crop count, so
/// the optimum is the smallest achievable completion time `v` at which the
/// cameras can jointly absorb `n` crops without exceeding `v`. Capacity is
/// handed to the host first, then to cameras in id order.
pub fn plan_distribution(host: CameraId, n: usize, profiles: &[CameraProfile]) -> Result<DistributionPlan> {
    let h = profiles.get(host.0).ok_or(Error::UnknownPeer(host.0))?;
    if n == 0 {
        return evaluate_assignment(host, &vec![0; profiles.len()], profiles);
    }
    // f[j][m] for m in 0..=n
    let f = profiles
        .iter()
        .map(|p| (0..=n).map(|m| completion_time(h, p, m)).collect::<Result<Vec<f64>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut candidates: Vec<f64> = f.iter().flat_map(|row| row[1..].iter().copied()).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let capacity = |row: &[f64], v: f64| row.iter().rposition(|&t| t <= v).unwrap_or(0);
    let feasible = |v: f64| f.iter().map(|row| capacity(row, v)).sum::<usize>() >= n;
    let idx = candidates.partition_point(|&v| !feasible(v));
    let best = candidates[idx];

    let mut assignment = vec![0; profiles.len()];
    let mut left = n;
    let order = std::iter::once(host.0).chain((0..profiles.len()).filter(|&j| j != host.0));
    for j in order {
        let take = capacity(&f[j], best).min(left);
        assignment[j] = take;
        left -= take;
    }
    debug_assert_eq!(left, 0);
    evaluate_assignment(host, &assignment, profiles)
}
