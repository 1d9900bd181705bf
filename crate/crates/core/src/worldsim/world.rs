use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::ids::{CameraId, ObjectId};
use crate::pipeline::{CameraFrame, FrameBundle};
use crate::rng::{stream_rng, Stream};

use super::camera::CameraModel;

/// Physical size of an object. `depth` runs along the direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Footprint {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    Static {
        position: [f64; 2],
        #[serde(default)]
        heading: f64,
    },
    /// Constant-speed motion along a polyline.
    Waypoints {
        points: Vec<[f64; 2]>,
        speed_mps: f64,
        #[serde(default = "yes")]
        looped: bool,
        /// Starting arc-length offset along the path, meters.
        #[serde(default)]
        offset_m: f64,
    },
    /// Seeded random walk with per-tick speed drawn from the bounds.
    RandomWalk {
        start: [f64; 2],
        speed_min: f64,
        speed_max: f64,
        /// Heading diffusion, radians per sqrt(second).
        #[serde(default = "default_turn_sigma")]
        turn_sigma: f64,
        /// Optional leash around the start position, meters.
        #[serde(default)]
        radius: Option<f64>,
    },
}

fn yes() -> bool {
    true
}

fn default_turn_sigma() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: ObjectId,
    pub label: String,
    pub footprint: Footprint,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    /// Plane extents (x, y) in meters.
    pub plane: [f64; 2],
    pub objects: Vec<ObjectSpec>,
    pub tick_rate_hz: f64,
    pub duration_ticks: u64,
    #[serde(default)]
    pub seed: u64,
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let [pw, ph] = self.plane;
        if !(pw > 0.0 && ph > 0.0 && pw.is_finite() && ph.is_finite()) {
            return Err(Error::Config("world.plane extents must be positive".into()));
        }
        if !(self.tick_rate_hz > 0.0 && self.tick_rate_hz.is_finite()) {
            return Err(Error::Config("world.tick_rate_hz must be positive".into()));
        }
        let inside = |p: &[f64; 2]| p[0] >= 0.0 && p[0] <= pw && p[1] >= 0.0 && p[1] <= ph;
        let mut seen = std::collections::BTreeSet::new();
        for o in &self.objects {
            let fail = |msg: &str| Err(Error::Config(format!("world object {}: {msg}", o.id)));
            if !seen.insert(o.id) {
                return fail("duplicate id");
            }
            let f = o.footprint;
            if !(f.width > 0.0 && f.depth > 0.0 && f.height > 0.0) {
                return fail("footprint dimensions must be positive");
            }
            match &o.trajectory {
                Trajectory::Static { position, .. } => {
                    if !inside(position) {
                        return fail("trajectory leaves the plane");
                    }
                }
                Trajectory::Waypoints {
                    points, speed_mps, ..
                } => {
                    if points.is_empty() {
                        return fail("waypoint list is empty");
                    }
                    if !(*speed_mps > 0.0) {
                        return fail("speed must be positive");
                    }
                    // the plane is convex, so segments between inside points stay inside
                    if !points.iter().all(inside) {
                        return fail("trajectory leaves the plane");
                    }
                }
                Trajectory::RandomWalk {
                    start,
                    speed_min,
                    speed_max,
                    turn_sigma,
                    radius,
                } => {
                    if !inside(start) {
                        return fail("trajectory leaves the plane");
                    }
                    if !(*speed_min > 0.0 && speed_max >= speed_min) {
                        return fail("speed bounds must satisfy 0 < min <= max");
                    }
                    if !(*turn_sigma >= 0.0) {
                        return fail("turn_sigma must be non-negative");
                    }
                    if let Some(r) = radius {
                        if !(*r > 0.0) {
                            return fail("radius must be positive");
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_rate_hz
    }
}

/// One object's ground-truth box on one camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthAnnotation {
    pub timestamp_ms: f64,
    pub camera: CameraId,
    pub object: ObjectId,
    pub label: String,
    pub bbox: BBox,
    pub visibility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectState {
    pub position: [f64; 2],
    pub heading: f64,
}

struct Mover {
    spec: ObjectSpec,
    state: ObjectState,
    rng: ChaCha8Rng,
}

impl Mover {
    fn new(spec: ObjectSpec, seed: u64) -> Self {
        let rng = stream_rng(seed, Stream::Trajectory, &[spec.id.0 as u64]);
        let mut m = Self {
            state: ObjectState {
                position: [0.0, 0.0],
                heading: 0.0,
            },
            spec,
            rng,
        };
        m.state = match &m.spec.trajectory {
            Trajectory::Static { position, heading } => ObjectState {
                position: *position,
                heading: *heading,
            },
            Trajectory::Waypoints { .. } => m.along_path(0.0),
            Trajectory::RandomWalk { start, .. } => {
                let heading = m.rng.random_range(0.0..std::f64::consts::TAU);
                ObjectState {
                    position: *start,
                    heading,
                }
            }
        };
        m
    }

    fn along_path(&self, t: f64) -> ObjectState {
        let Trajectory::Waypoints {
            points,
            speed_mps,
            looped,
            offset_m,
        } = &self.spec.trajectory
        else {
            unreachable!()
        };
        if points.len() == 1 {
            return ObjectState {
                position: points[0],
                heading: 0.0,
            };
        }
        let mut segs: Vec<([f64; 2], [f64; 2])> = points.windows(2).map(|w| (w[0], w[1])).collect();
        if *looped {
            segs.push((*points.last().unwrap(), points[0]));
        }
        let lens: Vec<f64> = segs
            .iter()
            .map(|(a, b)| (b[0] - a[0]).hypot(b[1] - a[1]))
            .collect();
        let total: f64 = lens.iter().sum();
        if total == 0.0 {
            return ObjectState {
                position: points[0],
                heading: 0.0,
            };
        }
        let mut s = offset_m + speed_mps * t;
        s = if *looped {
            s.rem_euclid(total)
        } else {
            s.clamp(0.0, total)
        };
        let last = segs.len() - 1;
        for (k, ((a, b), len)) in segs.iter().zip(&lens).enumerate() {
            if s <= *len || k == last {
                let f = if *len > 0.0 { (s / len).min(1.0) } else { 0.0 };
                return ObjectState {
                    position: [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])],
                    heading: (b[1] - a[1]).atan2(b[0] - a[0]),
                };
            }
            s -= len;
        }
        unreachable!()
    }

    fn step(&mut self, tick: u64, dt: f64, plane: [f64; 2]) {
        match &self.spec.trajectory {
            Trajectory::Static { .. } => {}
            Trajectory::Waypoints { .. } => self.state = self.along_path(tick as f64 * dt),
            Trajectory::RandomWalk {
                start,
                speed_min,
                speed_max,
                turn_sigma,
                radius,
            } => {
                let (start, smin, smax, sigma, radius) =
                    (*start, *speed_min, *speed_max, *turn_sigma, *radius);
                let speed = if smax > smin {
                    self.rng.random_range(smin..smax)
                } else {
                    smin
                };
                let turn: f64 = Normal::new(0.0, sigma * dt.sqrt())
                    .expect("sigma validated")
                    .sample(&mut self.rng);
                let mut heading = self.state.heading + turn;
                let [x, y] = self.state.position;
                if let Some(r) = radius {
                    let (dx, dy) = (start[0] - x, start[1] - y);
                    if dx.hypot(dy) > r {
                        heading = dy.atan2(dx);
                    }
                }
                let mut nx = x + speed * dt * heading.cos();
                let mut ny = y + speed * dt * heading.sin();
                if nx < 0.0 || nx > plane[0] {
                    heading = std::f64::consts::PI - heading;
                    nx = nx.clamp(0.0, plane[0]);
                }
                if ny < 0.0 || ny > plane[1] {
                    heading = -heading;
                    ny = ny.clamp(0.0, plane[1]);
                }
                self.state = ObjectState {
                    position: [nx, ny],
                    heading,
                };
            }
        }
    }
}

/// Iterator over the frame bundles of a synthetic world, one per tick.
pub struct WorldStream {
    movers: Vec<Mover>,
    cameras: Vec<CameraModel>,
    periods: Vec<u64>,
    seqs: Vec<u64>,
    tick: u64,
    duration: u64,
    dt: f64,
    plane: [f64; 2],
}

/// Builds the deterministic world history for `cfg` as seen by `cams`.
pub fn generate_world(cfg: &WorldConfig, cams: &[CameraModel]) -> Result<WorldStream> {
    cfg.validate()?;
    let mut periods = Vec::with_capacity(cams.len());
    for cam in cams {
        let ratio = cfg.tick_rate_hz / cam.frame_rate_hz;
        let period = ratio.round();
        if period < 1.0 || (ratio - period).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "{}: frame rate {} Hz must divide the tick rate {} Hz",
                cam.id, cam.frame_rate_hz, cfg.tick_rate_hz
            )));
        }
        periods.push(period as u64);
    }
    let mut specs = cfg.objects.clone();
    specs.sort_by_key(|o| o.id);
    Ok(WorldStream {
        movers: specs.into_iter().map(|s| Mover::new(s, cfg.seed)).collect(),
        cameras: cams.to_vec(),
        periods,
        seqs: vec![0; cams.len()],
        tick: 0,
        duration: cfg.duration_ticks,
        dt: cfg.dt(),
        plane: cfg.plane,
    })
}

impl WorldStream {
    pub fn object_states(&self) -> Vec<(ObjectId, ObjectState)> {
        self.movers.iter().map(|m| (m.spec.id, m.state)).collect()
    }

    fn render(&self, cam: &CameraModel, timestamp_ms: f64) -> Vec<GroundTruthAnnotation> {
        let mut visible: Vec<(usize, BBox, f64)> = Vec::new();
        for (i, m) in self.movers.iter().enumerate() {
            let f = m.spec.footprint;
            let Some(p) = cam.project_object(
                m.state.position,
                m.state.heading,
                f.depth,
                f.width,
                f.height,
            ) else {
                continue;
            };
            if let Some(clipped) = p.bbox.clip_to(&cam.frame) {
                if clipped.width() >= MIN_SIDE_PX && clipped.height() >= MIN_SIDE_PX {
                    visible.push((i, clipped, p.foot_v));
                }
            }
        }
        let mut out = Vec::new();
        for &(i, bbox, foot_v) in &visible {
            let occluders: Vec<BBox> = visible
                .iter()
                .filter(|&&(j, _, fv)| j != i && (fv > foot_v || (fv == foot_v && j < i)))
                .filter_map(|(_, b, _)| bbox.intersection(b))
                .collect();
            let covered = union_area(&occluders);
            let visibility = (1.0 - covered / bbox.area()).clamp(0.0, 1.0);
            if visibility <= 1e-9 {
                continue;
            }
            let m = &self.movers[i];
            out.push(GroundTruthAnnotation {
                timestamp_ms,
                camera: cam.id,
                object: m.spec.id,
                label: m.spec.label.clone(),
                bbox,
                visibility,
            });
        }
        out
    }
}

/// Boxes thinner than this after clipping are not annotated.
const MIN_SIDE_PX: f64 = 1.0;

/// Exact area of a union of boxes by coordinate compression.
pub(crate) fn union_area(boxes: &[BBox]) -> f64 {
    if boxes.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<f64> = boxes.iter().flat_map(|b| [b.x_min(), b.x_max()]).collect();
    let mut ys: Vec<f64> = boxes.iter().flat_map(|b| [b.y_min(), b.y_max()]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut area = 0.0;
    for xw in xs.windows(2) {
        let cx = (xw[0] + xw[1]) / 2.0;
        for yw in ys.windows(2) {
            let cy = (yw[0] + yw[1]) / 2.0;
            if boxes
                .iter()
                .any(|b| cx > b.x_min() && cx < b.x_max() && cy > b.y_min() && cy < b.y_max())
            {
                area += (xw[1] - xw[0]) * (yw[1] - yw[0]);
            }
        }
    }
    area
}

impl Iterator for WorldStream {
    type Item = FrameBundle;

    fn next(&mut self) -> Option<FrameBundle> {
        if self.tick >= self.duration {
            return None;
        }
        let tick = self.tick;
        if tick > 0 {
            for m in &mut self.movers {
                m.step(tick, self.dt, self.plane);
            }
        }
        let global_ms = tick as f64 * self.dt * 1000.0;
        let mut frames = Vec::new();
        for (k, cam) in self.cameras.iter().enumerate() {
            if !tick.is_multiple_of(self.periods[k]) {
                continue;
            }
            let ts = global_ms + cam.clock_offset_ms;
            frames.push(CameraFrame {
                camera: cam.id,
                seq: self.seqs[k],
                timestamp_ms: ts,
                annotations: self.render(cam, ts),
            });
            self.seqs[k] += 1;
        }
        self.tick += 1;
        Some(FrameBundle {
            index: tick,
            timestamp_ms: global_ms,
            frames,
        })
    }
}
