//! Runs strategies over scenario timelines and writes their artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::association::{write_snapshot, MappingTable};
use crate::error::{Error, Result};
use crate::ids::CameraId;
use crate::metrics::{fmt_f64, score_run, summarize, Report};
use crate::pipeline::{
    build_tracklets, learn_roi_masks, ArgusTracker, Citation, ConvTracker, Environment, IdMode, LedgerRow, Query,
    StepOutput, Tracker, Tracklet,
};
use crate::scenario::{combinations, Scenario, StrategyKind, Timeline};
use crate::worldsim::IdOracle;

pub const LEDGER_HEADER: [&str; 10] = [
    "step",
    "timestamp_ms",
    "camera_id",
    "detected",
    "n_ids",
    "detect_s",
    "id_s",
    "crops_tx",
    "bytes_tx",
    "step_latency_s",
];

pub const TRACKLET_HEADER: [&str; 10] = [
    "query_id",
    "step",
    "timestamp_ms",
    "camera_id",
    "x_min",
    "y_min",
    "x_max",
    "y_max",
    "mode",
    "source",
];

#[derive(Debug)]
pub struct RunResult {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub report: Report,
    pub steps: Vec<StepOutput>,
    pub tracklets: Vec<Tracklet>,
    pub oracle_calls: u64,
    pub table: Option<MappingTable>,
}

impl RunResult {
    pub fn ledger(&self) -> impl Iterator<Item = &LedgerRow> {
        self.steps.iter().map(|s| &s.ledger)
    }
}

pub fn environment(scn: &Scenario, timeline: &Timeline, seed: u64, cameras: Option<&[usize]>) -> Result<Environment> {
    let cfg = &scn.config;
    let oracle = IdOracle::new(seed, cfg.id_oracle);
    let queries = scn
        .query_ids(&timeline.labels)?
        .into_iter()
        .map(|id| Query::for_object(&oracle, id, &timeline.labels[&id], cfg.queries.tau))
        .collect();
    Ok(Environment {
        seed,
        frames: timeline.frames.clone(),
        detection: cfg.detection,
        oracle,
        queries,
        profiles: scn.profiles(cameras)?,
    })
}

enum Runner {
    Argus(Box<ArgusTracker>),
    Conv(ConvTracker),
}

impl Runner {
    fn tracker(&mut self) -> &mut dyn Tracker {
        match self {
            Runner::Argus(t) => t.as_mut(),
            Runner::Conv(t) => t,
        }
    }
}

fn check_step(out: &StepOutput, calls: u64) -> Result<()> {
    let ids = out.ledger.total_ids();
    if ids != calls {
        return Err(Error::Invariant(format!(
            "step {}: ledger charges {ids} identifications but the oracle ran {calls}",
            out.step
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for a in &out.assignments {
        if !seen.insert((a.query, a.camera)) {
            return Err(Error::Invariant(format!(
                "step {}: query {} assigned twice on {}",
                out.step, a.query, a.camera
            )));
        }
        let cited = match a.mode {
            IdMode::SpatialAssoc | IdMode::OcclusionInterp => matches!(a.source, Citation::Entry(_)),
            IdMode::TemporalAssoc => matches!(a.source, Citation::Record(_)),
            IdMode::FeatureMatch => true,
        };
        if !cited {
            return Err(Error::Invariant(format!(
                "step {}: {} assignment of query {} cites no source",
                out.step, a.mode, a.query
            )));
        }
    }
    Ok(())
}

/// Runs one strategy over a timeline.
pub fn run_strategy(
    scn: &Scenario,
    timeline: &Timeline,
    strategy: StrategyKind,
    seed: u64,
    cameras: Option<&[usize]>,
) -> Result<RunResult> {
    let env = environment(scn, timeline, seed, cameras)?;
    let targets: Vec<_> = env.queries.iter().map(|q| q.id).collect();
    let mut runner = match strategy {
        StrategyKind::Argus => Runner::Argus(Box::new(ArgusTracker::new(
            scn.config.argus.clone(),
            &env,
            &timeline.frame_rates_hz,
        ))),
        StrategyKind::Conv => Runner::Conv(ConvTracker::conv()),
        StrategyKind::Spatula => Runner::Conv(ConvTracker::spatula()),
        StrategyKind::Crossroi => Runner::Conv(ConvTracker::crossroi(learn_roi_masks(
            &timeline.bundles,
            &timeline.frames,
            &targets,
        ))),
    };
    let mut steps = Vec::with_capacity(timeline.bundles.len());
    for bundle in &timeline.bundles {
        let before = env.oracle.calls();
        let out = runner.tracker().step(bundle, &env)?;
        check_step(&out, env.oracle.calls() - before)?;
        steps.push(out);
    }
    let ledger: Vec<LedgerRow> = steps.iter().map(|s| s.ledger.clone()).collect();
    let scores = score_run(&steps, &timeline.bundles, &targets);
    let report = summarize(strategy.as_str(), &scn.config.name, seed, &ledger, &scores);
    let tracklets = build_tracklets(&env.queries, &steps);
    Ok(RunResult {
        strategy,
        seed,
        report,
        steps,
        tracklets,
        oracle_calls: env.oracle.calls(),
        table: match runner {
            Runner::Argus(t) => Some(t.table().clone()),
            Runner::Conv(_) => None,
        },
    })
}

/// Every configured `(strategy, seed)` pair, in configuration order. Runs
/// execute on separate threads.
pub fn run_scenario(scn: &Scenario, cameras: Option<&[usize]>) -> Result<Vec<RunResult>> {
    let jobs: Vec<(u64, StrategyKind)> = scn
        .config
        .seeds
        .iter()
        .flat_map(|&seed| scn.config.strategies.iter().map(move |&s| (seed, s)))
        .collect();
    let mut timelines = BTreeMap::new();
    for &seed in &scn.config.seeds {
        if let std::collections::btree_map::Entry::Vacant(slot) = timelines.entry(seed) {
            slot.insert(scn.timeline(seed, cameras)?);
        }
    }
    let results: Vec<Result<RunResult>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(seed, strategy)| {
                let tl = &timelines[&seed];
                s.spawn(move || run_strategy(scn, tl, strategy, seed, cameras))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Invariant("worker thread panicked".into()))))
            .collect()
    });
    let mut out: Vec<RunResult> = results.into_iter().collect::<Result<_>>()?;
    // reports list strategies in configuration order within each seed
    out.sort_by_key(|r| {
        (
            scn.config.seeds.iter().position(|s| *s == r.seed),
            scn.config.strategies.iter().position(|s| *s == r.strategy),
        )
    });
    Ok(out)
}

pub fn write_ledger<W: Write>(steps: &[StepOutput], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LEDGER_HEADER)?;
    for s in steps {
        let r = &s.ledger;
        let lat = fmt_f64(r.latency_s());
        for c in 0..r.ids_per_camera.len() {
            w.write_record([
                r.step.to_string(),
                fmt_f64(r.timestamp_ms),
                CameraId(c).to_string(),
                u8::from(r.detected[c]).to_string(),
                r.ids_per_camera[c].to_string(),
                fmt_f64(r.detect_s[c]),
                fmt_f64(r.id_s[c]),
                r.crops_tx[c].to_string(),
                r.bytes_tx[c].to_string(),
                lat.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_tracklets<W: Write>(tracklets: &[Tracklet], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACKLET_HEADER)?;
    for t in tracklets {
        for p in &t.points {
            w.write_record([
                t.query.to_string(),
                p.step.to_string(),
                fmt_f64(p.timestamp_ms),
                p.camera.to_string(),
                fmt_f64(p.bbox.x_min()),
                fmt_f64(p.bbox.y_min()),
                fmt_f64(p.bbox.x_max()),
                fmt_f64(p.bbox.y_max()),
                p.mode.to_string(),
                p.source.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    Ok(std::io::BufWriter::new(fs::File::create(path)?))
}

/// Writes the report, resolved config, and per-run artifacts. Returns the
/// report path.
pub fn write_outputs(scn: &Scenario, results: &[RunResult], dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let report_path = dir.join("report.csv");
    let reports: Vec<Report> = results.iter().map(|r| r.report.clone()).collect();
    crate::metrics::write_reports(&reports, create(&report_path)?)?;
    create(&dir.join("config.resolved.toml"))?.write_all(scn.echo()?.as_bytes())?;
    let out = &scn.config.output;
    for r in results {
        let stem = format!("{}-seed{}", r.strategy, r.seed);
        if out.ledger {
            write_ledger(&r.steps, create(&dir.join("ledger").join(format!("{stem}.csv")))?)?;
        }
        if out.tracklets {
            write_tracklets(&r.tracklets, create(&dir.join("tracklets").join(format!("{stem}.csv")))?)?;
        }
        if let (true, Some(t)) = (out.snapshot, &r.table) {
            write_snapshot(t, create(&dir.join("snapshots").join(format!("{stem}.csv")))?)?;
        }
    }
    Ok(report_path)
}

/// One axis of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

/// The key that sweeps over camera subsets of a given size.
pub const CAMERA_COUNT_KEY: &str = "cameras.count";

/// Parses `key=v1,v2;other=v3`. An empty spec is an empty grid.
pub fn parse_grid(spec: &str) -> Result<Vec<GridAxis>> {
    let mut axes = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("grid axis `{part}` is not of the form key=v1,v2")))?;
        let values: Vec<String> = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        if k.trim().is_empty() || values.is_empty() {
            return Err(Error::Config(format!("grid axis `{part}` needs a key and at least one value")));
        }
        axes.push(GridAxis {
            key: k.trim().to_string(),
            values,
        });
    }
    Ok(axes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: Vec<(String, String)>,
    pub strategy: StrategyKind,
    pub scenario: String,
    pub runs: usize,
    pub mean_ids: f64,
    pub mean_latency_s: f64,
    pub detect_latency_s: f64,
    pub id_latency_s: f64,
    pub motp: Option<f64>,
    pub mota: Option<f64>,
    pub crops_tx: f64,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn aggregate(point: &[(String, String)], strategy: StrategyKind, reports: &[&Report]) -> SweepRow {
    let m = |f: fn(&Report) -> f64| mean(reports.iter().map(|r| f(r))).unwrap_or(0.0);
    SweepRow {
        point: point.to_vec(),
        strategy,
        scenario: reports.first().map(|r| r.scenario.clone()).unwrap_or_default(),
        runs: reports.len(),
        mean_ids: m(|r| r.mean_ids),
        mean_latency_s: m(|r| r.mean_latency_s),
        detect_latency_s: m(|r| r.detect_latency_s),
        id_latency_s: m(|r| r.id_latency_s),
        motp: mean(reports.iter().filter_map(|r| r.motp)),
        mota: mean(reports.iter().filter_map(|r| r.mota)),
        crops_tx: m(|r| r.crops_tx as f64),
    }
}

/// Runs the cross product of the grid, averaging over seeds and, for
/// camera-count axes, over every camera subset of that size.
pub fn sweep(scn: &Scenario, grid: &[GridAxis]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    let mut points: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((axis.key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    let mut rows = Vec::new();
    for point in points {
        let mut overrides = Vec::new();
        let mut cam_count = None;
        for (k, v) in &point {
            if k == CAMERA_COUNT_KEY {
                let n: usize = v
                    .parse()
                    .map_err(|_| Error::Config(format!("{CAMERA_COUNT_KEY} value `{v}` is not a count")))?;
                if n == 0 || n > scn.camera_count() {
                    return Err(Error::Config(format!(
                        "{CAMERA_COUNT_KEY} {n} outside 1..={}",
                        scn.camera_count()
                    )));
                }
                cam_count = Some(n);
            } else {
                overrides.push((k.clone(), v.clone()));
            }
        }
        let s = scn.with_overrides(&overrides)?;
        let subsets: Vec<Option<Vec<usize>>> = match cam_count {
            None => vec![None],
            Some(n) => combinations(s.camera_count(), n).into_iter().map(Some).collect(),
        };
        let mut by_strategy: BTreeMap<usize, Vec<Report>> = BTreeMap::new();
        for subset in &subsets {
            for r in run_scenario(&s, subset.as_deref())? {
                let pos = s.config.strategies.iter().position(|k| *k == r.strategy).unwrap_or(0);
                by_strategy.entry(pos).or_default().push(r.report);
            }
        }
        for (pos, reports) in by_strategy {
            let refs: Vec<&Report> = reports.iter().collect();
            rows.push(aggregate(&point, s.config.strategies[pos], &refs));
        }
    }
    Ok(rows)
}

pub fn write_sweep<W: Write>(grid: &[GridAxis], rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = grid.iter().map(|a| a.key.clone()).collect();
    header.extend(
        [
            "strategy",
            "scenario",
            "runs",
            "mean_ids",
            "mean_latency_s",
            "detect_latency_s",
            "id_latency_s",
            "motp",
            "mota",
            "crops_tx",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in rows {
        let mut rec: Vec<String> = r.point.iter().map(|(_, v)| v.clone()).collect();
        rec.extend([
            r.strategy.to_string(),
            r.scenario.clone(),
            r.runs.to_string(),
            fmt_f64(r.mean_ids),
            fmt_f64(r.mean_latency_s),
            fmt_f64(r.detect_latency_s),
            fmt_f64(r.id_latency_s),
            opt(r.motp),
            opt(r.mota),
            fmt_f64(r.crops_tx),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
