//! Scenario configuration: TOML files with an optional `base` to inherit
//! from, dotted-path overrides, validation, and construction of the frame
//! timeline, cameras and compute profiles a run needs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FrameGeometry;
use crate::ids::{CameraId, ObjectId};
use crate::pipeline::{ArgusConfig, FrameBundle};
use crate::scheduler::{preset, CameraProfile, ProfileSpec, DEFAULT_BANDWIDTH_BPS, DEFAULT_BETA};
use crate::worldsim::{
    generate_world, ingest_trace, CameraConfig, CameraModel, DetectionOracleConfig, IdOracleConfig, Projection,
    WorldConfig,
};

const GARDEN: &str = include_str!("scenarios/garden-4cam.toml");
const INTERSECTION: &str = include_str!("scenarios/intersection-5cam.toml");

pub const BUILTINS: [&str; 2] = ["garden-4cam", "intersection-5cam"];

pub fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "garden-4cam" => Some(GARDEN),
        "intersection-5cam" => Some(INTERSECTION),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Argus,
    Conv,
    Spatula,
    Crossroi,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [Self::Argus, Self::Conv, Self::Spatula, Self::Crossroi];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Argus => "argus",
            Self::Conv => "conv",
            Self::Spatula => "spatula",
            Self::Crossroi => "crossroi",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraEntry {
    /// Required for synthetic worlds; unused when replaying a trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Projection>,
    pub frame: FrameGeometry,
    #[serde(default = "default_frame_rate")]
    pub frame_rate_hz: f64,
    #[serde(default)]
    pub clock_offset_ms: f64,
    #[serde(default = "one")]
    pub height_scale: f64,
    /// Preset name, ignored if `profile_file` is set.
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_file: Option<PathBuf>,
}

fn default_frame_rate() -> f64 {
    10.0
}

fn one() -> f64 {
    1.0
}

fn default_profile() -> String {
    "jetson-agx-person".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    /// Explicit targets. Without it the first `count` object ids are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<Vec<ObjectId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_tau() -> f64 {
    0.8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComputeConfig {
    pub beta: f64,
    /// Link bandwidth between any two cameras unless a profile file sets it.
    pub bandwidth_bps: f64,
}

impl Default for ComputeConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            bandwidth_bps: DEFAULT_BANDWIDTH_BPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub tracklets: bool,
    pub ledger: bool,
    /// Dump the final mapping table of each Argus run.
    pub snapshot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            tracklets: true,
            ledger: true,
            snapshot: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    /// Cap on the number of bundles processed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    pub detection: DetectionOracleConfig,
    pub id_oracle: IdOracleConfig,
    pub queries: QuerySpec,
    #[serde(default)]
    pub argus: ArgusConfig,
    #[serde(default)]
    pub compute: ComputeConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<WorldConfig>,
    pub cameras: Vec<CameraEntry>,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_strategies() -> Vec<StrategyKind> {
    StrategyKind::ALL.to_vec()
}

/// A validated scenario with the directory relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub base_dir: PathBuf,
    raw: toml::Table,
}

/// Splits `key.sub=value` into its path and value.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    let arg = arg.strip_prefix("--").unwrap_or(arg);
    match arg.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.to_string(), v.to_string())),
        _ => Err(Error::Config(format!("override `{arg}` is not of the form key.subkey=value"))),
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Sets a dotted path in a table. Numeric segments index arrays.
pub fn set_path(root: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let segs: Vec<&str> = path.split('.').collect();
    if segs.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("bad key path `{path}`")));
    }
    let mut cur: &mut toml::Value = root
        .entry(segs[0])
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    for seg in &segs[1..] {
        cur = match cur {
            toml::Value::Table(t) => t
                .entry(*seg)
                .or_insert_with(|| toml::Value::Table(toml::Table::new())),
            toml::Value::Array(a) => {
                let i: usize = seg
                    .parse()
                    .map_err(|_| Error::Config(format!("`{path}`: `{seg}` does not index a list")))?;
                let n = a.len();
                a.get_mut(i)
                    .ok_or_else(|| Error::Config(format!("`{path}`: index {i} out of range for {n} items")))?
            }
            _ => return Err(Error::Config(format!("`{path}`: `{seg}` is below a scalar"))),
        };
    }
    *cur = value;
    Ok(())
}

/// Overlays `top` on `base`; tables merge key by key, anything else is
/// replaced.
pub fn deep_merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => deep_merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_table(text: &str, origin: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| Error::Config(format!("{origin}: {e}")))
}

/// Reads a source (builtin name or file) into a raw table with its `base`
/// chain resolved.
fn load_raw(source: &str, depth: usize) -> Result<(toml::Table, PathBuf)> {
    if depth > 8 {
        return Err(Error::Config(format!("`base` chain through `{source}` is too deep")));
    }
    let (text, origin, dir) = match builtin(source) {
        Some(t) => (t.to_string(), source.to_string(), std::env::current_dir()?),
        None => {
            let path = Path::new(source);
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read scenario `{source}`: {e}")))?;
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (text, source.to_string(), dir)
        }
    };
    let mut table = parse_table(&text, &origin)?;
    match table.remove("base") {
        None => Ok((table, dir)),
        Some(toml::Value::String(b)) => {
            let resolved = if builtin(&b).is_some() {
                b
            } else {
                dir.join(&b).to_string_lossy().into_owned()
            };
            let (mut merged, _) = load_raw(&resolved, depth + 1)?;
            deep_merge(&mut merged, table);
            Ok((merged, dir))
        }
        Some(_) => Err(Error::Config(format!("{origin}: `base` must be a string"))),
    }
}

/// A type error together with the dotted path of the field that caused it.
#[derive(Debug)]
struct DecodeError {
    path: String,
    message: String,
}

impl std::fmt::Display for DecodeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.path == "." {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

fn decode(table: &toml::Table) -> std::result::Result<ScenarioConfig, DecodeError> {
    serde_path_to_error::deserialize(toml::Value::Table(table.clone())).map_err(|e| DecodeError {
        path: e.path().to_string(),
        message: e.into_inner().message().to_string(),
    })
}

/// Finds the line defining `path` (as in `cameras[2].frame_rate_hz`) in a
/// scenario file, or the nearest enclosing key on one line.
fn line_of(text: &str, path: &str) -> Option<usize> {
    let mut header = String::new();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut best: Option<(usize, usize)> = None;
    let mut consider = |full: String, line: usize| {
        let hit = path == full || path.starts_with(&format!("{full}.")) || path.starts_with(&format!("{full}["));
        if hit && best.is_none_or(|(len, _)| full.len() > len) {
            best = Some((full.len(), line));
        }
    };
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix("[[").and_then(|l| l.split_once("]]")).map(|(h, _)| h.trim()) {
            let i = counts.entry(name.to_string()).or_insert(0);
            header = format!("{name}[{i}]");
            *i += 1;
            consider(header.clone(), n + 1);
        } else if let Some(name) = line.strip_prefix('[').and_then(|l| l.split_once(']')).map(|(h, _)| h.trim()) {
            header = name.to_string();
            consider(header.clone(), n + 1);
        } else if let Some((key, _)) = line.split_once('=') {
            let key = key.trim();
            if key.is_empty() || key.starts_with('#') {
                continue;
            }
            let full = if header.is_empty() { key.to_string() } else { format!("{header}.{key}") };
            consider(full, n + 1);
        }
    }
    best.map(|(_, line)| line)
}

/// Adds the file line when the offending field is written in the file.
fn locate(source: &str, e: DecodeError) -> Error {
    let text = builtin(source)
        .map(str::to_string)
        .or_else(|| std::fs::read_to_string(source).ok());
    match text.and_then(|t| line_of(&t, &e.path)) {
        Some(line) => Error::Config(format!("{source}, line {line}: {e}")),
        None => Error::Config(e.to_string()),
    }
}

impl Scenario {
    /// Loads, merges overrides into, and validates a scenario.
    pub fn load(source: &str, overrides: &[(String, String)]) -> Result<Self> {
        let (mut table, base_dir) = load_raw(source, 0)?;
        for (k, v) in overrides {
            set_path(&mut table, k, parse_value(v))?;
        }
        if let Err(e) = decode(&table) {
            return Err(locate(source, e));
        }
        Self::from_table(table, base_dir)
    }

    pub fn from_table(table: toml::Table, base_dir: PathBuf) -> Result<Self> {
        let config = decode(&table).map_err(|e| Error::Config(e.to_string()))?;
        let s = Self {
            config,
            base_dir,
            raw: table,
        };
        s.validate()?;
        Ok(s)
    }

    /// Parses a single document; syntax and type errors carry line numbers.
    pub fn from_toml_str(text: &str, base_dir: PathBuf) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let raw = parse_table(text, "config")?;
        let s = Self { config, base_dir, raw };
        s.validate()?;
        Ok(s)
    }

    /// A copy with further dotted-path overrides applied.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = self.raw.clone();
        for (k, v) in overrides {
            set_path(&mut table, k, parse_value(v))?;
        }
        Self::from_table(table, self.base_dir.clone())
    }

    /// Fully resolved configuration, loadable on its own.
    pub fn echo(&self) -> Result<String> {
        let mut config = self.config.clone();
        if let Some(t) = &config.trace {
            config.trace = Some(self.resolve(t));
        }
        for c in &mut config.cameras {
            if let Some(p) = &c.profile_file {
                c.profile_file = Some(self.resolve(p));
            }
        }
        toml::to_string(&config).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        let fail = |m: String| Err(Error::Config(m));
        if c.name.trim().is_empty() {
            return fail("name must not be empty".into());
        }
        if c.seeds.is_empty() {
            return fail("seeds must list at least one seed".into());
        }
        if c.strategies.is_empty() {
            return fail("strategies must list at least one strategy".into());
        }
        match (&c.world, &c.trace) {
            (None, None) => return fail("one of `world` or `trace` is required".into()),
            (Some(_), Some(_)) => return fail("`world` and `trace` are mutually exclusive".into()),
            _ => {}
        }
        if c.cameras.is_empty() {
            return fail("cameras must list at least one camera".into());
        }
        for (i, cam) in c.cameras.iter().enumerate() {
            cam.frame
                .validate()
                .map_err(|e| Error::Config(format!("cameras.{i}.frame: {e}")))?;
            if !(cam.frame_rate_hz > 0.0 && cam.frame_rate_hz.is_finite()) {
                return fail(format!("cameras.{i}.frame_rate_hz must be positive"));
            }
            if c.world.is_some() && cam.projection.is_none() {
                return fail(format!("cameras.{i}.projection is required for a synthetic world"));
            }
            if let Some(p) = &cam.projection {
                p.homography()
                    .map_err(|e| Error::Config(format!("cameras.{i}.projection: {e}")))?;
            }
            if cam.profile_file.is_none() {
                preset(&cam.profile)?;
            }
        }
        c.detection.validate()?;
        c.id_oracle.validate()?;
        if !(-1.0..=1.0).contains(&c.queries.tau) {
            return fail(format!("queries.tau {} outside [-1, 1]", c.queries.tau));
        }
        if c.queries.objects.is_none() && c.queries.count.is_none() {
            return fail("queries needs `objects` or `count`".into());
        }
        let a = &c.argus;
        if !(0.0..=1.0).contains(&a.alpha) {
            return fail(format!("argus.alpha {} outside [0, 1]", a.alpha));
        }
        for (k, v) in [("match_iou", a.match_iou), ("prune_iou", a.prune_iou)] {
            if !(v > 0.0 && v < 1.0) {
                return fail(format!("argus.{k} {v} outside (0, 1)"));
            }
        }
        if a.capacity == 0 {
            return fail("argus.capacity must be positive".into());
        }
        if !(a.refresh_interval_s > 0.0 && a.refresh_interval_s.is_finite()) {
            return fail("argus.refresh_interval_s must be positive".into());
        }
        if !(c.compute.beta > 0.0 && c.compute.beta <= 1.0) {
            return fail(format!("compute.beta {} outside (0, 1]", c.compute.beta));
        }
        if !(c.compute.bandwidth_bps > 0.0) {
            return fail("compute.bandwidth_bps must be positive".into());
        }
        if let Some(w) = &c.world {
            w.validate()?;
            let ids: BTreeSet<ObjectId> = w.objects.iter().map(|o| o.id).collect();
            if let Some(objs) = &c.queries.objects {
                if let Some(missing) = objs.iter().find(|o| !ids.contains(o)) {
                    return fail(format!("queries.objects: object {missing} is not in the world"));
                }
            }
            let pool = c.queries.objects.as_ref().map_or(ids.len(), Vec::len);
            if let Some(n) = c.queries.count {
                if n > pool {
                    return fail(format!("queries.count {n} exceeds the {pool} candidates"));
                }
            }
        }
        Ok(())
    }

    pub fn camera_count(&self) -> usize {
        self.config.cameras.len()
    }

    fn subset(&self, cameras: Option<&[usize]>) -> Result<Vec<usize>> {
        let n = self.camera_count();
        match cameras {
            None => Ok((0..n).collect()),
            Some(s) => {
                if let Some(bad) = s.iter().find(|&&i| i >= n) {
                    return Err(Error::Config(format!("camera index {bad} out of range for {n} cameras")));
                }
                Ok(s.to_vec())
            }
        }
    }

    /// Bundles, geometry and ground-truth labels for one seed, restricted to
    /// a subset of cameras renumbered from zero.
    pub fn timeline(&self, seed: u64, cameras: Option<&[usize]>) -> Result<Timeline> {
        let subset = self.subset(cameras)?;
        let entries: Vec<&CameraEntry> = subset.iter().map(|&i| &self.config.cameras[i]).collect();
        let (mut bundles, labels) = match (&self.config.world, &self.config.trace) {
            (Some(w), _) => {
                let mut w = w.clone();
                w.seed = seed;
                let models = entries
                    .iter()
                    .enumerate()
                    .map(|(i, e)| {
                        let cfg = CameraConfig {
                            projection: e.projection.clone().expect("validated"),
                            frame: e.frame,
                            frame_rate_hz: e.frame_rate_hz,
                            clock_offset_ms: e.clock_offset_ms,
                            height_scale: e.height_scale,
                        };
                        CameraModel::from_config(CameraId(i), &cfg)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let labels = w.objects.iter().map(|o| (o.id, o.label.clone())).collect();
                let stream = generate_world(&w, &models)?;
                let bundles: Vec<FrameBundle> = match self.config.steps {
                    Some(n) => stream.take(n).collect(),
                    None => stream.collect(),
                };
                (bundles, labels)
            }
            (None, Some(path)) => {
                let trace = ingest_trace(self.resolve(path))?;
                if trace.cameras.len() > self.camera_count() {
                    return Err(Error::Config(format!(
                        "trace has {} cameras but only {} are configured",
                        trace.cameras.len(),
                        self.camera_count()
                    )));
                }
                let labels: BTreeMap<ObjectId, String> = trace
                    .objects
                    .iter()
                    .enumerate()
                    .map(|(i, (_, l))| (ObjectId(i as u32), l.clone()))
                    .collect();
                let mut bundles = trace.bundles;
                if let Some(n) = self.config.steps {
                    bundles.truncate(n);
                }
                (bundles, labels)
            }
            (None, None) => unreachable!("validated"),
        };
        if cameras.is_some() {
            bundles = renumber(bundles, &subset);
        }
        Ok(Timeline {
            bundles,
            frames: entries.iter().map(|e| e.frame).collect(),
            frame_rates_hz: entries.iter().map(|e| e.frame_rate_hz).collect(),
            labels,
        })
    }

    /// Measured profiles for a camera subset.
    pub fn profiles(&self, cameras: Option<&[usize]>) -> Result<Vec<CameraProfile>> {
        let subset = self.subset(cameras)?;
        let n = subset.len();
        subset
            .iter()
            .enumerate()
            .map(|(i, &orig)| {
                let e = &self.config.cameras[orig];
                let mut spec = match &e.profile_file {
                    Some(p) => {
                        let path = self.resolve(p);
                        let text = std::fs::read_to_string(&path)
                            .map_err(|err| Error::Config(format!("cannot read profile `{}`: {err}", path.display())))?;
                        toml::from_str::<ProfileSpec>(&text)
                            .map_err(|err| Error::Config(format!("{}: {err}", path.display())))?
                    }
                    None => {
                        let mut s = preset(&e.profile)?;
                        s.beta = self.config.compute.beta;
                        s
                    }
                };
                if spec.bandwidth_bps.is_none() {
                    spec.bandwidth_bps = Some(vec![self.config.compute.bandwidth_bps; n]);
                } else if cameras.is_some() {
                    let row = spec.bandwidth_bps.take().expect("checked");
                    spec.bandwidth_bps = Some(subset.iter().map(|&j| row.get(j).copied().unwrap_or(0.0)).collect());
                }
                CameraProfile::from_spec(CameraId(i), &spec, &e.frame, n)
            })
            .collect()
    }

    /// Target ids: the explicit list or every object by id, cut to the
    /// first `count` when given.
    pub fn query_ids(&self, labels: &BTreeMap<ObjectId, String>) -> Result<Vec<ObjectId>> {
        let q = &self.config.queries;
        let mut ids: Vec<ObjectId> = match &q.objects {
            Some(o) => o.clone(),
            None => labels.keys().copied().collect(),
        };
        if let Some(missing) = ids.iter().find(|o| !labels.contains_key(o)) {
            return Err(Error::Config(format!("queries: object {missing} does not exist")));
        }
        if let Some(n) = q.count {
            if n > ids.len() {
                return Err(Error::Config(format!("queries.count {n} exceeds the {} candidates", ids.len())));
            }
            ids.truncate(n);
        }
        Ok(ids)
    }
}

fn renumber(bundles: Vec<FrameBundle>, subset: &[usize]) -> Vec<FrameBundle> {
    let map: BTreeMap<usize, usize> = subset.iter().enumerate().map(|(n, &o)| (o, n)).collect();
    let mut out: Vec<FrameBundle> = Vec::new();
    for mut b in bundles {
        b.frames.retain(|f| map.contains_key(&f.camera.0));
        for f in &mut b.frames {
            f.camera = CameraId(map[&f.camera.0]);
            for a in &mut f.annotations {
                a.camera = f.camera;
            }
        }
        b.frames.sort_by_key(|f| f.camera);
        if !b.frames.is_empty() {
            b.index = out.len() as u64;
            out.push(b);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Timeline {
    pub bundles: Vec<FrameBundle>,
    pub frames: Vec<FrameGeometry>,
    pub frame_rates_hz: Vec<f64>,
    pub labels: BTreeMap<ObjectId, String>,
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load_and_validate() {
        for name in BUILTINS {
            let s = Scenario::load(name, &[]).unwrap();
            assert_eq!(s.config.name, name);
            let t = s.timeline(1, None).unwrap();
            assert!(!t.bundles.is_empty());
            assert_eq!(s.profiles(None).unwrap().len(), s.camera_count());
        }
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let o = vec![
            parse_override("--argus.alpha=0.25").unwrap(),
            parse_override("seeds=[4, 5]").unwrap(),
            parse_override("cameras.1.profile=jetson-nx-person").unwrap(),
            parse_override("name=renamed").unwrap(),
        ];
        let s = Scenario::load("garden-4cam", &o).unwrap();
        assert_eq!(s.config.argus.alpha, 0.25);
        assert_eq!(s.config.seeds, vec![4, 5]);
        assert_eq!(s.config.cameras[1].profile, "jetson-nx-person");
        assert_eq!(s.config.name, "renamed");
        assert!(parse_override("noequals").is_err());
    }

    #[test]
    fn bad_values_are_rejected() {
        let bad = |k: &str, v: &str| Scenario::load("garden-4cam", &[(k.into(), v.into())]).unwrap_err();
        assert!(matches!(bad("cameras.0.profile", "jetson-tx2"), Error::UnknownPreset(p) if p == "jetson-tx2"));
        assert!(bad("strategies", "[\"argus\", \"sort\"]").to_string().contains("sort"));
        assert!(bad("argus.alpha", "1.5").to_string().contains("alpha"));
        assert!(bad("queries.objects", "[999]").to_string().contains("999"));
        assert!(bad("argus.bogus", "1").to_string().contains("bogus"));
    }

    #[test]
    fn syntax_errors_name_the_line() {
        let e = Scenario::from_toml_str("name = \"x\"\nseeds = [1,\n", PathBuf::new()).unwrap_err();
        assert!(e.to_string().contains("line 2") || e.to_string().contains("2:"), "{e}");
    }

    #[test]
    fn type_errors_name_field_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.toml");
        std::fs::write(&p, "base = \"garden-4cam\"\n\n[detection]\nmiss_probability = \"often\"\n").unwrap();
        let msg = Scenario::load(p.to_str().unwrap(), &[]).unwrap_err().to_string();
        assert!(msg.contains("line 4") && msg.contains("detection.miss_probability"), "{msg}");
    }

    #[test]
    fn line_of_walks_array_tables() {
        let text = "a = 1\n[[cams]]\nx = 1\n[[cams]]\nx = 2\n[t]\nk = { y = 1 }\n";
        assert_eq!(line_of(text, "a"), Some(1));
        assert_eq!(line_of(text, "cams[1].x"), Some(5));
        assert_eq!(line_of(text, "cams[1]"), Some(4));
        assert_eq!(line_of(text, "t.k.y"), Some(7));
        assert_eq!(line_of(text, "missing"), None);
    }

    #[test]
    fn base_inheritance_merges_tables() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("child.toml");
        std::fs::write(&p, "base = \"garden-4cam\"\nname = \"child\"\n[argus]\nalpha = 0.1\n").unwrap();
        let s = Scenario::load(p.to_str().unwrap(), &[]).unwrap();
        let g = Scenario::load("garden-4cam", &[]).unwrap();
        assert_eq!(s.config.name, "child");
        assert_eq!(s.config.argus.alpha, 0.1);
        assert_eq!(s.config.argus.refresh_interval_s, g.config.argus.refresh_interval_s);
        assert_eq!(s.config.cameras, g.config.cameras);
    }

    #[test]
    fn echo_round_trips() {
        for name in BUILTINS {
            let s = Scenario::load(name, &[]).unwrap();
            let again = Scenario::from_toml_str(&s.echo().unwrap(), PathBuf::new()).unwrap();
            assert_eq!(again.config, s.config);
        }
    }

    #[test]
    fn camera_subsets_renumber() {
        let s = Scenario::load("garden-4cam", &[("steps".into(), "5".into())]).unwrap();
        let t = s.timeline(1, Some(&[1, 3])).unwrap();
        assert_eq!(t.frames.len(), 2);
        for b in &t.bundles {
            assert!(b.frames.iter().all(|f| f.camera.0 < 2));
        }
        assert_eq!(s.profiles(Some(&[1, 3])).unwrap().len(), 2);
    }

    #[test]
    fn combination_counts() {
        assert_eq!(combinations(5, 3).len(), 10);
        assert_eq!(combinations(4, 4), vec![vec![0, 1, 2, 3]]);
        assert_eq!(combinations(3, 1), vec![vec![0], vec![1], vec![2]]);
        assert!(combinations(2, 3).is_empty());
    }
}
