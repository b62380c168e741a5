//! Scenario loading, override validation, sweep expansion and summary tables for the
//! `scanplan` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use scanplan_core::sim::{run_episode, ControllerSpec, EpisodeMetrics, EpisodeSummary, SimConfig, SimError};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// Controllers compared by `--sweep controller`.
pub const DEFAULT_CONTROLLERS: [&str; 4] = ["fu_mpc", "fixed30", "fixed100", "fixed360"];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("override `{0}` is not of the form key=value")]
    BadOverride(String),
    #[error("bad sweep axis `{0}`: {1}")]
    BadSweep(String, String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scenario {path}: {source}")]
    Scenario { path: PathBuf, source: Box<dyn std::error::Error + Send + Sync> },
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
}

impl CliError {
    /// Process exit code: 2 for usage and configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(..) => 1,
            _ => 2,
        }
    }
}

/// Config keys whose default is "absent" and therefore missing from the serialized defaults.
const OPTIONAL_KEYS: [&str; 1] = ["scene.seed"];

fn default_tree() -> Table {
    match Value::try_from(SimConfig::default()) {
        Ok(Value::Table(t)) => t,
        _ => unreachable!("SimConfig serializes to a table"),
    }
}

/// Merges `src` into `dst`, rejecting keys absent from `dst`.
fn merge(dst: &mut Table, src: Table, prefix: &str) -> Result<(), CliError> {
    for (k, v) in src {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (dst.get_mut(&k), v) {
            (None, v) if OPTIONAL_KEYS.contains(&path.as_str()) => {
                dst.insert(k, v);
            }
            (None, _) => return Err(CliError::UnknownKey(path)),
            (Some(Value::Table(d)), Value::Table(s)) => merge(d, s, &path)?,
            (Some(slot), v) => *slot = v,
        }
    }
    Ok(())
}

/// Parses an override value as TOML, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn set_key(tree: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let mut node = tree;
    let parts: Vec<&str> = key.trim().split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        if last && !node.contains_key(*part) && OPTIONAL_KEYS.contains(&key.trim()) {
            node.insert(part.to_string(), value);
            return Ok(());
        }
        let slot = node.get_mut(*part).ok_or_else(|| CliError::UnknownKey(key.trim().to_string()))?;
        if last {
            // integer literals are accepted where the default is a float
            *slot = match (&*slot, value) {
                (Value::Float(_), Value::Integer(n)) => Value::Float(n as f64),
                (_, v) => v,
            };
            return Ok(());
        }
        node = match slot {
            Value::Table(t) => t,
            _ => return Err(CliError::UnknownKey(key.trim().to_string())),
        };
    }
    Err(CliError::UnknownKey(key.to_string()))
}

fn split_override(s: &str) -> Result<(&str, &str), CliError> {
    s.split_once('=')
        .filter(|(k, _)| !k.trim().is_empty())
        .ok_or_else(|| CliError::BadOverride(s.to_string()))
}

/// Builds the configuration tree from defaults, an optional scenario file and `key=value`
/// overrides, in that order.
pub fn load_tree(scenario: Option<&Path>, overrides: &[String]) -> Result<Table, CliError> {
    let mut tree = default_tree();
    if let Some(path) = scenario {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        let file: Table = text.parse().map_err(|e: toml::de::Error| CliError::Scenario {
            path: path.to_path_buf(),
            source: Box::new(e),
        })?;
        merge(&mut tree, file, "")?;
    }
    for o in overrides {
        let (k, v) = split_override(o)?;
        set_key(&mut tree, k, parse_value(v))?;
    }
    Ok(tree)
}

pub fn config_from_tree(tree: &Table) -> Result<SimConfig, CliError> {
    let cfg: SimConfig = Value::Table(tree.clone())
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

/// One sweep cell: a label and the overrides it applies.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub label: String,
    pub overrides: Vec<(String, Value)>,
}

/// Expands a sweep axis. `controller` alone sweeps [`DEFAULT_CONTROLLERS`];
/// `key=v1,v2,...` sweeps any config key.
pub fn expand_sweep(axis: Option<&str>) -> Result<Vec<Cell>, CliError> {
    let Some(axis) = axis else {
        return Ok(vec![Cell { label: "base".into(), overrides: Vec::new() }]);
    };
    let (key, values): (&str, Vec<String>) = match axis.split_once('=') {
        Some((k, vs)) => (k.trim(), vs.split(',').map(|v| v.trim().to_string()).collect()),
        None if axis.trim() == "controller" => ("controller", DEFAULT_CONTROLLERS.iter().map(|s| s.to_string()).collect()),
        None => return Err(CliError::BadSweep(axis.into(), "expected `controller` or key=v1,v2".into())),
    };
    if key.is_empty() || values.iter().any(|v| v.is_empty()) {
        return Err(CliError::BadSweep(axis.into(), "empty key or value".into()));
    }
    let mut cells = Vec::new();
    for v in values {
        let value = if key == "controller" {
            let c: ControllerSpec = v.parse().map_err(|e: String| CliError::BadSweep(axis.into(), e))?;
            Value::String(c.to_string())
        } else {
            parse_value(&v)
        };
        let label = if key == "controller" { v.clone() } else { format!("{key}={v}") };
        cells.push(Cell { label, overrides: vec![(key.to_string(), value)] });
    }
    Ok(cells)
}

/// A fully resolved episode of a run.
#[derive(Debug, Clone)]
pub struct Job {
    pub cell: usize,
    pub label: String,
    pub stem: String,
    pub config: SimConfig,
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

/// Resolves every cell x repeat. Repeat `r` uses seed `seed + r`.
pub fn plan_jobs(tree: &Table, cells: &[Cell], repeats: usize, seed: Option<u64>) -> Result<Vec<Job>, CliError> {
    let mut jobs = Vec::new();
    for (ci, cell) in cells.iter().enumerate() {
        let mut t = tree.clone();
        for (k, v) in &cell.overrides {
            set_key(&mut t, k, v.clone())?;
        }
        let base = config_from_tree(&t)?;
        let first = seed.unwrap_or(base.seed);
        for r in 0..repeats.max(1) {
            let mut config = base.clone();
            config.seed = first + r as u64;
            jobs.push(Job {
                cell: ci,
                label: cell.label.clone(),
                stem: format!("{}__seed{}", file_safe(&cell.label), config.seed),
                config,
            });
        }
    }
    Ok(jobs)
}

/// Outcome of one job as recorded in the run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub cell: String,
    #[serde(flatten)]
    pub summary: EpisodeSummary,
}

impl EpisodeRecord {
    /// Completed, and none of the controller-contract or collision flags raised.
    pub fn ok(&self) -> bool {
        let s = &self.summary;
        s.completion && !s.collision && s.mpc_bound_violations == 0 && s.mpc_ascents == 0
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write_episode(out: &Path, job: &Job, m: &EpisodeMetrics) -> Result<EpisodeRecord, CliError> {
    let record = EpisodeRecord { cell: job.label.clone(), summary: m.summary() };
    write(&out.join(format!("{}.csv", job.stem)), &m.to_csv())?;
    write(&out.join(format!("{}_timing.csv", job.stem)), &m.timing_csv())?;
    let json = serde_json::to_string_pretty(&record).expect("summary serializes");
    write(&out.join(format!("{}.json", job.stem)), &(json + "\n"))?;
    Ok(record)
}

/// Result of [`run_jobs`]: one slot per job, `Err` for episodes that failed to run.
pub type JobResults = Vec<Result<EpisodeRecord, String>>;

/// Runs the jobs on up to `threads` workers, writing per-episode artifacts into `out` as each
/// finishes.
pub fn run_jobs(jobs: &[Job], out: &Path, threads: usize) -> Result<JobResults, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(out.to_path_buf(), e))?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<EpisodeRecord, String>>>> = Mutex::new(vec![None; jobs.len()]);
    let io_error: Mutex<Option<CliError>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let r = match run_episode(job.config.clone()) {
                    Ok(m) => match write_episode(out, job, &m) {
                        Ok(rec) => Ok(rec),
                        Err(e) => {
                            let msg = e.to_string();
                            io_error.lock().unwrap().get_or_insert(e);
                            Err(msg)
                        }
                    },
                    Err(e) => Err(episode_error(&e)),
                };
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    if let Some(e) = io_error.into_inner().unwrap() {
        return Err(e);
    }
    Ok(results.into_inner().unwrap().into_iter().map(|r| r.expect("every job ran")).collect())
}

fn episode_error(e: &SimError) -> String {
    format!("episode failed: {e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Option<Stat> {
        if xs.is_empty() {
            return None;
        }
        Some(Stat {
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// One row of the sweep summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub cell: String,
    pub episodes: usize,
    pub completed: usize,
    pub time: Option<Stat>,
    pub trajectory: Option<Stat>,
    pub coverage: Option<Stat>,
    pub ape_proxy: Option<Stat>,
}

/// Aggregates episode records per cell, in cell order. Time is the episode end time, so
/// incomplete episodes count with their full duration; see `completed`.
pub fn summarize(cells: &[Cell], records: &[EpisodeRecord]) -> Vec<SummaryRow> {
    cells
        .iter()
        .map(|c| {
            let rs: Vec<&EpisodeSummary> = records.iter().filter(|r| r.cell == c.label).map(|r| &r.summary).collect();
            let col = |f: fn(&EpisodeSummary) -> f64| Stat::of(&rs.iter().map(|s| f(s)).collect::<Vec<_>>());
            SummaryRow {
                cell: c.label.clone(),
                episodes: rs.len(),
                completed: rs.iter().filter(|s| s.completion).count(),
                time: col(|s| s.time),
                trajectory: col(|s| s.trajectory_m),
                coverage: col(|s| s.coverage_final),
                ape_proxy: col(|s| s.ape_proxy_rmse),
            }
        })
        .collect()
}

pub const SUMMARY_HEADER: &str = "cell,episodes,completed,time_mean,time_min,time_max,trajectory_mean,trajectory_min,trajectory_max,coverage_mean,coverage_min,coverage_max,ape_proxy_mean,ape_proxy_min,ape_proxy_max";

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{},{},{}", r.cell, r.episodes, r.completed);
        for st in [r.time, r.trajectory, r.coverage, r.ape_proxy] {
            match st {
                Some(st) => {
                    let _ = write!(s, ",{},{},{}", st.mean, st.min, st.max);
                }
                None => s.push_str(",,,"),
            }
        }
        s.push('\n');
    }
    s
}

/// Writes `summary.csv` for the successful episodes and returns the rows.
pub fn write_summary(out: &Path, cells: &[Cell], results: &JobResults) -> Result<Vec<SummaryRow>, CliError> {
    let records: Vec<EpisodeRecord> = results.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    let rows = summarize(cells, &records);
    write(&out.join("summary.csv"), &summary_csv(&rows))?;
    Ok(rows)
}

/// Worker count: `SCANPLAN_THREADS` when set and positive, else the available parallelism.
pub fn thread_count(env: Option<&str>) -> usize {
    env.and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}
