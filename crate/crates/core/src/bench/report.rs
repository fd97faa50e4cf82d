//! Experiment reports and their on-disk tree.
//!
//! A run directory `<out>/<experiment>/<timestamp>/` holds:
//!
//! * `report.csv`: one row per cell with columns `id, seed, params, mse,
//!   r_squared, relative_l2, n_samples, grid, values, timing_activation,
//!   timing_iters, timing_batch, forward_ns, backward_ns, series, error`.
//!   `params` and `values` are `key=value` lists joined by `;`. Empty fields
//!   mean "not recorded".
//! * `curves/<id>.csv`: the cell's series (loss curve or plot columns) with a
//!   header row.
//! * `spec.json`: `{ "experiment", "anchor", "spec" }`.
//! * `env.json`: the environment fingerprint.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::ExperimentSpec;
use crate::error::{Error, Result};
use crate::nn::{MetricsReport, TimingRecord};

/// Columns of numbers, e.g. `epoch, loss` or `x, f, pf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn loss_curve(losses: &[f64]) -> Self {
        Self {
            columns: vec!["epoch".into(), "loss".into()],
            rows: losses.iter().enumerate().map(|(i, &l)| vec![i as f64, l]).collect(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }
}

/// One grid point under one seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Cell {
    pub id: String,
    pub seed: Option<u64>,
    pub params: BTreeMap<String, String>,
    pub metrics: Option<MetricsReport>,
    /// Further scalars, e.g. the final training loss.
    pub values: BTreeMap<String, f64>,
    pub timing: Option<TimingRecord>,
    pub series: Option<Series>,
    /// Set when the cell failed; the rest of the run still completes.
    pub error: Option<String>,
}

impl Cell {
    pub fn new(id: impl Into<String>, seed: Option<u64>) -> Self {
        Self {
            id: id.into(),
            seed,
            ..Self::default()
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn failed(mut self, error: &Error) -> Self {
        self.error = Some(error.to_string());
        self
    }
}

/// Facts about the machine and build a run happened on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub crate_version: String,
    pub os: String,
    pub arch: String,
    pub cpus: usize,
    pub jobs: usize,
    pub avx2: bool,
    pub debug_assertions: bool,
    pub started_unix: u64,
}

impl Environment {
    pub fn capture(jobs: usize) -> Self {
        Self {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            jobs,
            avx2: avx2(),
            debug_assertions: cfg!(debug_assertions),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

fn avx2() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::is_x86_feature_detected!("avx2")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    /// What the experiment reproduces, in a few words.
    pub anchor: String,
    pub env: Environment,
    pub cells: Vec<Cell>,
}

#[derive(Serialize, Deserialize)]
struct SpecFile {
    experiment: String,
    anchor: String,
    spec: ExperimentSpec,
}

const HEADER: [&str; 16] = [
    "id",
    "seed",
    "params",
    "mse",
    "r_squared",
    "relative_l2",
    "n_samples",
    "grid",
    "values",
    "timing_activation",
    "timing_iters",
    "timing_batch",
    "forward_ns",
    "backward_ns",
    "series",
    "error",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn join_pairs<V: ToString>(map: &BTreeMap<String, V>) -> String {
    map.iter()
        .map(|(k, v)| format!("{k}={}", v.to_string()))
        .collect::<Vec<_>>()
        .join(";")
}

fn split_pairs(text: &str) -> Result<Vec<(String, String)>> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(';')
        .map(|pair| {
            pair.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Malformed(format!("report pair '{pair}' has no '='")))
        })
        .collect()
}

fn parse_field<T: std::str::FromStr>(text: &str, column: &str) -> Result<Option<T>> {
    if text.is_empty() {
        return Ok(None);
    }
    text.parse()
        .map(Some)
        .map_err(|_| Error::Malformed(format!("report column {column}: cannot parse '{text}'")))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Malformed(format!("{}: {e}", path.display()))
}

fn series_file(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.csv")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(path, e))
}

impl ExperimentReport {
    /// Writes the report into `dir`, which must not exist yet.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let curves = dir.join("curves");
        fs::create_dir_all(&curves).map_err(|e| Error::io(&curves, e))?;
        write_json(
            &dir.join("spec.json"),
            &SpecFile {
                experiment: self.spec.kind.to_string(),
                anchor: self.anchor.clone(),
                spec: self.spec.clone(),
            },
        )?;
        write_json(&dir.join("env.json"), &self.env)?;

        let path = dir.join("report.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        w.write_record(HEADER).map_err(|e| csv_error(&path, e))?;
        for cell in &self.cells {
            let series_name = cell.series.as_ref().map(|_| series_file(&cell.id));
            let m = cell.metrics.as_ref();
            let t = cell.timing.as_ref();
            w.write_record([
                cell.id.clone(),
                opt(cell.seed),
                join_pairs(&cell.params),
                opt(m.map(|m| m.mse)),
                opt(m.and_then(|m| m.r_squared)),
                opt(m.and_then(|m| m.relative_l2)),
                opt(m.map(|m| m.n_samples)),
                m.map(|m| m.grid.clone()).unwrap_or_default(),
                join_pairs(&cell.values),
                t.map(|t| t.activation.clone()).unwrap_or_default(),
                opt(t.map(|t| t.n_iters)),
                opt(t.map(|t| t.batch_size)),
                opt(t.map(|t| t.forward_ns)),
                opt(t.map(|t| t.backward_ns)),
                series_name.clone().unwrap_or_default(),
                cell.error.clone().unwrap_or_default(),
            ])
            .map_err(|e| csv_error(&path, e))?;
            if let (Some(series), Some(name)) = (&cell.series, series_name) {
                let spath = curves.join(name);
                let mut sw = csv::Writer::from_path(&spath).map_err(|e| csv_error(&spath, e))?;
                sw.write_record(&series.columns).map_err(|e| csv_error(&spath, e))?;
                for row in &series.rows {
                    sw.write_record(row.iter().map(|v| v.to_string()))
                        .map_err(|e| csv_error(&spath, e))?;
                }
                sw.flush().map_err(|e| Error::io(&spath, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    /// Parses a run directory written by [`ExperimentReport::write_to`].
    pub fn read_from(dir: &Path) -> Result<Self> {
        let spec_path = dir.join("spec.json");
        let spec_text = fs::read_to_string(&spec_path).map_err(|e| Error::io(&spec_path, e))?;
        let spec_file: SpecFile = serde_json::from_str(&spec_text)?;
        let env_path = dir.join("env.json");
        let env_text = fs::read_to_string(&env_path).map_err(|e| Error::io(&env_path, e))?;
        let env: Environment = serde_json::from_str(&env_text)?;

        let path = dir.join("report.csv");
        let mut r = csv::Reader::from_path(&path).map_err(|e| csv_error(&path, e))?;
        let header = r.headers().map_err(|e| csv_error(&path, e))?.clone();
        if header.iter().ne(HEADER.iter().copied()) {
            return Err(Error::Malformed(format!("{}: unexpected header", path.display())));
        }
        let mut cells = Vec::new();
        for record in r.records() {
            let rec = record.map_err(|e| csv_error(&path, e))?;
            let f = |i: usize| rec.get(i).unwrap_or("");
            let mut cell = Cell::new(f(0), parse_field(f(1), "seed")?);
            for (k, v) in split_pairs(f(2))? {
                cell.params.insert(k, v);
            }
            if let Some(mse) = parse_field::<f64>(f(3), "mse")? {
                cell.metrics = Some(MetricsReport {
                    mse,
                    r_squared: parse_field(f(4), "r_squared")?,
                    relative_l2: parse_field(f(5), "relative_l2")?,
                    n_samples: parse_field(f(6), "n_samples")?.unwrap_or(0),
                    grid: f(7).to_string(),
                });
            }
            for (k, v) in split_pairs(f(8))? {
                let value = parse_field(&v, "values")?.unwrap_or(f64::NAN);
                cell.values.insert(k, value);
            }
            if !f(9).is_empty() {
                cell.timing = Some(TimingRecord {
                    activation: f(9).to_string(),
                    n_iters: parse_field(f(10), "timing_iters")?.unwrap_or(0),
                    batch_size: parse_field(f(11), "timing_batch")?.unwrap_or(0),
                    forward_ns: parse_field(f(12), "forward_ns")?.unwrap_or(0),
                    backward_ns: parse_field(f(13), "backward_ns")?.unwrap_or(0),
                });
            }
            if !f(14).is_empty() {
                cell.series = Some(read_series(&dir.join("curves").join(f(14)))?);
            }
            if !f(15).is_empty() {
                cell.error = Some(f(15).to_string());
            }
            cells.push(cell);
        }
        Ok(Self {
            spec: spec_file.spec,
            anchor: spec_file.anchor,
            env,
            cells,
        })
    }

    pub fn cell(&self, id: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.id == id)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.error.is_some())
    }
}

fn read_series(path: &Path) -> Result<Series> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let columns: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for record in r.records() {
        let rec = record.map_err(|e| csv_error(path, e))?;
        rows.push(
            rec.iter()
                .map(|v| parse_field(v, "series").map(|x| x.unwrap_or(f64::NAN)))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok(Series { columns, rows })
}

/// UTC `YYYYMMDDTHHMMSSZ` for a unix time.
pub fn timestamp(unix: u64) -> String {
    let days = (unix / 86_400) as i64;
    let secs = unix % 86_400;
    // civil-from-days
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = yoe + era * 400 + i64::from(month <= 2);
    format!(
        "{year:04}{month:02}{day:02}T{:02}{:02}{:02}Z",
        secs / 3600,
        secs / 60 % 60,
        secs % 60
    )
}

/// A fresh `<out>/<experiment>/<timestamp>[-n]` directory; existing runs are never reused.
pub fn new_run_dir(out: &Path, experiment: &str, unix: u64) -> Result<PathBuf> {
    let base = out.join(experiment);
    fs::create_dir_all(&base).map_err(|e| Error::io(&base, e))?;
    let stamp = timestamp(unix);
    for n in 0u32.. {
        let name = if n == 0 { stamp.clone() } else { format!("{stamp}-{n}") };
        let dir = base.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&dir, e)),
        }
    }
    unreachable!("run directory suffixes exhausted")
}
