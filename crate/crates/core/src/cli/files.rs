//! The flat `key = value` config file and whitespace/comma sample files.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Batch;

/// Settings read from a config file. Keys are flag names without dashes,
/// e.g. `max-degree = 8`; `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("config line {}: expected key = value, got '{raw}'", n + 1)))?;
            let key = key.trim().replace('_', "-");
            if key.is_empty() {
                return Err(Error::Parse(format!("config line {}: empty key", n + 1)));
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Parse(format!("config line {}: duplicate key '{key}'", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Rejects keys outside `allowed`, so typos do not pass silently.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for key in self.entries.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Parse(format!(
                    "unknown config key '{key}'; this command accepts: {}",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }
}

/// Columns `x[,y],f` after one header line.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFile {
    pub points: Batch,
    pub values: Vec<f64>,
}

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
}

fn numeric_rows(text: &str, what: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    if lines.next().is_none() {
        return Err(Error::Parse(format!("{what} is empty")));
    }
    lines
        .map(|(n, line)| {
            fields(line)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("{what} line {}: bad number '{v}'", n + 1)))
                })
                .collect()
        })
        .collect()
}

impl SampleFile {
    pub fn parse(text: &str) -> Result<Self> {
        let rows = numeric_rows(text, "sample file")?;
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if !(2..=3).contains(&width) {
            return Err(Error::Parse(format!(
                "sample file needs 2 (x,f) or 3 (x,y,f) columns, got {width}"
            )));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::Parse(format!(
                "sample file row {} has {} columns, expected {width}",
                i + 1,
                rows[i].len()
            )));
        }
        let d = width - 1;
        let points = rows.iter().flat_map(|r| r[..d].iter().copied()).collect();
        let values = rows.iter().map(|r| r[d]).collect();
        Ok(Self {
            points: Batch::new(rows.len(), d, points)?,
            values,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Smallest box containing every point.
    pub fn bounding_box(&self) -> Vec<[f64; 2]> {
        let d = self.points.cols();
        (0..d)
            .map(|c| {
                let col = self.points.data().iter().skip(c).step_by(d);
                let lo = col.clone().copied().fold(f64::INFINITY, f64::min);
                let hi = col.copied().fold(f64::NEG_INFINITY, f64::max);
                [lo, hi]
            })
            .collect()
    }
}

/// Point columns `x[,y]` after one header line.
pub fn parse_points(text: &str, dimension: usize) -> Result<Batch> {
    let rows = numeric_rows(text, "point file")?;
    if let Some(i) = rows.iter().position(|r| r.len() != dimension) {
        return Err(Error::Parse(format!(
            "point file row {} has {} columns, expected {dimension}",
            i + 1,
            rows[i].len()
        )));
    }
    Batch::new(rows.len(), dimension, rows.concat())
}

/// `a,b` or `a,b,c,d`.
pub fn parse_domain(text: &str) -> Result<Vec<[f64; 2]>> {
    let v = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad domain bound '{s}' in '{text}'")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if v.len() != 2 && v.len() != 4 {
        return Err(Error::Parse(format!(
            "domain needs 2 or 4 numbers (a,b[,c,d]), got '{text}'"
        )));
    }
    let domain: Vec<[f64; 2]> = v.chunks(2).map(|c| [c[0], c[1]]).collect();
    for [a, b] in &domain {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Parse(format!(
                "domain interval [{a}, {b}] must be finite with a < b"
            )));
        }
    }
    Ok(domain)
}
