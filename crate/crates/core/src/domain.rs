//! Decimal scaling between a computational domain and the reference box `[-1, 1]^d`.
//!
//! A value `x` is written as `x = x_hat * 10^s` with
//! `s = ceil(log10(floor(|x| + 1)))`, which equals the number of decimal
//! digits of `floor(|x|)` (zero digits for `|x| < 1`). A monomial of total
//! degree `k` then unmaps as `x^k = 10^(k s) * x_hat^k`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Batch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappedSample {
    pub x: f64,
    pub s: u32,
    pub x_hat: f64,
}

/// Scaling exponent of `x`, evaluated with integer digit counting.
///
/// Fails for non-finite input and for `|x| >= 2^128`, where the integer part
/// no longer fits the exact evaluation.
pub fn scale_exponent(x: f64) -> Result<u32> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("cannot map {x}")));
    }
    let a = x.abs().floor();
    if a >= 2f64.powi(128) {
        return Err(Error::Range(format!("|x| = {a:e} exceeds the mappable range")));
    }
    // floor(|x|) is an integer-valued double below 2^128, so the cast is exact.
    Ok(decimal_digits(a as u128))
}

/// Number of decimal digits of `n`, with `decimal_digits(0) == 0`.
fn decimal_digits(mut n: u128) -> u32 {
    let mut d = 0;
    while n > 0 {
        n /= 10;
        d += 1;
    }
    d
}

/// `10^e` correctly rounded to the nearest double (infinite past the range).
pub fn pow10(e: u32) -> f64 {
    const EXACT: [f64; 23] = [
        1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10, 1e11, 1e12, 1e13, 1e14, 1e15, 1e16, 1e17, 1e18, 1e19,
        1e20, 1e21, 1e22,
    ];
    match EXACT.get(e as usize) {
        Some(&v) => v,
        None if e > 400 => f64::INFINITY,
        None => format!("1e{e}").parse().expect("decimal literal"),
    }
}

pub fn forward_map(x: f64) -> Result<MappedSample> {
    let s = scale_exponent(x)?;
    Ok(MappedSample {
        x,
        s,
        x_hat: x / pow10(s),
    })
}

pub fn inverse_map(x_hat: f64, s: u32) -> Result<f64> {
    if !x_hat.is_finite() {
        return Err(Error::NonFinite(format!("cannot unmap {x_hat}")));
    }
    Ok(x_hat * pow10(s))
}

/// Recovers `phi(x) = 10^(k s) * phi_hat(x_hat)` for a basis function of total degree `k`.
pub fn unmap_basis_value(phi_hat: f64, total_degree: u32, s: u32) -> Result<f64> {
    unmap_with_exponent(phi_hat, total_degree.checked_mul(s))
        .map_err(|_| Error::Range(format!("10^({total_degree}*{s}) * {phi_hat:e} overflows")))
}

fn unmap_with_exponent(value: f64, exponent: Option<u32>) -> Result<f64> {
    if value == 0.0 {
        return Ok(0.0);
    }
    let out = exponent.map(pow10).unwrap_or(f64::INFINITY) * value;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::Range(format!("unmapped value {value:e} overflows")))
    }
}

/// How scaling exponents are chosen across a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingMode {
    /// Each point gets its own exponent.
    #[default]
    Pointwise,
    /// One exponent, the largest over all points, for the whole set.
    Uniform,
}

impl fmt::Display for MappingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MappingMode::Pointwise => "pointwise",
            MappingMode::Uniform => "uniform",
        })
    }
}

impl FromStr for MappingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pointwise" => Ok(MappingMode::Pointwise),
            "uniform" => Ok(MappingMode::Uniform),
            other => Err(Error::Parse(format!(
                "unknown mapping mode '{other}' (expected pointwise or uniform)"
            ))),
        }
    }
}

/// Exponent handling for multi-coordinate points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentSharing {
    /// One exponent per point, the maximum over its coordinates; the unmap
    /// factor is `10^((i + j) s)`.
    #[default]
    Shared,
    /// One exponent per coordinate; the unmap factor is `10^(i s1 + j s2)`.
    PerCoordinate,
}

/// A sample set in reference coordinates together with its exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedBatch {
    pub hat: Batch,
    /// Row-major, one exponent per coordinate of each point.
    pub exponents: Vec<u32>,
}

impl MappedBatch {
    pub fn rows(&self) -> usize {
        self.hat.rows()
    }

    pub fn exponents_of(&self, row: usize) -> &[u32] {
        let d = self.hat.cols();
        &self.exponents[row * d..(row + 1) * d]
    }

    /// Factor turning `phi_hat(x_hat)` into `phi(x)` for the monomial with
    /// per-coordinate powers `powers`.
    pub fn unmap(&self, row: usize, powers: &[u32], phi_hat: f64) -> Result<f64> {
        let exponent = self
            .exponents_of(row)
            .iter()
            .zip(powers)
            .try_fold(0u32, |acc, (&s, &p)| acc.checked_add(s.checked_mul(p)?));
        unmap_with_exponent(phi_hat, exponent).map_err(|_| {
            Error::Range(format!(
                "unmapping exponent {powers:?} at sample {row} (scales {:?}) overflows",
                self.exponents_of(row)
            ))
        })
    }
}

/// Maps every point of `points` into the reference box.
pub fn map_domain(points: &Batch, mode: MappingMode, sharing: ExponentSharing) -> Result<MappedBatch> {
    if points.is_empty() {
        return Err(Error::InvalidConfig("cannot map an empty point set".into()));
    }
    let d = points.cols();
    let mut exponents = points
        .data()
        .iter()
        .map(|&x| scale_exponent(x))
        .collect::<Result<Vec<u32>>>()?;
    if sharing == ExponentSharing::Shared {
        for row in exponents.chunks_exact_mut(d) {
            let m = row.iter().copied().max().unwrap_or(0);
            row.fill(m);
        }
    }
    if mode == MappingMode::Uniform {
        for c in 0..d {
            let m = exponents.iter().skip(c).step_by(d).copied().max().unwrap_or(0);
            exponents.iter_mut().skip(c).step_by(d).for_each(|s| *s = m);
        }
    }
    let hat: Vec<f64> = points
        .data()
        .iter()
        .zip(&exponents)
        .map(|(&x, &s)| x / pow10(s))
        .collect();
    Ok(MappedBatch {
        hat: Batch::new(points.rows(), d, hat)?,
        exponents,
    })
}
