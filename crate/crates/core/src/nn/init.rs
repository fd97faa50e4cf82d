use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::params::{Architecture, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    /// `U(-gain, gain)`, independent of fan.
    Uniform,
    /// `U(-a, a)` with `a = gain * sqrt(6 / (fan_in + fan_out))`.
    Xavier,
    /// `N(0, gain^2 * 2 / fan_in)`.
    Kaiming,
}

impl InitKind {
    pub fn all() -> [InitKind; 3] {
        [InitKind::Uniform, InitKind::Xavier, InitKind::Kaiming]
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitKind::Uniform => "uniform",
            InitKind::Xavier => "xavier",
            InitKind::Kaiming => "kaiming",
        }
    }

    /// Closed-form variance of one weight for a layer with the given fans.
    pub fn weight_variance(&self, gain: f64, fan_in: usize, fan_out: usize) -> f64 {
        match self {
            InitKind::Uniform => gain * gain / 3.0,
            InitKind::Xavier => gain * gain * 2.0 / (fan_in + fan_out) as f64,
            InitKind::Kaiming => gain * gain * 2.0 / fan_in as f64,
        }
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(InitKind::Uniform),
            "xavier" | "glorot" => Ok(InitKind::Xavier),
            "kaiming" | "he" => Ok(InitKind::Kaiming),
            other => Err(Error::Parse(format!(
                "unknown init strategy '{other}' (expected uniform, xavier or kaiming)"
            ))),
        }
    }
}

/// How biases are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasInit {
    #[default]
    Zero,
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, independent of the gain.
    FanInUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitStrategy {
    pub kind: InitKind,
    pub gain: f64,
    pub seed: u64,
    #[serde(default)]
    pub bias: BiasInit,
}

impl InitStrategy {
    /// Weights per `kind` and `gain`, zero biases.
    pub fn new(kind: InitKind, gain: f64, seed: u64) -> Self {
        Self {
            kind,
            gain,
            seed,
            bias: BiasInit::Zero,
        }
    }

    pub fn with_bias(mut self, bias: BiasInit) -> Self {
        self.bias = bias;
        self
    }
}

/// Draws a fresh parameter set. Biases are zero unless the strategy asks
/// otherwise; identical inputs give bit-identical output.
pub fn init_params(arch: &Architecture, strategy: &InitStrategy) -> Result<ParamSet> {
    if !(strategy.gain > 0.0) || !strategy.gain.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "initialization gain must be positive and finite, got {}",
            strategy.gain
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);
    let mut params = ParamSet::zeros(arch);
    for layer in &mut params.layers {
        let (fan_in, fan_out) = (layer.inputs, layer.outputs);
        match strategy.kind {
            InitKind::Uniform => {
                let a = strategy.gain;
                layer.weights.iter_mut().for_each(|w| *w = rng.gen_range(-a..a));
            }
            InitKind::Xavier => {
                let a = strategy.gain * (6.0 / (fan_in + fan_out) as f64).sqrt();
                layer.weights.iter_mut().for_each(|w| *w = rng.gen_range(-a..a));
            }
            InitKind::Kaiming => {
                let std = strategy.gain * (2.0 / fan_in as f64).sqrt();
                let normal =
                    Normal::new(0.0, std).map_err(|e| Error::InvalidConfig(format!("kaiming std {std}: {e}")))?;
                layer.weights.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
            }
        }
        if strategy.bias == BiasInit::FanInUniform {
            let a = 1.0 / (fan_in as f64).sqrt();
            layer.biases.iter_mut().for_each(|b| *b = rng.gen_range(-a..a));
        }
    }
    Ok(params)
}
