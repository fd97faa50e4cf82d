//! Libraries of networks approximating monomials on the reference box.
//!
//! Nets are trained one after another in graded order, each starting from the
//! weights of its predecessor; see [`progressive_pretrain`].

mod format;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{
    init_params, network, train, ActivationKind, Architecture, Batch, BiasInit, DenseLayer, InitKind, ParamSet,
    SampleSpec, Sampling, TrainConfig, Workspace,
};

pub use format::{load_library, save_library, FORMAT_VERSION, MAGIC};

/// Default accuracy every stored net must reach on its training samples.
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

/// A monomial `x1^p1 * ... * xd^pd` on the reference box.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisSpec {
    powers: Vec<u32>,
}

impl BasisSpec {
    pub fn new(powers: Vec<u32>) -> Result<Self> {
        if !(1..=2).contains(&powers.len()) {
            return Err(Error::InvalidConfig(format!(
                "basis dimension must be 1 or 2, got {}",
                powers.len()
            )));
        }
        Ok(Self { powers })
    }

    pub fn one_d(k: u32) -> Self {
        Self { powers: vec![k] }
    }

    pub fn two_d(i: u32, j: u32) -> Self {
        Self { powers: vec![i, j] }
    }

    pub fn powers(&self) -> &[u32] {
        &self.powers
    }

    pub fn dimension(&self) -> usize {
        self.powers.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.powers.iter().sum()
    }

    /// Exact monomial value at one point.
    pub fn eval_exact(&self, point: &[f64]) -> f64 {
        self.powers.iter().zip(point).map(|(&p, &x)| x.powi(p as i32)).product()
    }

    /// Every spec of total degree at most `max_degree` in graded lexicographic order:
    /// `(0,0), (0,1), (1,0), (0,2), (1,1), (2,0), ...` in 2D.
    pub fn graded(dimension: usize, max_degree: u32) -> Result<Vec<BasisSpec>> {
        match dimension {
            1 => Ok((0..=max_degree).map(BasisSpec::one_d).collect()),
            2 => Ok((0..=max_degree)
                .flat_map(|t| (0..=t).map(move |i| BasisSpec::two_d(i, t - i)))
                .collect()),
            d => Err(Error::InvalidConfig(format!("basis dimension must be 1 or 2, got {d}"))),
        }
    }

    /// Number of monomials of total degree at most `max_degree`.
    pub fn count(dimension: usize, max_degree: u32) -> usize {
        let m = max_degree as usize;
        if dimension == 1 {
            m + 1
        } else {
            (m + 1) * (m + 2) / 2
        }
    }
}

impl fmt::Display for BasisSpec {
    /// `3` in 1D, `1,2` in 2D; parsed back by `FromStr`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.powers.iter().map(|p| p.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for BasisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let powers = s
            .trim_matches(|c| c == '(' || c == ')')
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .map_err(|e| Error::Parse(format!("basis exponent '{p}': {e}")))
            })
            .collect::<Result<Vec<u32>>>()?;
        BasisSpec::new(powers)
    }
}

/// Where a net's starting weights came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Random,
    Inherited { from: BasisSpec },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Random => f.write_str("random"),
            Provenance::Inherited { from } => write!(f, "inherited({from})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisNet {
    pub spec: BasisSpec,
    pub params: ParamSet,
    /// Mean squared residual against the exact monomial on the training samples.
    pub final_mse: f64,
    pub epochs_run: u32,
    /// Seed of the random initialization; for inherited nets, of the sample draw.
    pub seed: u64,
    pub provenance: Provenance,
    /// 1 unless the first attempt failed and the net was retrained from random weights.
    pub attempts: u32,
    /// Output layer before the exact solve. The next net in the chain starts
    /// from this one; the solved layer fits the monomial better but its weights
    /// can be large, and training from them stalls.
    pub handoff_output: Option<DenseLayer>,
}

impl BasisNet {
    /// Starting weights for the next net in the chain.
    pub fn handoff_params(&self) -> ParamSet {
        let mut params = self.params.clone();
        if let (Some(layer), Some(last)) = (&self.handoff_output, params.layers.last_mut()) {
            *last = layer.clone();
        }
        params
    }
}

/// Everything needed to train a chain of basis nets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainOptions {
    pub arch: Architecture,
    pub config: TrainConfig,
    /// Nets whose training MSE exceeds this are retried once, then rejected.
    pub tolerance: f64,
    /// Stored in the file header. Kept fixed by default so reruns are byte-identical.
    pub created_unix: u64,
}

impl PretrainOptions {
    /// `[d, 1024, 1]` GELU nets with [`basis_train_config`].
    pub fn defaults(dimension: usize) -> Result<Self> {
        Ok(Self {
            arch: Architecture::single_hidden(dimension, 1024, ActivationKind::Gelu)?,
            config: basis_train_config(dimension),
            tolerance: DEFAULT_TOLERANCE,
            created_unix: 0,
        })
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        if self.arch.input_width() != dimension || self.arch.output_width() != 1 {
            return Err(Error::InvalidArchitecture(format!(
                "basis nets need input width {dimension} and one output, got {:?}",
                self.arch.widths()
            )));
        }
        if self.config.samples.dimension() != dimension {
            return Err(Error::InvalidConfig(format!(
                "sample domain has {} coordinates, expected {dimension}",
                self.config.samples.dimension()
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        self.config.validate()
    }

    /// Hex SHA-256 of the architecture and training configuration.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(&(&self.arch, &self.config, self.tolerance)).expect("options serialize");
        hex(&Sha256::digest(text.as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Training configuration used for basis nets.
///
/// Adam at learning rate `1e-2` on 2048 random points (1D) or a 64x64 grid (2D),
/// Kaiming weights with fan-in uniform biases, and an exact output-layer solve
/// after the last epoch. 2D nets run 500 epochs, 1D nets 5000.
pub fn basis_train_config(dimension: usize) -> TrainConfig {
    let mut config = TrainConfig::reference_defaults(dimension);
    config.init = InitKind::Kaiming;
    config.init_bias = BiasInit::FanInUniform;
    config.output_refit = true;
    config.learning_rate = 1e-2;
    if dimension == 2 {
        config.epochs = 500;
    }
    config
}

/// The set of basis nets up to total degree `max_degree`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisLibrary {
    pub dimension: usize,
    pub max_degree: u32,
    pub arch: Architecture,
    /// Hex SHA-256 of the options the library was built with.
    pub config_digest: String,
    pub created_unix: u64,
    /// Configuration echo, kept for inspection.
    pub config: TrainConfig,
    pub tolerance: f64,
    /// Nets in graded order.
    pub nets: Vec<BasisNet>,
}

/// Values of one basis net, with a count of inputs outside the reference box.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisValues {
    pub values: Vec<f64>,
    pub outside_reference: usize,
}

impl BasisLibrary {
    pub fn len(&self) -> usize {
        self.nets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nets.is_empty()
    }

    /// Identifier used to tie fitted models to the library they were built on.
    pub fn id(&self) -> &str {
        &self.config_digest
    }

    pub fn get(&self, spec: &BasisSpec) -> Result<&BasisNet> {
        self.index_of(spec)
            .map(|i| &self.nets[i])
            .ok_or_else(|| Error::MissingBasis(spec.to_string()))
    }

    fn index_of(&self, spec: &BasisSpec) -> Option<usize> {
        if spec.dimension() != self.dimension || spec.total_degree() > self.max_degree {
            return None;
        }
        let t = spec.total_degree() as usize;
        let i = if self.dimension == 1 {
            t
        } else {
            t * (t + 1) / 2 + spec.powers()[0] as usize
        };
        self.nets.get(i).filter(|n| &n.spec == spec).map(|_| i)
    }

    /// Forward pass of the stored net for `spec` on reference-box inputs.
    pub fn eval(&self, spec: &BasisSpec, x_hat: &Batch) -> Result<BasisValues> {
        let net = self.get(spec)?;
        let values = Workspace::new().forward(&net.params, &self.arch, x_hat)?.to_vec();
        let outside_reference = x_hat
            .data()
            .chunks(x_hat.cols().max(1))
            .filter(|p| p.iter().any(|v| v.abs() > 1.0))
            .count();
        Ok(BasisValues {
            values,
            outside_reference,
        })
    }

    /// Structural checks plus the accuracy bound on every net.
    pub fn validate(&self) -> Result<()> {
        let expected = BasisSpec::graded(self.dimension, self.max_degree)?;
        if self.nets.len() != expected.len() {
            return Err(Error::Validation(format!(
                "library of degree {} in {}D needs {} nets, has {}",
                self.max_degree,
                self.dimension,
                expected.len(),
                self.nets.len()
            )));
        }
        if self.arch.input_width() != self.dimension || self.arch.output_width() != 1 {
            return Err(Error::Validation(format!(
                "architecture {:?} does not fit {}D basis nets",
                self.arch.widths(),
                self.dimension
            )));
        }
        let mut bad = Vec::new();
        for (net, spec) in self.nets.iter().zip(&expected) {
            if &net.spec != spec {
                return Err(Error::Validation(format!(
                    "expected basis {spec} in graded position, found {}",
                    net.spec
                )));
            }
            net.params
                .check_shape(&self.arch)
                .map_err(|e| Error::Validation(format!("basis {spec}: {e}")))?;
            if !net.params.is_finite() {
                return Err(Error::Validation(format!("basis {spec} has non-finite weights")));
            }
            if !(net.final_mse <= self.tolerance) {
                bad.push(format!("{spec} (mse {:.3e})", net.final_mse));
            }
        }
        if !bad.is_empty() {
            return Err(Error::Validation(format!(
                "training MSE above {:e} for: {}",
                self.tolerance,
                bad.join(", ")
            )));
        }
        Ok(())
    }
}

/// Trains one basis net, from `warm_start` if given, otherwise from a random
/// draw seeded with `init_seed`.
pub fn train_basis(
    spec: &BasisSpec,
    arch: &Architecture,
    config: &TrainConfig,
    warm_start: Option<&ParamSet>,
    init_seed: u64,
) -> Result<BasisNet> {
    let wrap = |e: Error| Error::BasisTraining {
        basis: spec.to_string(),
        source: Box::new(e),
    };
    if arch.input_width() != spec.dimension() {
        return Err(wrap(Error::InvalidArchitecture(format!(
            "input width {} does not match basis dimension {}",
            arch.input_width(),
            spec.dimension()
        ))));
    }
    let (x, y) = training_set(spec, config).map_err(wrap)?;
    let start = match warm_start {
        Some(p) => {
            p.check_shape(arch).map_err(wrap)?;
            p.clone()
        }
        None => {
            let mut strategy = config.init_strategy();
            strategy.seed = init_seed;
            init_params(arch, &strategy).map_err(wrap)?
        }
    };
    let outcome = train(&start, arch, &x, &y, config).map_err(wrap)?;
    let final_mse = network::loss(&outcome.params, arch, &x, &y).map_err(wrap)?;
    Ok(BasisNet {
        spec: spec.clone(),
        params: outcome.params,
        final_mse,
        epochs_run: outcome.loss_history.len() as u32,
        seed: if warm_start.is_some() { config.seed } else { init_seed },
        provenance: Provenance::Random,
        attempts: 1,
        handoff_output: outcome.pre_refit_output,
    })
}

/// Training inputs from `config.samples` and the exact monomial values.
pub fn training_set(spec: &BasisSpec, config: &TrainConfig) -> Result<(Batch, Vec<f64>)> {
    let x = config.samples.generate(config.seed)?;
    let y = (0..x.rows()).map(|r| spec.eval_exact(x.row(r))).collect();
    Ok((x, y))
}

/// Seed of the random draw for the net at graded position `index`.
fn init_seed(base: u64, index: usize, attempt: u32) -> u64 {
    base ^ ((index as u64) << 32) ^ ((attempt as u64) << 56)
}

/// Builds the whole library: the first net from random weights, every later
/// net from the trained weights of its graded predecessor.
pub fn progressive_pretrain(dimension: usize, max_degree: u32, opts: &PretrainOptions) -> Result<BasisLibrary> {
    progressive_pretrain_with(dimension, max_degree, opts, |_| {})
}

/// [`progressive_pretrain`] reporting each finished net to `progress`.
pub fn progressive_pretrain_with(
    dimension: usize,
    max_degree: u32,
    opts: &PretrainOptions,
    progress: impl FnMut(&BasisNet),
) -> Result<BasisLibrary> {
    opts.validate(dimension)?;
    let library = BasisLibrary {
        dimension,
        max_degree: 0,
        arch: opts.arch.clone(),
        config_digest: opts.digest(),
        created_unix: opts.created_unix,
        config: opts.config.clone(),
        tolerance: opts.tolerance,
        nets: Vec::new(),
    };
    extend_library(library, max_degree, progress)
}

/// Continues the chain of an existing library up to `max_degree`.
///
/// The result equals what [`progressive_pretrain`] would produce for the
/// larger degree with the library's stored options.
pub fn extend_library(
    mut library: BasisLibrary,
    max_degree: u32,
    mut progress: impl FnMut(&BasisNet),
) -> Result<BasisLibrary> {
    let specs = BasisSpec::graded(library.dimension, max_degree)?;
    if library.nets.len() > specs.len() {
        return Err(Error::InvalidConfig(format!(
            "library already holds degree {}, cannot shrink to {max_degree}",
            library.max_degree
        )));
    }
    for (index, spec) in specs.iter().enumerate().skip(library.nets.len()) {
        let previous = library.nets.last();
        let net = train_with_retry(&library, spec, index, previous)?;
        progress(&net);
        library.nets.push(net);
        library.max_degree = spec.total_degree();
    }
    library.max_degree = max_degree;
    Ok(library)
}

fn train_with_retry(
    library: &BasisLibrary,
    spec: &BasisSpec,
    index: usize,
    previous: Option<&BasisNet>,
) -> Result<BasisNet> {
    let (arch, config, tol) = (&library.arch, &library.config, library.tolerance);
    let first = train_basis(
        spec,
        arch,
        config,
        previous.map(BasisNet::handoff_params).as_ref(),
        init_seed(config.seed, index, 0),
    );
    let provenance = match previous {
        Some(p) => Provenance::Inherited { from: p.spec.clone() },
        None => Provenance::Random,
    };
    let failure = match first {
        Ok(net) if net.final_mse <= tol => return Ok(BasisNet { provenance, ..net }),
        Ok(net) => Error::BasisTraining {
            basis: spec.to_string(),
            source: Box::new(Error::Validation(format!(
                "training MSE {:.3e} above tolerance {tol:e}",
                net.final_mse
            ))),
        },
        Err(e) => e,
    };
    let retry = train_basis(spec, arch, config, None, init_seed(config.seed, index, 1))?;
    if retry.final_mse <= tol {
        Ok(BasisNet { attempts: 2, ..retry })
    } else {
        Err(Error::BasisTraining {
            basis: spec.to_string(),
            source: Box::new(Error::Validation(format!(
                "training MSE {:.3e} above tolerance {tol:e} after retry from random weights (first attempt: {failure})",
                retry.final_mse
            ))),
        })
    }
}

/// Tensor grid with `per_axis` nodes per coordinate on the reference box.
pub fn reference_grid(dimension: usize, per_axis: usize) -> Result<Batch> {
    SampleSpec::reference(dimension, Sampling::Grid { per_axis }).generate(0)
}
