//! Full-batch and minibatch training of the MSE loss with Adam or plain gradient descent.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::init::{BiasInit, InitKind, InitStrategy};
use super::network::Workspace;
use super::params::{Architecture, Batch, DenseLayer, ParamSet};
use crate::error::{Error, Result};
use crate::linalg::{solve_min_norm, LeastSquaresSolution, DEFAULT_RCOND};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
    /// Plain gradient descent.
    Sgd,
}

impl Optimizer {
    pub const fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BatchMode {
    Full,
    Minibatch { size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampling {
    /// `count` independent uniform draws over the box.
    UniformRandom { count: usize },
    /// Tensor grid with `per_axis` equispaced nodes per coordinate, endpoints included.
    Grid { per_axis: usize },
}

/// Where training inputs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    /// One `[lower, upper]` interval per input coordinate.
    pub domain: Vec<[f64; 2]>,
    pub rule: Sampling,
}

impl SampleSpec {
    pub fn reference(dimension: usize, rule: Sampling) -> Self {
        Self {
            domain: vec![[-1.0, 1.0]; dimension],
            rule,
        }
    }

    pub fn dimension(&self) -> usize {
        self.domain.len()
    }

    pub fn count(&self) -> usize {
        match self.rule {
            Sampling::UniformRandom { count } => count,
            Sampling::Grid { per_axis } => per_axis.pow(self.domain.len() as u32),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.domain.is_empty() {
            return Err(Error::InvalidConfig("sample domain has no coordinates".into()));
        }
        for [lo, hi] in &self.domain {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "sample interval [{lo}, {hi}] must be finite with lower < upper"
                )));
            }
        }
        let per = match self.rule {
            Sampling::UniformRandom { count } => count,
            Sampling::Grid { per_axis } => per_axis,
        };
        if per < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 samples, got {per}")));
        }
        Ok(())
    }

    /// Materializes the inputs. Random draws depend only on `seed`.
    pub fn generate(&self, seed: u64) -> Result<Batch> {
        self.validate()?;
        let d = self.dimension();
        match self.rule {
            Sampling::UniformRandom { count } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut data = Vec::with_capacity(count * d);
                for _ in 0..count {
                    for [lo, hi] in &self.domain {
                        data.push(rng.gen_range(*lo..=*hi));
                    }
                }
                Batch::new(count, d, data)
            }
            Sampling::Grid { per_axis } => {
                let axes: Vec<Vec<f64>> = self.domain.iter().map(|&[lo, hi]| linspace(lo, hi, per_axis)).collect();
                let total = per_axis.pow(d as u32);
                let mut data = Vec::with_capacity(total * d);
                let mut idx = vec![0usize; d];
                for _ in 0..total {
                    for (c, &i) in idx.iter().enumerate() {
                        data.push(axes[c][i]);
                    }
                    // last coordinate varies fastest
                    for c in (0..d).rev() {
                        idx[c] += 1;
                        if idx[c] < per_axis {
                            break;
                        }
                        idx[c] = 0;
                    }
                }
                Batch::new(total, d, data)
            }
        }
    }
}

/// `n` equispaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub batch: BatchMode,
    pub samples: SampleSpec,
    pub seed: u64,
    /// Stop as soon as the epoch's training MSE falls below this value.
    pub convergence_threshold: Option<f64>,
    /// Stop after this many epochs. Unlike lowering `epochs`, this leaves the
    /// learning-rate schedule untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_after: Option<usize>,
    /// Fractions of `epochs` at which the learning rate is multiplied by `lr_decay`.
    pub lr_milestones: Vec<f64>,
    pub lr_decay: f64,
    /// Random initialization used when training does not start from given weights.
    pub init: InitKind,
    pub init_gain: f64,
    #[serde(default)]
    pub init_bias: BiasInit,
    /// After the last epoch, replace the linear output layer by the exact
    /// least-squares solution on the training set. Skipped when `epochs == 0`.
    #[serde(default)]
    pub output_refit: bool,
}

impl TrainConfig {
    /// Defaults for basis networks on the reference domain of the given dimension.
    pub fn reference_defaults(dimension: usize) -> Self {
        let rule = if dimension == 1 {
            Sampling::UniformRandom { count: 2048 }
        } else {
            Sampling::Grid { per_axis: 64 }
        };
        Self {
            epochs: 5000,
            learning_rate: 1e-3,
            optimizer: Optimizer::adam(),
            batch: BatchMode::Full,
            samples: SampleSpec::reference(dimension, rule),
            seed: 0,
            convergence_threshold: None,
            stop_after: None,
            lr_milestones: vec![0.6, 0.85],
            lr_decay: 0.5,
            init: InitKind::Xavier,
            init_gain: 1.0,
            init_bias: BiasInit::Zero,
            output_refit: false,
        }
    }

    pub fn init_strategy(&self) -> InitStrategy {
        InitStrategy::new(self.init, self.init_gain, self.seed).with_bias(self.init_bias)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let BatchMode::Minibatch { size: 0 } = self.batch {
            return Err(Error::InvalidConfig("minibatch size must be positive".into()));
        }
        if !(self.lr_decay > 0.0) {
            return Err(Error::InvalidConfig("lr_decay must be positive".into()));
        }
        self.samples.validate()
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let passed = self
            .lr_milestones
            .iter()
            .filter(|&&m| epoch as f64 >= (m * self.epochs as f64).floor())
            .count();
        self.learning_rate * self.lr_decay.powi(passed as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ParamSet,
    /// Training MSE observed at each executed epoch, before that epoch's update.
    pub loss_history: Vec<f64>,
    /// Output-layer solve, when the config asked for one.
    pub refit: Option<LeastSquaresSolution>,
    /// The output layer as the optimizer left it, before the solve replaced it.
    pub pre_refit_output: Option<DenseLayer>,
}

impl TrainOutcome {
    pub fn epochs_run(&self) -> usize {
        self.loss_history.len()
    }

    /// First epoch whose recorded loss is strictly below `threshold`.
    pub fn epoch_reaching(&self, threshold: f64) -> Option<usize> {
        self.loss_history.iter().position(|&l| l < threshold)
    }
}

struct OptimizerState {
    kind: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl OptimizerState {
    fn new(kind: Optimizer, n: usize) -> Self {
        let (m, v) = match kind {
            Optimizer::Adam { .. } => (vec![0.0; n], vec![0.0; n]),
            Optimizer::Sgd => (Vec::new(), Vec::new()),
        };
        Self { kind, m, v, step: 0 }
    }

    fn apply(&mut self, params: &mut ParamSet, grads: &ParamSet, lr: f64) {
        self.step += 1;
        match self.kind {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grads.iter()) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads.iter())
                    .zip(self.m.iter_mut())
                    .zip(self.v.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
    }
}

/// Minimizes `mean((net(x) - y)^2)` starting from `params`.
///
/// Runs `config.epochs` epochs unless the convergence threshold is met first.
/// A non-finite loss aborts with [`Error::Diverged`] carrying the epoch index.
pub fn train(
    params: &ParamSet,
    arch: &Architecture,
    x: &Batch,
    y: &[f64],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    params.check_shape(arch)?;
    if x.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    if y.len() != x.rows() * arch.output_width() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} targets", x.rows() * arch.output_width()),
            got: format!("{} targets", y.len()),
        });
    }
    if !x.data().iter().chain(y).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("training samples contain NaN or infinity".into()));
    }

    let mut current = params.clone();
    let mut grads = ParamSet::zeros(arch);
    let mut ws = Workspace::new();
    let mut opt = OptimizerState::new(config.optimizer, current.n_params());
    let mut history = Vec::with_capacity(config.epochs);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_ba7c);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let out_w = arch.output_width();

    for epoch in 0..config.epochs.min(config.stop_after.unwrap_or(usize::MAX)) {
        let lr = config.learning_rate_at(epoch);
        let loss = match config.batch {
            BatchMode::Full => {
                let loss = ws.loss_and_gradient(&current, arch, x, y, &mut grads)?;
                check_loss(epoch, loss)?;
                if converged(config, loss) {
                    history.push(loss);
                    break;
                }
                opt.apply(&mut current, &grads, lr);
                loss
            }
            BatchMode::Minibatch { size } => {
                order.shuffle(&mut rng);
                let mut weighted = 0.0;
                for chunk in order.chunks(size) {
                    let xb = x.select_rows(chunk);
                    let yb: Vec<f64> = chunk
                        .iter()
                        .flat_map(|&i| y[i * out_w..(i + 1) * out_w].iter().copied())
                        .collect();
                    let loss = ws.loss_and_gradient(&current, arch, &xb, &yb, &mut grads)?;
                    check_loss(epoch, loss)?;
                    weighted += loss * chunk.len() as f64;
                    opt.apply(&mut current, &grads, lr);
                }
                let loss = weighted / x.rows() as f64;
                if converged(config, loss) {
                    history.push(loss);
                    break;
                }
                loss
            }
        };
        history.push(loss);
    }
    if !current.is_finite() {
        return Err(Error::Diverged {
            epoch: history.len(),
            loss: f64::NAN,
        });
    }
    let (refit, pre_refit_output) = if config.output_refit && config.epochs > 0 {
        let before = current.layers.last().cloned();
        (Some(refit_output_layer(&mut current, arch, x, y)?), before)
    } else {
        (None, None)
    };
    Ok(TrainOutcome {
        params: current,
        loss_history: history,
        refit,
        pre_refit_output,
    })
}

/// Solves the output layer exactly for fixed hidden features.
///
/// The hidden layers are left untouched; weights and biases of the last layer
/// become the pivoted-QR least-squares solution against `y`. Returns the
/// solution of the last output column.
pub fn refit_output_layer(
    params: &mut ParamSet,
    arch: &Architecture,
    x: &Batch,
    y: &[f64],
) -> Result<LeastSquaresSolution> {
    let out_w = arch.output_width();
    if y.len() != x.rows() * out_w {
        return Err(Error::ShapeMismatch {
            expected: format!("{} targets", x.rows() * out_w),
            got: format!("{} targets", y.len()),
        });
    }
    let features = Workspace::new().last_hidden(params, arch, x)?;
    let (rows, width) = (features.rows(), features.cols());
    let mut design = Vec::with_capacity(rows * (width + 1));
    for r in 0..rows {
        design.extend_from_slice(features.row(r));
        design.push(1.0);
    }
    let layer = params.layers.last_mut().expect("architecture has at least one layer");
    let mut last = None;
    for o in 0..out_w {
        let target: Vec<f64> = (0..rows).map(|r| y[r * out_w + o]).collect();
        let sol = solve_min_norm(&design, rows, width + 1, &target, DEFAULT_RCOND)?;
        layer.weights[o * width..(o + 1) * width].copy_from_slice(&sol.coefficients[..width]);
        layer.biases[o] = sol.coefficients[width];
        last = Some(sol);
    }
    Ok(last.expect("output width is positive"))
}

fn check_loss(epoch: usize, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { epoch, loss })
    }
}

fn converged(config: &TrainConfig, loss: f64) -> bool {
    config.convergence_threshold.is_some_and(|t| loss < t)
}
