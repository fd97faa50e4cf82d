//! Desk-scale experiment runners: initialization sensitivity, architecture
//! sweeps, activation studies, basis verification, approximation suites and
//! the extrapolation demo.
//!
//! Each run produces an [`ExperimentReport`]; [`run_to_dir`] also writes it
//! under `<out>/<experiment>/<timestamp>/`.

mod report;
mod targets;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use report::{new_run_dir, timestamp, Cell, Environment, ExperimentReport, Series};
pub use targets::{builtin_target, target_names, TargetFunction, SUITE_1D, SUITE_2D};

use crate::basis::{basis_train_config, train_basis, BasisLibrary, BasisSpec};
use crate::domain::{map_domain, ExponentSharing, MappingMode};
use crate::error::{Error, Result};
use crate::nn::{
    forward, init_params, time_activation, train, ActivationKind, Architecture, Batch, BiasInit, InitKind,
    MetricsReport, SampleSpec, Sampling, TrainConfig,
};
use crate::projection::{default_test_grid, evaluate_fit, fit, Basis, FitConfig, MappingOptions, SourceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    InitSensitivity,
    WidthSweep,
    DepthSweep,
    MixedArchSweep,
    ActivationError,
    ActivationTiming,
    BasisVerify,
    Approx1d,
    Approx2d,
    ExtrapolationDemo,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::InitSensitivity,
        ExperimentKind::WidthSweep,
        ExperimentKind::DepthSweep,
        ExperimentKind::MixedArchSweep,
        ExperimentKind::ActivationError,
        ExperimentKind::ActivationTiming,
        ExperimentKind::BasisVerify,
        ExperimentKind::Approx1d,
        ExperimentKind::Approx2d,
        ExperimentKind::ExtrapolationDemo,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::InitSensitivity => "init-sensitivity",
            ExperimentKind::WidthSweep => "width-sweep",
            ExperimentKind::DepthSweep => "depth-sweep",
            ExperimentKind::MixedArchSweep => "mixed-arch-sweep",
            ExperimentKind::ActivationError => "activation-error",
            ExperimentKind::ActivationTiming => "activation-timing",
            ExperimentKind::BasisVerify => "basis-verify",
            ExperimentKind::Approx1d => "approx-1d",
            ExperimentKind::Approx2d => "approx-2d",
            ExperimentKind::ExtrapolationDemo => "extrapolation-demo",
        }
    }

    fn anchor(&self) -> &'static str {
        match self {
            ExperimentKind::InitSensitivity => {
                "initialization strategy and gain vs error for sin(pi x) sin(4 pi y) on [2,64,64,64,1]"
            }
            ExperimentKind::WidthSweep => "single hidden layer width vs error for x^3, tested on [-20,20]",
            ExperimentKind::DepthSweep => "hidden layer count at widths 8 and 128 for x^3",
            ExperimentKind::MixedArchSweep => "mixed widths and depths for x^3",
            ExperimentKind::ActivationError => "activation function vs error for x^3",
            ExperimentKind::ActivationTiming => "forward and backward cost per activation",
            ExperimentKind::BasisVerify => "basis nets extrapolated through the domain map",
            ExperimentKind::Approx1d => "least-squares projection of the 1D suite",
            ExperimentKind::Approx2d => "least-squares projection of the 2D suite",
            ExperimentKind::ExtrapolationDemo => {
                "naive x^3 net on [-10,10] tested on [-15,15] vs mapped reference net on [-60,60]"
            }
        }
    }

    /// The documented default spec for this experiment.
    pub fn default_spec(self) -> ExperimentSpec {
        let seeds: Vec<u64> = (0..5).collect();
        let mut train = TrainConfig::reference_defaults(1);
        train.init = InitKind::Kaiming;
        train.init_bias = BiasInit::FanInUniform;
        let grid = match self {
            ExperimentKind::InitSensitivity => {
                train = TrainConfig::reference_defaults(2);
                train.epochs = 1000;
                train.samples = SampleSpec::reference(2, Sampling::Grid { per_axis: 32 });
                ParamGrid::Init {
                    widths: vec![2, 64, 64, 64, 1],
                    activation: ActivationKind::Gelu,
                    target: "sine-product".into(),
                    cells: vec![
                        (InitKind::Uniform, 0.5),
                        (InitKind::Uniform, 2.0),
                        (InitKind::Uniform, 5.0),
                        (InitKind::Xavier, 1.0),
                        (InitKind::Xavier, 10.0),
                        (InitKind::Xavier, 20.0),
                        (InitKind::Kaiming, 1.0),
                        (InitKind::Kaiming, 10.0),
                        (InitKind::Kaiming, 20.0),
                    ],
                }
            }
            ExperimentKind::WidthSweep => {
                ParamGrid::arch_sweep([8, 16, 32, 64, 128, 256].iter().map(|&w| vec![1, w, 1]).collect())
            }
            ExperimentKind::DepthSweep => ParamGrid::arch_sweep(vec![
                vec![1, 8, 1],
                vec![1, 8, 8, 1],
                vec![1, 8, 8, 8, 8, 1],
                vec![1, 128, 1],
                vec![1, 128, 128, 1],
                vec![1, 128, 128, 128, 128, 1],
            ]),
            ExperimentKind::MixedArchSweep => ParamGrid::arch_sweep(
                [
                    &[8][..],
                    &[8, 8],
                    &[8, 16],
                    &[8, 32],
                    &[8, 64],
                    &[8, 128],
                    &[8, 256],
                    &[8, 8, 8, 8],
                    &[8, 16, 32, 64],
                    &[8, 16, 32, 128],
                    &[8, 16, 32, 256],
                    &[8, 16, 64, 128],
                    &[8, 16, 64, 256],
                    &[8, 16, 128, 256],
                    &[8, 32, 64, 128],
                    &[8, 32, 64, 256],
                    &[8, 32, 128, 256],
                    &[8, 64, 128, 256],
                ]
                .iter()
                .map(|hidden| [&[1][..], hidden, &[1]].concat())
                .collect(),
            ),
            ExperimentKind::ActivationError => {
                train.epochs = 3000;
                train.samples = SampleSpec::reference(1, Sampling::UniformRandom { count: 1024 });
                ParamGrid::Activations {
                    widths: vec![1, 32, 32, 1],
                    kinds: ActivationKind::all().to_vec(),
                    power: 3,
                    test_domain: [-20.0, 20.0],
                    test_points: 2001,
                }
            }
            ExperimentKind::ActivationTiming => ParamGrid::Timing {
                kinds: ActivationKind::all().to_vec(),
                iters: 1000,
                batch: 100_000,
            },
            ExperimentKind::BasisVerify => ParamGrid::Basis {
                half_width: 10.0,
                test_points: 2001,
                test_per_axis: 101,
            },
            ExperimentKind::Approx1d | ExperimentKind::Approx2d => {
                let suite: &[&str] = if self == ExperimentKind::Approx1d {
                    &SUITE_1D
                } else {
                    &SUITE_2D
                };
                ParamGrid::Targets {
                    names: suite.iter().map(|s| s.to_string()).collect(),
                    source: SourceKind::Network,
                    mapping: MappingOptions::default(),
                }
            }
            ExperimentKind::ExtrapolationDemo => {
                train.epochs = 3000;
                train.samples = SampleSpec {
                    domain: vec![[-10.0, 10.0]],
                    rule: Sampling::UniformRandom { count: 1000 },
                };
                ParamGrid::Extrapolation {
                    naive_widths: vec![1, 64, 64, 1],
                    naive_test: [-15.0, 15.0],
                    mapped_test: [-60.0, 60.0],
                    test_points: 2001,
                }
            }
        };
        ExperimentSpec {
            kind: self,
            seeds,
            train,
            grid,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownExperiment {
                name: s.to_string(),
                available: ExperimentKind::ALL.map(|k| k.name()).join(", "),
            })
    }
}

/// The parameter grid of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "grid", rename_all = "snake_case")]
pub enum ParamGrid {
    /// Every `(strategy, gain)` pair trains `widths` on a 2D target.
    Init {
        widths: Vec<usize>,
        activation: ActivationKind,
        target: String,
        cells: Vec<(InitKind, f64)>,
    },
    /// Nets trained on `x^power` over the training box, tested through the
    /// domain map on `test_domain` against the reference-space monomial.
    Archs {
        archs: Vec<Vec<usize>>,
        activation: ActivationKind,
        power: u32,
        test_domain: [f64; 2],
        test_points: usize,
    },
    Activations {
        widths: Vec<usize>,
        kinds: Vec<ActivationKind>,
        power: u32,
        test_domain: [f64; 2],
        test_points: usize,
    },
    Timing {
        kinds: Vec<ActivationKind>,
        iters: usize,
        batch: usize,
    },
    /// Every library net on `[-half_width, half_width]^d` through the map.
    Basis {
        half_width: f64,
        test_points: usize,
        test_per_axis: usize,
    },
    Targets {
        names: Vec<String>,
        source: SourceKind,
        mapping: MappingOptions,
    },
    Extrapolation {
        naive_widths: Vec<usize>,
        naive_test: [f64; 2],
        mapped_test: [f64; 2],
        test_points: usize,
    },
}

impl ParamGrid {
    fn arch_sweep(archs: Vec<Vec<usize>>) -> Self {
        ParamGrid::Archs {
            archs,
            activation: ActivationKind::Gelu,
            power: 3,
            test_domain: [-20.0, 20.0],
            test_points: 2001,
        }
    }

    fn len(&self) -> usize {
        match self {
            ParamGrid::Init { cells, .. } => cells.len(),
            ParamGrid::Archs { archs, .. } => archs.len(),
            ParamGrid::Activations { kinds, .. } | ParamGrid::Timing { kinds, .. } => kinds.len(),
            ParamGrid::Targets { names, .. } => names.len(),
            ParamGrid::Basis { .. } | ParamGrid::Extrapolation { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub seeds: Vec<u64>,
    /// Schedule and sampling of every trained cell; `seed` is replaced per cell.
    pub train: TrainConfig,
    pub grid: ParamGrid,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("experiment needs at least one seed".into()));
        }
        if self.grid.len() == 0 {
            return Err(Error::InvalidConfig(format!("{} grid is empty", self.kind)));
        }
        let expected = match self.kind {
            ExperimentKind::InitSensitivity => matches!(self.grid, ParamGrid::Init { .. }),
            ExperimentKind::WidthSweep | ExperimentKind::DepthSweep | ExperimentKind::MixedArchSweep => {
                matches!(self.grid, ParamGrid::Archs { .. })
            }
            ExperimentKind::ActivationError => matches!(self.grid, ParamGrid::Activations { .. }),
            ExperimentKind::ActivationTiming => matches!(self.grid, ParamGrid::Timing { .. }),
            ExperimentKind::BasisVerify => matches!(self.grid, ParamGrid::Basis { .. }),
            ExperimentKind::Approx1d | ExperimentKind::Approx2d => matches!(self.grid, ParamGrid::Targets { .. }),
            ExperimentKind::ExtrapolationDemo => matches!(self.grid, ParamGrid::Extrapolation { .. }),
        };
        if !expected {
            return Err(Error::InvalidConfig(format!(
                "grid does not fit experiment {}",
                self.kind
            )));
        }
        self.train.validate()
    }
}

/// Inputs an experiment may need beyond its spec.
#[derive(Debug, Clone, Copy)]
pub struct RunContext<'a> {
    /// Prebuilt libraries; the one matching the experiment's dimension is used.
    pub libraries: &'a [&'a BasisLibrary],
    /// Worker threads for independent cells.
    pub jobs: usize,
}

impl<'a> RunContext<'a> {
    pub fn new(libraries: &'a [&'a BasisLibrary], jobs: usize) -> Self {
        Self { libraries, jobs }
    }

    fn library(&self, dimension: usize) -> Option<&'a BasisLibrary> {
        self.libraries.iter().copied().find(|l| l.dimension == dimension)
    }
}

/// Runs `f(0..n)` on up to `jobs` threads; results keep index order.
pub fn run_pool<T: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let jobs = jobs.clamp(1, n.max(1));
    if jobs == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let value = f(i);
                slots.lock().expect("worker panicked")[i] = Some(value);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|v| v.expect("every cell ran"))
        .collect()
}

/// Runs the experiment described by `spec`.
pub fn run_experiment(spec: &ExperimentSpec, ctx: &RunContext<'_>) -> Result<ExperimentReport> {
    spec.validate()?;
    let cells = match &spec.grid {
        ParamGrid::Init { .. } => run_init_cells(spec, ctx),
        ParamGrid::Archs { .. } | ParamGrid::Activations { .. } => run_arch_cells(spec, ctx),
        ParamGrid::Timing { kinds, iters, batch } => {
            // timing stays on one thread so cells do not compete
            let mut cells = Vec::new();
            for &seed in &spec.seeds {
                for kind in kinds {
                    let mut cell = Cell::new(format!("{kind}-s{seed}"), Some(seed)).param("activation", kind);
                    cell.timing = Some(time_activation(*kind, *iters, *batch));
                    cells.push(cell);
                }
            }
            cells
        }
        ParamGrid::Basis { .. } => run_basis_verify(spec, ctx)?,
        ParamGrid::Targets { .. } => run_targets(spec, ctx)?,
        ParamGrid::Extrapolation { .. } => run_extrapolation(spec, ctx)?,
    };
    Ok(ExperimentReport {
        spec: spec.clone(),
        anchor: spec.kind.anchor().to_string(),
        env: Environment::capture(ctx.jobs),
        cells,
    })
}

/// [`run_experiment`] followed by writing the report to a fresh run directory.
pub fn run_to_dir(spec: &ExperimentSpec, ctx: &RunContext<'_>, out: &Path) -> Result<(ExperimentReport, PathBuf)> {
    let report = run_experiment(spec, ctx)?;
    let dir = new_run_dir(out, spec.kind.name(), report.env.started_unix)?;
    report.write_to(&dir)?;
    Ok((report, dir))
}

pub fn run_init_sensitivity(spec: &ExperimentSpec, ctx: &RunContext<'_>) -> Result<ExperimentReport> {
    expect_kind(spec, &[ExperimentKind::InitSensitivity])?;
    run_experiment(spec, ctx)
}

pub fn run_arch_sweep(spec: &ExperimentSpec, ctx: &RunContext<'_>) -> Result<ExperimentReport> {
    expect_kind(
        spec,
        &[
            ExperimentKind::WidthSweep,
            ExperimentKind::DepthSweep,
            ExperimentKind::MixedArchSweep,
        ],
    )?;
    run_experiment(spec, ctx)
}

/// Error runs of `spec` (an activation-error spec) followed by a timing pass
/// over the same activations.
pub fn run_activation_study(
    spec: &ExperimentSpec,
    timing_iters: usize,
    timing_batch: usize,
    ctx: &RunContext<'_>,
) -> Result<ExperimentReport> {
    expect_kind(spec, &[ExperimentKind::ActivationError])?;
    let mut report = run_experiment(spec, ctx)?;
    if let ParamGrid::Activations { kinds, .. } = &spec.grid {
        let timing = ExperimentSpec {
            kind: ExperimentKind::ActivationTiming,
            seeds: spec.seeds.clone(),
            train: spec.train.clone(),
            grid: ParamGrid::Timing {
                kinds: kinds.clone(),
                iters: timing_iters,
                batch: timing_batch,
            },
        };
        let timed = run_experiment(&timing, ctx)?;
        report.cells.extend(timed.cells.into_iter().map(|mut c| {
            c.id = format!("timing-{}", c.id);
            c
        }));
    }
    Ok(report)
}

/// Fits and evaluates every builtin suite target of the given dimension.
pub fn run_approximation_suite(dimension: usize, seeds: &[u64], ctx: &RunContext<'_>) -> Result<ExperimentReport> {
    let kind = match dimension {
        1 => ExperimentKind::Approx1d,
        2 => ExperimentKind::Approx2d,
        d => {
            return Err(Error::InvalidConfig(format!(
                "no approximation suite for dimension {d}"
            )))
        }
    };
    let mut spec = kind.default_spec();
    spec.seeds = seeds.to_vec();
    run_experiment(&spec, ctx)
}

pub fn run_extrapolation_demo(spec: &ExperimentSpec, ctx: &RunContext<'_>) -> Result<ExperimentReport> {
    expect_kind(spec, &[ExperimentKind::ExtrapolationDemo])?;
    run_experiment(spec, ctx)
}

fn expect_kind(spec: &ExperimentSpec, kinds: &[ExperimentKind]) -> Result<()> {
    if kinds.contains(&spec.kind) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "expected one of {:?}, got experiment {}",
            kinds.iter().map(|k| k.name()).collect::<Vec<_>>(),
            spec.kind
        )))
    }
}

fn widths_label(widths: &[usize]) -> String {
    widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join("-")
}

fn eval_points(arch: &Architecture, params: &crate::nn::ParamSet, x: &Batch) -> Result<Vec<f64>> {
    Ok(forward(params, arch, x)?.into_data())
}

fn run_init_cells(spec: &ExperimentSpec, ctx: &RunContext<'_>) -> Vec<Cell> {
    let ParamGrid::Init {
        widths,
        activation,
        target,
        cells,
    } = &spec.grid
    else {
        unreachable!("checked by validate")
    };
    let jobs: Vec<((InitKind, f64), u64)> = cells
        .iter()
        .flat_map(|&c| spec.seeds.iter().map(move |&s| (c, s)))
        .collect();
    run_pool(jobs.len(), ctx.jobs, |i| {
        let ((kind, gain), seed) = jobs[i];
        let cell = Cell::new(format!("{kind}-g{gain}-s{seed}"), Some(seed))
            .param("init", kind)
            .param("gain", gain)
            .param("arch", widths_label(widths));
        let run = || -> Result<Cell> {
            let target = builtin_target(target)?;
            let arch = Architecture::new(widths.clone(), *activation)?;
            let mut config = spec.train.clone();
            config.init = kind;
            config.init_gain = gain;
            config.seed = seed;
            config.samples.domain = target.domain.clone();
            let x = config.samples.generate(seed)?;
            let y: Vec<f64> = (0..x.rows()).map(|r| target.eval(x.row(r))).collect();
            let start = init_params(&arch, &config.init_strategy())?;
            let outcome = train(&start, &arch, &x, &y, &config)?;
            let grid = default_test_grid(&target.domain);
            let xt = grid.generate(0)?;
            let yt: Vec<f64> = (0..xt.rows()).map(|r| target.eval(xt.row(r))).collect();
            let pred = eval_points(&arch, &outcome.params, &xt)?;
            let mut cell = cell.clone();
            cell.metrics = Some(MetricsReport::compute(&yt, &pred)?.with_grid(crate::projection::describe_grid(&grid)));
            cell.values.insert(
                "final_train_mse".into(),
                *outcome.loss_history.last().unwrap_or(&f64::NAN),
            );
            cell.series = Some(Series::loss_curve(&outcome.loss_history));
            Ok(cell)
        };
        run().unwrap_or_else(|e| cell.clone().failed(&e))
    })
}

/// Reference-space evaluation of a net trained on `x^power`: test points are
/// mapped pointwise and the net's output is compared to `x_hat^power`. The
/// original-space error, after unmapping, is recorded as extra values.
fn mapped_monomial_metrics(
    arch: &Architecture,
    params: &crate::nn::ParamSet,
    power: u32,
    test_domain: [f64; 2],
    test_points: usize,
) -> Result<(MetricsReport, MetricsReport, Series)> {
    let grid = SampleSpec {
        domain: vec![test_domain],
        rule: Sampling::Grid { per_axis: test_points },
    };
    let x = grid.generate(0)?;
    let mapped = map_domain(&x, MappingMode::Pointwise, ExponentSharing::Shared)?;
    let pred_hat = eval_points(arch, params, &mapped.hat)?;
    let exact_hat: Vec<f64> = mapped.hat.data().iter().map(|v| v.powi(power as i32)).collect();
    let label = crate::projection::describe_grid(&grid);
    let reference = MetricsReport::compute(&exact_hat, &pred_hat)?.with_grid(format!("{label}, reference space"));
    let pred = (0..x.rows())
        .map(|i| mapped.unmap(i, &[power], pred_hat[i]))
        .collect::<Result<Vec<f64>>>()?;
    let exact: Vec<f64> = x.data().iter().map(|v| v.powi(power as i32)).collect();
    let original = MetricsReport::compute(&exact, &pred)?.with_grid(label);
    let series = Series {
        columns: vec!["x".into(), "f".into(), "pf".into()],
        rows: (0..x.rows()).map(|i| vec![x.data()[i], exact[i], pred[i]]).collect(),
    };
    Ok((reference, original, series))
}

/// Nets to train with their activation, then power, test domain and test point count.
type ArchRuns = (Vec<(Vec<usize>, ActivationKind)>, u32, [f64; 2], usize);

fn run_arch_cells(spec: &ExperimentSpec, ctx: &RunContext<'_>) -> Vec<Cell> {
    let (archs, power, test_domain, test_points): ArchRuns = match &spec.grid {
        ParamGrid::Archs {
            archs,
            activation,
            power,
            test_domain,
            test_points,
        } => (
            archs.iter().map(|a| (a.clone(), *activation)).collect(),
            *power,
            *test_domain,
            *test_points,
        ),
        ParamGrid::Activations {
            widths,
            kinds,
            power,
            test_domain,
            test_points,
        } => (
            kinds.iter().map(|&k| (widths.clone(), k)).collect(),
            *power,
            *test_domain,
            *test_points,
        ),
        _ => unreachable!("checked by validate"),
    };
    let by_activation = matches!(spec.grid, ParamGrid::Activations { .. });
    let jobs: Vec<(usize, u64)> = (0..archs.len())
        .flat_map(|a| spec.seeds.iter().map(move |&s| (a, s)))
        .collect();
    run_pool(jobs.len(), ctx.jobs, |i| {
        let (a, seed) = jobs[i];
        let (widths, activation) = &archs[a];
        let label = if by_activation {
            activation.to_string()
        } else {
            format!(
                "[{}]",
                widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
            )
        };
        let cell = Cell::new(
            format!(
                "{}-s{seed}",
                if by_activation {
                    activation.to_string()
                } else {
                    widths_label(widths)
                }
            ),
            Some(seed),
        )
        .param("net", label)
        .param("activation", activation)
        .param("arch", widths_label(widths));
        let run = || -> Result<Cell> {
            let arch = Architecture::new(widths.clone(), *activation)?;
            let mut config = spec.train.clone();
            config.seed = seed;
            let x = config.samples.generate(seed)?;
            let y: Vec<f64> = x.data().iter().map(|v| v.powi(power as i32)).collect();
            let start = init_params(&arch, &config.init_strategy())?;
            let outcome = train(&start, &arch, &x, &y, &config)?;
            let (reference, original, _) =
                mapped_monomial_metrics(&arch, &outcome.params, power, test_domain, test_points)?;
            let mut cell = cell.clone();
            cell.metrics = Some(reference);
            cell.values.insert(
                "final_train_mse".into(),
                *outcome.loss_history.last().unwrap_or(&f64::NAN),
            );
            cell.values.insert("original_mse".into(), original.mse);
            cell.values.insert("original_r_squared".into(), original.r2_or_nan());
            cell.series = Some(Series::loss_curve(&outcome.loss_history));
            Ok(cell)
        };
        run().unwrap_or_else(|e| cell.clone().failed(&e))
    })
}

fn run_basis_verify(spec: &ExperimentSpec, ctx: &RunContext<'_>) -> Result<Vec<Cell>> {
    let ParamGrid::Basis {
        half_width,
        test_points,
        test_per_axis,
    } = &spec.grid
    else {
        unreachable!("checked by validate")
    };
    if ctx.libraries.is_empty() {
        return Err(Error::InvalidConfig("basis-verify needs a basis library".into()));
    }
    let mut cells = Vec::new();
    for library in ctx.libraries {
        let d = library.dimension;
        let grid = SampleSpec {
            domain: vec![[-half_width, *half_width]; d],
            rule: Sampling::Grid {
                per_axis: if d == 1 { *test_points } else { *test_per_axis },
            },
        };
        let x = grid.generate(0)?;
        let mapped = map_domain(&x, MappingMode::Pointwise, ExponentSharing::Shared)?;
        let label = crate::projection::describe_grid(&grid);
        let nets: Vec<&crate::basis::BasisNet> = library.nets.iter().collect();
        cells.extend(run_pool(nets.len(), ctx.jobs, |i| {
            let net = nets[i];
            let cell = Cell::new(format!("{d}d-basis-{}", net.spec.to_string().replace(',', "_")), None)
                .param("basis", format!("({})", net.spec))
                .param("dimension", d);
            let run = || -> Result<Cell> {
                let hat = library.eval(&net.spec, &mapped.hat)?.values;
                let pred = (0..x.rows())
                    .map(|r| mapped.unmap(r, net.spec.powers(), hat[r]))
                    .collect::<Result<Vec<f64>>>()?;
                let exact: Vec<f64> = (0..x.rows()).map(|r| net.spec.eval_exact(x.row(r))).collect();
                let mut cell = cell.clone();
                cell.metrics = Some(MetricsReport::compute(&exact, &pred)?.with_grid(label.clone()));
                cell.values.insert("train_mse".into(), net.final_mse);
                Ok(cell)
            };
            run().unwrap_or_else(|e| cell.clone().failed(&e))
        }));
    }
    Ok(cells)
}

fn run_targets(spec: &ExperimentSpec, ctx: &RunContext<'_>) -> Result<Vec<Cell>> {
    let ParamGrid::Targets { names, source, mapping } = &spec.grid else {
        unreachable!("checked by validate")
    };
    let targets = names.iter().map(|n| builtin_target(n)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..targets.len())
        .flat_map(|t| spec.seeds.iter().map(move |&s| (t, s)))
        .collect();
    // resolve every basis up front so a missing library fails the run, not each cell
    for t in &targets {
        if *source == SourceKind::Network && ctx.library(t.dimension).is_none() {
            return Err(Error::InvalidConfig(format!(
                "target {} needs a {}D basis library",
                t.name, t.dimension
            )));
        }
    }
    Ok(run_pool(jobs.len(), ctx.jobs, |i| {
        let (t, seed) = jobs[i];
        let target = &targets[t];
        let degree = target.max_degree.unwrap_or(0);
        let cell = Cell::new(format!("{}-s{seed}", target.name), Some(seed))
            .param("target", target.name)
            .param("degree", degree)
            .param("source", source)
            .param("mapping", mapping.mode);
        let run = || -> Result<Cell> {
            let basis = match source {
                SourceKind::Network => Basis::Network(ctx.library(target.dimension).expect("checked above")),
                SourceKind::Oracle => Basis::Oracle {
                    dimension: target.dimension,
                },
            };
            let config = FitConfig {
                seed,
                mapping: *mapping,
                ..FitConfig::defaults(target.dimension)
            };
            let f = |p: &[f64]| target.eval(p);
            let model = fit(&basis, degree, &f, &target.domain, &config)?;
            let grid = default_test_grid(&target.domain);
            let metrics = evaluate_fit(&model, &basis, &f, &grid)?;
            let xt = grid.generate(0)?;
            let pf = crate::projection::predict(&model, &basis, &xt)?;
            let d = target.dimension;
            let mut columns: Vec<String> = if d == 1 {
                vec!["x".into()]
            } else {
                vec!["x1".into(), "x2".into()]
            };
            columns.extend(["f".to_string(), "pf".to_string()]);
            let rows = (0..xt.rows())
                .map(|r| {
                    let mut row = xt.row(r).to_vec();
                    row.push(target.eval(xt.row(r)));
                    row.push(pf[r]);
                    row
                })
                .collect();
            let mut cell = cell.clone();
            cell.metrics = Some(metrics);
            cell.values.insert("train_mse".into(), model.train_metrics.mse);
            cell.values.insert("rank".into(), model.rank as f64);
            cell.values.insert("condition".into(), model.condition_estimate);
            cell.series = Some(Series { columns, rows });
            Ok(cell)
        };
        run().unwrap_or_else(|e| cell.clone().failed(&e))
    }))
}

/// Mean of `y^2`, used to compare MSEs across grids of different scale.
fn normalized_mse(m: &MetricsReport, y: &[f64]) -> f64 {
    let power = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    m.mse / power
}

fn run_extrapolation(spec: &ExperimentSpec, ctx: &RunContext<'_>) -> Result<Vec<Cell>> {
    let ParamGrid::Extrapolation {
        naive_widths,
        naive_test,
        mapped_test,
        test_points,
    } = &spec.grid
    else {
        unreachable!("checked by validate")
    };
    let library = ctx.library(1);
    let cube = BasisSpec::one_d(3);
    let n_seeds = spec.seeds.len();
    Ok(run_pool(2 * n_seeds, ctx.jobs, |i| {
        let seed = spec.seeds[i % n_seeds];
        let naive = i < n_seeds;
        let arm = if naive { "naive" } else { "mapped" };
        let cell = Cell::new(format!("{arm}-s{seed}"), Some(seed)).param("arm", arm);
        let run = || -> Result<Cell> {
            let mut cell = cell.clone();
            if naive {
                let arch = Architecture::new(naive_widths.clone(), ActivationKind::Gelu)?;
                let mut config = spec.train.clone();
                config.seed = seed;
                let x = config.samples.generate(seed)?;
                let y: Vec<f64> = x.data().iter().map(|v| v * v * v).collect();
                let start = init_params(&arch, &config.init_strategy())?;
                let outcome = train(&start, &arch, &x, &y, &config)?;
                let grid = SampleSpec {
                    domain: vec![*naive_test],
                    rule: Sampling::Grid { per_axis: *test_points },
                };
                let xt = grid.generate(0)?;
                let yt: Vec<f64> = xt.data().iter().map(|v| v * v * v).collect();
                let pred = eval_points(&arch, &outcome.params, &xt)?;
                let m = MetricsReport::compute(&yt, &pred)?.with_grid(crate::projection::describe_grid(&grid));
                cell.values.insert("normalized_mse".into(), normalized_mse(&m, &yt));
                cell.values.insert(
                    "final_train_mse".into(),
                    *outcome.loss_history.last().unwrap_or(&f64::NAN),
                );
                cell.series = Some(Series {
                    columns: vec!["x".into(), "f".into(), "pf".into()],
                    rows: (0..xt.rows()).map(|r| vec![xt.data()[r], yt[r], pred[r]]).collect(),
                });
                cell = cell.param("arch", widths_label(naive_widths));
                cell.metrics = Some(m);
            } else {
                let (arch, params, source) = match library {
                    Some(lib) => {
                        let net = lib.get(&cube)?;
                        (lib.arch.clone(), net.params.clone(), "library")
                    }
                    None => {
                        let arch = Architecture::single_hidden(1, 1024, ActivationKind::Gelu)?;
                        let mut config = basis_train_config(1);
                        config.seed = seed;
                        let net = train_basis(&cube, &arch, &config, None, seed)?;
                        (arch, net.params, "trained")
                    }
                };
                let (_, original, series) = mapped_monomial_metrics(&arch, &params, 3, *mapped_test, *test_points)?;
                let yt = series.column("f").unwrap_or_default();
                cell.values
                    .insert("normalized_mse".into(), normalized_mse(&original, &yt));
                cell.series = Some(series);
                cell = cell.param("arch", widths_label(arch.widths())).param("net", source);
                cell.metrics = Some(original);
            }
            Ok(cell)
        };
        run().unwrap_or_else(|e| cell.clone().failed(&e))
    }))
}

/// Median of the finite values; failed or missing entries count as `+inf`.
pub fn median(values: impl IntoIterator<Item = Option<f64>>) -> f64 {
    let mut v: Vec<f64> = values
        .into_iter()
        .map(|x| x.filter(|x| !x.is_nan()).unwrap_or(f64::INFINITY))
        .collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl ExperimentReport {
    /// Median of `metric` over the cells selected by `filter`.
    pub fn median_where(&self, filter: impl Fn(&Cell) -> bool, metric: impl Fn(&Cell) -> Option<f64>) -> f64 {
        median(
            self.cells
                .iter()
                .filter(|c| filter(c))
                .map(|c| if c.error.is_some() { None } else { metric(c) }),
        )
    }
}
