//! The `basisnet` command line: `pretrain`, `approx`, `predict`, `bench`, `inspect`.
//!
//! Every flag may also come from `--config FILE` (flat `key = value`, keys are
//! flag names); flags given on the command line win. Exit status is 0 on
//! success, 1 for usage errors and 2 for runtime failures.

mod files;

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use files::{parse_domain, parse_points, ConfigFile, SampleFile};

use crate::basis::{
    extend_library, load_library, progressive_pretrain_with, save_library, BasisLibrary, BasisNet, PretrainOptions,
    MAGIC,
};
use crate::bench::{builtin_target, run_to_dir, ExperimentKind, ParamGrid, RunContext};
use crate::domain::MappingMode;
use crate::error::Error;
use crate::nn::{ActivationKind, Architecture, Batch, MetricsReport, Sampling};
use crate::projection::{
    default_test_grid, evaluate_fit, fit, fit_samples, predict, Basis, FitConfig, FitModel, MappingOptions, SourceKind,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "basisnet",
    version,
    about = "Pretrained neural polynomial bases and least-squares function approximation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a library of basis nets and write it to a file.
    Pretrain(PretrainArgs),
    /// Fit a target by least squares on a basis and write the fitted model.
    Approx(ApproxArgs),
    /// Evaluate a fitted model at new points.
    Predict(PredictArgs),
    /// Run a benchmark experiment and write its report tree.
    Bench(BenchArgs),
    /// Print the metadata of a library or model file.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Input dimension of the basis (1 or 2).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Highest total degree to train.
    #[arg(long)]
    pub max_degree: Option<u32>,
    /// Seed of the sample draw and the first net's weights.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Adam epochs per net.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Hidden activation (relu, sigmoid, tanh, mish, gelu, selu, celu).
    #[arg(long)]
    pub activation: Option<String>,
    /// Layer widths including input and output, e.g. 1,1024,1.
    #[arg(long)]
    pub arch: Option<String>,
    /// Nets above this training MSE are retried once, then rejected.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Unix time stored in the file header (default 0 keeps reruns byte-identical).
    #[arg(long)]
    pub created: Option<u64>,
    /// Continue the chain of an existing library instead of starting fresh.
    #[arg(long)]
    pub extend: Option<PathBuf>,
    /// Output library path [default: library-<dim>d.bin].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accepted for symmetry; a chain trains sequentially.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// key = value file supplying any of the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    /// Basis library (required for --basis-source network).
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Builtin target name, e.g. 1d-f5.
    #[arg(long)]
    pub target: Option<String>,
    /// Sample file with a header line and columns x[,y],f.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Total degree K of the fit.
    #[arg(long)]
    pub degree: Option<u32>,
    /// Fit domain a,b or a,b,c,d.
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<String>,
    /// pointwise or uniform.
    #[arg(long)]
    pub mapping: Option<String>,
    /// network or oracle (exact monomials).
    #[arg(long)]
    pub basis_source: Option<String>,
    /// Seed of the training sample draw.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output model path [default: fit.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model written by `approx`.
    #[arg(long)]
    pub model: PathBuf,
    /// Library the model was fitted with (network models only).
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Point file with a header line and columns x[,y].
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Evaluate on a tensor grid over this box instead of a point file.
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<String>,
    /// Nodes per axis for --domain [default: 2001 in 1D, 101 in 2D].
    #[arg(long)]
    pub grid: Option<usize>,
    /// Output CSV [default: standard output].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment kind, e.g. init-sensitivity or approx-1d.
    pub experiment: String,
    /// First seed; seeds run from here upwards.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of seeds per cell.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Activation for experiments with a single activation.
    #[arg(long)]
    pub activation: Option<String>,
    /// Layer widths replacing the experiment's architecture(s).
    #[arg(long)]
    pub arch: Option<String>,
    /// Basis libraries for basis-verify, approx-1d/2d and extrapolation-demo.
    #[arg(long)]
    pub library: Vec<PathBuf>,
    /// Basis source for approx-1d/2d: network or oracle.
    #[arg(long)]
    pub basis_source: Option<String>,
    /// pointwise or uniform, for approx-1d/2d.
    #[arg(long)]
    pub mapping: Option<String>,
    /// Root of the report tree [default: bench-out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent cells.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// A library (.bin) or model (.json) file.
    pub path: PathBuf,
}

/// Why a command failed, which decides the exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage(e: impl Display) -> Failure {
    Failure::Usage(e.to_string())
}

/// Flags merged with an optional config file.
struct Settings {
    file: ConfigFile,
}

impl Settings {
    fn load(path: Option<&Path>, allowed: &[&str]) -> std::result::Result<Self, Failure> {
        let file = match path {
            Some(p) => ConfigFile::load(p).map_err(usage)?,
            None => ConfigFile::default(),
        };
        file.check_keys(allowed).map_err(usage)?;
        Ok(Self { file })
    }

    fn pick<T: FromStr>(&self, key: &str, flag: Option<T>) -> std::result::Result<Option<T>, Failure>
    where
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(text) => text
                .parse()
                .map(Some)
                .map_err(|e| usage(format!("config key '{key}': {e}"))),
            None => Ok(None),
        }
    }

    fn pick_parsed<T>(
        &self,
        key: &str,
        flag: Option<String>,
        parse: impl Fn(&str) -> crate::Result<T>,
    ) -> std::result::Result<Option<T>, Failure> {
        match flag.as_deref().or(self.file.get(key)) {
            Some(text) => parse(text).map(Some).map_err(|e| usage(format!("--{key}: {e}"))),
            None => Ok(None),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Pretrain(a) => cmd_pretrain(a, out, err),
        Command::Approx(a) => cmd_approx(a, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Bench(a) => cmd_bench(a, out, err),
        Command::Inspect(a) => cmd_inspect(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}\n\nRun with --help for usage.");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                let _ = writeln!(err, "  caused by: {s}");
                source = s.source();
            }
            EXIT_RUNTIME
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(Error::io(path, e))
}

fn net_row(net: &BasisNet) -> String {
    format!(
        "{:>8}  {:>14}  {:>8}  {:>6}  {:>12.3e}",
        format!("({})", net.spec),
        net.provenance.to_string(),
        net.attempts,
        net.epochs_run,
        net.final_mse
    )
}

const NET_HEADER: &str = "   basis      provenance  attempts  epochs     train MSE";

pub fn cmd_pretrain(a: PretrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let s = Settings::load(
        a.config.as_deref(),
        &[
            "dim",
            "max-degree",
            "seed",
            "epochs",
            "lr",
            "activation",
            "arch",
            "tolerance",
            "created",
            "extend",
            "out",
            "jobs",
        ],
    )?;
    let max_degree = s
        .pick("max-degree", a.max_degree)?
        .ok_or_else(|| usage("pretrain needs --max-degree"))?;
    let extend: Option<PathBuf> = s.pick("extend", a.extend)?;

    let mut progress = |net: &BasisNet| {
        let _ = writeln!(err, "trained {}", net_row(net).trim_start());
    };
    let (library, dim) = if let Some(base) = &extend {
        let lib = load_library(base)?;
        let dim = lib.dimension;
        if let Some(d) = s.pick::<usize>("dim", a.dim)? {
            if d != dim {
                return Err(usage(format!(
                    "--dim {d} does not match the {dim}D library being extended"
                )));
            }
        }
        for (key, given) in [
            ("epochs", a.epochs.is_some()),
            ("lr", a.lr.is_some()),
            ("seed", a.seed.is_some()),
            ("arch", a.arch.is_some()),
            ("activation", a.activation.is_some()),
        ] {
            if given {
                return Err(usage(format!(
                    "--{key} cannot change an existing library; extension reuses its stored options"
                )));
            }
        }
        (extend_library(lib, max_degree, &mut progress)?, dim)
    } else {
        let dim: usize = s.pick("dim", a.dim)?.ok_or_else(|| usage("pretrain needs --dim"))?;
        if !(1..=2).contains(&dim) {
            return Err(usage(format!("--dim must be 1 or 2, got {dim}")));
        }
        let mut opts = PretrainOptions::defaults(dim)?;
        if let Some(widths) = s.pick_parsed("arch", a.arch, Architecture::parse_widths)? {
            opts.arch = Architecture::new(widths, opts.arch.activation()).map_err(usage)?;
        }
        if let Some(act) = s.pick_parsed("activation", a.activation, ActivationKind::from_str)? {
            opts.arch = Architecture::new(opts.arch.widths().to_vec(), act).map_err(usage)?;
        }
        if let Some(seed) = s.pick("seed", a.seed)? {
            opts.config.seed = seed;
        }
        if let Some(epochs) = s.pick("epochs", a.epochs)? {
            opts.config.epochs = epochs;
        }
        if let Some(lr) = s.pick("lr", a.lr)? {
            opts.config.learning_rate = lr;
        }
        if let Some(tol) = s.pick("tolerance", a.tolerance)? {
            opts.tolerance = tol;
        }
        if let Some(created) = s.pick("created", a.created)? {
            opts.created_unix = created;
        }
        opts.validate(dim).map_err(usage)?;
        (progressive_pretrain_with(dim, max_degree, &opts, &mut progress)?, dim)
    };

    let path: PathBuf = s
        .pick("out", a.out)?
        .or(extend)
        .unwrap_or_else(|| PathBuf::from(format!("library-{dim}d.bin")));
    save_library(&library, &path)?;
    writeln!(out, "{NET_HEADER}").map_err(io_err(&path))?;
    for net in &library.nets {
        writeln!(out, "{}", net_row(net)).map_err(io_err(&path))?;
    }
    writeln!(
        out,
        "wrote {} ({} nets, dimension {dim}, max degree {max_degree}, id {})",
        path.display(),
        library.len(),
        &library.id()[..16]
    )
    .map_err(io_err(&path))?;
    Ok(())
}

fn load_basis_library(path: Option<&Path>, needed: SourceKind) -> std::result::Result<Option<BasisLibrary>, Failure> {
    match (needed, path) {
        (SourceKind::Network, Some(p)) => Ok(Some(load_library(p)?)),
        (SourceKind::Network, None) => Err(usage("the network basis source needs --library")),
        (SourceKind::Oracle, _) => Ok(None),
    }
}

fn metrics_line(label: &str, m: &MetricsReport) -> String {
    let r2 = m
        .r_squared
        .map(|r| format!("{r:.10}"))
        .unwrap_or_else(|| "undefined".into());
    format!("{label:<6} MSE {:.6e}  R^2 {r2}  ({})", m.mse, m.grid)
}

pub fn cmd_approx(a: ApproxArgs, out: &mut dyn Write) -> Outcome {
    let s = Settings::load(
        a.config.as_deref(),
        &[
            "library",
            "target",
            "samples",
            "degree",
            "domain",
            "mapping",
            "basis-source",
            "seed",
            "out",
        ],
    )?;
    let source = s
        .pick_parsed("basis-source", a.basis_source, SourceKind::from_str)?
        .unwrap_or(SourceKind::Network);
    let mode = s
        .pick_parsed("mapping", a.mapping, MappingMode::from_str)?
        .unwrap_or_default();
    let domain_flag = s.pick_parsed("domain", a.domain, parse_domain)?;
    let target_name: Option<String> = s.pick("target", a.target)?;
    let samples_path: Option<PathBuf> = s.pick("samples", a.samples)?;
    let seed = s.pick("seed", a.seed)?.unwrap_or(0);
    let library_path: Option<PathBuf> = s.pick("library", a.library)?;
    let path: PathBuf = s.pick("out", a.out)?.unwrap_or_else(|| PathBuf::from("fit.json"));
    let degree_flag: Option<u32> = s.pick("degree", a.degree)?;

    let library = load_basis_library(library_path.as_deref(), source)?;
    let mapping = MappingOptions {
        mode,
        ..MappingOptions::default()
    };

    let (model, basis_dim, test, target_label) = match (&target_name, &samples_path) {
        (Some(_), Some(_)) => return Err(usage("give either --target or --samples, not both")),
        (None, None) => return Err(usage("approx needs --target NAME or --samples FILE")),
        (Some(name), None) => {
            let target = builtin_target(name).map_err(usage)?;
            let domain = domain_flag.unwrap_or_else(|| target.domain.clone());
            if domain.len() != target.dimension {
                return Err(usage(format!(
                    "target {name} is {}D but --domain has {} intervals",
                    target.dimension,
                    domain.len()
                )));
            }
            let degree = degree_flag
                .or(target.max_degree)
                .ok_or_else(|| usage(format!("target {name} has no default degree; pass --degree")))?;
            let basis = make_basis(library.as_ref(), source, target.dimension);
            let config = FitConfig {
                seed,
                mapping,
                ..FitConfig::defaults(target.dimension)
            };
            let f = |p: &[f64]| target.eval(p);
            let model = fit(&basis, degree, &f, &domain, &config)?;
            let test = evaluate_fit(&model, &basis, &f, &default_test_grid(&domain))?;
            (
                model,
                target.dimension,
                Some(test),
                format!("{name}: {}", target.formula),
            )
        }
        (None, Some(file)) => {
            let samples = SampleFile::load(file).map_err(usage)?;
            let d = samples.points.cols();
            let domain = domain_flag.unwrap_or_else(|| samples.bounding_box());
            if domain.len() != d {
                return Err(usage(format!(
                    "sample file is {d}D but --domain has {} intervals",
                    domain.len()
                )));
            }
            let degree = degree_flag.ok_or_else(|| usage("fitting a sample file needs --degree"))?;
            let basis = make_basis(library.as_ref(), source, d);
            let model = fit_samples(&basis, degree, &samples.points, &samples.values, &domain, mapping)?;
            (model, d, None, format!("samples from {}", file.display()))
        }
    };

    std::fs::write(&path, model.to_text()?).map_err(io_err(&path))?;
    let metrics_path = path.with_extension("metrics.json");
    let echo = json!({
        "settings": {
            "target": target_name,
            "samples": samples_path,
            "degree": model.degrees.max_degree,
            "domain": model.domain,
            "mapping": mode.to_string(),
            "basis_source": source.to_string(),
            "library": library_path,
            "library_id": model.library_id,
            "seed": seed,
            "dimension": basis_dim,
        },
        "train": model.train_metrics,
        "test": test,
    });
    std::fs::write(
        &metrics_path,
        serde_json::to_string_pretty(&echo).map_err(Error::from)? + "\n",
    )
    .map_err(io_err(&metrics_path))?;

    let w = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(io_err(&path));
    w(out, format!("target {target_label}"))?;
    w(
        out,
        format!("degree {}  basis {}  mapping {mode}", model.degrees.max_degree, source),
    )?;
    w(out, metrics_line("train", &model.train_metrics))?;
    if let Some(t) = &test {
        w(out, metrics_line("test", t))?;
    }
    if model.rank_warning {
        w(
            out,
            format!(
                "warning: design matrix rank {} < {} columns",
                model.rank,
                model.coefficients.len()
            ),
        )?;
    }
    if model.ill_conditioned {
        w(
            out,
            format!("warning: condition estimate {:.3e}", model.condition_estimate),
        )?;
    }
    w(out, format!("wrote {} and {}", path.display(), metrics_path.display()))?;
    Ok(())
}

fn make_basis(library: Option<&BasisLibrary>, source: SourceKind, dimension: usize) -> Basis<'_> {
    match (source, library) {
        (SourceKind::Network, Some(lib)) => Basis::Network(lib),
        _ => Basis::Oracle { dimension },
    }
}

pub fn cmd_predict(a: PredictArgs, out: &mut dyn Write) -> Outcome {
    let text = std::fs::read_to_string(&a.model).map_err(io_err(&a.model))?;
    let model = FitModel::from_text(&text)?;
    let library = load_basis_library(a.library.as_deref(), model.source)?;
    let basis = make_basis(library.as_ref(), model.source, model.dimension());
    let d = model.dimension();
    let x: Batch = match (&a.points, &a.domain) {
        (Some(_), Some(_)) => return Err(usage("give either --points or --domain, not both")),
        (Some(p), None) => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            parse_points(&text, d).map_err(usage)?
        }
        (None, domain) => {
            let domain = match domain {
                Some(t) => parse_domain(t).map_err(usage)?,
                None => model.domain.clone(),
            };
            if domain.len() != d {
                return Err(usage(format!(
                    "model is {d}D but --domain has {} intervals",
                    domain.len()
                )));
            }
            let mut grid = default_test_grid(&domain);
            if let Some(n) = a.grid {
                grid.rule = Sampling::Grid { per_axis: n };
            }
            grid.generate(0).map_err(usage)?
        }
    };
    let values = predict(&model, &basis, &x)?;
    let mut text = String::from(if d == 1 { "x,pf\n" } else { "x1,x2,pf\n" });
    for (r, v) in values.iter().enumerate() {
        let coords: Vec<String> = x.row(r).iter().map(|c| c.to_string()).collect();
        text.push_str(&format!("{},{v}\n", coords.join(",")));
    }
    match &a.out {
        Some(p) => {
            std::fs::write(p, text).map_err(io_err(p))?;
            writeln!(out, "wrote {} predictions to {}", values.len(), p.display()).map_err(io_err(p))?;
        }
        None => out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))?,
    }
    Ok(())
}

pub fn cmd_bench(a: BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let s = Settings::load(
        a.config.as_deref(),
        &[
            "seed",
            "seeds",
            "epochs",
            "lr",
            "activation",
            "arch",
            "library",
            "basis-source",
            "mapping",
            "out",
            "jobs",
        ],
    )?;
    let kind: ExperimentKind = a.experiment.parse().map_err(usage)?;
    let mut spec = kind.default_spec();
    let first = s.pick("seed", a.seed)?.unwrap_or(0);
    let count = s.pick("seeds", a.seeds)?.unwrap_or(spec.seeds.len());
    spec.seeds = (first..first + count as u64).collect();
    if let Some(epochs) = s.pick("epochs", a.epochs)? {
        spec.train.epochs = epochs;
    }
    if let Some(lr) = s.pick("lr", a.lr)? {
        spec.train.learning_rate = lr;
    }
    let activation = s.pick_parsed("activation", a.activation, ActivationKind::from_str)?;
    let arch = s.pick_parsed("arch", a.arch, Architecture::parse_widths)?;
    let source = s.pick_parsed("basis-source", a.basis_source, SourceKind::from_str)?;
    let mode = s.pick_parsed("mapping", a.mapping, MappingMode::from_str)?;
    match &mut spec.grid {
        ParamGrid::Init {
            widths,
            activation: act,
            ..
        } => {
            if let Some(w) = arch {
                *widths = w;
            }
            if let Some(x) = activation {
                *act = x;
            }
        }
        ParamGrid::Archs {
            archs, activation: act, ..
        } => {
            if let Some(w) = arch {
                *archs = vec![w];
            }
            if let Some(x) = activation {
                *act = x;
            }
        }
        ParamGrid::Activations { widths, kinds, .. } => {
            if let Some(w) = arch {
                *widths = w;
            }
            if let Some(x) = activation {
                *kinds = vec![x];
            }
        }
        ParamGrid::Timing { kinds, .. } => {
            if let Some(x) = activation {
                *kinds = vec![x];
            }
        }
        ParamGrid::Targets {
            source: src, mapping, ..
        } => {
            if let Some(x) = source {
                *src = x;
            }
            if let Some(m) = mode {
                mapping.mode = m;
            }
        }
        ParamGrid::Extrapolation { naive_widths, .. } => {
            if let Some(w) = arch {
                *naive_widths = w;
            }
        }
        ParamGrid::Basis { .. } => {}
    }
    spec.validate().map_err(usage)?;

    let mut library_paths = a.library.clone();
    if library_paths.is_empty() {
        if let Some(list) = s.file.get("library") {
            library_paths = list.split(',').map(|p| PathBuf::from(p.trim())).collect();
        }
    }
    let libraries = library_paths
        .iter()
        .map(load_library)
        .collect::<crate::Result<Vec<BasisLibrary>>>()?;
    let refs: Vec<&BasisLibrary> = libraries.iter().collect();
    let jobs = s.pick("jobs", a.jobs)?.unwrap_or(1).max(1);
    let root: PathBuf = s.pick("out", a.out)?.unwrap_or_else(|| PathBuf::from("bench-out"));

    let _ = writeln!(
        err,
        "running {kind} over {} seed(s) with {jobs} job(s)",
        spec.seeds.len()
    );
    let (report, dir) = run_to_dir(&spec, &RunContext::new(&refs, jobs), &root)?;
    let w = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(io_err(&dir));
    w(
        out,
        format!("{:<28} {:>13} {:>14} {:>13}", "cell", "MSE", "R^2", "rel L2"),
    )?;
    for cell in &report.cells {
        let line = match (&cell.metrics, &cell.timing, &cell.error) {
            (_, _, Some(e)) => format!("{:<28} failed: {e}", cell.id),
            (Some(m), _, _) => format!(
                "{:<28} {:>13.4e} {:>14.8} {:>13.4e}",
                cell.id,
                m.mse,
                m.r2_or_nan(),
                m.rel_l2_or_nan()
            ),
            (None, Some(t), _) => format!(
                "{:<28} forward {:>10.3} ms  backward {:>10.3} ms",
                cell.id,
                t.forward_ns as f64 / 1e6,
                t.backward_ns as f64 / 1e6
            ),
            _ => cell.id.clone(),
        };
        w(out, line)?;
    }
    w(out, format!("report: {}", dir.display()))?;
    Ok(())
}

pub fn cmd_inspect(a: InspectArgs, out: &mut dyn Write) -> Outcome {
    let bytes = std::fs::read(&a.path).map_err(io_err(&a.path))?;
    let w = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(io_err(&a.path));
    if bytes.starts_with(MAGIC) {
        let lib = load_library(&a.path)?;
        w(out, format!("library {}", a.path.display()))?;
        w(out, format!("dimension      {}", lib.dimension))?;
        w(out, format!("max degree     {}", lib.max_degree))?;
        w(out, format!("nets           {}", lib.len()))?;
        w(
            out,
            format!("architecture   {:?} {}", lib.arch.widths(), lib.arch.activation()),
        )?;
        w(out, format!("config digest  {}", lib.config_digest))?;
        w(out, format!("created        {}", lib.created_unix))?;
        w(out, format!("tolerance      {:e}", lib.tolerance))?;
        w(
            out,
            format!(
                "training       {} epochs, lr {:e}, seed {}, {} samples",
                lib.config.epochs,
                lib.config.learning_rate,
                lib.config.seed,
                lib.config.samples.count()
            ),
        )?;
        w(out, NET_HEADER.to_string())?;
        for net in &lib.nets {
            w(out, net_row(net))?;
        }
    } else {
        let text = String::from_utf8(bytes).map_err(|_| {
            Failure::Runtime(Error::Malformed(format!(
                "{} is neither a library nor a model",
                a.path.display()
            )))
        })?;
        let model = FitModel::from_text(&text)?;
        w(out, format!("model {}", a.path.display()))?;
        w(out, format!("dimension      {}", model.dimension()))?;
        w(out, format!("degree         {}", model.degrees.max_degree))?;
        w(out, format!("basis source   {}", model.source))?;
        w(
            out,
            format!("library id     {}", model.library_id.as_deref().unwrap_or("-")),
        )?;
        w(out, format!("mapping        {}", model.mapping.mode))?;
        w(out, format!("domain         {:?}", model.domain))?;
        w(
            out,
            format!("rank           {} of {}", model.rank, model.coefficients.len()),
        )?;
        w(out, format!("condition      {:.3e}", model.condition_estimate))?;
        w(out, metrics_line("train", &model.train_metrics))?;
        for (spec, c) in model.degrees.specs().iter().zip(&model.coefficients) {
            w(out, format!("  alpha({spec}) = {c:e}"))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
