//! Least-squares projection `Pf(x) = sum_k alpha_k phi_k(x)` onto mapped basis nets.
//!
//! Each design-matrix column is built by mapping the samples into the
//! reference box, evaluating the basis there (trained net or exact monomial)
//! and unmapping with `10^(k s)`.

use serde::{Deserialize, Serialize};

use crate::basis::{BasisLibrary, BasisSpec};
use crate::domain::{map_domain, ExponentSharing, MappingMode};
use crate::error::{Error, Result};
use crate::linalg::{solve_least_squares, LeastSquaresSolution, DEFAULT_RCOND};
use crate::nn::{Batch, MetricsReport, SampleSpec, Sampling};

/// Condition estimates above this mark a fit as ill-conditioned.
pub const CONDITION_WARNING: f64 = 1e12;

/// Where basis values come from.
#[derive(Debug, Clone, Copy)]
pub enum Basis<'a> {
    Network(&'a BasisLibrary),
    /// Exact monomials, pushed through the same map/unmap pipeline.
    Oracle {
        dimension: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Network,
    Oracle,
}

impl std::fmt::Display for SourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SourceKind::Network => "network",
            SourceKind::Oracle => "oracle",
        })
    }
}

impl std::str::FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "network" => Ok(SourceKind::Network),
            "oracle" => Ok(SourceKind::Oracle),
            other => Err(Error::Parse(format!(
                "unknown basis source '{other}' (expected network or oracle)"
            ))),
        }
    }
}

impl Basis<'_> {
    pub fn dimension(&self) -> usize {
        match self {
            Basis::Network(lib) => lib.dimension,
            Basis::Oracle { dimension } => *dimension,
        }
    }

    pub fn kind(&self) -> SourceKind {
        match self {
            Basis::Network(_) => SourceKind::Network,
            Basis::Oracle { .. } => SourceKind::Oracle,
        }
    }

    fn library_id(&self) -> Option<String> {
        match self {
            Basis::Network(lib) => Some(lib.id().to_string()),
            Basis::Oracle { .. } => None,
        }
    }

    fn values(&self, spec: &BasisSpec, x_hat: &Batch) -> Result<Vec<f64>> {
        match self {
            Basis::Network(lib) => Ok(lib.eval(spec, x_hat)?.values),
            Basis::Oracle { .. } => Ok((0..x_hat.rows()).map(|r| spec.eval_exact(x_hat.row(r))).collect()),
        }
    }
}

/// Every monomial of total degree at most `max_degree`, in graded order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSet {
    pub dimension: usize,
    pub max_degree: u32,
    specs: Vec<BasisSpec>,
}

impl DegreeSet {
    pub fn full(dimension: usize, max_degree: u32) -> Result<Self> {
        Ok(Self {
            dimension,
            max_degree,
            specs: BasisSpec::graded(dimension, max_degree)?,
        })
    }

    pub fn specs(&self) -> &[BasisSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Fails unless `basis` can supply every member.
    pub fn check(&self, basis: &Basis<'_>) -> Result<()> {
        if basis.dimension() != self.dimension {
            return Err(Error::InvalidConfig(format!(
                "{}D degree set against a {}D basis",
                self.dimension,
                basis.dimension()
            )));
        }
        if let Basis::Network(lib) = basis {
            if self.max_degree > lib.max_degree {
                return Err(Error::DegreeTooHigh {
                    requested: self.max_degree as usize,
                    available: lib.max_degree as usize,
                });
            }
        }
        Ok(())
    }
}

/// How samples are mapped before the basis is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MappingOptions {
    pub mode: MappingMode,
    pub sharing: ExponentSharing,
}

/// `Phi[i][k] = 10^(deg(k) s_i) * phi_hat_k(x_hat_i)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub points: Batch,
}

impl DesignMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `Phi * alpha`.
    pub fn apply(&self, alpha: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(alpha).map(|(a, b)| a * b).sum())
            .collect()
    }
}

pub fn build_design_matrix(
    basis: &Basis<'_>,
    degrees: &DegreeSet,
    points: &Batch,
    mapping: MappingOptions,
) -> Result<DesignMatrix> {
    degrees.check(basis)?;
    if points.cols() != degrees.dimension {
        return Err(Error::ShapeMismatch {
            expected: format!("{}-dimensional points", degrees.dimension),
            got: format!("{} columns", points.cols()),
        });
    }
    let mapped = map_domain(points, mapping.mode, mapping.sharing)?;
    let (rows, cols) = (points.rows(), degrees.len());
    let mut data = vec![0.0; rows * cols];
    for (k, spec) in degrees.specs().iter().enumerate() {
        let hat_values = basis.values(spec, &mapped.hat)?;
        for (i, &v) in hat_values.iter().enumerate() {
            let value = mapped
                .unmap(i, spec.powers(), v)
                .map_err(|_| Error::Range(format!("unmapping basis {spec} at point {:?} overflows", points.row(i))))?;
            if !value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "basis {spec} at point {:?} evaluates to {value}",
                    points.row(i)
                )));
            }
            data[i * cols + k] = value;
        }
    }
    Ok(DesignMatrix {
        rows,
        cols,
        data,
        points: points.clone(),
    })
}

/// Pivoted-QR least squares on the design matrix.
pub fn solve_coefficients(design: &DesignMatrix, y: &[f64]) -> Result<LeastSquaresSolution> {
    solve_least_squares(&design.data, design.rows, design.cols, y, DEFAULT_RCOND)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Training samples over the fit domain; the domain itself comes from the caller.
    pub sampling: Sampling,
    pub mapping: MappingOptions,
    pub seed: u64,
}

impl FitConfig {
    /// 1000 uniform random points in 1D, a 50x50 grid in 2D.
    pub fn defaults(dimension: usize) -> Self {
        Self {
            sampling: if dimension == 1 {
                Sampling::UniformRandom { count: 1000 }
            } else {
                Sampling::Grid { per_axis: 50 }
            },
            mapping: MappingOptions::default(),
            seed: 0,
        }
    }
}

/// A fitted projection and how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    pub degrees: DegreeSet,
    pub coefficients: Vec<f64>,
    pub mapping: MappingOptions,
    pub source: SourceKind,
    /// Identifier of the basis library, `None` for the exact-monomial source.
    pub library_id: Option<String>,
    pub domain: Vec<[f64; 2]>,
    pub train_metrics: MetricsReport,
    pub residual_norm: f64,
    pub rank: usize,
    pub condition_estimate: f64,
    /// Some columns were numerically dependent and got zero coefficients.
    pub rank_warning: bool,
    /// The condition estimate exceeds [`CONDITION_WARNING`].
    pub ill_conditioned: bool,
}

/// Format tag written at the top of exported models.
pub const MODEL_FORMAT: &str = "basisnet-fit/1";

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    format: String,
    #[serde(flatten)]
    model: FitModel,
}

impl FitModel {
    /// Self-describing JSON text; floats are written in shortest round-trip form.
    pub fn to_text(&self) -> Result<String> {
        let record = ModelRecord {
            format: MODEL_FORMAT.to_string(),
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&record)? + "\n")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let record: ModelRecord =
            serde_json::from_str(text).map_err(|e| Error::Malformed(format!("fit model: {e}")))?;
        if record.format != MODEL_FORMAT {
            return Err(Error::Malformed(format!(
                "fit model format '{}', expected '{MODEL_FORMAT}'",
                record.format
            )));
        }
        let m = record.model;
        if m.coefficients.len() != m.degrees.len() || m.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Malformed("coefficients do not match the degree set".into()));
        }
        Ok(m)
    }

    pub fn dimension(&self) -> usize {
        self.degrees.dimension
    }

    fn check_basis(&self, basis: &Basis<'_>) -> Result<()> {
        if basis.kind() != self.source || basis.library_id() != self.library_id {
            return Err(Error::LibraryMismatch {
                expected: describe(self.source, self.library_id.as_deref()),
                got: describe(basis.kind(), basis.library_id().as_deref()),
            });
        }
        Ok(())
    }
}

fn describe(kind: SourceKind, id: Option<&str>) -> String {
    match (kind, id) {
        (SourceKind::Oracle, _) => "exact monomials".to_string(),
        (SourceKind::Network, Some(id)) => id.chars().take(16).collect(),
        (SourceKind::Network, None) => "network (unknown)".to_string(),
    }
}

/// Samples `target` over `domain` per `config` and fits degree `max_degree`.
pub fn fit(
    basis: &Basis<'_>,
    max_degree: u32,
    target: &dyn Fn(&[f64]) -> f64,
    domain: &[[f64; 2]],
    config: &FitConfig,
) -> Result<FitModel> {
    let spec = SampleSpec {
        domain: domain.to_vec(),
        rule: config.sampling,
    };
    let x = spec.generate(config.seed)?;
    let y: Vec<f64> = (0..x.rows()).map(|r| target(x.row(r))).collect();
    fit_samples(basis, max_degree, &x, &y, domain, config.mapping)
}

/// Fits given samples; `domain` is recorded in the model.
pub fn fit_samples(
    basis: &Basis<'_>,
    max_degree: u32,
    x: &Batch,
    y: &[f64],
    domain: &[[f64; 2]],
    mapping: MappingOptions,
) -> Result<FitModel> {
    let degrees = DegreeSet::full(basis.dimension(), max_degree)?;
    if y.len() != x.rows() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} target values", x.rows()),
            got: format!("{}", y.len()),
        });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("target value at sample {i} is {}", y[i])));
    }
    let design = build_design_matrix(basis, &degrees, x, mapping)?;
    let sol = solve_coefficients(&design, y)?;
    let fitted = design.apply(&sol.coefficients);
    let train_metrics = MetricsReport::compute(y, &fitted)?.with_grid(format!("{} training samples", x.rows()));
    Ok(FitModel {
        degrees,
        rank_warning: sol.rank_deficient(),
        ill_conditioned: sol.condition_estimate > CONDITION_WARNING,
        coefficients: sol.coefficients,
        mapping,
        source: basis.kind(),
        library_id: basis.library_id(),
        domain: domain.to_vec(),
        train_metrics,
        residual_norm: sol.residual_norm,
        rank: sol.rank,
        condition_estimate: sol.condition_estimate,
    })
}

/// `Pf(x)` at every row of `x`.
pub fn predict(model: &FitModel, basis: &Basis<'_>, x: &Batch) -> Result<Vec<f64>> {
    model.check_basis(basis)?;
    let design = build_design_matrix(basis, &model.degrees, x, model.mapping)?;
    Ok(design.apply(&model.coefficients))
}

/// Held-out grid used by default: 2001 points in 1D, 101x101 in 2D.
pub fn default_test_grid(domain: &[[f64; 2]]) -> SampleSpec {
    SampleSpec {
        domain: domain.to_vec(),
        rule: Sampling::Grid {
            per_axis: if domain.len() == 1 { 2001 } else { 101 },
        },
    }
}

/// Metrics of `model` against `target` on `grid`, which is recorded in the report.
pub fn evaluate_fit(
    model: &FitModel,
    basis: &Basis<'_>,
    target: &dyn Fn(&[f64]) -> f64,
    grid: &SampleSpec,
) -> Result<MetricsReport> {
    let x = grid
        .generate(0)
        .map_err(|e| Error::InvalidConfig(format!("evaluation grid: {e}")))?;
    let y: Vec<f64> = (0..x.rows()).map(|r| target(x.row(r))).collect();
    let y_hat = predict(model, basis, &x)?;
    Ok(MetricsReport::compute(&y, &y_hat)?.with_grid(describe_grid(grid)))
}

pub fn describe_grid(grid: &SampleSpec) -> String {
    let domain: Vec<String> = grid.domain.iter().map(|[a, b]| format!("[{a},{b}]")).collect();
    match grid.rule {
        Sampling::Grid { per_axis } => format!("grid {per_axis} per axis on {}", domain.join("x")),
        Sampling::UniformRandom { count } => format!("{count} uniform samples on {}", domain.join("x")),
    }
}
