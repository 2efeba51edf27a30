//! Experiment configs, the run pipeline, and consolidated reports.
//!
//! A run writes `trace.csv`, `directions.csv` and `summary.json` into its
//! output directory. Every measured quantity that has a pass/fail meaning is
//! recorded as a [`Contract`]; the run passes iff all of them do.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{
    self, cluster_directions, direction_sequences, max_angular_gap, no_zigzag_check, AsymptoticsError, DirectionKind,
    DirectionOptions, DirectionSet,
};
use crate::exact::{self, ExactError, IdentityResult};
use crate::fejer::{audit_fejer_inequalities, default_fejer_tol, fejer_violation, iterate, FejerError, IterationTrace};
use crate::operators::{orthogonality_defect, OperatorError, OperatorSpec, Theta};
use crate::sets::{Constraint, ConvexSetSpec, SetError};
use crate::vectorspace::{Matrix, Vector, VectorError};

pub const OUT_ENV: &str = "FEJERLAB_OUT";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("computation failed: {0}")]
    Computation(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("summary {path}: {message}")]
    Summary { path: PathBuf, message: String },
}

impl ExperimentError {
    /// Process exit code for this error family; 1 is reserved for failed
    /// contracts.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::Computation(_) => 3,
            Self::Io { .. } => 4,
            Self::Summary { .. } => 5,
        }
    }

    fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

macro_rules! computation_from {
    ($($t:ty),*) => {$(
        impl From<$t> for ExperimentError {
            fn from(e: $t) -> Self {
                Self::Computation(e.to_string())
            }
        }
    )*};
}

computation_from!(
    FejerError,
    AsymptoticsError,
    OperatorError,
    SetError,
    VectorError,
    ExactError
);

/// A real number written either as a JSON number or as a decimal string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Real {
    Num(f64),
    Text(String),
}

impl Real {
    pub fn value(&self, field: &str) -> Result<f64, ExperimentError> {
        let v = match self {
            Self::Num(v) => *v,
            Self::Text(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| ExperimentError::config(field, format!("`{s}` is not a decimal number")))?,
        };
        if !v.is_finite() {
            return Err(ExperimentError::config(field, "value must be finite"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Rotation,
    Skew,
    Shift,
    Project,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnsConfig {
    pub num: i64,
    pub den: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaConfig {
    Turns(TurnsConfig),
    Radians(Real),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub a: Vec<Real>,
    pub b: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetConfig {
    Singleton { point: Vec<Real> },
    Ball { center: Vec<Real>, radius: Real },
    Box { lo: Vec<Real>, hi: Vec<Real> },
    Polyhedron { rows: Vec<ConstraintConfig> },
    Hull { points: Vec<Vec<Real>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    PlanarRotationAveraged { theta: ThetaConfig },
    SkewResolvent { a: Vec<Vec<Real>> },
    RightShiftAveraged { trunc: usize },
    LinearResolvent { m: Vec<Vec<Real>> },
    Projection { set: SetConfig },
    KmAveraged { base: Box<OperatorConfig>, lambda: Real },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZbarConfig {
    /// `"auto"` (final trace point) or `"origin"`.
    Named(String),
    Point(Vec<Real>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub tail_fraction: f64,
    pub epsilon: f64,
    pub active_tol: f64,
    pub residual_tol: f64,
    pub ncone_tol: f64,
    pub zigzag_tol: f64,
    pub orthogonality_tol: f64,
    pub audit_tol: f64,
    pub max_gap_deg: f64,
    pub fejer_samples: usize,
    pub audit_starts: usize,
    pub audit_window: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            tail_fraction: asymptotics::DEFAULT_TAIL_FRACTION,
            epsilon: asymptotics::DEFAULT_EPSILON,
            active_tol: asymptotics::DEFAULT_ACTIVE_TOL,
            residual_tol: 1e-6,
            ncone_tol: 1e-4,
            zigzag_tol: 1e-6,
            orthogonality_tol: 1e-12,
            audit_tol: 1e-10,
            max_gap_deg: 10.0,
            fejer_samples: 32,
            audit_starts: 32,
            audit_window: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsConfig {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub operator: Option<OperatorConfig>,
    #[serde(default)]
    pub x0: Option<Vec<Real>>,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub stop_tol: Option<Real>,
    #[serde(default)]
    pub z: Option<SetConfig>,
    #[serde(default)]
    pub zbar: Option<ZbarConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub exact: bool,
    /// Largest index for exact identities; defaults to `max_steps` for the
    /// shift and to 200 for the oracle.
    #[serde(default)]
    pub max_n: Option<u64>,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ExperimentError> {
    if text.trim().is_empty() {
        return Err(ExperimentError::config("experiment", "config document is empty"));
    }
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        let field = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.contains("field"))
            .unwrap_or("<document>")
            .to_string();
        ExperimentError::config(field, msg)
    })?;
    validate_analysis(&cfg.analysis)?;
    Ok(cfg)
}

fn validate_analysis(a: &AnalysisConfig) -> Result<(), ExperimentError> {
    if !(a.tail_fraction > 0.0 && a.tail_fraction <= 1.0) {
        return Err(ExperimentError::config("analysis.tail_fraction", "must lie in (0, 1]"));
    }
    let positive = [
        ("analysis.epsilon", a.epsilon),
        ("analysis.active_tol", a.active_tol),
        ("analysis.residual_tol", a.residual_tol),
        ("analysis.ncone_tol", a.ncone_tol),
        ("analysis.zigzag_tol", a.zigzag_tol),
        ("analysis.orthogonality_tol", a.orthogonality_tol),
        ("analysis.audit_tol", a.audit_tol),
        ("analysis.max_gap_deg", a.max_gap_deg),
    ];
    for (field, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ExperimentError::config(field, "must be positive and finite"));
        }
    }
    if a.audit_window == 0 {
        return Err(ExperimentError::config("analysis.audit_window", "must be at least 1"));
    }
    Ok(())
}

fn reals(values: &[Real], field: &str) -> Result<Vec<f64>, ExperimentError> {
    values
        .iter()
        .enumerate()
        .map(|(i, r)| r.value(&format!("{field}[{i}]")))
        .collect()
}

fn vector(values: &[Real], field: &str) -> Result<Vector<f64>, ExperimentError> {
    Vector::new(reals(values, field)?).map_err(|e| ExperimentError::config(field, e.to_string()))
}

fn matrix(rows: &[Vec<Real>], field: &str) -> Result<Matrix<f64>, ExperimentError> {
    let rows = rows
        .iter()
        .enumerate()
        .map(|(i, r)| reals(r, &format!("{field}[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    Matrix::from_rows(rows).map_err(|e| ExperimentError::config(field, e.to_string()))
}

pub fn build_set(cfg: &SetConfig, field: &str) -> Result<ConvexSetSpec<f64>, ExperimentError> {
    let bad = |e: SetError| ExperimentError::config(field, e.to_string());
    match cfg {
        SetConfig::Singleton { point } => Ok(ConvexSetSpec::singleton(vector(point, &format!("{field}.point"))?)),
        SetConfig::Ball { center, radius } => ConvexSetSpec::ball(
            vector(center, &format!("{field}.center"))?,
            radius.value(&format!("{field}.radius"))?,
        )
        .map_err(bad),
        SetConfig::Box { lo, hi } => {
            ConvexSetSpec::boxed(vector(lo, &format!("{field}.lo"))?, vector(hi, &format!("{field}.hi"))?).map_err(bad)
        }
        SetConfig::Polyhedron { rows } => {
            let rows = rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let f = format!("{field}.rows[{i}]");
                    Ok(Constraint {
                        a: vector(&r.a, &format!("{f}.a"))?,
                        b: r.b.value(&format!("{f}.b"))?,
                    })
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?;
            ConvexSetSpec::polyhedron(rows).map_err(bad)
        }
        SetConfig::Hull { points } => {
            let pts = points
                .iter()
                .enumerate()
                .map(|(i, p)| vector(p, &format!("{field}.points[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            ConvexSetSpec::hull(pts).map_err(bad)
        }
    }
}

pub fn build_operator(cfg: &OperatorConfig, field: &str) -> Result<OperatorSpec<f64>, ExperimentError> {
    let bad = |e: OperatorError| ExperimentError::config(field, e.to_string());
    match cfg {
        OperatorConfig::PlanarRotationAveraged { theta } => {
            let theta = match theta {
                ThetaConfig::Turns(t) => Theta::turns(t.num, t.den).map_err(bad)?,
                ThetaConfig::Radians(r) => Theta::Radians(r.value(&format!("{field}.theta.radians"))?),
            };
            Ok(OperatorSpec::rotation(theta))
        }
        OperatorConfig::SkewResolvent { a } => {
            OperatorSpec::skew_resolvent(matrix(a, &format!("{field}.a"))?).map_err(bad)
        }
        OperatorConfig::RightShiftAveraged { trunc } => OperatorSpec::right_shift(*trunc).map_err(bad),
        OperatorConfig::LinearResolvent { m } => {
            OperatorSpec::linear_resolvent(matrix(m, &format!("{field}.m"))?).map_err(bad)
        }
        OperatorConfig::Projection { set } => Ok(OperatorSpec::projection(build_set(set, &format!("{field}.set"))?)),
        OperatorConfig::KmAveraged { base, lambda } => OperatorSpec::km(
            build_operator(base, &format!("{field}.base"))?,
            lambda.value(&format!("{field}.lambda"))?,
        )
        .map_err(bad),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub name: String,
    /// `"<="`, `"<"`, `">="`, `"=="`, or `"holds"`.
    pub relation: String,
    pub measured: Option<f64>,
    pub threshold: Option<f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Contract {
    fn at_most(name: &str, measured: f64, threshold: f64) -> Self {
        Self::compare(name, "<=", measured, threshold, measured <= threshold)
    }

    fn below(name: &str, measured: f64, threshold: f64) -> Self {
        Self::compare(name, "<", measured, threshold, measured < threshold)
    }

    fn at_least(name: &str, measured: f64, threshold: f64) -> Self {
        Self::compare(name, ">=", measured, threshold, measured >= threshold)
    }

    fn equal(name: &str, measured: f64, expected: f64) -> Self {
        Self::compare(name, "==", measured, expected, measured == expected)
    }

    fn compare(name: &str, relation: &str, measured: f64, threshold: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            relation: relation.into(),
            measured: finite(measured),
            threshold: finite(threshold),
            pass,
            detail: (!measured.is_finite()).then(|| format!("measured {measured}")),
        }
    }

    fn identity(prefix: &str, id: &IdentityResult) -> Self {
        Self {
            name: format!("{prefix}{}", id.name),
            relation: "holds".into(),
            measured: None,
            threshold: None,
            pass: id.pass,
            detail: id.first_failure.clone(),
        }
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub audits: usize,
    pub min_consecutive: f64,
    pub max_abs_expansion_residual: f64,
    pub min_cauchy_schwarz: f64,
    pub min_telescoped: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub records: usize,
    pub clusters: usize,
    pub cluster_sizes: Vec<usize>,
    pub representatives: Vec<Vec<f64>>,
    pub max_angular_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSummary {
    pub skipped_step: usize,
    pub skipped_limit: usize,
    pub step_diff: Option<KindSummary>,
    pub to_limit: Option<KindSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoZigzagSummary {
    pub limit_dir: Vec<f64>,
    pub max_dev_stepdiff: f64,
    pub max_dev_tolimit: f64,
    pub final_dev_stepdiff: f64,
    pub final_dev_tolimit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationOracle {
    pub k: i64,
    pub l: i64,
    pub count: usize,
    /// Directions as reduced fractions of a full turn.
    pub angles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OracleSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<RotationOracle>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub identities: Vec<IdentityResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub experiment: ExperimentKind,
    pub seed: Option<u64>,
    pub operator: Option<String>,
    pub dim: Option<usize>,
    pub steps: Option<usize>,
    pub stop_reason: Option<String>,
    pub zbar: Option<Vec<f64>>,
    pub fejer_violation_max: Option<f64>,
    pub fejer_points_sampled: usize,
    pub fejer_audit: Option<AuditSummary>,
    pub directions: Option<DirectionSummary>,
    /// Cluster count of the approach directions.
    pub clusters: Option<usize>,
    pub max_angular_gap: Option<f64>,
    pub limsup_polar_residual: Option<f64>,
    pub ncone_tail_mean: Option<f64>,
    pub no_zigzag: Option<NoZigzagSummary>,
    pub orthogonality_max: Option<f64>,
    pub oracle: Option<OracleSummary>,
    pub contracts: Vec<Contract>,
    pub pass: bool,
}

impl Summary {
    pub fn contract(&self, name: &str) -> Option<&Contract> {
        self.contracts.iter().find(|c| c.name == name)
    }
}

fn require<T: Clone>(value: &Option<T>, field: &str, kind: ExperimentKind) -> Result<T, ExperimentError> {
    value
        .clone()
        .ok_or_else(|| ExperimentError::config(field, format!("required for {kind:?} experiments").to_lowercase()))
}

fn check_operator_kind(kind: ExperimentKind, op: &OperatorSpec<f64>) -> Result<(), ExperimentError> {
    let ok = match kind {
        ExperimentKind::Rotation => matches!(op, OperatorSpec::PlanarRotationAveraged { .. }),
        ExperimentKind::Skew => matches!(op, OperatorSpec::SkewResolvent { .. }),
        ExperimentKind::Shift => matches!(op, OperatorSpec::RightShiftAveraged { .. }),
        ExperimentKind::Project => true,
        ExperimentKind::Oracle => false,
    };
    if ok {
        Ok(())
    } else {
        Err(ExperimentError::config(
            "operator",
            format!("`{}` does not match the experiment kind", op.name()),
        ))
    }
}

/// Runs a config and writes its artifacts into `out_dir`.
pub fn run(cfg: &ExperimentConfig, name: &str, out_dir: &Path) -> Result<Summary, ExperimentError> {
    let summary = if cfg.experiment == ExperimentKind::Oracle {
        run_oracle(cfg, name)?
    } else {
        run_trace(cfg, name, out_dir)?
    };
    write_file(out_dir, "summary.json", |buf| {
        serde_json::to_writer_pretty(&mut *buf, &summary).map_err(std::io::Error::other)?;
        buf.push(b'\n');
        Ok(())
    })?;
    Ok(summary)
}

fn write_file(
    dir: &Path,
    file: &str,
    fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let path = dir.join(file);
    let mut buf = Vec::new();
    fill(&mut buf).map_err(|e| ExperimentError::io(&path, e))?;
    fs::write(&path, buf).map_err(|e| ExperimentError::io(&path, e))
}

fn run_oracle(cfg: &ExperimentConfig, name: &str) -> Result<Summary, ExperimentError> {
    let report = exact::oracle_report(cfg.max_n.unwrap_or(200));
    let contracts = report
        .identities
        .iter()
        .map(|id| Contract::identity("oracle:", id))
        .collect::<Vec<_>>();
    let pass = contracts.iter().all(|c| c.pass);
    Ok(Summary {
        name: name.into(),
        experiment: cfg.experiment,
        seed: cfg.seed,
        operator: None,
        dim: None,
        steps: None,
        stop_reason: None,
        zbar: None,
        fejer_violation_max: None,
        fejer_points_sampled: 0,
        fejer_audit: None,
        directions: None,
        clusters: None,
        max_angular_gap: None,
        limsup_polar_residual: None,
        ncone_tail_mean: None,
        no_zigzag: None,
        orthogonality_max: None,
        oracle: Some(OracleSummary {
            rotation: None,
            identities: report.identities,
        }),
        contracts,
        pass,
    })
}

fn run_trace(cfg: &ExperimentConfig, name: &str, out_dir: &Path) -> Result<Summary, ExperimentError> {
    let kind = cfg.experiment;
    let op = build_operator(&require(&cfg.operator, "operator", kind)?, "operator")?;
    check_operator_kind(kind, &op)?;
    let seed = require(&cfg.seed, "seed", kind)?;
    let max_steps = require(&cfg.max_steps, "max_steps", kind)?;
    let x0 = match (&cfg.x0, &op) {
        (Some(x0), _) => vector(x0, "x0")?,
        (None, OperatorSpec::RightShiftAveraged { trunc }) => Vector::basis(*trunc, 0),
        (None, _) => {
            return Err(ExperimentError::config(
                "x0",
                "required unless the operator is the right shift",
            ))
        }
    };
    if let Some(d) = op.dim() {
        if d != x0.dim() {
            return Err(ExperimentError::config(
                "x0",
                format!("dimension {} does not match operator dimension {d}", x0.dim()),
            ));
        }
    }
    let stop_tol = match &cfg.stop_tol {
        Some(r) => r.value("stop_tol")?,
        None => crate::fejer::DEFAULT_STOP_TOL,
    };
    if stop_tol < 0.0 {
        return Err(ExperimentError::config("stop_tol", "must be non-negative"));
    }
    let z_set = match &cfg.z {
        Some(z) => build_set(z, "z")?,
        None if kind == ExperimentKind::Project => {
            return Err(ExperimentError::config("z", "required for project experiments"))
        }
        None => ConvexSetSpec::singleton(Vector::zeros(x0.dim())),
    };
    if z_set.dim() != x0.dim() {
        return Err(ExperimentError::config(
            "z",
            format!("dimension {} does not match x0 dimension {}", z_set.dim(), x0.dim()),
        ));
    }

    let trace = iterate(&op, &x0, max_steps, stop_tol)?;
    let zbar = match &cfg.zbar {
        None => trace.last().clone(),
        Some(ZbarConfig::Named(s)) if s == "auto" => trace.last().clone(),
        Some(ZbarConfig::Named(s)) if s == "origin" => Vector::zeros(x0.dim()),
        Some(ZbarConfig::Named(s)) => {
            return Err(ExperimentError::config(
                "zbar",
                format!("expected \"auto\", \"origin\" or a point, got `{s}`"),
            ))
        }
        Some(ZbarConfig::Point(p)) => {
            let p = vector(p, "zbar")?;
            if p.dim() != x0.dim() {
                return Err(ExperimentError::config("zbar", "dimension does not match x0"));
            }
            p
        }
    };
    let a = &cfg.analysis;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut contracts = Vec::new();

    // Fejér monotonicity against sampled points of Z
    let samples = sample_set(&z_set, &trace, a.fejer_samples, &mut rng)?;
    let fejer_tol = default_fejer_tol(&trace);
    let mut violation_max = f64::NEG_INFINITY;
    for z in &samples {
        violation_max = violation_max.max(fejer_violation(&trace, z)?);
    }
    contracts.push(Contract::at_most("fejer_violation_max", violation_max, fejer_tol));

    let fejer_audit = audit(&trace, &samples, &zbar, a, &mut rng)?;
    if let Some(audit) = &fejer_audit {
        let worst = audit
            .min_consecutive
            .min(audit.min_cauchy_schwarz)
            .min(audit.min_telescoped);
        contracts.push(Contract::at_least("fejer_audit_min_slack", worst, -a.audit_tol));
        contracts.push(Contract::at_most(
            "fejer_audit_expansion_residual",
            audit.max_abs_expansion_residual,
            a.audit_tol,
        ));
    }

    let opts = DirectionOptions {
        stop_tol,
        active_tol: a.active_tol,
    };
    let dirs = direction_sequences(&trace, &zbar, &z_set, &opts)?;
    let directions = summarize_directions(&dirs, a)?;
    let limsup = asymptotics::tail_polar_residual(&dirs, a.tail_fraction)?;
    contracts.push(Contract::at_most("limsup_polar_residual", limsup, a.residual_tol));
    let ncone_tail_mean = asymptotics::tail_ncone_mean(&dirs, a.tail_fraction)?;
    if let Some(mean) = ncone_tail_mean {
        contracts.push(Contract::at_most("ncone_tail_mean", mean, a.ncone_tol));
    }
    let no_zigzag = match no_zigzag_check(&trace, &zbar, &z_set, &opts, a.tail_fraction) {
        Ok(r) => Some(NoZigzagSummary {
            limit_dir: r.limit_dir.coords().to_vec(),
            max_dev_stepdiff: r.max_dev_stepdiff,
            max_dev_tolimit: r.max_dev_tolimit,
            final_dev_stepdiff: r.final_dev_stepdiff,
            final_dev_tolimit: r.final_dev_tolimit,
        }),
        Err(AsymptoticsError::Set(
            SetError::NotARay { .. } | SetError::Unsupported(_) | SetError::ZbarNotInSet { .. },
        )) => None,
        Err(e) => return Err(e.into()),
    };
    if let Some(nz) = &no_zigzag {
        contracts.push(Contract::at_most(
            "no_zigzag_final_dev_stepdiff",
            nz.final_dev_stepdiff,
            a.zigzag_tol,
        ));
        contracts.push(Contract::at_most(
            "no_zigzag_final_dev_tolimit",
            nz.final_dev_tolimit,
            a.zigzag_tol,
        ));
    }

    let orthogonality_max = match kind {
        ExperimentKind::Rotation | ExperimentKind::Skew | ExperimentKind::Shift => {
            let mut worst = 0.0f64;
            for x in &trace.points()[..trace.len() - 1] {
                worst = worst.max(orthogonality_defect(&op, x)?);
            }
            contracts.push(Contract::at_most("orthogonality_max", worst, a.orthogonality_tol));
            Some(worst)
        }
        _ => None,
    };

    let clusters = directions.to_limit.as_ref().map(|k| k.clusters);
    let max_gap = directions.to_limit.as_ref().and_then(|k| k.max_angular_gap);
    let mut oracle = None;
    if let OperatorSpec::PlanarRotationAveraged { theta } = &op {
        match theta {
            Theta::Turns(q) => {
                let exact = exact::rational_rotation_cluster_count(*q.numer(), *q.denom())?;
                let angles = exact
                    .angles
                    .iter()
                    .map(|a| format!("{}/{}", a.numer(), a.denom()))
                    .collect();
                contracts.push(Contract::equal(
                    "rotation_cluster_count",
                    clusters.unwrap_or(0) as f64,
                    exact.count as f64,
                ));
                oracle = Some(OracleSummary {
                    rotation: Some(RotationOracle {
                        k: *q.numer(),
                        l: *q.denom(),
                        count: exact.count,
                        angles,
                    }),
                    identities: Vec::new(),
                });
            }
            Theta::Radians(_) => {
                contracts.push(Contract::below(
                    "max_angular_gap_deg",
                    max_gap.unwrap_or(f64::INFINITY),
                    a.max_gap_deg,
                ));
            }
        }
    }
    if kind == ExperimentKind::Shift && cfg.exact {
        let ids = exact::shift_identities(cfg.max_n.unwrap_or(max_steps as u64));
        contracts.extend(ids.iter().map(|id| Contract::identity("exact:", id)));
        oracle.get_or_insert_with(OracleSummary::default).identities = ids;
    }

    write_file(out_dir, "trace.csv", |buf| trace.write_csv(buf))?;
    write_file(out_dir, "directions.csv", |buf| dirs.write_csv(buf, x0.dim()))?;

    let pass = contracts.iter().all(|c| c.pass);
    Ok(Summary {
        name: name.into(),
        experiment: kind,
        seed: Some(seed),
        operator: Some(op.name().into()),
        dim: Some(x0.dim()),
        steps: Some(trace.len() - 1),
        stop_reason: Some(trace.stop_reason().as_str().into()),
        zbar: Some(zbar.coords().to_vec()),
        fejer_violation_max: finite(violation_max),
        fejer_points_sampled: samples.len(),
        fejer_audit,
        directions: Some(directions),
        clusters,
        max_angular_gap: max_gap,
        limsup_polar_residual: finite(limsup),
        ncone_tail_mean,
        no_zigzag,
        orthogonality_max,
        oracle,
        contracts,
        pass,
    })
}

/// Points of `Z` used as Fejér candidates: the set itself when it is a
/// singleton, otherwise projections of seeded uniform points from a box
/// around the trace, plus the projections of the first and last iterates.
fn sample_set(
    z_set: &ConvexSetSpec<f64>,
    trace: &IterationTrace<f64>,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vector<f64>>, ExperimentError> {
    if let ConvexSetSpec::Singleton(c) = z_set {
        return Ok(vec![c.clone()]);
    }
    let radius = 2.0 * (1.0 + trace.points()[0].norm());
    let mut out = vec![z_set.project(&trace.points()[0])?, z_set.project(trace.last())?];
    for _ in 0..count {
        let coords: Vec<f64> = (0..trace.dim()).map(|_| rng.gen_range(-radius..=radius)).collect();
        out.push(z_set.project(&Vector::new(coords)?)?);
    }
    Ok(out)
}

/// Seeded sweep over `n < m ≤ n + window` for up to four Fejér points.
fn audit(
    trace: &IterationTrace<f64>,
    samples: &[Vector<f64>],
    zbar: &Vector<f64>,
    a: &AnalysisConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Option<AuditSummary>, ExperimentError> {
    let len = trace.len();
    if len < 2 {
        return Ok(None);
    }
    let mut starts = vec![0, len - 2];
    starts.extend((0..a.audit_starts).map(|_| rng.gen_range(0..len - 1)));
    starts.sort_unstable();
    starts.dedup();
    let mut s = AuditSummary {
        audits: 0,
        min_consecutive: f64::INFINITY,
        max_abs_expansion_residual: 0.0,
        min_cauchy_schwarz: f64::INFINITY,
        min_telescoped: f64::INFINITY,
    };
    for z in samples.iter().take(4) {
        for &n in &starts {
            for m in n + 1..=(n + a.audit_window).min(len - 1) {
                let slack = audit_fejer_inequalities(trace, z, zbar, n, m, f64::INFINITY)?;
                s.audits += 1;
                s.min_consecutive = s.min_consecutive.min(slack.consecutive);
                s.max_abs_expansion_residual = s.max_abs_expansion_residual.max(slack.expansion_residual.abs());
                s.min_cauchy_schwarz = s.min_cauchy_schwarz.min(slack.cauchy_schwarz);
                s.min_telescoped = s.min_telescoped.min(slack.telescoped);
            }
        }
    }
    Ok(Some(s))
}

fn summarize_directions(dirs: &DirectionSet<f64>, a: &AnalysisConfig) -> Result<DirectionSummary, ExperimentError> {
    let kind_summary = |kind| -> Result<Option<KindSummary>, ExperimentError> {
        let recs = dirs.of_kind(kind);
        if recs.is_empty() {
            return Ok(None);
        }
        let c = cluster_directions(&recs, a.tail_fraction, a.epsilon)?;
        let gap = if recs[0].dir.dim() == 2 {
            Some(max_angular_gap(&recs, a.tail_fraction)?)
        } else {
            None
        };
        Ok(Some(KindSummary {
            records: recs.len(),
            clusters: c.len(),
            cluster_sizes: c.counts.clone(),
            representatives: c.representatives.iter().map(|r| r.coords().to_vec()).collect(),
            max_angular_gap: gap,
        }))
    };
    Ok(DirectionSummary {
        skipped_step: dirs.skipped_step,
        skipped_limit: dirs.skipped_limit,
        step_diff: kind_summary(DirectionKind::StepDiff)?,
        to_limit: kind_summary(DirectionKind::ToLimit)?,
    })
}

/// Output directory precedence: explicit flag, then `FEJERLAB_OUT`, then the
/// config's `outputs.dir`, then `out/<name>`.
pub fn resolve_out_dir(flag: Option<&Path>, env: Option<&str>, cfg: &ExperimentConfig, name: &str) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(e) = env.filter(|e| !e.is_empty()) {
        return PathBuf::from(e).join(name);
    }
    match &cfg.outputs.dir {
        Some(d) => PathBuf::from(d),
        None => PathBuf::from("out").join(name),
    }
}

pub fn load_config(path: &Path) -> Result<(ExperimentConfig, String), ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    let cfg = parse_config(&text)?;
    let name = cfg.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "experiment".into())
    });
    Ok((cfg, name))
}

/// Loads and runs a config file, resolving the output directory.
pub fn run_path(path: &Path, out_flag: Option<&Path>) -> Result<(Summary, PathBuf), ExperimentError> {
    let (cfg, name) = load_config(path)?;
    let env = std::env::var(OUT_ENV).ok();
    let out = resolve_out_dir(out_flag, env.as_deref(), &cfg, &name);
    Ok((run(&cfg, &name, &out)?, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub summary: String,
    pub experiment: ExperimentKind,
    pub contract: Contract,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub entries: Vec<ReportEntry>,
    pub failed: Vec<String>,
    pub pass: bool,
}

impl Report {
    pub fn from_summaries(summaries: &[Summary]) -> Self {
        let mut entries = Vec::new();
        for s in summaries {
            for c in &s.contracts {
                entries.push(ReportEntry {
                    summary: s.name.clone(),
                    experiment: s.experiment,
                    contract: c.clone(),
                });
            }
        }
        let failed: Vec<String> = entries
            .iter()
            .filter(|e| !e.contract.pass)
            .map(|e| format!("{}: {}", e.summary, e.contract.name))
            .collect();
        let pass = failed.is_empty() && summaries.iter().all(|s| s.pass) && !summaries.is_empty();
        Self { entries, failed, pass }
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into());
        for e in &self.entries {
            let c = &e.contract;
            let line = format!(
                "{:<4}  {:<20} {:<34} {:>14} {:>5} {:>14}",
                if c.pass { "PASS" } else { "FAIL" },
                e.summary,
                c.name,
                fmt(c.measured),
                c.relation,
                fmt(c.threshold),
            );
            out.push_str(line.trim_end());
            if let Some(d) = &c.detail {
                out.push_str("  (");
                out.push_str(d);
                out.push(')');
            }
            out.push('\n');
        }
        out.push_str(&format!("overall: {}\n", if self.pass { "PASS" } else { "FAIL" }));
        for f in &self.failed {
            out.push_str(&format!("failed: {f}\n"));
        }
        out
    }
}

pub fn read_summary(path: &Path) -> Result<Summary, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::Summary {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| ExperimentError::Summary {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn report(paths: &[PathBuf]) -> Result<Report, ExperimentError> {
    let summaries = paths.iter().map(|p| read_summary(p)).collect::<Result<Vec<_>, _>>()?;
    Ok(Report::from_summaries(&summaries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        parse_config(text).unwrap()
    }

    fn run_in_temp(text: &str) -> (Summary, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let s = run(&cfg(text), "t", dir.path()).unwrap();
        (s, dir)
    }

    const ROTATION: &str = r#"{
        "experiment": "rotation",
        "operator": {"type": "planar_rotation_averaged", "theta": {"turns": {"num": 1, "den": 5}}},
        "x0": [1, 0], "max_steps": 2000, "stop_tol": 0, "zbar": "origin",
        "analysis": {"epsilon": 1e-3}, "seed": 7
    }"#;

    #[test]
    fn empty_config_is_a_config_error() {
        let err = parse_config("").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = parse_config("{}").unwrap_err();
        assert!(
            matches!(&err, ExperimentError::Config { field, .. } if field == "experiment"),
            "{err}"
        );
    }

    #[test]
    fn config_errors_name_the_field() {
        let err = parse_config(r#"{"experiment": "rotation", "bogus": 1}"#).unwrap_err();
        assert!(
            matches!(&err, ExperimentError::Config { field, .. } if field == "bogus"),
            "{err}"
        );
        let err = parse_config(r#"{"experiment": "rotation", "analysis": {"tail_fraction": 2}}"#).unwrap_err();
        assert!(matches!(&err, ExperimentError::Config { field, .. } if field == "analysis.tail_fraction"));
        let c = cfg(
            r#"{"experiment": "skew", "operator": {"type": "skew_resolvent", "a": [["0","x"],["-1","0"]]},
                       "x0": [1, 0], "max_steps": 3, "seed": 1}"#,
        );
        let err = run(&c, "t", tempfile::tempdir().unwrap().path()).unwrap_err();
        assert!(
            matches!(&err, ExperimentError::Config { field, .. } if field == "operator.a[0][1]"),
            "{err}"
        );
        let c = cfg(
            r#"{"experiment": "rotation", "operator": {"type": "planar_rotation_averaged",
                       "theta": {"radians": 1}}, "x0": [1, 0], "max_steps": 3}"#,
        );
        let err = run(&c, "t", tempfile::tempdir().unwrap().path()).unwrap_err();
        assert!(matches!(&err, ExperimentError::Config { field, .. } if field == "seed"));
    }

    #[test]
    fn operator_must_match_experiment() {
        let c = cfg(
            r#"{"experiment": "skew", "operator": {"type": "planar_rotation_averaged",
                       "theta": {"radians": 1}}, "x0": [1, 0], "max_steps": 3, "seed": 1}"#,
        );
        let err = run(&c, "t", tempfile::tempdir().unwrap().path()).unwrap_err();
        assert!(matches!(&err, ExperimentError::Config { field, .. } if field == "operator"));
    }

    #[test]
    fn theta_forms_are_distinct() {
        let turns: ThetaConfig = serde_json::from_str(r#"{"turns": {"num": 1, "den": 5}}"#).unwrap();
        assert_eq!(turns, ThetaConfig::Turns(TurnsConfig { num: 1, den: 5 }));
        let rad: ThetaConfig = serde_json::from_str(r#"{"radians": "1.0"}"#).unwrap();
        assert_eq!(rad, ThetaConfig::Radians(Real::Text("1.0".into())));
        assert!(serde_json::from_str::<ThetaConfig>("1.2566").is_err());
    }

    #[test]
    fn rotation_reports_five_clusters() {
        let (s, dir) = run_in_temp(ROTATION);
        assert_eq!(s.clusters, Some(5));
        assert_eq!(s.oracle.as_ref().unwrap().rotation.as_ref().unwrap().count, 5);
        assert!(s.pass, "{:#?}", s.contracts);
        for f in ["trace.csv", "directions.csv", "summary.json"] {
            assert!(dir.path().join(f).exists());
        }
    }

    #[test]
    fn shift_exact_identities_pass() {
        let (s, _dir) = run_in_temp(
            r#"{"experiment": "shift", "operator": {"type": "right_shift_averaged", "trunc": 80},
               "max_steps": 60, "stop_tol": 0, "zbar": "origin", "exact": true, "seed": 3}"#,
        );
        let ids = &s.oracle.as_ref().unwrap().identities;
        assert_eq!(ids.len(), 5);
        assert!(ids.iter().all(|i| i.pass));
        assert!(s.pass, "{:#?}", s.contracts);
    }

    #[test]
    fn halfspace_projection_contracts() {
        let (s, _dir) = run_in_temp(
            r#"{"experiment": "project",
               "operator": {"type": "km_averaged", "lambda": 0.5, "base": {"type": "projection",
                   "set": {"type": "polyhedron", "rows": [{"a": [0, 1], "b": 0}]}}},
               "x0": [0, 1], "max_steps": 80, "stop_tol": 1e-14,
               "z": {"type": "polyhedron", "rows": [{"a": [0, 1], "b": 0}]},
               "zbar": [0, 0], "seed": 11}"#,
        );
        assert!(s.pass, "{:#?}", s.contracts);
        assert!(s.no_zigzag.is_some());
        assert!(s.contract("ncone_tail_mean").is_some());
    }

    #[test]
    fn failing_contract_fails_the_run() {
        // an absurdly tight gap threshold cannot hold
        let (s, _dir) = run_in_temp(
            r#"{"experiment": "rotation",
               "operator": {"type": "planar_rotation_averaged", "theta": {"radians": 1}},
               "x0": [1, 0], "max_steps": 200, "stop_tol": 0, "zbar": "origin",
               "analysis": {"max_gap_deg": 1e-9}, "seed": 1}"#,
        );
        assert!(!s.pass);
        let r = Report::from_summaries(&[s]);
        assert!(!r.pass);
        assert!(r.table().contains("failed: t: max_angular_gap_deg"));
    }

    #[test]
    fn report_roundtrip_and_errors() {
        let (s, dir) = run_in_temp(ROTATION);
        let path = dir.path().join("summary.json");
        let r = report(std::slice::from_ref(&path)).unwrap();
        assert!(r.pass);
        assert_eq!(r.entries.len(), s.contracts.len());
        let missing = report(&[dir.path().join("nope.json")]).unwrap_err();
        assert_eq!(missing.exit_code(), 5);
        fs::write(&path, "{ not json").unwrap();
        assert!(matches!(report(&[path]), Err(ExperimentError::Summary { .. })));
    }

    #[test]
    fn runs_are_byte_identical() {
        let (_, a) = run_in_temp(ROTATION);
        let (_, b) = run_in_temp(ROTATION);
        for f in ["trace.csv", "directions.csv", "summary.json"] {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap(),
                "{f}"
            );
        }
    }

    #[test]
    fn out_dir_precedence() {
        let mut c = cfg(r#"{"experiment": "oracle"}"#);
        assert_eq!(resolve_out_dir(None, None, &c, "x"), PathBuf::from("out/x"));
        c.outputs.dir = Some("cfgdir".into());
        assert_eq!(resolve_out_dir(None, None, &c, "x"), PathBuf::from("cfgdir"));
        assert_eq!(
            resolve_out_dir(None, Some("envdir"), &c, "x"),
            PathBuf::from("envdir/x")
        );
        assert_eq!(
            resolve_out_dir(Some(Path::new("flag")), Some("envdir"), &c, "x"),
            PathBuf::from("flag")
        );
    }
}
