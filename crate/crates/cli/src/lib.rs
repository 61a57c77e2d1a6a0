//! `finsler` command line: parses norm, field and sampling options,
//! runs one check and writes its report.
//!
//! Exit codes: 0 when the check passes, 1 when it fails (or a numerical
//! error stops it), 2 for usage and configuration errors. Configuration is
//! fully validated before any computation, and nothing is written on a
//! usage error.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use finsler_core::fields::{scaled_step, NESTED_DIFF_STEP};
use finsler_core::parse::{parse_field, parse_norm, parse_points, parse_polynomial, parse_rows};
use finsler_core::verifier::{
    check_dual_norm, check_kelvin_p2, check_kelvin_pn, check_liouville, check_mvp, check_operator_paths,
    check_theorem1, classify_norm, DUAL_GRID, KELVIN_ANNULUS,
};
use finsler_core::{
    CheckConfig, Corruption, Error, GradMode, Norm, OperatorConfig, Polynomial, SampleSpec, ScalarField, Verification,
};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

const HARMONIC_PREFIX: &str = "harmonic-pullback:";

#[derive(Parser, Debug)]
#[command(
    name = "finsler",
    version,
    about = "Numerical checks for anisotropic p-Laplace identities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Equivalence of the Finsler p-Laplacian with the isotropic one under x -> sqrt(M) x
    Theorem1 {
        #[command(flatten)]
        norm: NormArgs,
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        exponent: ExponentArgs,
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        fd: FdArgs,
        #[command(flatten)]
        corrupt: CorruptArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Kelvin transform for p = 2 (hat transform)
    Kelvin2 {
        #[command(flatten)]
        norm: NormArgs,
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        fd: FdArgs,
        #[command(flatten)]
        corrupt: CorruptArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Kelvin transform for p = n (star transform)
    KelvinN {
        #[command(flatten)]
        norm: NormArgs,
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        fd: FdArgs,
        #[command(flatten)]
        corrupt: CorruptArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Mean values of anisotropic-harmonic fields over Wulff balls
    Mvp {
        #[command(flatten)]
        norm: NormArgs,
        /// Harmonic polynomial to pull back: harmonic-pullback:<terms>
        #[arg(long)]
        field: String,
        /// Ball centers, e.g. "1,1;0,-1"
        #[arg(long)]
        centers: String,
        /// Ball radii, comma separated
        #[arg(long, default_value = "0.25,0.5,1")]
        radii: String,
        /// Quadrature density (>= 32)
        #[arg(long, default_value_t = 64)]
        density: usize,
        #[command(flatten)]
        corrupt: CorruptArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Liouville profile: pointwise equation and total mass (n = 2)
    Liouville {
        #[command(flatten)]
        norm: NormArgs,
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        fd: FdArgs,
        /// Half-width L of the mass quadrature box [-L, L]^2
        #[arg(long, default_value_t = 200.0)]
        extent: f64,
        /// Mass quadrature cells per axis
        #[arg(long, default_value_t = 2048)]
        density: usize,
        #[command(flatten)]
        corrupt: CorruptArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Decide whether a norm is quadratic and test the pairing identity
    Classify {
        #[command(flatten)]
        norm: NormArgs,
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        corrupt: CorruptArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Evaluate the dual norm at points (closed form vs support function)
    Dual {
        #[command(flatten)]
        norm: NormArgs,
        #[command(flatten)]
        at: AtArgs,
        /// Direction grid density for the numerical support function
        #[arg(long, default_value_t = DUAL_GRID)]
        density: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Evaluate the Finsler p-Laplacian at points (configured path vs nested differences)
    Op {
        #[command(flatten)]
        norm: NormArgs,
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        exponent: ExponentArgs,
        #[command(flatten)]
        at: AtArgs,
        #[command(flatten)]
        fd: FdArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args, Debug)]
struct NormArgs {
    /// Norm: quad:<matrix> (e.g. quad:[[4,0],[0,1]] or quad:4,0;0,1) or q:<exponent>
    #[arg(long)]
    norm: String,
    /// Dimension; required for q-norms
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Debug)]
struct FieldArgs {
    /// Field: poly:<terms>, harmonic-pullback:<terms>, liouville, constant:<c>, log-radius, exp:<a1>,...
    #[arg(long)]
    field: String,
}

#[derive(Args, Debug)]
struct ExponentArgs {
    /// Exponent p > 1
    #[arg(long, default_value_t = 2.0)]
    p: f64,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Number of sample points
    #[arg(long, default_value_t = 100)]
    points: usize,
    /// Sampling seed
    #[arg(long, env = "FINSLER_SEED", default_value_t = 0)]
    seed: u64,
    /// Inner sampling radius (default depends on the check)
    #[arg(long)]
    r_min: Option<f64>,
    /// Outer sampling radius (default depends on the check)
    #[arg(long)]
    r_max: Option<f64>,
    /// Evaluate samples concurrently
    #[arg(long)]
    parallel: bool,
}

#[derive(Args, Debug)]
struct FdArgs {
    /// Flux difference step coefficient; the step at x is step*(1+|x|)
    #[arg(long)]
    step: Option<f64>,
    /// Inner gradient: analytic or nested finite differences
    #[arg(long, value_enum, default_value_t = GradArg::Analytic)]
    grad: GradArg,
}

#[derive(Args, Debug)]
struct CorruptArgs {
    /// Deliberately break the check (negative control)
    #[arg(long, value_enum)]
    corrupt: Option<CorruptArg>,
}

#[derive(Args, Debug)]
struct AtArgs {
    /// Evaluation points, e.g. "1,0;0.5,2"
    #[arg(long)]
    at: String,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override the check's default tolerance
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum GradArg {
    Analytic,
    Fd,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum CorruptArg {
    WrongMatrix,
    WrongExponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Theorem1,
    Kelvin2,
    KelvinN,
    Mvp,
    Liouville,
    Classify,
    Dual,
    Op,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Theorem1 => "theorem1",
            Self::Kelvin2 => "kelvin2",
            Self::KelvinN => "kelvin-n",
            Self::Mvp => "mvp",
            Self::Liouville => "liouville",
            Self::Classify => "classify",
            Self::Dual => "dual",
            Self::Op => "op",
        }
    }
}

/// A parsed command line with every default resolved. Options a check
/// does not take are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub check: CheckKind,
    pub norm: String,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub field: Option<String>,
    pub seed: Option<u64>,
    pub points: Option<usize>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub parallel: bool,
    pub step: Option<f64>,
    pub grad: Option<GradMode>,
    pub corrupt: Option<Corruption>,
    pub centers: Option<String>,
    pub radii: Option<String>,
    pub extent: Option<f64>,
    pub density: Option<usize>,
    pub at: Option<String>,
    pub tol: Option<f64>,
    pub format: Format,
    pub output: Option<PathBuf>,
}

impl CliConfig {
    pub fn parse_from<I, T>(argv: I) -> Result<Self, clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<OsString> + Clone,
    {
        Cli::try_parse_from(argv).map(|cli| Self::from_command(cli.command))
    }

    fn blank(check: CheckKind, norm: NormArgs, out: OutputArgs) -> Self {
        Self {
            check,
            norm: norm.norm,
            n: norm.n,
            p: None,
            field: None,
            seed: None,
            points: None,
            r_min: None,
            r_max: None,
            parallel: false,
            step: None,
            grad: None,
            corrupt: None,
            centers: None,
            radii: None,
            extent: None,
            density: None,
            at: None,
            tol: out.tol,
            format: out.format,
            output: out.output,
        }
    }

    fn with_sample(mut self, s: SampleArgs, r_min: f64, r_max: f64) -> Self {
        self.seed = Some(s.seed);
        self.points = Some(s.points);
        self.r_min = Some(s.r_min.unwrap_or(r_min));
        self.r_max = Some(s.r_max.unwrap_or(r_max));
        self.parallel = s.parallel;
        self
    }

    fn with_fd(mut self, fd: FdArgs) -> Self {
        let grad = match fd.grad {
            GradArg::Analytic => GradMode::Analytic,
            GradArg::Fd => GradMode::FiniteDifference,
        };
        let default = match grad {
            GradMode::Analytic => OperatorConfig::analytic(2.0).h_flux,
            GradMode::FiniteDifference => OperatorConfig::finite_difference(2.0).h_flux,
        };
        self.grad = Some(grad);
        self.step = Some(fd.step.unwrap_or(default));
        self
    }

    fn with_corrupt(mut self, c: CorruptArgs) -> Self {
        self.corrupt = c.corrupt.map(|c| match c {
            CorruptArg::WrongMatrix => Corruption::WrongMatrix,
            CorruptArg::WrongExponent => Corruption::WrongExponent,
        });
        self
    }

    fn from_command(cmd: Command) -> Self {
        let (k0, k1) = KELVIN_ANNULUS;
        match cmd {
            Command::Theorem1 {
                norm,
                field,
                exponent,
                sample,
                fd,
                corrupt,
                out,
            } => {
                let mut c = Self::blank(CheckKind::Theorem1, norm, out)
                    .with_sample(sample, 0.0, 2.0)
                    .with_fd(fd)
                    .with_corrupt(corrupt);
                c.field = Some(field.field);
                c.p = Some(exponent.p);
                c
            }
            Command::Kelvin2 {
                norm,
                field,
                sample,
                fd,
                corrupt,
                out,
            } => {
                let mut c = Self::blank(CheckKind::Kelvin2, norm, out)
                    .with_sample(sample, k0, k1)
                    .with_fd(fd)
                    .with_corrupt(corrupt);
                c.field = Some(field.field);
                c
            }
            Command::KelvinN {
                norm,
                field,
                sample,
                fd,
                corrupt,
                out,
            } => {
                let mut c = Self::blank(CheckKind::KelvinN, norm, out)
                    .with_sample(sample, k0, k1)
                    .with_fd(fd)
                    .with_corrupt(corrupt);
                c.field = Some(field.field);
                c
            }
            Command::Mvp {
                norm,
                field,
                centers,
                radii,
                density,
                corrupt,
                out,
            } => {
                let mut c = Self::blank(CheckKind::Mvp, norm, out).with_corrupt(corrupt);
                c.field = Some(field);
                c.centers = Some(centers);
                c.radii = Some(radii);
                c.density = Some(density);
                c
            }
            Command::Liouville {
                norm,
                sample,
                fd,
                extent,
                density,
                corrupt,
                out,
            } => {
                let mut c = Self::blank(CheckKind::Liouville, norm, out)
                    .with_sample(sample, 0.0, 5.0)
                    .with_fd(fd)
                    .with_corrupt(corrupt);
                c.extent = Some(extent);
                c.density = Some(density);
                c
            }
            Command::Classify {
                norm,
                sample,
                corrupt,
                out,
            } => Self::blank(CheckKind::Classify, norm, out)
                .with_sample(sample, 0.5, 2.0)
                .with_corrupt(corrupt),
            Command::Dual { norm, at, density, out } => {
                let mut c = Self::blank(CheckKind::Dual, norm, out);
                c.at = Some(at.at);
                c.density = Some(density);
                c
            }
            Command::Op {
                norm,
                field,
                exponent,
                at,
                fd,
                out,
            } => {
                let mut c = Self::blank(CheckKind::Op, norm, out).with_fd(fd);
                c.field = Some(field.field);
                c.p = Some(exponent.p);
                c.at = Some(at.at);
                c
            }
        }
    }

    /// The argument list this configuration parses back from.
    pub fn to_args(&self) -> Vec<String> {
        let mut a = vec!["finsler".to_string(), self.check.name().to_string()];
        let mut flag = |name: &str, value: String| {
            a.push(format!("--{name}"));
            a.push(value);
        };
        flag("norm", self.norm.clone());
        if let Some(n) = self.n {
            flag("n", n.to_string());
        }
        if let Some(field) = &self.field {
            flag("field", field.clone());
        }
        if let Some(p) = self.p {
            flag("p", p.to_string());
        }
        if let Some(points) = self.points {
            flag("points", points.to_string());
        }
        if let Some(seed) = self.seed {
            flag("seed", seed.to_string());
        }
        if let Some(r) = self.r_min {
            flag("r-min", r.to_string());
        }
        if let Some(r) = self.r_max {
            flag("r-max", r.to_string());
        }
        if let Some(step) = self.step {
            flag("step", step.to_string());
        }
        if let Some(grad) = self.grad {
            let g = match grad {
                GradMode::Analytic => "analytic",
                GradMode::FiniteDifference => "fd",
            };
            flag("grad", g.to_string());
        }
        if let Some(c) = self.corrupt {
            let c = match c {
                Corruption::WrongMatrix => "wrong-matrix",
                Corruption::WrongExponent => "wrong-exponent",
            };
            flag("corrupt", c.to_string());
        }
        if let Some(centers) = &self.centers {
            flag("centers", centers.clone());
        }
        if let Some(radii) = &self.radii {
            flag("radii", radii.clone());
        }
        if let Some(extent) = self.extent {
            flag("extent", extent.to_string());
        }
        if let Some(density) = self.density {
            flag("density", density.to_string());
        }
        if let Some(at) = &self.at {
            flag("at", at.clone());
        }
        if let Some(tol) = self.tol {
            flag("tol", tol.to_string());
        }
        let format = match self.format {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Text => "text",
        };
        flag("format", format.to_string());
        if let Some(path) = &self.output {
            flag("output", path.display().to_string());
        }
        if self.parallel {
            a.push("--parallel".into());
        }
        a
    }
}

impl fmt::Display for CliConfig {
    /// Shell-quoted argument list.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let quoted: Vec<String> = self
            .to_args()
            .into_iter()
            .map(|s| {
                if s.chars().all(|c| c.is_ascii_alphanumeric() || "-_.:,/=+^*".contains(c)) {
                    s
                } else {
                    format!("'{}'", s.replace('\'', r"'\''"))
                }
            })
            .collect();
        f.write_str(&quoted.join(" "))
    }
}

/// A configuration error tied to the flag that caused it.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError {
    pub flag: &'static str,
    pub message: String,
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid --{}: {}", self.flag, self.message)
    }
}

fn usage(flag: &'static str) -> impl Fn(Error) -> UsageError {
    move |e| UsageError {
        flag,
        message: match e {
            Error::Parse { position, message } => format!("parse error at position {position}: {message}"),
            other => other.to_string(),
        },
    }
}

fn invalid(flag: &'static str, message: impl Into<String>) -> UsageError {
    UsageError {
        flag,
        message: message.into(),
    }
}

/// Everything a check needs, built and validated up front.
enum Plan {
    Theorem1(Norm, ScalarField, SampleSpec),
    Kelvin2(Norm, ScalarField, SampleSpec),
    KelvinN(Norm, ScalarField, SampleSpec),
    Mvp(Norm, Polynomial, Vec<Vec<f64>>, Vec<f64>, usize),
    Liouville(Norm, SampleSpec, f64, usize),
    Classify(Norm, SampleSpec),
    Dual(Norm, Vec<Vec<f64>>, usize),
    Op(Norm, ScalarField, Vec<Vec<f64>>),
}

fn require_quadratic(norm: &Norm) -> Result<(), UsageError> {
    if norm.is_quadratic() {
        Ok(())
    } else {
        Err(invalid("norm", "this check needs a quadratic norm (quad:<matrix>)"))
    }
}

fn points_in(flag: &'static str, spec: &str, n: usize) -> Result<Vec<Vec<f64>>, UsageError> {
    let pts = parse_points(spec).map_err(usage(flag))?;
    if let Some(bad) = pts.iter().find(|p| p.len() != n) {
        return Err(invalid(
            flag,
            format!("expected points with {n} coordinates, got {}", bad.len()),
        ));
    }
    Ok(pts)
}

fn sample_spec(cfg: &CliConfig) -> Result<SampleSpec, UsageError> {
    let spec = SampleSpec::annulus(
        cfg.seed.unwrap_or_default(),
        cfg.points.unwrap_or_default(),
        cfg.r_min.unwrap_or_default(),
        cfg.r_max.unwrap_or_default(),
    );
    spec.validate().map_err(|e| {
        let flag = if cfg.points == Some(0) { "points" } else { "r-max" };
        usage(flag)(e)
    })?;
    Ok(spec)
}

fn check_config(cfg: &CliConfig) -> Result<CheckConfig, UsageError> {
    let p = cfg.p.unwrap_or(2.0);
    let mut op = match cfg.grad.unwrap_or(GradMode::Analytic) {
        GradMode::Analytic => OperatorConfig::analytic(p),
        GradMode::FiniteDifference => OperatorConfig::finite_difference(p),
    };
    if let Some(step) = cfg.step {
        op = op.with_step(step);
    }
    if !(op.h_flux > 0.0 && op.h_flux < 1.0) {
        return Err(invalid("step", format!("step must lie in (0, 1), got {}", op.h_flux)));
    }
    op.validate().map_err(usage("p"))?;
    let mut check = CheckConfig::new(op).parallel(cfg.parallel);
    if let Some(c) = cfg.corrupt {
        check = check.corrupted(c);
    }
    if let Some(tol) = cfg.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(invalid("tol", format!("tolerance must be positive, got {tol}")));
        }
        check = check.with_tolerance(tol);
    }
    Ok(check)
}

fn plan(cfg: &CliConfig) -> Result<(Plan, CheckConfig), UsageError> {
    let norm = parse_norm(&cfg.norm, cfg.n).map_err(|e| match e {
        Error::DimensionMismatch { .. } => usage("n")(e),
        Error::Parse {
            position: 0,
            ref message,
        } if message.contains("dimension") => usage("n")(e),
        Error::InvalidDimension(_) if cfg.n.is_some() => usage("n")(e),
        other => usage("norm")(other),
    })?;
    let n = norm.dim();
    let check = check_config(cfg)?;
    if let Some(output) = &cfg.output {
        let parent = output
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        if !parent.is_dir() {
            return Err(invalid(
                "output",
                format!("directory {} does not exist", parent.display()),
            ));
        }
    }
    let field = || parse_field(cfg.field.as_deref().unwrap_or_default(), &norm).map_err(usage("field"));
    let plan = match cfg.check {
        CheckKind::Theorem1 => {
            require_quadratic(&norm)?;
            Plan::Theorem1(norm.clone(), field()?, sample_spec(cfg)?)
        }
        CheckKind::Kelvin2 => {
            require_quadratic(&norm)?;
            Plan::Kelvin2(norm.clone(), field()?, sample_spec(cfg)?)
        }
        CheckKind::KelvinN => {
            require_quadratic(&norm)?;
            Plan::KelvinN(norm.clone(), field()?, sample_spec(cfg)?)
        }
        CheckKind::Mvp => {
            require_quadratic(&norm)?;
            let spec = cfg.field.as_deref().unwrap_or_default();
            let terms = spec
                .strip_prefix(HARMONIC_PREFIX)
                .ok_or_else(|| invalid("field", format!("expected {HARMONIC_PREFIX}<terms>")))?;
            let poly = parse_polynomial(terms, n).map_err(|e| {
                usage("field")(match e {
                    Error::Parse { position, message } => Error::Parse {
                        position: position + HARMONIC_PREFIX.len(),
                        message,
                    },
                    other => other,
                })
            })?;
            if !poly.is_harmonic() {
                return Err(usage("field")(Error::NotHarmonic));
            }
            let centers = points_in("centers", cfg.centers.as_deref().unwrap_or_default(), n)?;
            let radii = parse_rows(cfg.radii.as_deref().unwrap_or_default()).map_err(usage("radii"))?;
            let radii: Vec<f64> = radii.into_iter().flatten().collect();
            if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
                return Err(invalid("radii", "radii must be positive"));
            }
            let density = cfg.density.unwrap_or_default();
            if density < finsler_core::wulff::MIN_VOLUME_DENSITY {
                return Err(invalid(
                    "density",
                    format!("must be at least {}", finsler_core::wulff::MIN_VOLUME_DENSITY),
                ));
            }
            Plan::Mvp(norm.clone(), poly, centers, radii, density)
        }
        CheckKind::Liouville => {
            require_quadratic(&norm)?;
            if n != 2 {
                return Err(invalid("norm", format!("liouville needs n = 2, got n = {n}")));
            }
            let extent = cfg.extent.unwrap_or_default();
            if !(extent > 0.0 && extent.is_finite()) {
                return Err(invalid("extent", "must be positive"));
            }
            let density = cfg.density.unwrap_or_default();
            if density == 0 {
                return Err(invalid("density", "must be positive"));
            }
            Plan::Liouville(norm.clone(), sample_spec(cfg)?, extent, density)
        }
        CheckKind::Classify => Plan::Classify(norm.clone(), sample_spec(cfg)?),
        CheckKind::Dual => {
            let pts = points_in("at", cfg.at.as_deref().unwrap_or_default(), n)?;
            let density = cfg.density.unwrap_or_default();
            if density < finsler_core::norms::MIN_DUAL_GRID {
                return Err(invalid(
                    "density",
                    format!("must be at least {}", finsler_core::norms::MIN_DUAL_GRID),
                ));
            }
            Plan::Dual(norm.clone(), pts, density)
        }
        CheckKind::Op => {
            let u = field()?;
            let pts = points_in("at", cfg.at.as_deref().unwrap_or_default(), n)?;
            if let Some(x) = pts
                .iter()
                .find(|x| !u.domain().contains_ball(x, 2.0 * scaled_step(NESTED_DIFF_STEP, x)))
            {
                return Err(invalid(
                    "at",
                    format!("point {x:?} is too close to the field's singularity"),
                ));
            }
            Plan::Op(norm.clone(), u, pts)
        }
    };
    Ok((plan, check))
}

fn execute(plan: &Plan, cfg: &CheckConfig) -> finsler_core::Result<Verification> {
    match plan {
        Plan::Theorem1(h, u, s) => check_theorem1(h, u, s, cfg),
        Plan::Kelvin2(h, u, s) => check_kelvin_p2(h, u, s, cfg),
        Plan::KelvinN(h, u, s) => check_kelvin_pn(h, u, s, cfg),
        Plan::Mvp(h, poly, centers, radii, density) => check_mvp(h, poly, centers, radii, *density, cfg),
        Plan::Liouville(h, s, extent, density) => check_liouville(h, s, *extent, *density, cfg),
        Plan::Classify(h, s) => classify_norm(h, s, cfg),
        Plan::Dual(h, pts, density) => check_dual_norm(h, pts, *density, cfg),
        Plan::Op(h, u, pts) => check_operator_paths(h, u, pts, cfg),
    }
}

fn render_csv(v: &Verification) -> String {
    let width = v.points.first().map_or(0, |p| p.x.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=width).map(|i| format!("x{i}")).collect();
    header.extend(["lhs", "rhs", "residual"].map(String::from));
    w.write_record(&header).expect("in-memory write");
    for p in &v.points {
        let mut row: Vec<String> = p.x.iter().map(f64::to_string).collect();
        row.extend([p.lhs, p.rhs, p.rel].map(|v| v.to_string()));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

fn render_text(v: &Verification) -> String {
    let r = &v.report;
    let mut s = String::new();
    let mut line = |k: &str, val: String| s.push_str(&format!("{k:<18}{val}\n"));
    line("check", r.check.clone());
    line("result", if r.pass { "PASS".into() } else { "FAIL".into() });
    line("norm", r.norm.clone());
    if let Some(f) = &r.field {
        line("field", f.clone());
    }
    line("n", r.n.to_string());
    line("p", r.p.to_string());
    line("samples", r.samples.to_string());
    line("seed", r.seed.to_string());
    line("max abs residual", format!("{:.3e}", r.max_abs_residual));
    line("max rel residual", format!("{:.3e}", r.max_rel_residual));
    line("tolerance", format!("{:.1e}", r.tolerance));
    for (k, val) in &r.details {
        line(k, val.to_string());
    }
    s.push_str("\nworst points\n");
    s.push_str(&format!("{:<36} {:>16} {:>16} {:>10}\n", "x", "lhs", "rhs", "rel"));
    for p in &r.worst {
        let x: Vec<String> = p.x.iter().map(|v| format!("{v:.4}")).collect();
        s.push_str(&format!(
            "{:<36} {:>16.8e} {:>16.8e} {:>10.2e}\n",
            format!("({})", x.join(", ")),
            p.lhs,
            p.rhs,
            p.rel
        ));
    }
    s
}

pub fn render(v: &Verification, format: Format) -> String {
    match format {
        Format::Json => v.report.to_json() + "\n",
        Format::Csv => render_csv(v),
        Format::Text => render_text(v),
    }
}

/// Runs one invocation; returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match CliConfig::parse_from(argv) {
        Ok(cfg) => cfg,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let (plan, check) = match plan(&cfg) {
        Ok(x) => x,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let verification = match execute(&plan, &check) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(stderr, "error: {} check stopped: {e}", cfg.check.name());
            return EXIT_FAIL;
        }
    };
    let body = render(&verification, cfg.format);
    let written = match &cfg.output {
        Some(path) => std::fs::write(path, body.as_bytes()),
        None => stdout.write_all(body.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: cannot write report: {e}");
        return EXIT_USAGE;
    }
    if verification.pass() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
