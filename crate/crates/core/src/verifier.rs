//! Identity checkers. Each samples points, evaluates both sides of an
//! identity independently and aggregates the residuals into a
//! [`VerificationReport`].
//!
//! Residuals are compared relative to `max(|lhs|, |rhs|, floor)`: relative
//! for values above the floor, absolute below it, so identities whose two
//! sides both vanish are judged against finite-difference noise rather
//! than against each other.
//!
//! Every checker accepts a [`Corruption`] that deliberately breaks one
//! ingredient; tests use it to show the checks can fail.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fields::{make_harmonic_pullback, make_liouville_profile, BumpFunction, Polynomial, ScalarField};
use crate::linalg::{dot, norm2, Matrix};
use crate::norms::{dual_eval_numeric, recover_quadratic, Norm};
use crate::ops::{finsler_p_laplacian, p_laplacian, GradMode, OperatorConfig};
use crate::spd::SpdMatrix;
use crate::transforms::{hat_transform, pullback_linear, star_transform, KelvinMap};
use crate::wulff::{wulff_kappa, wulff_surface_average, wulff_volume_average, SurfaceMeasure, WulffBall};

pub const SCHEMA_VERSION: u32 = 1;

/// Default tolerance when analytic gradients drive the flux.
pub const ANALYTIC_TOL: f64 = 1e-6;
/// Default tolerance for nested finite differences.
pub const NESTED_FD_TOL: f64 = 1e-3;
/// Pointwise chain-rule identities.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Pairing identity for quadratic norms.
pub const FK_TOL: f64 = 1e-10;
/// Liouville total mass, relative.
pub const MASS_TOL: f64 = 5e-3;
pub const RESIDUAL_FLOOR: f64 = 1.0;
pub const MAX_WORST: usize = 10;
pub const KELVIN_ANNULUS: (f64, f64) = (0.3, 3.0);
pub const DUAL_GRID: usize = 256;

const MAX_DRAW_ATTEMPTS: usize = 100;

/// Points where the sampled field's gradient is (nearly) degenerate can be
/// rejected and redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exclusion {
    None,
    /// Reject points where the norm of the relevant gradient is at most
    /// this value.
    DegenerateGradient(f64),
}

/// Seeded uniform samples in the annulus `r_min ≤ |x| ≤ r_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub seed: u64,
    pub count: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub exclusion: Exclusion,
}

impl SampleSpec {
    pub fn ball(seed: u64, count: usize, r_max: f64) -> Self {
        Self::annulus(seed, count, 0.0, r_max)
    }

    pub fn annulus(seed: u64, count: usize, r_min: f64, r_max: f64) -> Self {
        Self {
            seed,
            count,
            r_min,
            r_max,
            exclusion: Exclusion::None,
        }
    }

    pub fn kelvin(seed: u64, count: usize) -> Self {
        Self::annulus(seed, count, KELVIN_ANNULUS.0, KELVIN_ANNULUS.1)
    }

    pub fn excluding_degenerate(mut self, tol: f64) -> Self {
        self.exclusion = Exclusion::DegenerateGradient(tol);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidParameter("sample count must be at least 1".into()));
        }
        if !(self.r_min >= 0.0 && self.r_min < self.r_max && self.r_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "invalid sample annulus [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }

    /// Draws `count` points in `ℝⁿ`, redrawing any the `accept` predicate
    /// rejects. The same seed always yields the same points.
    pub fn draw(&self, n: usize, mut accept: impl FnMut(&[f64]) -> Result<bool>) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lo, hi) = (self.r_min.powi(n as i32), self.r_max.powi(n as i32));
        let mut out = Vec::with_capacity(self.count);
        let mut attempts = 0;
        while out.len() < self.count {
            attempts += 1;
            if attempts > MAX_DRAW_ATTEMPTS * self.count {
                return Err(Error::InvalidParameter(
                    "sample exclusion rejected too many points".into(),
                ));
            }
            let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let len = norm2(&dir);
            if len < 1e-12 {
                continue;
            }
            let u: f64 = rng.random();
            let r = (lo + u * (hi - lo)).powf(1.0 / n as f64);
            let x: Vec<f64> = dir.iter().map(|d| r * d / len).collect();
            if accept(&x)? {
                out.push(x);
            }
        }
        Ok(out)
    }

    pub fn points(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        self.draw(n, |_| Ok(true))
    }
}

/// A deliberate misconfiguration for negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Corruption {
    /// Use `M` where `√M` belongs (or `M²` where `M` belongs).
    WrongMatrix,
    /// Shift the weight exponent by one.
    WrongExponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub op: OperatorConfig,
    pub tolerance: f64,
    pub residual_floor: f64,
    pub corruption: Option<Corruption>,
    pub parallel: bool,
}

impl CheckConfig {
    pub fn new(op: OperatorConfig) -> Self {
        let tolerance = match op.grad_mode {
            GradMode::Analytic => ANALYTIC_TOL,
            GradMode::FiniteDifference => NESTED_FD_TOL,
        };
        Self {
            op,
            tolerance,
            residual_floor: RESIDUAL_FLOOR,
            corruption: None,
            parallel: false,
        }
    }

    pub fn analytic(p: f64) -> Self {
        Self::new(OperatorConfig::analytic(p))
    }

    pub fn finite_difference(p: f64) -> Self {
        Self::new(OperatorConfig::finite_difference(p))
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_step(mut self, h_flux: f64) -> Self {
        self.op.h_flux = h_flux;
        self
    }

    pub fn corrupted(mut self, c: Corruption) -> Self {
        self.corruption = Some(c);
        self
    }

    pub fn parallel(mut self, yes: bool) -> Self {
        self.parallel = yes;
        self
    }

    fn is(&self, c: Corruption) -> bool {
        self.corruption == Some(c)
    }

    pub fn relative(&self, lhs: f64, rhs: f64) -> f64 {
        relative_residual(lhs, rhs, self.residual_floor)
    }
}

/// `|lhs − rhs| / max(|lhs|, |rhs|, floor)`.
pub fn relative_residual(lhs: f64, rhs: f64, floor: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(floor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResidual {
    pub x: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub abs: f64,
    pub rel: f64,
}

impl PointResidual {
    pub fn new(x: Vec<f64>, lhs: f64, rhs: f64, floor: f64) -> Self {
        Self {
            abs: (lhs - rhs).abs(),
            rel: relative_residual(lhs, rhs, floor),
            x,
            lhs,
            rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: u32,
    pub check: String,
    pub norm: String,
    pub field: Option<String>,
    pub p: f64,
    pub n: usize,
    pub samples: usize,
    pub max_abs_residual: f64,
    pub max_rel_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Largest relative residuals, worst first.
    pub worst: Vec<PointResidual>,
    pub seed: u64,
    pub fd_step: f64,
    pub residual_floor: f64,
    pub corruption: Option<Corruption>,
    /// Check-specific extras (secondary residuals, recovered quantities).
    pub details: BTreeMap<String, Value>,
}

impl VerificationReport {
    /// Canonical JSON with sorted keys.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        serde_json::to_string_pretty(&value).expect("value serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            position: e.column(),
            message: e.to_string(),
        })
    }

    pub fn detail_f64(&self, key: &str) -> Option<f64> {
        self.details.get(key).and_then(Value::as_f64)
    }
}

/// A report plus every per-point residual (for CSV export).
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub report: VerificationReport,
    pub points: Vec<PointResidual>,
}

impl Verification {
    pub fn pass(&self) -> bool {
        self.report.pass
    }
}

struct ReportMeta<'a> {
    check: &'a str,
    norm: &'a Norm,
    field: Option<&'a str>,
    p: f64,
    seed: u64,
}

/// Builds the report. `extra_pass` folds secondary criteria (recorded in
/// `details`) into the verdict.
fn assemble(
    meta: ReportMeta<'_>,
    cfg: &CheckConfig,
    points: Vec<PointResidual>,
    details: BTreeMap<String, Value>,
    extra_pass: bool,
) -> Verification {
    let max_abs = points.iter().map(|p| p.abs).fold(0.0, f64::max);
    let max_rel = points.iter().map(|p| p.rel).fold(0.0, f64::max);
    let mut worst = points.clone();
    worst.sort_by(|a, b| b.rel.total_cmp(&a.rel));
    worst.truncate(MAX_WORST);
    let report = VerificationReport {
        schema: SCHEMA_VERSION,
        check: meta.check.to_string(),
        norm: meta.norm.label(),
        field: meta.field.map(str::to_string),
        p: meta.p,
        n: meta.norm.dim(),
        samples: points.len(),
        max_abs_residual: max_abs,
        max_rel_residual: max_rel,
        tolerance: cfg.tolerance,
        pass: max_rel <= cfg.tolerance && extra_pass,
        worst,
        seed: meta.seed,
        fd_step: cfg.op.h_flux,
        residual_floor: cfg.residual_floor,
        corruption: cfg.corruption,
        details,
    };
    Verification { report, points }
}

/// Evaluates `(lhs, rhs)` at every point, in parallel when asked. Output
/// order always matches input order.
fn evaluate<F>(points: &[Vec<f64>], cfg: &CheckConfig, f: F) -> Result<Vec<PointResidual>>
where
    F: Fn(&[f64]) -> Result<(f64, f64)> + Sync,
{
    let one = |x: &Vec<f64>| -> Result<PointResidual> {
        let (lhs, rhs) = f(x)?;
        if !(lhs.is_finite() && rhs.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite evaluation at {x:?}: {lhs} vs {rhs}"
            )));
        }
        Ok(PointResidual::new(x.clone(), lhs, rhs, cfg.residual_floor))
    };
    if cfg.parallel {
        points.par_iter().map(one).collect()
    } else {
        points.iter().map(one).collect()
    }
}

fn quadratic(h: &Norm) -> Result<&SpdMatrix> {
    h.matrix().ok_or(Error::UnsupportedNorm)
}

fn check_field_dim(h: &Norm, u: &ScalarField) -> Result<()> {
    if u.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: u.dim(),
        });
    }
    Ok(())
}

fn accept_nondegenerate<'a>(
    spec: &'a SampleSpec,
    h: &'a Norm,
    u: &'a ScalarField,
    map: impl Fn(&[f64]) -> Result<Vec<f64>> + 'a,
) -> impl FnMut(&[f64]) -> Result<bool> + 'a {
    move |x| match spec.exclusion {
        Exclusion::None => Ok(true),
        Exclusion::DegenerateGradient(tol) => {
            let y = map(x)?;
            let g = u.gradient_or_fd(&y, crate::fields::scaled_step(crate::fields::FIRST_DIFF_STEP, &y))?;
            Ok(h.eval(&g) > tol)
        }
    }
}

/// `Δ_p ũ(x) = (Δ_p^H u)(Bx)` with `ũ(x) = u(Bx)`, `B = √M`, at every
/// sample; the pointwise gradient identities are checked on the same
/// samples and recorded in `details`.
pub fn check_theorem1(h: &Norm, u: &ScalarField, spec: &SampleSpec, cfg: &CheckConfig) -> Result<Verification> {
    let m = quadratic(h)?;
    check_field_dim(h, u)?;
    let l = if cfg.is(Corruption::WrongMatrix) {
        m.matrix().clone()
    } else {
        m.sqrt_matrix().clone()
    };
    let u_tilde = pullback_linear(u, &l)?;
    let points = spec.draw(h.dim(), accept_nondegenerate(spec, h, u, |x| Ok(l.mul_vec(x))))?;
    let residuals = evaluate(&points, cfg, |x| {
        let lhs = p_laplacian(&cfg.op, &u_tilde, x)?;
        let rhs = finsler_p_laplacian(h, &cfg.op, u, &l.mul_vec(x))?;
        Ok((lhs, rhs))
    })?;

    let identities = gradient_identity_residuals(h, u, &l, &points, spec.r_max, cfg.residual_floor)?;
    let ok = identities.0 <= IDENTITY_TOL && identities.1 <= IDENTITY_TOL;
    let mut details = BTreeMap::new();
    details.insert("grad_norm_identity_max_rel".into(), json!(identities.0));
    details.insert("pairing_identity_max_rel".into(), json!(identities.1));
    details.insert("identity_tolerance".into(), json!(IDENTITY_TOL));
    Ok(assemble(
        ReportMeta {
            check: "theorem1",
            norm: h,
            field: Some(u.label()),
            p: cfg.op.p,
            seed: spec.seed,
        },
        cfg,
        residuals,
        details,
        ok,
    ))
}

/// Test function for the pairing identity: a bump wide enough that every
/// sampled `Bx` lies well inside its support.
fn identity_bump(m: &SpdMatrix, r_max: f64) -> BumpFunction {
    let stretch = m.eigenvalues().last().copied().unwrap_or(1.0).sqrt();
    BumpFunction::new(vec![0.0; m.dim()], 2.0 * stretch * r_max.max(stretch * r_max) + 1.0).expect("positive radius")
}

/// Max relative residuals of `|∇ũ|²(x) = H(∇u)²(Bx)` and
/// `∇ũ·∇φ̃(x) = ⟨M∇u, ∇φ⟩(Bx)`.
fn gradient_identity_residuals(
    h: &Norm,
    u: &ScalarField,
    l: &Matrix,
    points: &[Vec<f64>],
    r_max: f64,
    floor: f64,
) -> Result<(f64, f64)> {
    let m = quadratic(h)?;
    let u_tilde = pullback_linear(u, l)?;
    let bump = identity_bump(m, r_max * l.max_abs().max(1.0));
    let phi_tilde = pullback_linear(&bump.to_field(), l)?;
    let step = |x: &[f64]| crate::fields::scaled_step(crate::fields::FIRST_DIFF_STEP, x);
    let (mut worst_norm, mut worst_pair) = (0.0_f64, 0.0_f64);
    for x in points {
        let y = l.mul_vec(x);
        let gu_t = u_tilde.gradient_or_fd(x, step(x))?;
        let gphi_t = phi_tilde.gradient_or_fd(x, step(x))?;
        let gu = u.gradient_or_fd(&y, step(&y))?;
        let gphi = bump.gradient(&y);
        let hn = h.eval(&gu);
        worst_norm = worst_norm.max(relative_residual(dot(&gu_t, &gu_t), hn * hn, floor));
        let pair = dot(&m.matrix().mul_vec(&gu), &gphi);
        worst_pair = worst_pair.max(relative_residual(dot(&gu_t, &gphi_t), pair, floor));
    }
    Ok((worst_norm, worst_pair))
}

/// The pointwise identities on their own, as a report.
pub fn check_gradient_identities(
    h: &Norm,
    u: &ScalarField,
    spec: &SampleSpec,
    cfg: &CheckConfig,
) -> Result<Verification> {
    let m = quadratic(h)?;
    check_field_dim(h, u)?;
    let l = if cfg.is(Corruption::WrongMatrix) {
        m.matrix().clone()
    } else {
        m.sqrt_matrix().clone()
    };
    let points = spec.points(h.dim())?;
    let u_tilde = pullback_linear(u, &l)?;
    let bump = identity_bump(m, spec.r_max * l.max_abs().max(1.0));
    let phi_tilde = pullback_linear(&bump.to_field(), &l)?;
    let step = |x: &[f64]| crate::fields::scaled_step(crate::fields::FIRST_DIFF_STEP, x);
    let mut residuals = Vec::with_capacity(2 * points.len());
    for x in &points {
        let y = l.mul_vec(x);
        let gu_t = u_tilde.gradient_or_fd(x, step(x))?;
        let gphi_t = phi_tilde.gradient_or_fd(x, step(x))?;
        let gu = u.gradient_or_fd(&y, step(&y))?;
        let hn = h.eval(&gu);
        residuals.push(PointResidual::new(
            x.clone(),
            dot(&gu_t, &gu_t),
            hn * hn,
            cfg.residual_floor,
        ));
        let pair = dot(&m.matrix().mul_vec(&gu), &bump.gradient(&y));
        residuals.push(PointResidual::new(
            x.clone(),
            dot(&gu_t, &gphi_t),
            pair,
            cfg.residual_floor,
        ));
    }
    let cfg = cfg.with_tolerance(IDENTITY_TOL);
    Ok(assemble(
        ReportMeta {
            check: "gradient-identities",
            norm: h,
            field: Some(u.label()),
            p: cfg.op.p,
            seed: spec.seed,
        },
        &cfg,
        residuals,
        BTreeMap::new(),
        true,
    ))
}

fn kelvin_map_for(m: &SpdMatrix, cfg: &CheckConfig) -> Result<KelvinMap> {
    if cfg.is(Corruption::WrongMatrix) {
        Ok(KelvinMap::from_matrix(SpdMatrix::new(&m.matrix().mul(m.matrix()))?))
    } else {
        Ok(KelvinMap::from_matrix(m.clone()))
    }
}

/// `Δ^{H*} û(x) = (Δ^H u)(T_H x) / H(x)^{n+2}` with `û = (u∘T_H)/H^{n−2}`.
pub fn check_kelvin_p2(h: &Norm, u: &ScalarField, spec: &SampleSpec, cfg: &CheckConfig) -> Result<Verification> {
    let m = quadratic(h)?;
    check_field_dim(h, u)?;
    let mut cfg = *cfg;
    cfg.op.p = 2.0;
    let n = h.dim() as i32;
    let k = kelvin_map_for(m, &cfg)?;
    let exact = KelvinMap::from_matrix(m.clone());
    let u_hat = hat_transform(u, &k)?;
    let hstar = h.dual();
    let weight = if cfg.is(Corruption::WrongExponent) {
        n + 1
    } else {
        n + 2
    };
    let points = spec.draw(h.dim(), accept_nondegenerate(spec, h, u, |x| exact.apply(x)))?;
    let residuals = evaluate(&points, &cfg, |x| {
        let lhs = finsler_p_laplacian(&hstar, &cfg.op, &u_hat, x)?;
        let t = exact.apply(x)?;
        let rhs = finsler_p_laplacian(h, &cfg.op, u, &t)? / h.eval(x).powi(weight);
        Ok((lhs, rhs))
    })?;
    Ok(assemble(
        ReportMeta {
            check: "kelvin2",
            norm: h,
            field: Some(u.label()),
            p: 2.0,
            seed: spec.seed,
        },
        &cfg,
        residuals,
        BTreeMap::new(),
        true,
    ))
}

/// `Δ_n^{H*} u*(x) = (Δ_n^H u)(T_H x) / H(x)^{2n}` with `u* = u∘T_H`.
pub fn check_kelvin_pn(h: &Norm, u: &ScalarField, spec: &SampleSpec, cfg: &CheckConfig) -> Result<Verification> {
    let m = quadratic(h)?;
    check_field_dim(h, u)?;
    let n = h.dim() as i32;
    let mut cfg = *cfg;
    cfg.op.p = n as f64;
    let k = kelvin_map_for(m, &cfg)?;
    let exact = KelvinMap::from_matrix(m.clone());
    let u_star = star_transform(u, &k)?;
    let hstar = h.dual();
    let weight = if cfg.is(Corruption::WrongExponent) {
        2 * n - 1
    } else {
        2 * n
    };
    let points = spec.draw(h.dim(), accept_nondegenerate(spec, h, u, |x| exact.apply(x)))?;
    let residuals = evaluate(&points, &cfg, |x| {
        let lhs = finsler_p_laplacian(&hstar, &cfg.op, &u_star, x)?;
        let t = exact.apply(x)?;
        let rhs = finsler_p_laplacian(h, &cfg.op, u, &t)? / h.eval(x).powi(weight);
        Ok((lhs, rhs))
    })?;
    Ok(assemble(
        ReportMeta {
            check: "kelvin-n",
            norm: h,
            field: Some(u.label()),
            p: n as f64,
            seed: spec.seed,
        },
        &cfg,
        residuals,
        BTreeMap::new(),
        true,
    ))
}

/// Volume and anisotropic-surface averages of `u = h(B⁻¹·)` over Wulff
/// balls against `u(center)`. Each (center, radius) pair contributes two
/// residuals, volume first.
pub fn check_mvp(
    h: &Norm,
    hpoly: &Polynomial,
    centers: &[Vec<f64>],
    radii: &[f64],
    quad_density: usize,
    cfg: &CheckConfig,
) -> Result<Verification> {
    let m = quadratic(h)?;
    let source = if cfg.is(Corruption::WrongMatrix) {
        SpdMatrix::new(&m.matrix().mul(m.matrix()))?
    } else {
        m.clone()
    };
    let u = make_harmonic_pullback(hpoly, &source)?;
    let hstar = h.dual();
    let mut residuals = Vec::new();
    let mut euclid_dev = 0.0_f64;
    for c in centers {
        let value = u.value(c)?;
        for &r in radii {
            let ball = WulffBall::new(c.clone(), r, &hstar)?;
            let vol = wulff_volume_average(&u, &ball, quad_density)?;
            let surf_density = quad_density.max(crate::wulff::MIN_SURFACE_DENSITY);
            let surf = wulff_surface_average(&u, &ball, surf_density, SurfaceMeasure::Anisotropic)?;
            let euclid = wulff_surface_average(&u, &ball, surf_density, SurfaceMeasure::Euclidean)?;
            euclid_dev = euclid_dev.max(relative_residual(euclid, value, cfg.residual_floor));
            residuals.push(PointResidual::new(c.clone(), vol, value, cfg.residual_floor));
            residuals.push(PointResidual::new(c.clone(), surf, value, cfg.residual_floor));
        }
    }
    let mut details = BTreeMap::new();
    details.insert("kappa".into(), json!(wulff_kappa(&hstar, h.dim())?));
    details.insert("euclidean_surface_max_rel".into(), json!(euclid_dev));
    details.insert("quad_density".into(), json!(quad_density));
    let field = u.label().to_string();
    Ok(assemble(
        ReportMeta {
            check: "mvp",
            norm: h,
            field: Some(&field),
            p: 2.0,
            seed: 0,
        },
        cfg,
        residuals,
        details,
        true,
    ))
}

/// `∫_{ℝ²} e^u` for the Liouville profile: midpoint rule on `[−L, L]²` plus
/// the bound `∫_{outside} 64/H*⁴`, which dominates the true tail since
/// `(1 + s²/8)^{−2} ≤ 64/s⁴`.
pub fn liouville_mass(hstar: &Norm, extent: f64, density: usize) -> Result<(f64, f64)> {
    if hstar.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: hstar.dim(),
        });
    }
    if !(extent > 0.0) || density == 0 {
        return Err(Error::InvalidParameter("extent and density must be positive".into()));
    }
    let cell = 2.0 * extent / density as f64;
    let box_mass: f64 = (0..density)
        .into_par_iter()
        .map(|i| {
            let x0 = -extent + (i as f64 + 0.5) * cell;
            let mut row = 0.0;
            for j in 0..density {
                let x1 = -extent + (j as f64 + 0.5) * cell;
                let s = hstar.eval(&[x0, x1]);
                let d = 1.0 + s * s / 8.0;
                row += 1.0 / (d * d);
            }
            row
        })
        .collect::<Vec<_>>()
        .iter()
        .sum::<f64>()
        * cell
        * cell;
    // In polar form the tail beyond the box boundary R(θ) is
    // ∫ 32 / (H*(ω)⁴ R(θ)²) dθ.
    let steps = 4096;
    let tail: f64 = (0..steps)
        .map(|k| {
            let t = 2.0 * PI * (k as f64 + 0.5) / steps as f64;
            let w = [t.cos(), t.sin()];
            let r = extent / w[0].abs().max(w[1].abs());
            32.0 / (hstar.eval(&w).powi(4) * r * r)
        })
        .sum::<f64>()
        * (2.0 * PI / steps as f64);
    Ok((box_mass, tail))
}

/// The α = 0 Liouville profile: pointwise `Δ^H u = −e^u` at samples and
/// total mass `8π·det(√M)`.
pub fn check_liouville(
    h: &Norm,
    spec: &SampleSpec,
    quad_extent: f64,
    quad_density: usize,
    cfg: &CheckConfig,
) -> Result<Verification> {
    let m = quadratic(h)?;
    if h.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: h.dim(),
        });
    }
    let mut cfg = *cfg;
    cfg.op.p = 2.0;
    let hstar = h.dual();
    let profile_norm = if cfg.is(Corruption::WrongMatrix) {
        h.clone()
    } else {
        hstar.clone()
    };
    let u = make_liouville_profile(&profile_norm, 0.0)?;
    let weighted = cfg.is(Corruption::WrongExponent);
    let points = spec.points(2)?;
    let residuals = evaluate(&points, &cfg, |x| {
        let lhs = finsler_p_laplacian(h, &cfg.op, &u, x)?;
        let mut rhs = -u.value(x)?.exp();
        if weighted {
            rhs *= hstar.eval(x);
        }
        Ok((lhs, rhs))
    })?;
    let (box_mass, tail) = liouville_mass(&profile_norm, quad_extent, quad_density)?;
    let mass = box_mass + tail;
    let expected = 8.0 * PI * m.determinant().sqrt();
    let mass_rel = (mass - expected).abs() / expected;
    let mut details = BTreeMap::new();
    details.insert("mass".into(), json!(mass));
    details.insert("mass_box".into(), json!(box_mass));
    details.insert("mass_tail_bound".into(), json!(tail));
    details.insert("mass_expected".into(), json!(expected));
    details.insert("mass_rel_error".into(), json!(mass_rel));
    details.insert("mass_tolerance".into(), json!(MASS_TOL));
    details.insert("quad_extent".into(), json!(quad_extent));
    details.insert("quad_density".into(), json!(quad_density));
    let label = u.label().to_string();
    Ok(assemble(
        ReportMeta {
            check: "liouville",
            norm: h,
            field: Some(&label),
            p: 2.0,
            seed: spec.seed,
        },
        &cfg,
        residuals,
        details,
        mass_rel <= MASS_TOL,
    ))
}

/// Pairing residual against an explicit dual.
fn fk_pair(h: &Norm, hstar: &Norm, x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let hx = h.eval(x);
    let hy = hstar.eval(y);
    if hx == 0.0 || hy == 0.0 {
        return Err(Error::ZeroVector);
    }
    let lhs = hx * hy * dot(&h.grad(x)?, &hstar.grad(y)?);
    Ok((lhs, dot(x, y)))
}

/// Hessian-constancy classification together with the pairing identity
/// on sampled pairs. The check passes when the two verdicts agree: a
/// recovered matrix with vanishing pairing residuals, or no matrix and a
/// violated pairing.
pub fn classify_norm(h: &Norm, spec: &SampleSpec, cfg: &CheckConfig) -> Result<Verification> {
    let n = h.dim();
    let samples = spec.points(n)?;
    let recovered = recover_quadratic(h, &samples)?;
    let hstar = match (cfg.corruption, h) {
        (Some(Corruption::WrongMatrix), Norm::Quadratic(m)) => {
            Norm::quadratic(SpdMatrix::new(&m.inverse_matrix().scale(2.0))?)
        }
        _ => h.dual(),
    };
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = samples
        .iter()
        .zip(samples.iter().cycle().skip(1))
        .map(|(x, y)| (x.clone(), y.clone()))
        .collect();
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    pairs.push((vec![1.0; n], e1));

    let mut residuals = Vec::with_capacity(pairs.len());
    for (x, y) in &pairs {
        let (lhs, rhs) = fk_pair(h, &hstar, x, y)?;
        let mut at = x.clone();
        at.extend_from_slice(y);
        residuals.push(PointResidual::new(at, lhs, rhs, cfg.residual_floor));
    }
    let worst = residuals
        .iter()
        .max_by(|a, b| a.abs.total_cmp(&b.abs))
        .expect("at least one pair");
    let max_rel = residuals.iter().map(|r| r.rel).fold(0.0, f64::max);
    let fk_holds = max_rel <= FK_TOL;

    let mut details = BTreeMap::new();
    details.insert("quadratic".into(), json!(recovered.is_some()));
    details.insert(
        "recovered_matrix".into(),
        recovered.as_ref().map_or(Value::Null, |m| json!(m.matrix().rows())),
    );
    details.insert("max_fk_violation".into(), json!(worst.abs));
    details.insert("violation_at".into(), json!(worst.x));
    details.insert("fk_holds".into(), json!(fk_holds));
    let cfg = cfg.with_tolerance(FK_TOL);
    let mut v = assemble(
        ReportMeta {
            check: "classify",
            norm: h,
            field: None,
            p: cfg.op.p,
            seed: spec.seed,
        },
        &cfg,
        residuals,
        details,
        true,
    );
    v.report.pass = recovered.is_some() == fk_holds;
    Ok(v)
}

/// Closed-form `H*` against the numerical support function at `points`.
pub fn check_dual_norm(h: &Norm, points: &[Vec<f64>], grid_density: usize, cfg: &CheckConfig) -> Result<Verification> {
    let hstar = h.dual();
    let mut residuals = Vec::with_capacity(points.len());
    for x in points {
        if x.len() != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                found: x.len(),
            });
        }
        let numeric = dual_eval_numeric(h, x, grid_density)?;
        let closed = hstar.eval(x);
        // Pure relative comparison; both sides are O(|x|).
        let scale = numeric.abs().max(closed.abs()).max(f64::MIN_POSITIVE);
        let mut r = PointResidual::new(x.clone(), numeric, closed, cfg.residual_floor);
        r.rel = r.abs / scale;
        if r.abs == 0.0 {
            r.rel = 0.0;
        }
        residuals.push(r);
    }
    let mut details = BTreeMap::new();
    details.insert("dual_norm".into(), json!(hstar.label()));
    details.insert("grid_density".into(), json!(grid_density));
    Ok(assemble(
        ReportMeta {
            check: "dual",
            norm: h,
            field: None,
            p: cfg.op.p,
            seed: 0,
        },
        cfg,
        residuals,
        details,
        true,
    ))
}

/// `Δ_p^H u` at `points` through the configured path (`lhs`) and through
/// nested finite differences (`rhs`).
pub fn check_operator_paths(h: &Norm, u: &ScalarField, points: &[Vec<f64>], cfg: &CheckConfig) -> Result<Verification> {
    check_field_dim(h, u)?;
    let nested = OperatorConfig::finite_difference(cfg.op.p);
    let residuals = evaluate(points, cfg, |x| {
        let a = finsler_p_laplacian(h, &cfg.op, u, x)?;
        let b = finsler_p_laplacian(h, &nested, u, x)?;
        Ok((a, b))
    })?;
    let cfg = cfg.with_tolerance(cfg.tolerance.max(NESTED_FD_TOL));
    Ok(assemble(
        ReportMeta {
            check: "op",
            norm: h,
            field: Some(u.label()),
            p: cfg.op.p,
            seed: 0,
        },
        &cfg,
        residuals,
        BTreeMap::new(),
        true,
    ))
}

/// Relative residual from `check_fk_condition`, for callers outside this
/// module.
pub fn fk_relative(h: &Norm, x: &[f64], y: &[f64]) -> Result<f64> {
    let r = crate::norms::check_fk_condition(h, x, y)?;
    Ok(r.abs() / (1.0 + dot(x, y).abs()))
}
