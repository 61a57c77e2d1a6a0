//! Pointwise Finsler p-Laplacian `Δ_p^H u = div(H^{p−1}(∇u) ∇H(∇u))` and
//! the weak-form residual against a bump test function.
//!
//! The divergence is always taken by central differences of the flux
//! field, never by a second-derivative stencil of `u`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{fd_divergence, fd_gradient, BumpFunction, ScalarField, FIRST_DIFF_STEP, NESTED_DIFF_STEP};
use crate::linalg::{dot, norm2};
use crate::norms::Norm;

pub const DEFAULT_DEGENERATE_TOL: f64 = 1e-10;
pub const MIN_WEAK_DENSITY: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradMode {
    /// Analytic gradients where the field has one, finite differences
    /// otherwise.
    Analytic,
    /// Always nested finite differences.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub p: f64,
    /// Step coefficient; the actual step at `x` is `h_flux · (1 + |x|)`.
    pub h_flux: f64,
    pub grad_mode: GradMode,
    pub degenerate_tol: f64,
}

impl OperatorConfig {
    pub fn analytic(p: f64) -> Self {
        Self {
            p,
            h_flux: FIRST_DIFF_STEP,
            grad_mode: GradMode::Analytic,
            degenerate_tol: DEFAULT_DEGENERATE_TOL,
        }
    }

    pub fn finite_difference(p: f64) -> Self {
        Self {
            p,
            h_flux: NESTED_DIFF_STEP,
            grad_mode: GradMode::FiniteDifference,
            degenerate_tol: DEFAULT_DEGENERATE_TOL,
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_step(mut self, h_flux: f64) -> Self {
        self.h_flux = h_flux;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must be > 1, got {}", self.p)));
        }
        if !(self.h_flux > 0.0 && self.h_flux.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step must be > 0, got {}",
                self.h_flux
            )));
        }
        if !(self.degenerate_tol >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "degenerate tolerance must be >= 0, got {}",
                self.degenerate_tol
            )));
        }
        Ok(())
    }

    /// Step used around `x`.
    pub fn step_at(&self, x: &[f64]) -> f64 {
        self.h_flux * (1.0 + norm2(x))
    }
}

/// `H(g)^{p−1} ∇H(g)`, extended by zero at degenerate gradients when
/// `p ≥ 2`.
pub fn flux(h: &Norm, p: f64, g: &[f64], degenerate_tol: f64) -> Result<Vec<f64>> {
    let hg = h.eval(g);
    if hg <= degenerate_tol {
        if p >= 2.0 {
            return Ok(vec![0.0; g.len()]);
        }
        return Err(Error::DegenerateGradient { norm: hg, p });
    }
    match h {
        // H^{p−1}·Mg/H = H^{p−2}·Mg
        Norm::Quadratic(m) => {
            let s = hg.powf(p - 2.0);
            Ok(m.matrix().mul_vec(g).into_iter().map(|v| s * v).collect())
        }
        Norm::QNorm { .. } => {
            let s = hg.powf(p - 1.0);
            Ok(h.grad(g)?.into_iter().map(|v| s * v).collect())
        }
    }
}

fn gradient_for(u: &ScalarField, mode: GradMode, y: &[f64], inner_step: f64) -> Result<Vec<f64>> {
    match mode {
        GradMode::Analytic => u.gradient_or_fd(y, inner_step),
        GradMode::FiniteDifference => fd_gradient(u, y, inner_step),
    }
}

/// `Δ_p^H u (x)`.
pub fn finsler_p_laplacian(h: &Norm, cfg: &OperatorConfig, u: &ScalarField, x: &[f64]) -> Result<f64> {
    cfg.validate()?;
    if u.dim() != h.dim() || x.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: if u.dim() != h.dim() { u.dim() } else { x.len() },
        });
    }
    let step = cfg.step_at(x);
    let nested = cfg.grad_mode == GradMode::FiniteDifference || !u.has_gradient();
    let reach = if nested { 2.0 * step } else { step };
    if !u.domain().contains_ball(x, reach) {
        return Err(Error::OutOfDomain);
    }
    fd_divergence(
        |y| {
            let g = gradient_for(u, cfg.grad_mode, y, step)?;
            flux(h, cfg.p, &g, cfg.degenerate_tol)
        },
        x,
        step,
    )
}

/// Isotropic `Δ_p u (x)`: the Euclidean case of [`finsler_p_laplacian`].
pub fn p_laplacian(cfg: &OperatorConfig, u: &ScalarField, x: &[f64]) -> Result<f64> {
    let e = Norm::euclidean(u.dim())?;
    finsler_p_laplacian(&e, cfg, u, x)
}

/// Components of `∫ H^{p−1}(∇u)∇H(∇u)·∇φ − ∫ fφ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakFormResidual {
    pub residual: f64,
    pub flux_term: f64,
    pub source_term: f64,
    /// `∫|f|φ`, the natural normalization.
    pub source_abs: f64,
}

impl WeakFormResidual {
    /// `|residual| / ∫|f|φ`, or the absolute residual when `f` vanishes on
    /// the support.
    pub fn relative(&self) -> f64 {
        if self.source_abs > 0.0 {
            self.residual.abs() / self.source_abs
        } else {
            self.residual.abs()
        }
    }
}

/// Weak-form residual of `−Δ_p^H u = f` tested against `φ`, by the
/// tensor midpoint rule on the bounding box of `supp φ` with
/// `quad_density` cells per axis.
pub fn weak_form_residual(
    h: &Norm,
    p: f64,
    u: &ScalarField,
    f: &ScalarField,
    phi: &BumpFunction,
    quad_density: usize,
) -> Result<WeakFormResidual> {
    let n = h.dim();
    if u.dim() != n || f.dim() != n || phi.center().len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u.dim(),
        });
    }
    if quad_density < MIN_WEAK_DENSITY {
        return Err(Error::InvalidParameter(format!(
            "quadrature density must be at least {MIN_WEAK_DENSITY}, got {quad_density}"
        )));
    }
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p must be > 1, got {p}")));
    }
    let (c, rho) = (phi.center(), phi.radius());
    if !u.domain().contains_ball(c, rho) || !f.domain().contains_ball(c, rho) {
        return Err(Error::OutOfDomain);
    }
    let cell = 2.0 * rho / quad_density as f64;
    let volume = cell.powi(n as i32);
    let cells = quad_density.pow(n as u32);

    let parts = (0..cells)
        .into_par_iter()
        .map(|mut idx| -> Result<(f64, f64, f64)> {
            let mut x = vec![0.0; n];
            for (i, xi) in x.iter_mut().enumerate() {
                let k = idx % quad_density;
                idx /= quad_density;
                *xi = c[i] - rho + (k as f64 + 0.5) * cell;
            }
            let phi_x = phi.value(&x);
            if phi_x == 0.0 {
                return Ok((0.0, 0.0, 0.0));
            }
            let g = u.gradient_or_fd(&x, NESTED_DIFF_STEP * (1.0 + norm2(&x)))?;
            let fl = flux(h, p, &g, DEFAULT_DEGENERATE_TOL)?;
            let fx = f.value(&x)?;
            Ok((
                dot(&fl, &phi.gradient(&x)) * volume,
                fx * phi_x * volume,
                fx.abs() * phi_x * volume,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let (flux_term, source_term, source_abs) = parts
        .iter()
        .fold((0.0, 0.0, 0.0), |acc, t| (acc.0 + t.0, acc.1 + t.1, acc.2 + t.2));
    Ok(WeakFormResidual {
        residual: flux_term - source_term,
        flux_term,
        source_term,
        source_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{constant_field, make_polynomial, Polynomial};
    use crate::spd::SpdMatrix;

    fn diag41() -> Norm {
        Norm::quadratic(SpdMatrix::diag(&[4.0, 1.0]).unwrap())
    }

    #[test]
    fn flux_examples() {
        assert_eq!(flux(&diag41(), 4.0, &[1.0, 0.0], 1e-10).unwrap(), vec![16.0, 0.0]);
        let e = Norm::euclidean(2).unwrap();
        assert_eq!(flux(&e, 2.0, &[3.0, 4.0], 1e-10).unwrap(), vec![3.0, 4.0]);
        assert_eq!(flux(&diag41(), 3.0, &[0.0, 0.0], 1e-10).unwrap(), vec![0.0, 0.0]);
        let q = Norm::q_norm(3.0, 2).unwrap();
        assert_eq!(flux(&q, 2.5, &[0.0, 0.0], 1e-10).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            flux(&e, 1.5, &[0.0, 0.0], 1e-10),
            Err(Error::DegenerateGradient { .. })
        ));
    }

    #[test]
    fn anisotropic_laplacian_of_sum_of_squares() {
        let u = make_polynomial([(vec![2, 0], 1.0), (vec![0, 2], 1.0)], 2).unwrap();
        let cfg = OperatorConfig::analytic(2.0);
        for x in [[0.0, 0.0], [1.0, -2.0], [3.5, 0.25]] {
            let v = finsler_p_laplacian(&diag41(), &cfg, &u, &x).unwrap();
            assert!((v - 10.0).abs() < 1e-8, "{v}");
            let iso = p_laplacian(&cfg, &u, &x).unwrap();
            assert!((iso - 4.0).abs() < 1e-8, "{iso}");
        }
    }

    #[test]
    fn harmonic_and_linear_fields_vanish() {
        let h = make_polynomial([(vec![2, 0], 1.0), (vec![0, 2], -1.0)], 2).unwrap();
        let v = p_laplacian(&OperatorConfig::analytic(2.0), &h, &[0.7, -0.2]).unwrap();
        assert!(v.abs() < 1e-8);
        let lin = make_polynomial([(vec![1, 0], 1.0), (vec![0, 1], 2.0)], 2).unwrap();
        for p in [1.5, 2.0, 3.0, 4.0] {
            let cfg = OperatorConfig::analytic(p);
            assert_eq!(finsler_p_laplacian(&diag41(), &cfg, &lin, &[0.3, 0.9]).unwrap(), 0.0);
        }
    }

    #[test]
    fn four_laplacian_of_radius_squared() {
        let u = make_polynomial([(vec![2, 0], 1.0), (vec![0, 2], 1.0)], 2).unwrap();
        let v = p_laplacian(&OperatorConfig::analytic(4.0), &u, &[1.0, 0.0]).unwrap();
        assert!((v - 32.0).abs() < 1e-7, "{v}");
    }

    #[test]
    fn nested_difference_mode_agrees() {
        let u = make_polynomial([(vec![3, 0], 1.0), (vec![1, 1], 2.0), (vec![0, 2], 1.0)], 2).unwrap();
        let x = [0.4, 0.8];
        let a = finsler_p_laplacian(&diag41(), &OperatorConfig::analytic(3.0), &u, &x).unwrap();
        let f = finsler_p_laplacian(&diag41(), &OperatorConfig::finite_difference(3.0), &u, &x).unwrap();
        assert!((a - f).abs() <= 1e-3 * a.abs(), "{a} vs {f}");
    }

    #[test]
    fn rejects_bad_configuration() {
        let u = constant_field(2, 1.0);
        let e = Norm::euclidean(2).unwrap();
        assert!(finsler_p_laplacian(&e, &OperatorConfig::analytic(1.0), &u, &[0.0, 0.0]).is_err());
        let cfg = OperatorConfig::analytic(2.0).with_step(0.0);
        assert!(finsler_p_laplacian(&e, &cfg, &u, &[0.0, 0.0]).is_err());
        let e3 = Norm::euclidean(3).unwrap();
        assert!(matches!(
            finsler_p_laplacian(&e3, &OperatorConfig::analytic(2.0), &u, &[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn weak_form_vanishes_for_linear_fields() {
        let lin = make_polynomial([(vec![1, 0], 3.0), (vec![0, 1], -1.0)], 2).unwrap();
        let zero = constant_field(2, 0.0);
        let phi = BumpFunction::new(vec![0.0, 0.0], 1.0).unwrap();
        let r = weak_form_residual(&diag41(), 2.0, &lin, &zero, &phi, 64).unwrap();
        assert!(r.residual.abs() <= 1e-12, "{r:?}");
    }

    #[test]
    fn weak_form_of_isotropic_harmonic() {
        let h = Polynomial::new(2, [(vec![2, 0], 1.0), (vec![0, 2], -1.0)])
            .unwrap()
            .to_field();
        let zero = constant_field(2, 0.0);
        let phi = BumpFunction::new(vec![0.5, -0.25], 0.8).unwrap();
        let e = Norm::euclidean(2).unwrap();
        let r = weak_form_residual(&e, 2.0, &h, &zero, &phi, 64).unwrap();
        assert!(r.residual.abs() <= 1e-6, "{r:?}");
        assert!(weak_form_residual(&e, 2.0, &h, &zero, &phi, 16).is_err());
    }
}
