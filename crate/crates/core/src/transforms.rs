//! Linear pullbacks, the Euclidean inversion and the anisotropic Kelvin
//! transforms for quadratic norms.
//!
//! For `H(ξ) = √⟨Mξ,ξ⟩` the Kelvin map `T_H(ξ) = ∇H(ξ)/H(ξ)` has the
//! closed form `Mξ/H(ξ)²` and factors as `L_B ∘ 𝓘 ∘ L_B` with `B = √M`.
//! Transformed fields carry analytic gradients whenever their input does.

use crate::error::{Error, Result};
use crate::fields::{Domain, ScalarField};
use crate::linalg::{dot, Matrix};
use crate::norms::Norm;
use crate::spd::SpdMatrix;

/// `x ↦ u(Bx)`, with gradient `Bᵀ∇u(Bx)`.
pub fn pullback_linear(u: &ScalarField, b: &Matrix) -> Result<ScalarField> {
    if b.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: b.dim(),
        });
    }
    b.inverse()?;
    let (uv, bv) = (u.clone(), b.clone());
    let field = ScalarField::new(u.dim(), u.domain(), format!("pullback({})", u.label()), move |x| {
        uv.value(&bv.mul_vec(x))
    });
    if !u.has_gradient() {
        return Ok(field);
    }
    let (ug, bg) = (u.clone(), b.clone());
    Ok(field.with_gradient(move |x| {
        let g = ug.gradient(&bg.mul_vec(x))?.expect("gradient presence checked");
        Ok(bg.tr_mul_vec(&g))
    }))
}

/// `𝓘(x) = x/|x|²`.
pub fn spherical_inversion(x: &[f64]) -> Result<Vec<f64>> {
    let r2 = dot(x, x);
    if r2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(x.iter().map(|v| v / r2).collect())
}

/// The anisotropic Kelvin map of a quadratic norm.
#[derive(Debug, Clone, PartialEq)]
pub struct KelvinMap {
    norm: Norm,
}

impl KelvinMap {
    /// Refuses non-quadratic norms, for which no such transform exists in
    /// general.
    pub fn new(norm: &Norm) -> Result<Self> {
        match norm {
            Norm::Quadratic(_) => Ok(Self { norm: norm.clone() }),
            Norm::QNorm { .. } => Err(Error::UnsupportedNorm),
        }
    }

    pub fn from_matrix(m: SpdMatrix) -> Self {
        Self {
            norm: Norm::Quadratic(m),
        }
    }

    pub fn norm(&self) -> &Norm {
        &self.norm
    }

    pub fn matrix(&self) -> &SpdMatrix {
        self.norm.matrix().expect("quadratic by construction")
    }

    /// `B = √M`.
    pub fn sqrt(&self) -> &Matrix {
        self.matrix().sqrt_matrix()
    }

    pub fn dim(&self) -> usize {
        self.norm.dim()
    }

    /// The Kelvin map of the dual norm, which inverts this one.
    pub fn dual(&self) -> KelvinMap {
        Self { norm: self.norm.dual() }
    }

    /// `T_H(ξ) = Mξ / H(ξ)²`.
    pub fn apply(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: xi.len(),
            });
        }
        let m = self.matrix();
        let h2 = m.quad_form(xi);
        if h2 == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(m.matrix().mul_vec(xi).into_iter().map(|v| v / h2).collect())
    }

    /// `DT_H(x)ᵀ g = M g / H² − 2 Mx ⟨Mx, g⟩ / H⁴` (the Jacobian is symmetric).
    fn jacobian_tr_mul(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let m = self.matrix();
        let h2 = m.quad_form(x);
        let mx = m.matrix().mul_vec(x);
        let mg = m.matrix().mul_vec(g);
        let s = 2.0 * dot(&mx, g) / (h2 * h2);
        mg.iter().zip(&mx).map(|(a, b)| a / h2 - s * b).collect()
    }
}

pub fn kelvin_point(k: &KelvinMap, xi: &[f64]) -> Result<Vec<f64>> {
    k.apply(xi)
}

fn check_dims(u: &ScalarField, k: &KelvinMap) -> Result<()> {
    if u.dim() != k.dim() {
        return Err(Error::DimensionMismatch {
            expected: k.dim(),
            found: u.dim(),
        });
    }
    Ok(())
}

/// `û(x) = u(T_H(x)) / H(x)^{n−2}` on `ℝⁿ ∖ {0}`.
pub fn hat_transform(u: &ScalarField, k: &KelvinMap) -> Result<ScalarField> {
    check_dims(u, k)?;
    let n = k.dim();
    let weight = n as f64 - 2.0;
    let (uv, kv) = (u.clone(), k.clone());
    let field = ScalarField::new(n, Domain::Punctured, format!("hat({})", u.label()), move |x| {
        let t = kv.apply(x)?;
        let h = kv.matrix().quad_form(x).sqrt();
        Ok(uv.value(&t)? / h.powf(weight))
    });
    if !u.has_gradient() {
        return Ok(field);
    }
    let (ug, kg) = (u.clone(), k.clone());
    Ok(field.with_gradient(move |x| {
        let t = kg.apply(x)?;
        let m = kg.matrix();
        let h2 = m.quad_form(x);
        let h = h2.sqrt();
        let ut = ug.value(&t)?;
        let gt = ug.gradient(&t)?.expect("gradient presence checked");
        let chain = kg.jacobian_tr_mul(x, &gt);
        let mx = m.matrix().mul_vec(x);
        let hw = h.powf(weight);
        // ∇H^{-(n-2)} = −(n−2) H^{−n} Mx
        let dw = -weight * h.powf(-weight) / h2;
        Ok(chain.iter().zip(&mx).map(|(c, m)| c / hw + ut * dw * m).collect())
    }))
}

/// `u*(x) = u(T_H(x))` on `ℝⁿ ∖ {0}`.
pub fn star_transform(u: &ScalarField, k: &KelvinMap) -> Result<ScalarField> {
    check_dims(u, k)?;
    let (uv, kv) = (u.clone(), k.clone());
    let field = ScalarField::new(k.dim(), Domain::Punctured, format!("star({})", u.label()), move |x| {
        uv.value(&kv.apply(x)?)
    });
    if !u.has_gradient() {
        return Ok(field);
    }
    let (ug, kg) = (u.clone(), k.clone());
    Ok(field.with_gradient(move |x| {
        let t = kg.apply(x)?;
        let gt = ug.gradient(&t)?.expect("gradient presence checked");
        Ok(kg.jacobian_tr_mul(x, &gt))
    }))
}

/// Euclidean Kelvin transform `u(x/|x|²) / |x|^{n−2}`.
pub fn classical_kelvin(u: &ScalarField, n: usize) -> Result<ScalarField> {
    if u.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u.dim(),
        });
    }
    let weight = n as f64 - 2.0;
    let uv = u.clone();
    let field = ScalarField::new(n, Domain::Punctured, format!("kelvin({})", u.label()), move |x| {
        let r2 = dot(x, x);
        Ok(uv.value(&spherical_inversion(x)?)? / r2.powf(0.5 * weight))
    });
    if !u.has_gradient() {
        return Ok(field);
    }
    let ug = u.clone();
    Ok(field.with_gradient(move |x| {
        let r2 = dot(x, x);
        let y = spherical_inversion(x)?;
        let uy = ug.value(&y)?;
        let g = ug.gradient(&y)?.expect("gradient presence checked");
        // D𝓘(x) = (I − 2 x xᵀ/|x|²)/|x|²
        let xg = dot(x, &g);
        let rw = r2.powf(0.5 * weight);
        Ok(x.iter()
            .zip(&g)
            .map(|(xi, gi)| {
                let chain = (gi - 2.0 * xi * xg / r2) / r2;
                chain / rw - weight * uy * xi / (rw * r2)
            })
            .collect())
    }))
}
