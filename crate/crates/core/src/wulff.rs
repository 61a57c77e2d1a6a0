//! Wulff balls `B_r(a) = {x : H*(x − a) < r}` and averages over them.
//!
//! For a quadratic primal norm with matrix `M` the Wulff ball is the
//! ellipsoid `a + r·B·{|z| < 1}` with `B = √M`, which is how every
//! integral here is computed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::linalg::{norm2, sub, Matrix};
use crate::norms::Norm;
use crate::quadrature::{ball_rule, sphere_rule, unit_ball_volume};

pub const MIN_VOLUME_DENSITY: usize = 32;
pub const MIN_SURFACE_DENSITY: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct WulffBall {
    center: Vec<f64>,
    radius: f64,
    dual_norm: Norm,
    /// `√M` for the primal matrix `M`.
    b: Matrix,
}

impl WulffBall {
    /// `hstar` is the dual norm defining the ball; it must be quadratic.
    pub fn new(center: Vec<f64>, radius: f64, hstar: &Norm) -> Result<Self> {
        let m_inv = hstar.matrix().ok_or(Error::UnsupportedNorm)?;
        if center.len() != hstar.dim() {
            return Err(Error::DimensionMismatch {
                expected: hstar.dim(),
                found: center.len(),
            });
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            center,
            radius,
            b: m_inv.inv_sqrt_matrix().clone(),
            dual_norm: hstar.clone(),
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dual_norm(&self) -> &Norm {
        &self.dual_norm
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.dual_norm.eval(&sub(x, &self.center)) < self.radius
    }

    /// `a + r·B·z`.
    pub fn map_from_unit(&self, z: &[f64]) -> Vec<f64> {
        self.b
            .mul_vec(z)
            .iter()
            .zip(&self.center)
            .map(|(v, a)| a + self.radius * v)
            .collect()
    }

    /// `κ rⁿ`.
    pub fn volume(&self) -> f64 {
        wulff_kappa(&self.dual_norm, self.dim()).expect("validated on construction")
            * self.radius.powi(self.dim() as i32)
    }

    fn det_b(&self) -> f64 {
        let m_inv = self.dual_norm.matrix().expect("validated on construction");
        m_inv.determinant().sqrt().recip()
    }
}

/// Lebesgue measure of the unit Wulff ball, `κ = det(√M)·ω_n`.
pub fn wulff_kappa(hstar: &Norm, n: usize) -> Result<f64> {
    let m_inv = hstar.matrix().ok_or(Error::UnsupportedNorm)?;
    if n != hstar.dim() {
        return Err(Error::DimensionMismatch {
            expected: hstar.dim(),
            found: n,
        });
    }
    Ok(m_inv.determinant().sqrt().recip() * unit_ball_volume(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceMeasure {
    /// `dℋ^{n−1} / |∇H*(x − a)|`, the measure consistent with the volume
    /// average under differentiation in `r`.
    Anisotropic,
    /// Plain Euclidean surface measure of the ellipsoid.
    Euclidean,
}

/// `(1/(κrⁿ)) ∫_{B_r(a)} u dx`.
pub fn wulff_volume_average(u: &ScalarField, ball: &WulffBall, quad_density: usize) -> Result<f64> {
    if quad_density < MIN_VOLUME_DENSITY {
        return Err(Error::InvalidParameter(format!(
            "volume quadrature density must be at least {MIN_VOLUME_DENSITY}, got {quad_density}"
        )));
    }
    check_dim(u, ball)?;
    let n = ball.dim();
    let mut sum = 0.0;
    for (z, w) in ball_rule(n, quad_density) {
        sum += w * u.value(&ball.map_from_unit(&z))?;
    }
    let integral = ball.det_b() * ball.radius.powi(n as i32) * sum;
    Ok(integral / ball.volume())
}

/// Average of `u` over `∂B_r(a)` with the chosen surface measure.
pub fn wulff_surface_average(
    u: &ScalarField,
    ball: &WulffBall,
    quad_density: usize,
    measure: SurfaceMeasure,
) -> Result<f64> {
    if quad_density < MIN_SURFACE_DENSITY {
        return Err(Error::InvalidParameter(format!(
            "surface quadrature density must be at least {MIN_SURFACE_DENSITY}, got {quad_density}"
        )));
    }
    check_dim(u, ball)?;
    let n = ball.dim();
    let rule = sphere_rule(n, quad_density);
    match measure {
        SurfaceMeasure::Anisotropic => {
            let mut sum = 0.0;
            for (w_dir, w) in &rule {
                sum += w * u.value(&ball.map_from_unit(w_dir))?;
            }
            let integral = ball.det_b() * ball.radius.powi(n as i32 - 1) * sum;
            let kappa = wulff_kappa(&ball.dual_norm, n)?;
            Ok(integral / (n as f64 * kappa * ball.radius.powi(n as i32 - 1)))
        }
        SurfaceMeasure::Euclidean => {
            let b_inv = ball.dual_norm.matrix().expect("validated").sqrt_matrix();
            let (mut sum, mut area) = (0.0, 0.0);
            for (w_dir, w) in &rule {
                // Area element of the linear image B·S^{n−1}: det(B)|B⁻¹ω|.
                let stretch = w * norm2(&b_inv.mul_vec(w_dir));
                sum += stretch * u.value(&ball.map_from_unit(w_dir))?;
                area += stretch;
            }
            Ok(sum / area)
        }
    }
}

fn check_dim(u: &ScalarField, ball: &WulffBall) -> Result<()> {
    if u.dim() != ball.dim() {
        return Err(Error::DimensionMismatch {
            expected: ball.dim(),
            found: u.dim(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{constant_field, make_harmonic_pullback, make_polynomial, Polynomial};
    use crate::spd::SpdMatrix;
    use std::f64::consts::PI;

    fn dual_of(d: &[f64]) -> Norm {
        Norm::quadratic(SpdMatrix::diag(d).unwrap()).dual()
    }

    #[test]
    fn kappa_examples() {
        assert!((wulff_kappa(&dual_of(&[1.0, 1.0]), 2).unwrap() - PI).abs() < 1e-15);
        assert!((wulff_kappa(&dual_of(&[4.0, 1.0]), 2).unwrap() - 2.0 * PI).abs() < 1e-14);
        assert!((wulff_kappa(&dual_of(&[1.0, 1.0, 1.0]), 3).unwrap() - 4.0 * PI / 3.0).abs() < 1e-14);
        assert_eq!(
            wulff_kappa(&Norm::q_norm(3.0, 2).unwrap(), 2),
            Err(Error::UnsupportedNorm)
        );
    }

    #[test]
    fn membership() {
        let ball = WulffBall::new(vec![1.0, 1.0], 0.5, &dual_of(&[4.0, 1.0])).unwrap();
        // Semi-axes r·2 and r·1.
        assert!(ball.contains(&[1.99, 1.0]));
        assert!(!ball.contains(&[2.01, 1.0]));
        assert!(ball.contains(&[1.0, 1.49]));
        assert!(!ball.contains(&[1.0, 1.51]));
    }

    #[test]
    fn averages_of_constants_and_linear_fields() {
        let hstar = dual_of(&[4.0, 1.0]);
        let ball = WulffBall::new(vec![-0.3, 2.0], 0.7, &hstar).unwrap();
        let c = constant_field(2, 3.25);
        assert!((wulff_volume_average(&c, &ball, 32).unwrap() - 3.25).abs() < 1e-12);
        for m in [SurfaceMeasure::Anisotropic, SurfaceMeasure::Euclidean] {
            assert!((wulff_surface_average(&c, &ball, 64, m).unwrap() - 3.25).abs() < 1e-12);
        }
        let lin = make_polynomial([(vec![1, 0], 1.0)], 2).unwrap();
        assert!((wulff_volume_average(&lin, &ball, 32).unwrap() + 0.3).abs() < 1e-10);
    }

    #[test]
    fn harmonic_pullback_mean_values() {
        let m = SpdMatrix::diag(&[4.0, 1.0]).unwrap();
        let h = Polynomial::new(2, [(vec![2, 0], 1.0), (vec![0, 2], -1.0)]).unwrap();
        let u = make_harmonic_pullback(&h, &m).unwrap();
        let ball = WulffBall::new(vec![1.0, 1.0], 0.5, &Norm::quadratic(m).dual()).unwrap();
        assert!((wulff_volume_average(&u, &ball, 64).unwrap() + 0.75).abs() < 1e-6);
        let s = wulff_surface_average(&u, &ball, 64, SurfaceMeasure::Anisotropic).unwrap();
        assert!((s + 0.75).abs() < 1e-8);
    }

    #[test]
    fn isotropic_measures_coincide() {
        let u = make_polynomial([(vec![2, 0], 1.0), (vec![0, 2], -1.0)], 2).unwrap();
        let ball = WulffBall::new(vec![2.0, 0.0], 1.0, &dual_of(&[1.0, 1.0])).unwrap();
        let a = wulff_surface_average(&u, &ball, 64, SurfaceMeasure::Anisotropic).unwrap();
        let e = wulff_surface_average(&u, &ball, 64, SurfaceMeasure::Euclidean).unwrap();
        assert!((a - 4.0).abs() < 1e-8 && (e - 4.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        let hstar = dual_of(&[4.0, 1.0]);
        assert!(WulffBall::new(vec![0.0, 0.0], 0.0, &hstar).is_err());
        assert!(WulffBall::new(vec![0.0], 1.0, &hstar).is_err());
        assert_eq!(
            WulffBall::new(vec![0.0, 0.0], 1.0, &Norm::q_norm(2.5, 2).unwrap()),
            Err(Error::UnsupportedNorm)
        );
        let ball = WulffBall::new(vec![0.0, 0.0], 1.0, &hstar).unwrap();
        let c = constant_field(2, 1.0);
        assert!(wulff_volume_average(&c, &ball, 16).is_err());
        assert!(wulff_surface_average(&c, &ball, 32, SurfaceMeasure::Anisotropic).is_err());
    }
}
