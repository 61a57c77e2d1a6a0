//! Scalar fields `u: ℝⁿ → ℝ`, builtin test fields and central-difference
//! derivatives.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};
use crate::norms::Norm;
use crate::spd::SpdMatrix;

/// Step coefficient for first differences of analytic-gradient fluxes.
pub const FIRST_DIFF_STEP: f64 = 1e-5;
/// Step coefficient for nested (second-difference) paths.
pub const NESTED_DIFF_STEP: f64 = 1e-4;

/// `coeff · (1 + |x|)`.
pub fn scaled_step(coeff: f64, x: &[f64]) -> f64 {
    coeff * (1.0 + norm2(x))
}

/// Open set on which a field is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Whole,
    /// `ℝⁿ ∖ {0}`.
    Punctured,
}

impl Domain {
    pub fn contains(self, x: &[f64]) -> bool {
        match self {
            Domain::Whole => true,
            Domain::Punctured => x.iter().any(|&v| v != 0.0),
        }
    }

    /// Whether the closed ball of radius `r` around `x` lies in the domain.
    pub fn contains_ball(self, x: &[f64], r: f64) -> bool {
        match self {
            Domain::Whole => true,
            Domain::Punctured => norm2(x) > r,
        }
    }
}

type ValueFn = dyn Fn(&[f64]) -> Result<f64> + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;

/// An immutable scalar field with an optional analytic gradient.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    domain: Domain,
    label: String,
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradFn>>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(
        dim: usize,
        domain: Domain,
        label: impl Into<String>,
        value: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            domain,
            label: label.into(),
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    /// Drops the analytic gradient, forcing finite differences.
    pub fn without_gradient(mut self) -> Self {
        self.gradient = None;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if !self.domain.contains(x) {
            return Err(Error::OutOfDomain);
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        (self.value)(x)
    }

    /// The analytic gradient, or `None` when the field has none.
    pub fn gradient(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        self.check_point(x)?;
        self.gradient.as_ref().map(|g| g(x)).transpose()
    }

    /// Analytic gradient when present, else central differences with step
    /// `h`.
    pub fn gradient_or_fd(&self, x: &[f64], h: f64) -> Result<Vec<f64>> {
        match self.gradient(x)? {
            Some(g) => Ok(g),
            None => fd_gradient(self, x, h),
        }
    }
}

/// Central-difference gradient `(u(x+heᵢ) − u(x−heᵢ)) / 2h`.
pub fn fd_gradient(u: &ScalarField, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    if x.len() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: x.len(),
        });
    }
    if !u.domain().contains_ball(x, h) {
        return Err(Error::OutOfDomain);
    }
    let mut y = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let up = u.value(&y)?;
        y[i] = x[i] - h;
        let down = u.value(&y)?;
        y[i] = x[i];
        g.push((up - down) / (2.0 * h));
    }
    Ok(g)
}

/// Central-difference divergence `Σᵢ (Fᵢ(x+heᵢ) − Fᵢ(x−heᵢ)) / 2h`.
pub fn fd_divergence<F>(field: F, x: &[f64], h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let mut y = x.to_vec();
    let mut div = 0.0;
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let up = field(&y)?;
        y[i] = x[i] - h;
        let down = field(&y)?;
        y[i] = x[i];
        if up.len() != x.len() || down.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: up.len().min(down.len()),
            });
        }
        div += (up[i] - down[i]) / (2.0 * h);
    }
    Ok(div)
}

/// Polynomial `Σ c_α y^α` stored as a merged coefficient table.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn new<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut table = BTreeMap::new();
        for (exps, c) in terms {
            if exps.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: exps.len(),
                });
            }
            if !c.is_finite() {
                return Err(Error::InvalidParameter("non-finite coefficient".into()));
            }
            *table.entry(exps).or_insert(0.0) += c;
        }
        table.retain(|_, c| *c != 0.0);
        Ok(Self { n, terms: table })
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(n, [(vec![0; n], c)])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(y).map(|(&k, v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }

    /// Partial derivative in coordinate `i`.
    pub fn derivative(&self, i: usize) -> Polynomial {
        let terms = self.terms.iter().filter(|(e, _)| e[i] > 0).map(|(e, c)| {
            let mut d = e.clone();
            d[i] -= 1;
            (d, c * e[i] as f64)
        });
        Polynomial::new(self.n, terms).expect("derivative keeps dimension")
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.terms
                    .iter()
                    .filter(|(e, _)| e[i] > 0)
                    .map(|(e, c)| {
                        let mono: f64 = e
                            .iter()
                            .zip(y)
                            .enumerate()
                            .map(|(j, (&k, v))| v.powi(if j == i { k as i32 - 1 } else { k as i32 }))
                            .product();
                        c * e[i] as f64 * mono
                    })
                    .sum()
            })
            .collect()
    }

    /// Term-wise Laplacian.
    pub fn laplacian(&self) -> Polynomial {
        let terms = (0..self.n).flat_map(|i| {
            let di = self.derivative(i);
            di.derivative(i).terms.into_iter()
        });
        Polynomial::new(self.n, terms).expect("laplacian keeps dimension")
    }

    /// Exact test on the coefficient table.
    pub fn is_harmonic(&self) -> bool {
        self.laplacian().terms.is_empty()
    }

    pub fn to_field(&self) -> ScalarField {
        let (pv, pg) = (self.clone(), self.clone());
        ScalarField::new(self.n, Domain::Whole, format!("poly:{self}"), move |y| Ok(pv.eval(y)))
            .with_gradient(move |y| Ok(pg.gradient(y)))
    }
}

impl fmt::Display for Polynomial {
    /// Mini-language form, e.g. `1*y1^2+-1*y2^2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                f.write_str("+")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*y{}", i + 1)?,
                    _ => write!(f, "*y{}^{}", i + 1, k)?,
                }
            }
        }
        Ok(())
    }
}

pub fn make_polynomial<I>(coeffs: I, n: usize) -> Result<ScalarField>
where
    I: IntoIterator<Item = (Vec<u32>, f64)>,
{
    Ok(Polynomial::new(n, coeffs)?.to_field())
}

/// `u(x) = h(B⁻¹x)` with `B = √M`, which is `Δ^H`-harmonic for
/// `H = √⟨M·,·⟩` whenever `h` is harmonic.
pub fn make_harmonic_pullback(h_poly: &Polynomial, m: &SpdMatrix) -> Result<ScalarField> {
    if h_poly.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: h_poly.dim(),
        });
    }
    if !h_poly.is_harmonic() {
        return Err(Error::NotHarmonic);
    }
    let b_inv = m.inv_sqrt_matrix().clone();
    let (pv, pg) = (h_poly.clone(), h_poly.clone());
    let bv = b_inv.clone();
    Ok(ScalarField::new(
        m.dim(),
        Domain::Whole,
        format!("harmonic-pullback:{h_poly}"),
        move |x| Ok(pv.eval(&bv.mul_vec(x))),
    )
    .with_gradient(move |x| Ok(b_inv.tr_mul_vec(&pg.gradient(&b_inv.mul_vec(x))))))
}

/// `u(x) = −2 ln(1 + H*(x)²/8)`, the α = 0 Liouville profile. `alpha` is
/// only recorded in the label.
pub fn make_liouville_profile(hstar: &Norm, alpha: f64) -> Result<ScalarField> {
    if hstar.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: hstar.dim(),
        });
    }
    let (hv, hg) = (hstar.clone(), hstar.clone());
    Ok(
        ScalarField::new(2, Domain::Whole, format!("liouville(alpha={alpha})"), move |x| {
            let s = hv.eval(x);
            Ok(-2.0 * (s * s / 8.0).ln_1p())
        })
        .with_gradient(move |x| {
            let s = hg.eval(x);
            if s == 0.0 {
                return Ok(vec![0.0; 2]);
            }
            let g = hg.grad(x)?;
            let factor = -0.5 * s / (1.0 + s * s / 8.0);
            Ok(g.iter().map(|v| factor * v).collect())
        }),
    )
}

pub fn constant_field(n: usize, c: f64) -> ScalarField {
    ScalarField::new(n, Domain::Whole, format!("constant:{c}"), move |_| Ok(c)).with_gradient(move |_| Ok(vec![0.0; n]))
}

/// `ln|y|` on `ℝⁿ ∖ {0}`; `n`-harmonic.
pub fn log_radius_field(n: usize) -> ScalarField {
    ScalarField::new(n, Domain::Punctured, "log-radius", |y| Ok(norm2(y).ln())).with_gradient(|y| {
        let r2 = dot(y, y);
        Ok(y.iter().map(|v| v / r2).collect())
    })
}

/// `exp(⟨a, y⟩)`; its gradient never vanishes when `a ≠ 0`.
pub fn exponential_field(a: Vec<f64>) -> ScalarField {
    let n = a.len();
    let ag = a.clone();
    let label = format!("exp:{}", a.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
    ScalarField::new(n, Domain::Whole, label, move |y| Ok(dot(&a, y).exp())).with_gradient(move |y| {
        let e = dot(&ag, y).exp();
        Ok(ag.iter().map(|v| v * e).collect())
    })
}

/// Smooth test fields on `ℝⁿ`: sum of squares, a linear form, a mixed
/// cubic, a quartic and an exponential.
pub fn builtin_suite(n: usize) -> Result<Vec<ScalarField>> {
    let mono = |pairs: &[(usize, u32)]| {
        let mut e = vec![0u32; n];
        for &(i, k) in pairs {
            e[i] += k;
        }
        e
    };
    let squares = (0..n).map(|i| (mono(&[(i, 2)]), 1.0));
    let linear = (0..n).map(|i| (mono(&[(i, 1)]), 1.0 + i as f64));
    let cubic = [
        (mono(&[(0, 3)]), 1.0),
        (mono(&[(0, 1), (1, 1)]), -2.0),
        (mono(&[(1, 2)]), 0.5),
        (mono(&[(0, 1)]), 1.0),
    ];
    let quartic = [
        (mono(&[(0, 4)]), 0.25),
        (mono(&[(0, 2), (n - 1, 2)]), 1.0),
        (mono(&[(1, 1)]), -1.0),
    ];
    let a: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.3 } else { -0.2 }).collect();
    Ok(vec![
        make_polynomial(squares, n)?,
        make_polynomial(linear, n)?,
        make_polynomial(cubic, n)?,
        make_polynomial(quartic, n)?,
        exponential_field(a),
    ])
}

/// The standard bump `exp(−1/(1 − |x−c|²/ρ²))`, supported in the open
/// ball of radius `ρ` about `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpFunction {
    center: Vec<f64>,
    radius: f64,
}

impl BumpFunction {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bump radius must be positive, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn scaled_sq(&self, x: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b).powi(2)).sum();
        d2 / (self.radius * self.radius)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let s = self.scaled_sq(x);
        if s >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - s)).exp()
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let s = self.scaled_sq(x);
        if s >= 1.0 {
            return vec![0.0; x.len()];
        }
        let w = 1.0 - s;
        let factor = -(-1.0 / w).exp() / (w * w) * 2.0 / (self.radius * self.radius);
        x.iter().zip(&self.center).map(|(a, b)| factor * (a - b)).collect()
    }

    pub fn to_field(&self) -> ScalarField {
        let (bv, bg) = (self.clone(), self.clone());
        ScalarField::new(self.center.len(), Domain::Whole, "bump", move |x| Ok(bv.value(x)))
            .with_gradient(move |x| Ok(bg.gradient(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_of_squares() -> Polynomial {
        Polynomial::new(2, [(vec![2, 0], 1.0), (vec![0, 2], 1.0)]).unwrap()
    }

    #[test]
    fn fd_gradient_is_exact_on_quadratics() {
        let u = sum_of_squares().to_field();
        let g = fd_gradient(&u, &[1.0, 2.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-9 && (g[1] - 4.0).abs() < 1e-9);
        let c = constant_field(3, 7.5);
        assert_eq!(fd_gradient(&c, &[0.1, 0.2, 0.3], 1e-5).unwrap(), vec![0.0; 3]);
        let s = ScalarField::new(2, Domain::Whole, "sin", |x| Ok(x[0].sin()));
        let g = fd_gradient(&s, &[0.0, 0.0], 1e-5).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-10 && g[1] == 0.0);
    }

    #[test]
    fn fd_gradient_refuses_the_puncture() {
        let u = log_radius_field(2);
        assert_eq!(fd_gradient(&u, &[1e-6, 0.0], 1e-5), Err(Error::OutOfDomain));
        assert_eq!(u.value(&[0.0, 0.0]), Err(Error::OutOfDomain));
    }

    #[test]
    fn fd_divergence_examples() {
        let id = |x: &[f64]| Ok(x.to_vec());
        assert!((fd_divergence(id, &[0.3, -1.0, 2.0], 1e-5).unwrap() - 3.0).abs() < 1e-9);
        let rot = |x: &[f64]| Ok(vec![-x[1], x[0]]);
        assert_eq!(fd_divergence(rot, &[0.3, -1.0], 1e-5).unwrap(), 0.0);
        let sq = |x: &[f64]| Ok(vec![x[0] * x[0], 0.0]);
        assert!((fd_divergence(sq, &[3.0, 0.0], 1e-5).unwrap() - 6.0).abs() < 1e-9);
    }

    #[test]
    fn polynomial_fields() {
        let u = sum_of_squares().to_field();
        assert_eq!(u.gradient(&[1.0, 1.0]).unwrap().unwrap(), vec![2.0, 2.0]);
        let lin = make_polynomial([(vec![1, 0], 1.0)], 2).unwrap();
        assert_eq!(lin.gradient(&[5.0, -3.0]).unwrap().unwrap(), vec![1.0, 0.0]);
        let h = Polynomial::new(2, [(vec![2, 0], 1.0), (vec![0, 2], -1.0)]).unwrap();
        assert!(h.is_harmonic());
        assert!(!sum_of_squares().is_harmonic());
        assert_eq!(sum_of_squares().laplacian(), Polynomial::constant(2, 4.0).unwrap());
    }

    #[test]
    fn harmonic_pullback_examples() {
        let m = SpdMatrix::diag(&[4.0, 1.0]).unwrap();
        let h = Polynomial::new(2, [(vec![2, 0], 1.0), (vec![0, 2], -1.0)]).unwrap();
        let u = make_harmonic_pullback(&h, &m).unwrap();
        let x = [1.0, 1.0];
        assert!((u.value(&x).unwrap() - (-0.75)).abs() < 1e-15);
        let g = u.gradient(&x).unwrap().unwrap();
        assert!((g[0] - 0.5).abs() < 1e-15 && (g[1] + 2.0).abs() < 1e-15);

        let xy = Polynomial::new(2, [(vec![1, 1], 1.0)]).unwrap();
        let u = make_harmonic_pullback(&xy, &m).unwrap();
        assert!((u.value(&[3.0, 4.0]).unwrap() - 6.0).abs() < 1e-14);

        assert_eq!(
            make_harmonic_pullback(&sum_of_squares(), &m).unwrap_err(),
            Error::NotHarmonic
        );
    }

    #[test]
    fn liouville_profile_values() {
        let e = Norm::euclidean(2).unwrap();
        let u = make_liouville_profile(&e, 0.0).unwrap();
        assert_eq!(u.value(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(u.gradient(&[0.0, 0.0]).unwrap().unwrap(), vec![0.0, 0.0]);
        let r = 8f64.sqrt() / 2f64.sqrt();
        assert!((u.value(&[r, r]).unwrap() + 2.0 * 2f64.ln()).abs() < 1e-14);

        let hstar = Norm::quadratic(SpdMatrix::diag(&[4.0, 1.0]).unwrap()).dual();
        let u = make_liouville_profile(&hstar, 0.0).unwrap();
        assert!((u.value(&[2.0, 0.0]).unwrap() + 2.0 * (9.0f64 / 8.0).ln()).abs() < 1e-14);

        assert!(matches!(
            make_liouville_profile(&Norm::euclidean(3).unwrap(), 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bump_support_and_gradient_bound() {
        let b = BumpFunction::new(vec![1.0, -1.0], 0.5).unwrap();
        assert_eq!(b.value(&[1.5, -1.0]), 0.0);
        assert_eq!(b.gradient(&[1.6, -1.0]), vec![0.0, 0.0]);
        assert!(b.value(&[1.0, -1.0]) > 0.0);
        assert!((b.value(&[1.0, -1.0]) - (-1f64).exp()).abs() < 1e-16);
        // Near the boundary the value tends to zero from inside.
        assert!(b.value(&[1.0 + 0.5 * (1.0 - 1e-4), -1.0]) < 1e-300);
        let max_grad = (0..2000)
            .map(|k| {
                let t = k as f64 / 2000.0;
                norm2(&b.gradient(&[1.0 + 0.5 * t, -1.0]))
            })
            .fold(0.0, f64::max);
        assert!(max_grad * b.radius() <= 1.0, "{max_grad}");
        assert!(BumpFunction::new(vec![0.0], 0.0).is_err());
    }
}
