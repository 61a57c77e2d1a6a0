//! Norm families in gradient space: quadratic norms `√⟨Mξ,ξ⟩` and the
//! `ℓ^q` norms. Each provides its value, gradient, the Hessian of its
//! square and its dual norm in closed form.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{dot, max_abs, norm2, Matrix};
use crate::spd::SpdMatrix;

/// Relative tolerance on Hessian constancy used by [`recover_quadratic`].
pub const QUADRATIC_HESSIAN_TOL: f64 = 1e-8;

/// Projected-ascent refinement steps in [`dual_eval_numeric`].
pub const DUAL_ASCENT_STEPS: usize = 50;

/// Newton refinement steps in [`dual_eval_numeric`].
pub const DUAL_NEWTON_STEPS: usize = 50;

pub const MIN_DUAL_GRID: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Norm {
    /// `H(ξ) = √⟨Mξ, ξ⟩`.
    Quadratic(SpdMatrix),
    /// `H(ξ) = (Σ|ξᵢ|^q)^{1/q}`. The Hölder conjugate is stored alongside
    /// `q` so that taking the dual twice returns the same value exactly.
    QNorm { q: f64, conjugate: f64, n: usize },
}

impl Norm {
    pub fn quadratic(m: SpdMatrix) -> Self {
        Norm::Quadratic(m)
    }

    pub fn euclidean(n: usize) -> Result<Self> {
        Ok(Norm::Quadratic(SpdMatrix::identity(n)?))
    }

    pub fn q_norm(q: f64, n: usize) -> Result<Self> {
        if !(q.is_finite() && q > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "q-norm exponent must be finite and > 1, got {q}"
            )));
        }
        if !(crate::spd::MIN_DIM..=crate::spd::MAX_DIM).contains(&n) {
            return Err(Error::InvalidDimension(n));
        }
        Ok(Norm::QNorm {
            q,
            conjugate: q / (q - 1.0),
            n,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Norm::Quadratic(m) => m.dim(),
            Norm::QNorm { n, .. } => *n,
        }
    }

    pub fn matrix(&self) -> Option<&SpdMatrix> {
        match self {
            Norm::Quadratic(m) => Some(m),
            Norm::QNorm { .. } => None,
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, Norm::Quadratic(_))
    }

    fn check_dim(&self, xi: &[f64]) {
        assert_eq!(xi.len(), self.dim(), "vector length does not match norm dimension");
    }

    /// `H(ξ)`. Panics if `ξ` has the wrong length.
    pub fn eval(&self, xi: &[f64]) -> f64 {
        self.check_dim(xi);
        match self {
            Norm::Quadratic(m) => m.quad_form(xi).max(0.0).sqrt(),
            Norm::QNorm { q, .. } => {
                let scale = max_abs(xi);
                if scale == 0.0 {
                    return 0.0;
                }
                let s: f64 = xi.iter().map(|v| (v.abs() / scale).powf(*q)).sum();
                scale * s.powf(q.recip())
            }
        }
    }

    /// `∇H(ξ)`, defined for every `ξ ≠ 0`.
    pub fn grad(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let h = self.eval(xi);
        if h == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(match self {
            Norm::Quadratic(m) => m.matrix().mul_vec(xi).into_iter().map(|v| v / h).collect(),
            Norm::QNorm { q, .. } => xi
                .iter()
                .map(|&v| {
                    if v == 0.0 {
                        0.0
                    } else {
                        v.signum() * (v.abs() / h).powf(q - 1.0)
                    }
                })
                .collect(),
        })
    }

    /// `∇²(H²)(ξ)`. Constant `2M` for quadratic norms; for `ℓ^q` norms
    /// `2(2−q)∇H∇Hᵀ + 2(q−1)·diag(|ξᵢ/H|^{q−2})`, which is singular at zero
    /// coordinates when `q < 2`.
    pub fn hessian_normsq(&self, xi: &[f64]) -> Result<Matrix> {
        let h = self.eval(xi);
        if h == 0.0 {
            return Err(Error::ZeroVector);
        }
        match self {
            Norm::Quadratic(m) => Ok(m.matrix().scale(2.0)),
            Norm::QNorm { q, n, .. } => {
                let q = *q;
                if q < 2.0 && xi.contains(&0.0) {
                    return Err(Error::SingularGradient { q });
                }
                let g = self.grad(xi)?;
                Ok(Matrix::from_fn(*n, |i, j| {
                    let mut v = 2.0 * (2.0 - q) * g[i] * g[j];
                    if i == j {
                        v += 2.0 * (q - 1.0) * (xi[i].abs() / h).powf(q - 2.0);
                    }
                    v
                }))
            }
        }
    }

    /// The dual norm `H*`.
    pub fn dual(&self) -> Norm {
        match self {
            Norm::Quadratic(m) => Norm::Quadratic(m.inverse()),
            Norm::QNorm { q, conjugate, n } => Norm::QNorm {
                q: *conjugate,
                conjugate: *q,
                n: *n,
            },
        }
    }

    /// Constants `(a, b)` with `a|ξ| ≤ H(ξ) ≤ b|ξ|`.
    pub fn equivalence_bounds(&self) -> (f64, f64) {
        match self {
            Norm::Quadratic(m) => {
                let ev = m.eigenvalues();
                (ev[0].sqrt(), ev[ev.len() - 1].sqrt())
            }
            Norm::QNorm { q, n, .. } => {
                let c = (*n as f64).powf(q.recip() - 0.5);
                (c.min(1.0), c.max(1.0))
            }
        }
    }

    /// Textual form accepted by [`crate::parse::parse_norm`].
    pub fn label(&self) -> String {
        match self {
            Norm::Quadratic(m) => format!("quad:{}", format_rows(&m.matrix().rows())),
            Norm::QNorm { q, .. } => format!("q:{q}"),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub(crate) fn format_rows(rows: &[Vec<f64>]) -> String {
    let body: Vec<String> = rows
        .iter()
        .map(|r| {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            format!("[{}]", cells.join(","))
        })
        .collect();
    format!("[{}]", body.join(","))
}

pub fn eval_norm(h: &Norm, xi: &[f64]) -> f64 {
    h.eval(xi)
}

pub fn grad_norm(h: &Norm, xi: &[f64]) -> Result<Vec<f64>> {
    h.grad(xi)
}

pub fn hessian_normsq(h: &Norm, xi: &[f64]) -> Result<Matrix> {
    h.hessian_normsq(xi)
}

pub fn dual_norm(h: &Norm) -> Norm {
    h.dual()
}

/// `H*(x) = sup_{H(ξ)<1} ⟨x, ξ⟩`, evaluated numerically as the maximum of
/// `⟨x, ω⟩ / H(ω)` over unit directions: a deterministic low-discrepancy
/// grid, projected gradient ascent from the best grid point, then Newton
/// iteration on the optimality condition.
///
/// For `n = 2` the grid has `grid_density` angles; for `n ≥ 3` it has
/// `grid_density²` points.
pub fn dual_eval_numeric(h: &Norm, x: &[f64], grid_density: usize) -> Result<f64> {
    let n = h.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.len(),
        });
    }
    if grid_density < MIN_DUAL_GRID {
        return Err(Error::InvalidParameter(format!(
            "grid density must be at least {MIN_DUAL_GRID}, got {grid_density}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite point".into()));
    }
    if norm2(x) == 0.0 {
        return Ok(0.0);
    }
    let objective = |w: &[f64]| dot(x, w) / h.eval(w);

    let mut best = Vec::new();
    let mut best_val = f64::NEG_INFINITY;
    for w in sphere_grid(n, grid_density) {
        let v = objective(&w);
        if v > best_val {
            best_val = v;
            best = w;
        }
    }

    let mut step = 1.0 / grid_density as f64;
    for _ in 0..DUAL_ASCENT_STEPS {
        let hw = h.eval(&best);
        let gh = h.grad(&best)?;
        let xw = dot(x, &best);
        // Tangent by Euler's identity ⟨∇H(ω), ω⟩ = H(ω).
        let g: Vec<f64> = x
            .iter()
            .zip(&gh)
            .map(|(xi, gi)| xi / hw - xw * gi / (hw * hw))
            .collect();
        let gnorm = norm2(&g);
        if gnorm == 0.0 {
            break;
        }
        let mut improved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = best.iter().zip(&g).map(|(w, d)| w + step * d / gnorm).collect();
            let len = norm2(&trial);
            let trial: Vec<f64> = trial.iter().map(|v| v / len).collect();
            let val = objective(&trial);
            if val > best_val {
                best_val = val;
                best = trial;
                step *= 2.0;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }

    // Newton on ∇(H²/2)(ω) = x, whose root has H(ω) = H*(x). Every iterate
    // is a valid lower bound, so the best objective value is kept.
    let scale = best_val / h.eval(&best);
    let mut w: Vec<f64> = best.iter().map(|v| v * scale).collect();
    let residual = |w: &[f64]| -> Result<Vec<f64>> {
        let hw = h.eval(w);
        Ok(h.grad(w)?.iter().zip(x).map(|(g, xi)| hw * g - xi).collect())
    };
    let target = 1e-15 * norm2(x);
    for _ in 0..DUAL_NEWTON_STEPS {
        let Ok(r) = residual(&w) else { break };
        let rn = norm2(&r);
        if rn <= target {
            break;
        }
        let Ok(jac) = h.hessian_normsq(&w) else { break };
        let Ok(jinv) = jac.scale(0.5).inverse() else { break };
        let d = jinv.mul_vec(&r);
        let mut t = 1.0;
        let mut next = None;
        while t > 1e-10 {
            let trial: Vec<f64> = w.iter().zip(&d).map(|(a, b)| a - t * b).collect();
            if let Ok(rt) = residual(&trial) {
                if norm2(&rt) < rn {
                    next = Some(trial);
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(trial) = next else { break };
        w = trial;
        best_val = best_val.max(objective(&w));
    }
    Ok(best_val)
}

/// Deterministic, roughly uniform unit directions.
fn sphere_grid(n: usize, density: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    match n {
        2 => (0..density)
            .map(|k| {
                let t = 2.0 * PI * (k as f64 + 0.5) / density as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci lattice.
            let count = density * density;
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            // Halton points on the cube, projected to the sphere.
            const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
            let count = density * density;
            (1..=count as u64)
                .filter_map(|k| {
                    let p: Vec<f64> = PRIMES[..n].iter().map(|&b| 2.0 * radical_inverse(k, b) - 1.0).collect();
                    let len = norm2(&p);
                    (len > 1e-3).then(|| p.iter().map(|v| v / len).collect())
                })
                .collect()
        }
    }
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

/// Residual `⟨H(x)∇H(x), H*(y)∇H*(y)⟩ − ⟨x, y⟩` of the
/// pairing identity.
pub fn check_fk_condition(h: &Norm, x: &[f64], y: &[f64]) -> Result<f64> {
    let hstar = h.dual();
    let hx = h.eval(x);
    let hy = hstar.eval(y);
    if hx == 0.0 || hy == 0.0 {
        return Err(Error::ZeroVector);
    }
    let gx = h.grad(x)?;
    let gy = hstar.grad(y)?;
    Ok(hx * hy * dot(&gx, &gy) - dot(x, y))
}

/// Recovers `M` when `H² = ⟨Mξ, ξ⟩`, detected by the Hessian of `H²`
/// being constant across `samples`. Returns `None` for non-quadratic norms.
pub fn recover_quadratic(h: &Norm, samples: &[Vec<f64>]) -> Result<Option<SpdMatrix>> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let hessians = samples
        .iter()
        .map(|s| h.hessian_normsq(s))
        .collect::<Result<Vec<_>>>()?;
    let first = &hessians[0];
    let scale = first.max_abs();
    let spread = hessians[1..].iter().map(|c| c.sub(first).max_abs()).fold(0.0, f64::max);
    if spread > QUADRATIC_HESSIAN_TOL * scale {
        return Ok(None);
    }
    Ok(SpdMatrix::new(&first.scale(0.5)).ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag41() -> Norm {
        Norm::quadratic(SpdMatrix::diag(&[4.0, 1.0]).unwrap())
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn evaluates_closed_forms() {
        assert!(close(diag41().eval(&[1.0, 1.0]), 5f64.sqrt(), 1e-15));
        let q4 = Norm::q_norm(4.0, 2).unwrap();
        assert!(close(q4.eval(&[1.0, 1.0]), 2f64.powf(0.25), 1e-15));
        assert_eq!(q4.eval(&[0.0, 0.0]), 0.0);
        assert_eq!(diag41().eval(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn gradients() {
        let g = diag41().grad(&[1.0, 1.0]).unwrap();
        assert!(close(g[0], 4.0 / 5f64.sqrt(), 1e-15) && close(g[1], 1.0 / 5f64.sqrt(), 1e-15));
        let e = Norm::euclidean(2).unwrap().grad(&[3.0, 4.0]).unwrap();
        assert!(close(e[0], 0.6, 1e-15) && close(e[1], 0.8, 1e-15));
        let q = Norm::q_norm(4.0, 2).unwrap().grad(&[1.0, 1.0]).unwrap();
        let expect = 2f64.powf(-0.75);
        assert!(close(q[0], expect, 1e-15) && close(q[1], expect, 1e-15));
        assert_eq!(diag41().grad(&[0.0, 0.0]), Err(Error::ZeroVector));
    }

    #[test]
    fn gradient_exists_at_zero_coordinates_below_q_two() {
        let q = Norm::q_norm(4.0 / 3.0, 2).unwrap();
        assert_eq!(q.grad(&[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(
            q.hessian_normsq(&[2.0, 0.0]),
            Err(Error::SingularGradient { .. })
        ));
    }

    #[test]
    fn hessians() {
        let h = diag41().hessian_normsq(&[0.3, -2.0]).unwrap();
        assert_eq!(h, Matrix::from_diag(&[8.0, 2.0]));
        let e = Norm::q_norm(2.0, 2).unwrap().hessian_normsq(&[0.0, 5.0]).unwrap();
        assert!(e.sub(&Matrix::from_diag(&[2.0, 2.0])).max_abs() < 1e-15);
        let q4 = Norm::q_norm(4.0, 2).unwrap();
        let a = q4.hessian_normsq(&[1.0, 0.0]).unwrap();
        let b = q4.hessian_normsq(&[1.0, 1.0]).unwrap();
        assert!(close(a[(1, 1)], 0.0, 1e-15));
        assert!(close(b[(1, 1)], 2f64.sqrt() * 2.0, 1e-14));
    }

    #[test]
    fn duals() {
        let d = diag41().dual();
        assert_eq!(d.matrix().unwrap().matrix(), &Matrix::from_diag(&[0.25, 1.0]));
        let q = Norm::q_norm(4.0, 2).unwrap().dual();
        assert!(matches!(q, Norm::QNorm { q, .. } if close(q, 4.0 / 3.0, 1e-15)));
        assert_eq!(q.dual(), Norm::q_norm(4.0, 2).unwrap());
        let e = Norm::euclidean(2).unwrap();
        assert_eq!(e.dual(), e);
        assert_eq!(diag41().dual().dual(), diag41());
    }

    #[test]
    fn numeric_dual_matches_closed_forms() {
        let v = dual_eval_numeric(&diag41(), &[1.0, 1.0], 256).unwrap();
        assert!(close(v, 1.25f64.sqrt(), 1e-9), "{v}");
        let v = dual_eval_numeric(&Norm::euclidean(2).unwrap(), &[3.0, 4.0], 256).unwrap();
        assert!(close(v, 5.0, 1e-9), "{v}");
        let v = dual_eval_numeric(&Norm::q_norm(4.0, 2).unwrap(), &[1.0, 1.0], 256).unwrap();
        assert!(close(v, 2f64.powf(0.75), 1e-8), "{v}");
        assert_eq!(dual_eval_numeric(&diag41(), &[0.0, 0.0], 16).unwrap(), 0.0);
        assert!(dual_eval_numeric(&diag41(), &[1.0, 0.0], 8).is_err());
    }

    #[test]
    fn fk_condition() {
        let r = check_fk_condition(&diag41(), &[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!(r.abs() < 1e-15);
        let r = check_fk_condition(&Norm::q_norm(4.0, 2).unwrap(), &[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!(close(r, 0.5f64.sqrt() - 1.0, 1e-14), "{r}");
        assert_eq!(
            check_fk_condition(&diag41(), &[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroVector)
        );
    }

    #[test]
    fn quadratic_recovery() {
        let samples = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, -1.0]];
        let m = recover_quadratic(&diag41(), &samples).unwrap().unwrap();
        assert!(m.matrix().sub(&Matrix::from_diag(&[4.0, 1.0])).max_abs() < 1e-15);
        let q4 = Norm::q_norm(4.0, 2).unwrap();
        assert!(recover_quadratic(&q4, &samples).unwrap().is_none());
        let e3 = Norm::q_norm(2.0, 3).unwrap();
        let m = recover_quadratic(&e3, &[vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]])
            .unwrap()
            .unwrap();
        assert!(m.matrix().sub(&Matrix::identity(3)).max_abs() < 1e-15);
        assert!(matches!(
            recover_quadratic(&q4, &samples[..1]),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(matches!(
            recover_quadratic(&q4, &[vec![0.0, 0.0], vec![1.0, 0.0]]),
            Err(Error::ZeroVector)
        ));
    }
}
