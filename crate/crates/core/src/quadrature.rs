//! Gauss–Legendre nodes and product rules on the unit sphere and ball.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    assert!(m > 0, "need at least one node");
    let mut out = vec![(0.0, 0.0); m];
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Three-term recurrence for P_m and its derivative.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * pm - pm1) / (x * x - 1.0);
            let dx = pm / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[m - 1 - i] = (x, w);
    }
    if m % 2 == 1 {
        out[m / 2].0 = 0.0;
    }
    out
}

/// Weighted directions on `S^{n−1}`; weights sum to the sphere's area.
///
/// `n = 2`: trapezoid rule with `density` angles. `n ≥ 3`: Gauss–Legendre
/// in the polar angle (`density/2` nodes) times the rule on `S^{n−2}`.
pub fn sphere_rule(n: usize, density: usize) -> Vec<(Vec<f64>, f64)> {
    assert!(n >= 2, "sphere rule needs n >= 2");
    if n == 2 {
        let w = 2.0 * PI / density as f64;
        return (0..density)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / density as f64;
                (vec![t.cos(), t.sin()], w)
            })
            .collect();
    }
    let lower = sphere_rule(n - 1, density);
    let nodes = gauss_legendre((density / 2).max(2));
    let mut out = Vec::with_capacity(nodes.len() * lower.len());
    for &(t, wt) in &nodes {
        // n = 3: the area element in z = cos θ is flat, so the rule is exact
        // for polynomials. Higher n: integrate in θ directly, where the
        // weight sin^{n−2} θ is smooth.
        let (s, z, w) = if n == 3 {
            ((1.0 - t * t).sqrt(), t, wt)
        } else {
            let theta = 0.5 * PI * (t + 1.0);
            let s = theta.sin();
            (s, theta.cos(), 0.5 * PI * wt * s.powi(n as i32 - 2))
        };
        for (dir, wl) in &lower {
            let mut v = Vec::with_capacity(n);
            v.extend(dir.iter().map(|d| s * d));
            v.push(z);
            out.push((v, w * wl));
        }
    }
    out
}

/// Weighted points in the unit ball of `ℝⁿ` (polar form: radial
/// Gauss–Legendre with `density/2` nodes times [`sphere_rule`]); weights sum
/// to the ball's volume.
pub fn ball_rule(n: usize, density: usize) -> Vec<(Vec<f64>, f64)> {
    let sphere = sphere_rule(n, density);
    let radial = gauss_legendre((density / 2).max(2));
    let mut out = Vec::with_capacity(radial.len() * sphere.len());
    for &(t, wt) in &radial {
        let rho = 0.5 * (t + 1.0);
        let w_r = 0.5 * wt * rho.powi(n as i32 - 1);
        for (dir, ws) in &sphere {
            out.push((dir.iter().map(|d| rho * d).collect(), w_r * ws));
        }
    }
    out
}

/// Volume of the Euclidean unit ball, `ω_n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for m in [1, 2, 5, 16, 33] {
            let rule = gauss_legendre(m);
            for deg in 0..(2 * m) {
                let approx: f64 = rule.iter().map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-13, "m={m} deg={deg}: {approx}");
            }
        }
    }

    #[test]
    fn rules_sum_to_measures() {
        for n in 2..=4 {
            let s: f64 = sphere_rule(n, 16).iter().map(|(_, w)| w).sum();
            let b: f64 = ball_rule(n, 16).iter().map(|(_, w)| w).sum();
            let omega = unit_ball_volume(n);
            assert!((s - n as f64 * omega).abs() < 1e-8 * omega, "n={n}: {s}");
            assert!((b - omega).abs() < 1e-8 * omega, "n={n}: {b}");
        }
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-15);
        let s3: f64 = sphere_rule(3, 32).iter().map(|(_, w)| w).sum();
        assert!((s3 - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn sphere_second_moment() {
        // ∫ ω₁² dσ = |S^{n−1}| / n = ω_n
        for n in [2, 3] {
            let m2: f64 = sphere_rule(n, 32).iter().map(|(d, w)| w * d[0] * d[0]).sum();
            assert!((m2 - unit_ball_volume(n)).abs() < 1e-13);
        }
    }
}
