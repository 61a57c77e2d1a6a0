//! Independent oracles: nalgebra for the eigen solver, Monte Carlo for
//! Wulff-ball volumes, a dense quadrature for surface averages.

use std::f64::consts::PI;

use finsler_core::fields::make_harmonic_pullback;
use finsler_core::linalg::symmetric_eigen;
use finsler_core::wulff::{wulff_kappa, wulff_surface_average, wulff_volume_average};
use finsler_core::{Matrix, Norm, Polynomial, SpdMatrix, SurfaceMeasure, WulffBall};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn jacobi_eigenvalues_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.random_range(2..=8);
        let a = Matrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).symmetrized();
        let ours = symmetric_eigen(&a).values;
        let dm = DMatrix::from_fn(n, n, |i, j| a[(i, j)]);
        let mut theirs: Vec<f64> = dm.symmetric_eigenvalues().iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        for (x, y) in ours.iter().zip(&theirs) {
            assert!((x - y).abs() <= 1e-12, "{ours:?} vs {theirs:?}");
        }
    }
}

#[test]
fn square_root_matches_nalgebra() {
    let m = SpdMatrix::from_rows(&[[5.0, 3.0, 1.0], [3.0, 5.0, 0.5], [1.0, 0.5, 2.0]]).unwrap();
    let dm = DMatrix::from_fn(3, 3, |i, j| m.matrix()[(i, j)]);
    let eig = dm.symmetric_eigen();
    let sqrt =
        &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * eig.eigenvectors.transpose();
    for i in 0..3 {
        for j in 0..3 {
            assert!((sqrt[(i, j)] - m.sqrt_matrix()[(i, j)]).abs() <= 1e-13);
        }
    }
}

#[test]
fn kappa_matches_monte_carlo_volume() {
    let m = SpdMatrix::from_rows(&[[4.0, 1.0], [1.0, 1.0]]).unwrap();
    let hstar = Norm::quadratic(m.clone()).dual();
    let kappa = wulff_kappa(&hstar, 2).unwrap();
    // The unit Wulff ball fits in the box |x_i| ≤ sqrt(M_ii).
    let half = [m.matrix()[(0, 0)].sqrt(), m.matrix()[(1, 1)].sqrt()];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let trials = 400_000;
    let hits = (0..trials)
        .filter(|_| {
            let x = [rng.random_range(-half[0]..half[0]), rng.random_range(-half[1]..half[1])];
            hstar.eval(&x) < 1.0
        })
        .count();
    let estimate = 4.0 * half[0] * half[1] * hits as f64 / trials as f64;
    assert!((estimate - kappa).abs() <= 0.01 * kappa, "{estimate} vs {kappa}");
    assert!((kappa - 3.0_f64.sqrt() * PI).abs() <= 1e-13);
}

#[test]
fn averages_agree_with_dense_quadrature() {
    let m = SpdMatrix::from_rows(&[[5.0, 3.0], [3.0, 5.0]]).unwrap();
    let h = Norm::quadratic(m.clone());
    let poly = Polynomial::new(2, [(vec![3, 0], 1.0), (vec![1, 2], -3.0), (vec![0, 1], 2.0)]).unwrap();
    let u = make_harmonic_pullback(&poly, &m).unwrap();
    let ball = WulffBall::new(vec![0.4, -0.7], 0.8, &h.dual()).unwrap();
    let coarse = wulff_surface_average(&u, &ball, 64, SurfaceMeasure::Anisotropic).unwrap();
    let dense = wulff_surface_average(&u, &ball, 4096, SurfaceMeasure::Anisotropic).unwrap();
    assert!((coarse - dense).abs() <= 1e-12);
    let vol = wulff_volume_average(&u, &ball, 64).unwrap();
    let vol_dense = wulff_volume_average(&u, &ball, 256).unwrap();
    assert!((vol - vol_dense).abs() <= 1e-10);
    assert!((vol - u.value(&[0.4, -0.7]).unwrap()).abs() <= 1e-10);
}

#[test]
fn three_dimensional_mean_values() {
    let m = SpdMatrix::from_rows(&[[3.0, 1.0, 0.0], [1.0, 2.0, 0.5], [0.0, 0.5, 1.5]]).unwrap();
    let h = Norm::quadratic(m.clone());
    let poly = Polynomial::new(3, [(vec![2, 0, 0], 1.0), (vec![0, 0, 2], -1.0), (vec![1, 1, 1], 1.0)]).unwrap();
    let u = make_harmonic_pullback(&poly, &m).unwrap();
    let c = vec![0.5, -0.2, 1.0];
    let ball = WulffBall::new(c.clone(), 0.6, &h.dual()).unwrap();
    let expected = u.value(&c).unwrap();
    assert!((wulff_volume_average(&u, &ball, 32).unwrap() - expected).abs() <= 1e-10);
    assert!((wulff_surface_average(&u, &ball, 64, SurfaceMeasure::Anisotropic).unwrap() - expected).abs() <= 1e-10);
}
