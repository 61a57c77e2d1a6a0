use finsler_core::fields::{builtin_suite, fd_gradient, scaled_step, FIRST_DIFF_STEP};
use finsler_core::linalg::{dot, norm2};
use finsler_core::norms::{check_fk_condition, dual_eval_numeric};
use finsler_core::transforms::spherical_inversion;
use finsler_core::{KelvinMap, Matrix, Norm, SpdMatrix};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn spd_strategy() -> impl Strategy<Value = SpdMatrix> {
    (2usize..=5)
        .prop_flat_map(|n| (Just(n), prop::collection::vec(-2.0f64..2.0, n * n), 0.05f64..2.0))
        .prop_map(|(n, g, shift)| {
            let g = Matrix::from_fn(n, |i, j| g[i * n + j]);
            let m = g.mul(&g.transpose()).sub(&Matrix::identity(n).scale(-shift));
            SpdMatrix::new(&m).expect("shifted Gram matrix is SPD")
        })
}

fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n).prop_filter("away from the origin", |v| norm2(v) > 1e-2)
}

fn spd_and_vectors() -> impl Strategy<Value = (SpdMatrix, Vec<f64>, Vec<f64>)> {
    spd_strategy().prop_flat_map(|m| {
        let n = m.dim();
        (Just(m), vector(n), vector(n))
    })
}

fn qnorm_and_vector() -> impl Strategy<Value = (Norm, Vec<f64>)> {
    (1.2f64..6.0, 2usize..=4).prop_flat_map(|(q, n)| {
        (
            Just(Norm::q_norm(q, n).unwrap()),
            prop::collection::vec(prop_oneof![-3.0f64..-0.1, 0.1f64..3.0], n),
        )
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 200,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn square_root_and_inverse_round_trip(m in spd_strategy()) {
        let n = m.dim();
        let b = m.sqrt_matrix();
        let scale = m.matrix().max_abs();
        prop_assert!(b.mul(b).sub(m.matrix()).max_abs() <= 1e-10 * scale);
        prop_assert!(m.matrix().mul(m.inverse_matrix()).sub(&Matrix::identity(n)).max_abs() <= 1e-9 * m.condition_number());
        prop_assert!(m.matrix().mul(b).sub(&b.mul(m.matrix())).max_abs() <= 1e-10 * scale * b.max_abs());
        prop_assert_eq!(m.inverse().inverse(), m.clone());
        prop_assert!(m.sqrt().matrix().sub(b).max_abs() <= 1e-12 * b.max_abs());
        prop_assert!(rel(m.determinant(), m.matrix().determinant()) <= 1e-9);
    }

    #[test]
    fn quadratic_norm_axioms((m, x, y) in spd_and_vectors(), t in -5.0f64..5.0) {
        let h = Norm::quadratic(m);
        let scaled: Vec<f64> = x.iter().map(|v| t * v).collect();
        prop_assert!((h.eval(&scaled) - t.abs() * h.eval(&x)).abs() <= 1e-12 * (1.0 + t.abs() * h.eval(&x)));
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        prop_assert!(h.eval(&sum) <= h.eval(&x) + h.eval(&y) + 1e-12);
        // Euler: ⟨∇H(x), x⟩ = H(x)
        prop_assert!(rel(dot(&h.grad(&x).unwrap(), &x), h.eval(&x)) <= 1e-12);
        // Duality pairing bound ⟨x, y⟩ ≤ H(x) H*(y)
        prop_assert!(dot(&x, &y) <= h.eval(&x) * h.dual().eval(&y) * (1.0 + 1e-12) + 1e-12);
        prop_assert!(check_fk_condition(&h, &x, &y).unwrap().abs() <= 1e-10 * (1.0 + dot(&x, &y).abs()));
    }

    #[test]
    fn qnorm_gradient_matches_finite_differences((h, x) in qnorm_and_vector()) {
        let g = h.grad(&x).unwrap();
        let n = x.len();
        let step = scaled_step(FIRST_DIFF_STEP, &x);
        for i in 0..n {
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += step;
            b[i] -= step;
            let fd = (h.eval(&a) - h.eval(&b)) / (2.0 * step);
            prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()), "i={} fd={} g={}", i, fd, g[i]);
        }
        prop_assert!(rel(dot(&g, &x), h.eval(&x)) <= 1e-12);
    }

    #[test]
    fn numeric_dual_agrees_with_closed_form((h, x) in qnorm_and_vector()) {
        let numeric = dual_eval_numeric(&h, &x, 32).unwrap();
        prop_assert!(rel(numeric, h.dual().eval(&x)) <= 1e-9, "{} vs {}", numeric, h.dual().eval(&x));
    }

    #[test]
    fn kelvin_algebra((m, x, _y) in spd_and_vectors()) {
        let h = Norm::quadratic(m);
        let k = KelvinMap::new(&h).unwrap();
        let t = k.apply(&x).unwrap();
        let back = k.dual().apply(&t).unwrap();
        let err: f64 = back.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-11 * norm2(&x).max(1.0));
        prop_assert!((h.dual().eval(&t) * h.eval(&x) - 1.0).abs() <= 1e-12);
        let b = k.sqrt();
        let factored = b.mul_vec(&spherical_inversion(&b.mul_vec(&x)).unwrap());
        let err: f64 = factored.iter().zip(&t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12 * norm2(&t).max(1.0));
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    use finsler_core::SampleSpec;
    for n in [2, 3] {
        for u in builtin_suite(n).unwrap() {
            for x in SampleSpec::ball(17, 100, 2.0).points(n).unwrap() {
                let g = u.gradient(&x).unwrap().expect("builtin fields carry gradients");
                let fd = fd_gradient(&u, &x, scaled_step(FIRST_DIFF_STEP, &x)).unwrap();
                for (a, b) in g.iter().zip(&fd) {
                    assert!(
                        (a - b).abs() <= 1e-6 * (1.0 + a.abs()),
                        "{}: {a} vs {b} at {x:?}",
                        u.label()
                    );
                }
            }
        }
    }
}
