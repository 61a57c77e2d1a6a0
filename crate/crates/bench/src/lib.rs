//! Shared fixtures for the criterion benchmarks.

use finsler_core::fields::builtin_suite;
use finsler_core::{Norm, SampleSpec, ScalarField, SpdMatrix};

/// `H(ξ) = √⟨Mξ,ξ⟩` with `M = [[5,3],[3,5]]`.
pub fn skew_norm() -> Norm {
    Norm::quadratic(SpdMatrix::from_rows(&[[5.0, 3.0], [3.0, 5.0]]).expect("SPD"))
}

pub fn spd_of_dim(n: usize) -> SpdMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        n as f64 + 1.0
                    } else {
                        1.0 / (1.0 + (i + j) as f64)
                    }
                })
                .collect()
        })
        .collect();
    SpdMatrix::from_rows(&rows).expect("diagonally dominant")
}

pub fn cubic_field() -> ScalarField {
    builtin_suite(2).expect("builtin fields")[2].clone()
}

pub fn sample_spec(count: usize) -> SampleSpec {
    SampleSpec::ball(1, count, 2.0)
}
