//! Anisotropic (Finsler) p-Laplace operators for norms `H` in gradient
//! space, their dual norms and Wulff balls, and the anisotropic Kelvin
//! transforms available when `H(ξ) = √⟨Mξ,ξ⟩`.
//!
//! Alongside the operators, [`verifier`] evaluates both sides of the
//! identities linking the anisotropic and isotropic settings (equivalence
//! under `x ↦ √M x`, Kelvin duality for `p = 2` and `p = n`, mean values over
//! Wulff balls, the quadratic-norm criterion and the Liouville profile) and
//! reports the residuals.

pub mod error;
pub mod fields;
pub mod linalg;
pub mod norms;
pub mod ops;
pub mod parse;
pub mod quadrature;
pub mod spd;
pub mod transforms;
pub mod verifier;
pub mod wulff;

pub use error::{Error, Result};
pub use fields::{BumpFunction, Domain, Polynomial, ScalarField};
pub use linalg::Matrix;
pub use norms::Norm;
pub use ops::{GradMode, OperatorConfig};
pub use spd::SpdMatrix;
pub use transforms::KelvinMap;
pub use verifier::{CheckConfig, Corruption, PointResidual, SampleSpec, Verification, VerificationReport};
pub use wulff::{SurfaceMeasure, WulffBall};
