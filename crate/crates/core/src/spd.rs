//! Symmetric positive definite matrices with cached square root and inverse.
//!
//! An [`SpdMatrix`] is validated once on construction; the eigendecomposition
//! computed there also produces `√M`, `M⁻¹` and `M^{-1/2}`, so every later
//! query is a lookup.

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix, SymmetricEigen};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 8;

/// Smallest admissible eigenvalue relative to the largest one.
pub const PD_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SpdMatrix {
    m: Matrix,
    sqrt: Matrix,
    inv: Matrix,
    inv_sqrt: Matrix,
    /// Ascending.
    eigenvalues: Vec<f64>,
    /// Columns match `eigenvalues`.
    eigenvectors: Matrix,
}

/// Equality is on the matrix itself; the eigenbasis of a repeated
/// eigenvalue is not unique.
impl PartialEq for SpdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
    }
}

impl SpdMatrix {
    /// Symmetrizes `raw` and checks strict positivity of its spectrum.
    pub fn new(raw: &Matrix) -> Result<Self> {
        let n = raw.dim();
        if !(MIN_DIM..=MAX_DIM).contains(&n) {
            return Err(Error::InvalidDimension(n));
        }
        let m = raw.symmetrized();
        let eig = symmetric_eigen(&m);
        let smallest = eig.values[0];
        let largest = eig.values[n - 1];
        if largest <= 0.0 || smallest <= PD_CUTOFF * largest {
            return Err(Error::NotPositiveDefinite { smallest, largest });
        }
        Ok(Self::from_parts(m, eig))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(&Matrix::from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(&Matrix::identity(n))
    }

    pub fn diag(d: &[f64]) -> Result<Self> {
        Self::new(&Matrix::from_diag(d))
    }

    fn from_parts(m: Matrix, eig: SymmetricEigen) -> Self {
        Self {
            sqrt: eig.reconstruct(f64::sqrt),
            inv: eig.reconstruct(f64::recip),
            inv_sqrt: eig.reconstruct(|l| l.sqrt().recip()),
            m,
            eigenvalues: eig.values,
            eigenvectors: eig.vectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    /// The symmetric positive definite `B` with `B² = M`.
    pub fn sqrt_matrix(&self) -> &Matrix {
        &self.sqrt
    }

    pub fn inverse_matrix(&self) -> &Matrix {
        &self.inv
    }

    /// `B⁻¹ = M^{-1/2}`.
    pub fn inv_sqrt_matrix(&self) -> &Matrix {
        &self.inv_sqrt
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn determinant(&self) -> f64 {
        self.eigenvalues.iter().product()
    }

    pub fn condition_number(&self) -> f64 {
        self.eigenvalues[self.dim() - 1] / self.eigenvalues[0]
    }

    /// `⟨Mx, x⟩`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            let row = self.m.row(i);
            let mut r = 0.0;
            for j in 0..n {
                r += row[j] * x[j];
            }
            acc += r * x[i];
        }
        acc
    }

    /// `√M` as an `SpdMatrix`, sharing this matrix's eigenvectors.
    pub fn sqrt(&self) -> SpdMatrix {
        let eig = SymmetricEigen {
            values: self.eigenvalues.iter().map(|l| l.sqrt()).collect(),
            vectors: self.eigenvectors.clone(),
        };
        Self::from_parts(self.sqrt.clone(), eig)
    }

    /// `M⁻¹` as an `SpdMatrix`. The caches are swapped rather than
    /// recomputed, so `m.inverse().inverse() == m` exactly.
    pub fn inverse(&self) -> SpdMatrix {
        let n = self.dim();
        Self {
            m: self.inv.clone(),
            sqrt: self.inv_sqrt.clone(),
            inv: self.m.clone(),
            inv_sqrt: self.sqrt.clone(),
            eigenvalues: self.eigenvalues.iter().rev().map(|l| l.recip()).collect(),
            eigenvectors: Matrix::from_fn(n, |i, k| self.eigenvectors[(i, n - 1 - k)]),
        }
    }
}

/// Validates a raw row list as an SPD matrix.
pub fn validate_spd<R: AsRef<[f64]>>(raw: &[R]) -> Result<SpdMatrix> {
    SpdMatrix::from_rows(raw)
}

pub fn sqrt_spd(m: &SpdMatrix) -> SpdMatrix {
    m.sqrt()
}

pub fn inverse_spd(m: &SpdMatrix) -> Matrix {
    m.inverse_matrix().clone()
}
