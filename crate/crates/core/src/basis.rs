//! Orthonormal polynomial bases over the forecast-horizon grid.
//!
//! A basis matrix `H` (q x d) has columns that are orthonormal in the
//! discrete inner product over the `q` horizons. Coefficients that live in
//! the span of `H` vary smoothly across horizons; `d` controls how much
//! wiggle is allowed.

use crate::linalg::{qr_orthonormalize, LinalgError, Matrix};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BasisError {
    #[error("degrees of freedom {d} exceeds the number of horizons {q}")]
    DegreesOfFreedomTooLarge { d: usize, q: usize },
    #[error("invalid basis spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFamily {
    /// Polynomials in the horizon, orthonormalized over the horizon grid.
    OrthogonalPolynomial,
}

/// Description of a basis: family, degrees of freedom, and the horizon grid
/// the columns are orthonormal over.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    pub family: BasisFamily,
    pub degrees_of_freedom: usize,
    pub aheads: Vec<i64>,
}

impl BasisSpec {
    /// Polynomial basis with `d` degrees of freedom on the given horizons.
    pub fn polynomial(d: usize, aheads: Vec<i64>) -> Self {
        Self {
            family: BasisFamily::OrthogonalPolynomial,
            degrees_of_freedom: d,
            aheads,
        }
    }

    fn validate(&self) -> Result<(), BasisError> {
        let q = self.aheads.len();
        if q == 0 {
            return Err(BasisError::InvalidSpec("empty horizon grid".into()));
        }
        if !self.aheads.windows(2).all(|w| w[0] < w[1]) {
            return Err(BasisError::InvalidSpec(
                "horizons must be strictly increasing".into(),
            ));
        }
        if self.degrees_of_freedom == 0 {
            return Err(BasisError::InvalidSpec(
                "degrees of freedom must be at least 1".into(),
            ));
        }
        if self.degrees_of_freedom > q {
            return Err(BasisError::DegreesOfFreedomTooLarge {
                d: self.degrees_of_freedom,
                q,
            });
        }
        Ok(())
    }
}

/// A realized basis: its defining `BasisSpec` plus the `q x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    spec: BasisSpec,
    h: Matrix,
}

impl BasisMatrix {
    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    /// The `q x d` matrix with orthonormal columns.
    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn degrees_of_freedom(&self) -> usize {
        self.spec.degrees_of_freedom
    }

    pub fn aheads(&self) -> &[i64] {
        &self.spec.aheads
    }

    /// Basis with the first `d` columns of this one. Because column `j` of
    /// the construction never depends on later columns, the result is
    /// bit-identical to building a fresh basis with `d` degrees of freedom.
    pub fn truncate(&self, d: usize) -> Result<BasisMatrix, BasisError> {
        if d == 0 || d > self.spec.degrees_of_freedom {
            return Err(BasisError::InvalidSpec(format!(
                "cannot truncate a {}-column basis to {d} columns",
                self.spec.degrees_of_freedom
            )));
        }
        let mut spec = self.spec.clone();
        spec.degrees_of_freedom = d;
        Ok(BasisMatrix {
            spec,
            h: self.h.leading_columns(d),
        })
    }
}

/// Builds the basis matrix for a spec.
///
/// For the polynomial family the horizons are mapped affinely onto
/// `[-1, 1]`, the Vandermonde matrix of powers `0..d` is formed, and its
/// thin QR factorization supplies the orthonormal columns. Signs are fixed
/// so each column is non-negative at the largest horizon, which pins down
/// the matrix uniquely.
pub fn build_basis(spec: &BasisSpec) -> Result<BasisMatrix, BasisError> {
    spec.validate()?;
    let q = spec.aheads.len();
    let d = spec.degrees_of_freedom;
    let lo = spec.aheads[0] as f64;
    let hi = spec.aheads[q - 1] as f64;
    let scaled: Vec<f64> = spec
        .aheads
        .iter()
        .map(|&a| {
            if hi > lo {
                2.0 * (a as f64 - lo) / (hi - lo) - 1.0
            } else {
                0.0
            }
        })
        .collect();
    let vander = Matrix::from_fn(q, d, |i, j| scaled[i].powi(j as i32));
    let (mut h, _r) = qr_orthonormalize(&vander).map_err(|e| match e {
        LinalgError::RankDeficient(_) => BasisError::DegreesOfFreedomTooLarge { d, q },
        other => BasisError::InvalidSpec(other.to_string()),
    })?;
    for j in 0..d {
        if h.get(q - 1, j) < 0.0 {
            for i in 0..q {
                let v = h.get(i, j);
                h.set(i, j, -v);
            }
        }
    }
    Ok(BasisMatrix {
        spec: spec.clone(),
        h,
    })
}
