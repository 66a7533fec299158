//! Matrix domain types and Frobenius geometry.
//!
//! Appraisal states are small dense square matrices. Everything here is a
//! thin, validated layer over [`nalgebra::DMatrix`].

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold below which an entry is read as "no edge".
pub const DEFAULT_ZERO_TOL: f64 = 1e-7;

/// Diagonal entries up to this magnitude are accepted as zero by readers.
pub const DIAGONAL_TOL: f64 = 1e-12;

/// Width of the renormalization band accepted by [`SphereAppraisal::new`].
pub const SPHERE_TOL: f64 = 1e-9;

/// Frobenius inner product `trace(bᵀa)`.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x * y).sum())
}

pub fn frobenius_norm(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest entry of `|a - aᵀ|`.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// The diagonal part `diag(a)` as a full matrix.
pub fn diag_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| if i == j { a[(i, i)] } else { 0.0 })
}

/// `(a - aᵀ)/2`.
pub fn skew_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a - a.transpose()) * 0.5
}

/// `(a + aᵀ)/2 - diag(a)`: the symmetric zero-diagonal component.
pub fn zd_symmetric_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = (a + a.transpose()) * 0.5;
    s.fill_diagonal(0.0);
    s
}

fn check_square_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::Empty);
    }
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// A zero-diagonal appraisal matrix `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct AppraisalMatrix(DMatrix<f64>);

impl AppraisalMatrix {
    /// Validates shape, finiteness and the zero diagonal (within
    /// [`DIAGONAL_TOL`]); the stored diagonal is exactly zero.
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&m)?;
        for i in 0..m.nrows() {
            let d = m[(i, i)];
            if d.abs() > DIAGONAL_TOL {
                return Err(Error::NonzeroDiagonal { index: i, value: d });
            }
        }
        m.fill_diagonal(0.0);
        Ok(Self(m))
    }

    /// Builds from a full matrix, discarding its diagonal.
    pub fn from_off_diagonal(mut m: DMatrix<f64>) -> Result<Self> {
        check_square_finite(&m)?;
        m.fill_diagonal(0.0);
        Ok(Self(m))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(&self.0)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        max_asymmetry(&self.0) <= tol
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }
}

/// A unit-Frobenius-norm zero-diagonal matrix `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereAppraisal(AppraisalMatrix);

impl SphereAppraisal {
    /// Accepts norms in `[1 - 1e-9, 1 + 1e-9]` and rescales to exactly unit
    /// norm; anything further away is rejected.
    pub fn new(x: AppraisalMatrix) -> Result<Self> {
        let norm = x.frobenius_norm();
        if (norm - 1.0).abs() > SPHERE_TOL {
            return Err(Error::NotUnitNorm { norm });
        }
        Ok(Self(AppraisalMatrix(x.0 / norm)))
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        Self::new(AppraisalMatrix::new(m)?)
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn appraisal(&self) -> &AppraisalMatrix {
        &self.0
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.0.as_matrix()
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0.into_matrix()
    }

    /// `-Z`, which stays on the sphere.
    pub fn negated(&self) -> Self {
        Self(AppraisalMatrix(-&self.0 .0))
    }
}

/// Scale/direction split `X = eta * Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaZState {
    pub eta: f64,
    pub z: SphereAppraisal,
}

/// Splits a nonzero appraisal matrix into its Frobenius norm and direction.
pub fn normalize_to_sphere(x: &AppraisalMatrix) -> Result<EtaZState> {
    let eta = x.frobenius_norm();
    if eta == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let z = SphereAppraisal(AppraisalMatrix(x.as_matrix() / eta));
    Ok(EtaZState { eta, z })
}

/// Orthogonal projection onto the complement of `span{z}`:
/// `y - <y, z> z`.
pub fn tangent_project(z: &SphereAppraisal, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let zm = z.as_matrix();
    let c = frobenius_inner(y, zm)?;
    Ok(y - zm * c)
}

/// Entrywise thresholded signs with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignPattern {
    n: usize,
    signs: Vec<i8>,
}

impl SignPattern {
    /// Row-major signs; the diagonal is forced to zero.
    pub fn from_signs(n: usize, mut signs: Vec<i8>) -> Result<Self> {
        if signs.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} signs for n = {}",
                signs.len(),
                n
            )));
        }
        if let Some(bad) = signs.iter().find(|s| !matches!(**s, -1..=1)) {
            return Err(Error::InvalidArgument(format!("sign value {bad}")));
        }
        for i in 0..n {
            signs[i * n + i] = 0;
        }
        Ok(Self { n, signs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.signs[i * self.n + j]
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }
}

impl fmt::Display for SignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            let row: String = (0..self.n)
                .map(|j| match self.get(i, j) {
                    1 => '+',
                    -1 => '-',
                    _ => '0',
                })
                .collect();
            if i > 0 {
                f.write_str("/")?;
            }
            f.write_str(&row)?;
        }
        Ok(())
    }
}

/// Thresholded sign of every off-diagonal entry: `|x_ij| <= zero_tol` maps to 0.
pub fn sign_pattern(x: &DMatrix<f64>, zero_tol: f64) -> SignPattern {
    let n = x.nrows();
    let mut signs = vec![0_i8; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = x[(i, j)];
            signs[i * n + j] = if v > zero_tol {
                1
            } else if v < -zero_tol {
                -1
            } else {
                0
            };
        }
    }
    SignPattern { n, signs }
}
