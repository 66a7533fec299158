//! Scale-symmetric matrices: `X diag(γ)` symmetric for some `γ > 0`,
//! i.e. `X = D⁻¹ X_s D` with `D = diag(γ)^{-1/2}` and `X_s` symmetric.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dissonance::SYMMETRY_TOL;
use crate::error::{Error, Result};
use crate::matrix::{max_asymmetry, AppraisalMatrix};

/// Default relative tolerance for verifying non-tree edges.
pub const WITNESS_TOL: f64 = 1e-8;

/// Positive weights `γ` with `γ₁ = 1`. Serializes as a JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScaleWitness {
    gamma: Vec<f64>,
}

impl ScaleWitness {
    /// Validates positivity and rescales so that the first entry is 1.
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(g) = gamma.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "γ entries must be positive, got {g}"
            )));
        }
        let g0 = gamma[0];
        Ok(Self {
            gamma: gamma.into_iter().map(|g| g / g0).collect(),
        })
    }

    pub fn ones(n: usize) -> Self {
        Self {
            gamma: vec![1.0; n],
        }
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }
}

fn check_len(n: usize, w: &ScaleWitness) -> Result<()> {
    if w.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "witness has {} entries for a {n}x{n} matrix",
            w.n()
        )));
    }
    Ok(())
}

/// `D⁻¹ M D` with `D = diag(γ)^{-1/2}`: `m_ij √(γ_i/γ_j)`. Works on any
/// square matrix, e.g. trajectory samples.
pub fn transport(m: &DMatrix<f64>, gamma: &ScaleWitness) -> Result<DMatrix<f64>> {
    check_len(m.nrows(), gamma)?;
    let g = gamma.gamma();
    Ok(DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        m[(i, j)] * (g[i] / g[j]).sqrt()
    }))
}

/// `X = D⁻¹ X_s D`, so that `x_ij γ_j = x_ji γ_i`.
pub fn make_scale_symmetric(
    x_s: &AppraisalMatrix,
    gamma: &ScaleWitness,
) -> Result<AppraisalMatrix> {
    let asymmetry = max_asymmetry(x_s.as_matrix());
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry });
    }
    AppraisalMatrix::new(transport(x_s.as_matrix(), gamma)?)
}

/// Inverse of [`make_scale_symmetric`]: `x_ij √(γ_j/γ_i)`.
pub fn symmetrize(x: &AppraisalMatrix, gamma: &ScaleWitness) -> Result<AppraisalMatrix> {
    check_len(x.n(), gamma)?;
    let g = gamma.gamma();
    let m = x.as_matrix();
    AppraisalMatrix::new(DMatrix::from_fn(x.n(), x.n(), |i, j| {
        m[(i, j)] * (g[j] / g[i]).sqrt()
    }))
}

/// Finds `γ` with `x_ij γ_j = x_ji γ_i` by ratio propagation over a BFS
/// spanning forest of the nonzero pattern, then checks the remaining edges
/// to relative `tol`. Entries below `tol · max|x|` count as zero. Each
/// component's root (its smallest node) gets weight 1.
pub fn find_witness(x: &AppraisalMatrix, tol: f64) -> Option<ScaleWitness> {
    let m = x.as_matrix();
    let n = x.n();
    let cutoff = tol * m.amax();
    let nz = |v: f64| v.abs() > cutoff;
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if nz(a) != nz(b) || (nz(a) && a.signum() != b.signum()) {
                return None;
            }
        }
    }
    let mut gamma = vec![0.0; n];
    let mut queue = VecDeque::new();
    for root in 0..n {
        if gamma[root] > 0.0 {
            continue;
        }
        gamma[root] = 1.0;
        queue.push_back(root);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if j == i || !nz(m[(i, j)]) {
                    continue;
                }
                let want = gamma[i] * m[(j, i)] / m[(i, j)];
                if gamma[j] == 0.0 {
                    gamma[j] = want;
                    queue.push_back(j);
                } else if (gamma[j] - want).abs() > tol * gamma[j].max(want) {
                    return None;
                }
            }
        }
    }
    ScaleWitness::new(gamma).ok()
}

/// `trace(X²) = Σ x_ij x_ji = Σ (γ_j/γ_i) x_ij²`, nonnegative on the
/// scale-symmetric set.
pub fn check_trace_square(x: &AppraisalMatrix) -> Result<f64> {
    if find_witness(x, WITNESS_TOL).is_none() {
        return Err(Error::InvalidArgument(
            "matrix is not scale-symmetric".into(),
        ));
    }
    let m = x.as_matrix();
    Ok(m.iter().zip(m.transpose().iter()).map(|(a, b)| a * b).sum())
}
