//! Symmetric equilibria of the projected pure-influence flow.
//!
//! Every irreducible symmetric equilibrium is `Z* = p V Vᵀ - q I` with `V`
//! a normalized Stiefel frame (orthonormal columns, equal row norms
//! `√(k/n)`); reducible ones are permuted block-diagonal sums of such
//! blocks, possibly with zero blocks.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};

use crate::dissonance::{dissonance, dissonance_asym, SYMMETRY_TOL};
use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, max_asymmetry, SphereAppraisal};

/// Tolerance for the normalized-Stiefel conditions.
pub const NST_TOL: f64 = 1e-10;
/// Residual accepted from the exact constructions.
pub const CONSTRUCTION_TOL: f64 = 1e-9;
/// Residual accepted for externally supplied equilibria.
pub const CERTIFICATE_TOL: f64 = 1e-6;
/// Tolerance for the angle constraint `Σ exp(2iα) = 0`.
pub const NGON_TOL: f64 = 1e-9;

/// An `n × k` matrix with orthonormal columns and row norms `√(k/n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NstMatrix {
    v: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NstCheck {
    pub ok: bool,
    /// `‖VᵀV - I‖_F`.
    pub orthonormality: f64,
    /// Largest `|‖row_i‖ - √(k/n)|`.
    pub row_norm: f64,
}

pub fn is_nst(v: &DMatrix<f64>, tol: f64) -> NstCheck {
    let (n, k) = v.shape();
    if n == 0 || k == 0 || k > n {
        return NstCheck {
            ok: false,
            orthonormality: f64::INFINITY,
            row_norm: f64::INFINITY,
        };
    }
    let gram = v.transpose() * v - DMatrix::<f64>::identity(k, k);
    let orthonormality = frobenius_norm(&gram);
    let target = (k as f64 / n as f64).sqrt();
    let row_norm = v
        .row_iter()
        .map(|r| (r.norm() - target).abs())
        .fold(0.0, f64::max);
    NstCheck {
        ok: orthonormality < tol && row_norm < tol,
        orthonormality,
        row_norm,
    }
}

impl NstMatrix {
    pub fn new(v: DMatrix<f64>) -> Result<Self> {
        let c = is_nst(&v, NST_TOL);
        if !c.ok {
            return Err(Error::NotNormalizedStiefel {
                orthonormality: c.orthonormality,
                row_norm: c.row_norm,
            });
        }
        Ok(Self { v })
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    pub fn k(&self) -> usize {
        self.v.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.v
    }
}

/// `V = s / √n`.
pub fn nst_k1(s: &[i8]) -> Result<NstMatrix> {
    if s.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(bad) = s.iter().find(|&&x| x != 1 && x != -1) {
        return Err(Error::InvalidArgument(format!(
            "sign vector entries must be ±1, got {bad}"
        )));
    }
    let c = 1.0 / (s.len() as f64).sqrt();
    NstMatrix::new(DMatrix::from_fn(s.len(), 1, |i, _| c * f64::from(s[i])))
}

/// Rows `√(2/n) (cos α_m, sin α_m)`; needs `Σ exp(2iα_m) = 0`.
pub fn nst_k2(angles: &[f64]) -> Result<NstMatrix> {
    let n = angles.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "k = 2 frames need n >= 2, got {n}"
        )));
    }
    let c: f64 = angles.iter().map(|a| (2.0 * a).cos()).sum();
    let s: f64 = angles.iter().map(|a| (2.0 * a).sin()).sum();
    if c.abs() >= NGON_TOL || s.abs() >= NGON_TOL {
        return Err(Error::NgonConstraint {
            residual: c.hypot(s),
        });
    }
    let r = (2.0 / n as f64).sqrt();
    NstMatrix::new(DMatrix::from_fn(n, 2, |i, j| {
        if j == 0 {
            r * angles[i].cos()
        } else {
            r * angles[i].sin()
        }
    }))
}

/// Angles `π (i-1)/n` of the regular n-gon.
pub fn ngon_angles(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| std::f64::consts::PI * i as f64 / n as f64)
        .collect()
}

/// `(1/√2) [U₁; U₂]` for orthogonal `k × k` blocks, giving `n = 2k`.
pub fn nst_stacked(u1: &DMatrix<f64>, u2: &DMatrix<f64>) -> Result<NstMatrix> {
    if u1.shape() != u2.shape() || !u1.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "stacked blocks must be equal square matrices, got {:?} and {:?}",
            u1.shape(),
            u2.shape()
        )));
    }
    let k = u1.nrows();
    let mut v = DMatrix::zeros(2 * k, k);
    v.rows_mut(0, k).copy_from(&(u1 / 2f64.sqrt()));
    v.rows_mut(k, k).copy_from(&(u2 / 2f64.sqrt()));
    NstMatrix::new(v)
}

/// Discrete Fourier frame for any `1 <= k < n`: the constant column when
/// `k` is odd, plus `cos`/`sin` pairs at frequencies `1, 2, ...`.
pub fn nst_harmonic(n: usize, k: usize) -> Result<NstMatrix> {
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k < n, got n = {n}, k = {k}"
        )));
    }
    let nf = n as f64;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    if k % 2 == 1 {
        cols.push(vec![1.0 / nf.sqrt(); n]);
    }
    let r = (2.0 / nf).sqrt();
    let mut freq = 1;
    while cols.len() < k {
        let w = 2.0 * std::f64::consts::PI * freq as f64 / nf;
        cols.push((0..n).map(|m| r * (w * m as f64).cos()).collect());
        cols.push((0..n).map(|m| r * (w * m as f64).sin()).collect());
        freq += 1;
    }
    NstMatrix::new(DMatrix::from_fn(n, k, |i, j| cols[j][i]))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// signs of `R`'s diagonal absorbed).
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// A random member of `nSt(n, k)`: a row-permuted, rotated harmonic frame.
pub fn random_nst<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<NstMatrix> {
    use rand::seq::SliceRandom;
    let base = nst_harmonic(n, k)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let q = random_orthogonal(k, rng);
    let v = DMatrix::from_fn(n, k, |i, j| base.v[(perm[i], j)]) * q;
    NstMatrix::new(v)
}

/// `(p, q) = (√(n/(k(n-k))), √(k/(n(n-k))))`.
pub fn irreducible_pq(n: usize, k: usize) -> Result<(f64, f64)> {
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k < n, got n = {n}, k = {k}"
        )));
    }
    let (nf, kf) = (n as f64, k as f64);
    Ok((
        (nf / (kf * (nf - kf))).sqrt(),
        (kf / (nf * (nf - kf))).sqrt(),
    ))
}

fn check_frame(n: usize, k: usize, v: &NstMatrix) -> Result<()> {
    if v.n() != n || v.k() != k {
        return Err(Error::DimensionMismatch(format!(
            "frame is {}x{}, expected {n}x{k}",
            v.n(),
            v.k()
        )));
    }
    Ok(())
}

fn block_matrix(p: f64, q: f64, v: &NstMatrix) -> DMatrix<f64> {
    let n = v.n();
    let mut z = (&v.v * v.v.transpose()) * p - DMatrix::<f64>::identity(n, n) * q;
    z.fill_diagonal(0.0);
    z
}

/// `Z* = p V Vᵀ - q I`.
pub fn build_irreducible(n: usize, k: usize, v: &NstMatrix) -> Result<SphereAppraisal> {
    let (p, q) = irreducible_pq(n, k)?;
    check_frame(n, k, v)?;
    let z = SphereAppraisal::from_matrix(block_matrix(p, q, v))?;
    certify(&z, CONSTRUCTION_TOL)?;
    Ok(z)
}

/// `D(Z*) = -(n - 2k)/√(kn(n-k))`.
pub fn equilibrium_dissonance(n: usize, k: usize) -> Result<f64> {
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k < n, got n = {n}, k = {k}"
        )));
    }
    let (nf, kf) = (n as f64, k as f64);
    Ok(-(nf - 2.0 * kf) / (kf * nf * (nf - kf)).sqrt())
}

/// `p = 2√(α² + β)`, `q = √(α² + β) - α`.
pub fn pq_from_alpha_beta(alpha: f64, beta: f64) -> Result<(f64, f64)> {
    let r2 = alpha * alpha + beta;
    if !(r2 > 0.0) {
        return Err(Error::InvalidArgument(format!("need α² + β > 0, got {r2}")));
    }
    let r = r2.sqrt();
    Ok((2.0 * r, r - alpha))
}

/// `‖Z² + D(Z) Z - diag(Z²)‖_F`, with the asymmetric energy for
/// asymmetric `Z`.
pub fn residual(z: &SphereAppraisal) -> f64 {
    let m = z.as_matrix();
    let d = if max_asymmetry(m) <= SYMMETRY_TOL {
        dissonance(m)
    } else {
        dissonance_asym(m)
    };
    let mut r = m * m + m * d;
    r.fill_diagonal(0.0);
    frobenius_norm(&r)
}

fn certify(z: &SphereAppraisal, tol: f64) -> Result<()> {
    let r = residual(z);
    if r >= tol {
        return Err(Error::NotEquilibrium { residual: r });
    }
    Ok(())
}

/// One diagonal block of a reducible equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockInput {
    Frame(NstMatrix),
    /// A zero block on this many nodes.
    Zero(usize),
}

impl BlockInput {
    fn n(&self) -> usize {
        match self {
            BlockInput::Frame(v) => v.n(),
            BlockInput::Zero(n) => *n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumBlock {
    pub n: usize,
    pub k: usize,
    /// `None` for a zero block.
    pub v: Option<NstMatrix>,
    pub p: f64,
    pub q: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSpec {
    /// Block-order index `a` is placed at node `permutation[a]`.
    pub permutation: Vec<usize>,
    pub blocks: Vec<EquilibriumBlock>,
    pub epsilon: i8,
    pub alpha: f64,
}

impl EquilibriumSpec {
    pub fn to_json(&self) -> Value {
        let blocks: Vec<Value> = self
            .blocks
            .iter()
            .map(|b| {
                let v = b.v.as_ref().map(|v| {
                    (0..v.n())
                        .map(|i| (0..v.k()).map(|j| v.v[(i, j)]).collect::<Vec<_>>())
                        .collect::<Vec<_>>()
                });
                json!({ "n": b.n, "k": b.k, "p": b.p, "q": b.q, "beta": b.beta, "V": v })
            })
            .collect();
        json!({
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "blocks": blocks,
            "permutation": self.permutation,
        })
    }
}

/// Assembles a block-diagonal equilibrium.
///
/// Nonzero blocks must share `ε = sign(n_i - 2k_i)`. For `ε = ±1` the
/// coefficients follow from `α = ε (Σ 4k_i n_i (n_i-k_i)/(n_i-2k_i)²)^{-1/2}`
/// and `β_i = α² 4k_i (n_i-k_i)/(n_i-2k_i)²`; for `ε = 0`, `α = 0` and the
/// caller gives one `β_i > 0` per nonzero block with `Σ β_i n_i = 1`.
/// `permutation` defaults to the identity.
pub fn build_reducible(
    blocks: &[BlockInput],
    betas: Option<&[f64]>,
    permutation: Option<&[usize]>,
) -> Result<(EquilibriumSpec, SphereAppraisal)> {
    let total: usize = blocks.iter().map(BlockInput::n).sum();
    if total == 0 {
        return Err(Error::Empty);
    }
    let frames: Vec<&NstMatrix> = blocks
        .iter()
        .filter_map(|b| match b {
            BlockInput::Frame(v) => Some(v),
            BlockInput::Zero(_) => None,
        })
        .collect();
    if frames.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one nonzero block is required".into(),
        ));
    }
    for v in &frames {
        if v.k() >= v.n() {
            return Err(Error::InvalidArgument(format!(
                "block needs 1 <= k < n, got n = {}, k = {}",
                v.n(),
                v.k()
            )));
        }
    }
    let sign = |v: &NstMatrix| (v.n() as i64 - 2 * v.k() as i64).signum() as i8;
    let epsilon = sign(frames[0]);
    if let Some(v) = frames.iter().find(|v| sign(v) != epsilon) {
        return Err(Error::InvalidArgument(format!(
            "mixed signs of n - 2k among blocks: block (n = {}, k = {}) differs from ε = {epsilon}",
            v.n(),
            v.k()
        )));
    }

    let (alpha, frame_betas): (f64, Vec<f64>) = if epsilon == 0 {
        let b = betas.ok_or_else(|| {
            Error::InvalidArgument("ε = 0 needs caller-supplied β weights".into())
        })?;
        if b.len() != frames.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} β weights for {} nonzero blocks",
                b.len(),
                frames.len()
            )));
        }
        if let Some(x) = b.iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "β weights must be positive, got {x}"
            )));
        }
        let s: f64 = b
            .iter()
            .zip(&frames)
            .map(|(beta, v)| beta * v.n() as f64)
            .sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "Σ β_i n_i must be 1, got {s}"
            )));
        }
        (0.0, b.to_vec())
    } else {
        if betas.is_some() {
            return Err(Error::InvalidArgument(
                "β weights are only supplied when ε = 0".into(),
            ));
        }
        let ratio = |v: &NstMatrix| {
            let (n, k) = (v.n() as f64, v.k() as f64);
            4.0 * k * (n - k) / (n - 2.0 * k).powi(2)
        };
        let sum: f64 = frames.iter().map(|v| ratio(v) * v.n() as f64).sum();
        let alpha = f64::from(epsilon) / sum.sqrt();
        (
            alpha,
            frames.iter().map(|v| alpha * alpha * ratio(v)).collect(),
        )
    };

    let perm: Vec<usize> = match permutation {
        Some(p) => {
            let mut seen = vec![false; total];
            if p.len() != total
                || p.iter()
                    .any(|&i| i >= total || std::mem::replace(&mut seen[i], true))
            {
                return Err(Error::InvalidArgument(format!(
                    "permutation must be a rearrangement of 0..{total}"
                )));
            }
            p.to_vec()
        }
        None => (0..total).collect(),
    };

    let mut assembled = DMatrix::zeros(total, total);
    let mut spec_blocks = Vec::with_capacity(blocks.len());
    let mut offset = 0;
    let mut fi = 0;
    for b in blocks {
        match b {
            BlockInput::Frame(v) => {
                let beta = frame_betas[fi];
                fi += 1;
                let (p, q) = pq_from_alpha_beta(alpha, beta)?;
                let z = block_matrix(p, q, v);
                assembled
                    .view_mut((offset, offset), (v.n(), v.n()))
                    .copy_from(&z);
                spec_blocks.push(EquilibriumBlock {
                    n: v.n(),
                    k: v.k(),
                    v: Some((*v).clone()),
                    p,
                    q,
                    beta,
                });
            }
            BlockInput::Zero(n) => spec_blocks.push(EquilibriumBlock {
                n: *n,
                k: 0,
                v: None,
                p: 0.0,
                q: 0.0,
                beta: 0.0,
            }),
        }
        offset += b.n();
    }

    let z = DMatrix::from_fn(total, total, |i, j| {
        let (a, b) = (
            perm.iter().position(|&x| x == i).unwrap(),
            perm.iter().position(|&x| x == j).unwrap(),
        );
        assembled[(a, b)]
    });
    let norm = frobenius_norm(&z);
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnitNorm { norm });
    }
    let z = SphereAppraisal::from_matrix(z)?;
    certify(&z, CONSTRUCTION_TOL)?;
    Ok((
        EquilibriumSpec {
            permutation: perm,
            blocks: spec_blocks,
            epsilon,
            alpha,
        },
        z,
    ))
}

/// The `2^{n1-1}` balanced equilibria `(ssᵀ - I)/√(n1(n1-1))` on the
/// leading `n1` nodes, zero-padded to `n`, with `s_1 = +1`.
pub fn enumerate_balanced(n1: usize, n: usize) -> Result<impl Iterator<Item = SphereAppraisal>> {
    if n1 < 2 || n1 > n {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= n1 <= n, got n1 = {n1}, n = {n}"
        )));
    }
    if n1 > 63 {
        return Err(Error::InvalidArgument(format!(
            "n1 = {n1} is too large to enumerate"
        )));
    }
    let c = 1.0 / ((n1 * (n1 - 1)) as f64).sqrt();
    Ok((0u64..1 << (n1 - 1)).map(move |mask| {
        let s: Vec<f64> = (0..n1)
            .map(|i| {
                if i > 0 && mask >> (i - 1) & 1 == 1 {
                    -1.0
                } else {
                    1.0
                }
            })
            .collect();
        let z = DMatrix::from_fn(n, n, |i, j| {
            if i != j && i < n1 && j < n1 {
                c * s[i] * s[j]
            } else {
                0.0
            }
        });
        SphereAppraisal::from_matrix(z).expect("balanced equilibria have unit norm")
    }))
}

/// Jacobian trace `(n² - n + 3) D(Z*)` at an equilibrium, with `n` the
/// number of nonzero rows. A positive value certifies instability.
pub fn instability_certificate(z_star: &SphereAppraisal) -> Result<f64> {
    certify(z_star, CERTIFICATE_TOL)?;
    let m = z_star.as_matrix();
    let n = m.row_iter().filter(|r| r.amax() > 0.0).count() as f64;
    Ok((n * n - n + 3.0) * dissonance(m))
}
