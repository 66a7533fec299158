//! The dissonance energy `D(X) = -trace(X³)` and its gradients.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{diag_part, max_asymmetry, AppraisalMatrix, SphereAppraisal};

/// Symmetry tolerance for the symmetric-only gradient formulas.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// `-trace(X³)`, i.e. minus the sum of all triad products `x_ij x_jk x_ki`.
pub fn dissonance(x: &DMatrix<f64>) -> f64 {
    let x2 = x * x;
    // trace(X² X) = Σ_ij (X²)_ij x_ji
    let n = x.nrows();
    let mut tr = 0.0;
    for i in 0..n {
        for j in 0..n {
            tr += x2[(i, j)] * x[(j, i)];
        }
    }
    -tr
}

/// `-trace(Zᵀ Z²) = -<Z², Z>`, the energy used for asymmetric states.
pub fn dissonance_asym(z: &DMatrix<f64>) -> f64 {
    let z2 = z * z;
    -z2.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>()
}

fn require_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let asymmetry = max_asymmetry(m);
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(())
}

/// `X² - diag(X²)`.
pub(crate) fn offdiag_square(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x2 = x * x;
    x2.fill_diagonal(0.0);
    x2
}

/// Gradient of `D` on the symmetric zero-diagonal subspace:
/// `-3 (X² - diag(X²))`.
pub fn grad_ambient(x: &AppraisalMatrix) -> Result<DMatrix<f64>> {
    require_symmetric(x.as_matrix())?;
    Ok(offdiag_square(x.as_matrix()) * -3.0)
}

/// Riemannian gradient of `D` restricted to the unit sphere of symmetric
/// zero-diagonal matrices: `-3 (Z² - diag(Z²) + D(Z) Z)`.
pub fn grad_sphere(z: &SphereAppraisal) -> Result<DMatrix<f64>> {
    let zm = z.as_matrix();
    require_symmetric(zm)?;
    let z2 = zm * zm;
    let d = dissonance(zm);
    Ok((&z2 - diag_part(&z2) + zm * d) * -3.0)
}

/// Dissonance level below which a one-positive-eigenvalue state is
/// guaranteed to end balanced: `-(n-3)/sqrt((n-1)(n-2))`.
pub fn balance_threshold(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "balance threshold needs n >= 3, got {n}"
        )));
    }
    let n = n as f64;
    Ok(-(n - 3.0) / ((n - 1.0) * (n - 2.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{frobenius_inner, normalize_to_sphere, tangent_project};
    use approx::assert_relative_eq;

    fn triad_oracle(x: &DMatrix<f64>) -> f64 {
        let n = x.nrows();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i != j && j != k && k != i {
                        s += x[(i, j)] * x[(j, k)] * x[(k, i)];
                    }
                }
            }
        }
        -s
    }

    fn pseudo_random(n: usize, seed: u64, symmetric: bool) -> DMatrix<f64> {
        let mut state = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut m = DMatrix::from_fn(n, n, |_, _| next());
        if symmetric {
            m = (&m + m.transpose()) * 0.5;
        }
        m.fill_diagonal(0.0);
        m
    }

    #[test]
    fn zero_and_balanced_values() {
        assert_eq!(dissonance(&DMatrix::zeros(4, 4)), 0.0);
        assert_eq!(dissonance_asym(&DMatrix::zeros(4, 4)), 0.0);
        let s = [1.0, 1.0, 1.0];
        let z = DMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                0.0
            } else {
                s[i] * s[j] / 6f64.sqrt()
            }
        });
        assert_relative_eq!(dissonance(&z), -1.0 / 6f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn trace_form_matches_triads() {
        let x = pseudo_random(5, 3, false);
        assert_relative_eq!(dissonance(&x), triad_oracle(&x), epsilon = 1e-12);
        assert_relative_eq!(dissonance(&x), dissonance(&x.transpose()), epsilon = 1e-12);
    }

    #[test]
    fn asym_energy() {
        let s = pseudo_random(5, 11, true);
        assert_relative_eq!(dissonance_asym(&s), dissonance(&s), epsilon = 1e-12);
        let k = pseudo_random(4, 5, false);
        let k = (&k - k.transpose()) * 0.5;
        let n = 4;
        let mut oracle = 0.0;
        for i in 0..n {
            for j in 0..n {
                for m in 0..n {
                    // (ZᵀZ²)_ii = Σ_j z_ji (Z²)_ji, (Z²)_ji = Σ_m z_jm z_mi
                    oracle += k[(j, i)] * k[(j, m)] * k[(m, i)];
                }
            }
        }
        assert_relative_eq!(dissonance_asym(&k), -oracle, epsilon = 1e-12);
    }

    #[test]
    fn ambient_gradient_values() {
        let x = AppraisalMatrix::new(DMatrix::from_fn(
            3,
            3,
            |i, j| if i == j { 0.0 } else { 1.0 },
        ))
        .unwrap();
        let g = grad_ambient(&x).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g[(i, j)], if i == j { 0.0 } else { -3.0 });
            }
        }
        assert!(grad_ambient(&AppraisalMatrix::zeros(3)).unwrap().amax() == 0.0);
        let asym = AppraisalMatrix::new(pseudo_random(3, 1, false)).unwrap();
        assert!(matches!(
            grad_ambient(&asym),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn ambient_gradient_matches_central_difference() {
        let x = pseudo_random(5, 21, true);
        let xa = AppraisalMatrix::new(x.clone()).unwrap();
        let g = grad_ambient(&xa).unwrap();
        let h = 1e-5;
        for seed in 0..5 {
            let dir = pseudo_random(5, 100 + seed, true);
            let fd = (dissonance(&(&x + &dir * h)) - dissonance(&(&x - &dir * h))) / (2.0 * h);
            let an = frobenius_inner(&g, &dir).unwrap();
            assert!(
                (fd - an).abs() <= 1e-6 * an.abs().max(1.0),
                "fd {fd} vs {an}"
            );
        }
    }

    #[test]
    fn sphere_gradient_is_projected_ambient() {
        let x = AppraisalMatrix::new(pseudo_random(6, 9, true)).unwrap();
        let z = normalize_to_sphere(&x).unwrap().z;
        let g = grad_sphere(&z).unwrap();
        assert!(frobenius_inner(&g, z.as_matrix()).unwrap().abs() < 1e-12);
        let want = tangent_project(&z, &offdiag_square(z.as_matrix())).unwrap() * -3.0;
        assert!((g - want).amax() < 1e-13);
    }

    #[test]
    fn sphere_gradient_keeps_zero_rows() {
        let mut x = pseudo_random(5, 77, true);
        for j in 0..5 {
            x[(2, j)] = 0.0;
            x[(j, 2)] = 0.0;
        }
        let z = normalize_to_sphere(&AppraisalMatrix::new(x).unwrap())
            .unwrap()
            .z;
        let g = grad_sphere(&z).unwrap();
        assert!((0..5).all(|j| g[(2, j)] == 0.0));
    }

    #[test]
    fn thresholds() {
        assert_eq!(balance_threshold(3).unwrap(), 0.0);
        assert_relative_eq!(
            balance_threshold(4).unwrap(),
            -1.0 / 6f64.sqrt(),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            balance_threshold(10).unwrap(),
            -7.0 / 72f64.sqrt(),
            epsilon = 1e-15
        );
        assert_relative_eq!(balance_threshold(10).unwrap(), -0.824958, epsilon = 1e-6);
        assert!(balance_threshold(2).is_err());
    }
}
