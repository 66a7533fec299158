//! Structural-balance semantics on sign patterns.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::matrix::{max_asymmetry, sign_pattern, SignPattern};

/// Symmetry tolerance for eigenvalue sign counts.
pub const EIGEN_SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Witness {
    /// Triad `i -> j -> k -> i` with nonpositive sign product.
    Triad([usize; 3]),
    /// Edge whose two directions disagree, or which closes a negative cycle.
    Edge([usize; 2]),
}

/// A complete balanced component. `assignment[m]` is the side of
/// `nodes[m]`; the smallest node is always on side `+1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub nodes: Vec<usize>,
    pub assignment: Vec<i8>,
}

impl Component {
    pub fn factions(&self) -> Vec<Vec<usize>> {
        let side = |s: i8| -> Vec<usize> {
            self.nodes
                .iter()
                .zip(&self.assignment)
                .filter(|(_, a)| **a == s)
                .map(|(v, _)| *v)
                .collect()
        };
        let mut out = vec![side(1)];
        let minus = side(-1);
        if !minus.is_empty() {
            out.push(minus);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BalanceVerdict {
    BalancedOneFaction,
    /// Complete graph split into two antagonistic factions; `s[0] = +1`.
    BalancedTwoFactions {
        assignment: Vec<i8>,
    },
    /// Every non-isolated component is complete and balanced, but the
    /// graph as a whole is not complete.
    BalancedComponents {
        components: Vec<Component>,
        isolated: Vec<usize>,
    },
    Unbalanced {
        witness: Witness,
    },
    /// No sign inconsistency, but some component is missing edges (or
    /// there are no edges at all).
    Incomplete,
}

impl BalanceVerdict {
    /// Structural balance of the whole network.
    pub fn is_balanced(&self) -> bool {
        matches!(
            self,
            Self::BalancedOneFaction | Self::BalancedTwoFactions { .. }
        )
    }

    pub fn is_componentwise_balanced(&self) -> bool {
        self.is_balanced() || matches!(self, Self::BalancedComponents { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::BalancedOneFaction => "balanced_one_faction",
            Self::BalancedTwoFactions { .. } => "balanced_two_factions",
            Self::BalancedComponents { .. } => "balanced_components",
            Self::Unbalanced { .. } => "unbalanced",
            Self::Incomplete => "incomplete",
        }
    }

    /// JSON form with 1-based node labels.
    pub fn to_json(&self, n: usize) -> Value {
        let one = |v: &[usize]| v.iter().map(|i| i + 1).collect::<Vec<_>>();
        let (factions, components, isolated, witness): (
            Vec<Vec<usize>>,
            Vec<Vec<usize>>,
            Vec<usize>,
            Value,
        ) = match self {
            Self::BalancedOneFaction => (
                vec![(1..=n).collect()],
                vec![(1..=n).collect()],
                vec![],
                Value::Null,
            ),
            Self::BalancedTwoFactions { assignment } => {
                let c = Component {
                    nodes: (0..n).collect(),
                    assignment: assignment.clone(),
                };
                (
                    c.factions().iter().map(|f| one(f)).collect(),
                    vec![(1..=n).collect()],
                    vec![],
                    Value::Null,
                )
            }
            Self::BalancedComponents {
                components,
                isolated,
            } => (
                components
                    .iter()
                    .flat_map(|c| c.factions())
                    .map(|f| one(&f))
                    .collect(),
                components.iter().map(|c| one(&c.nodes)).collect(),
                one(isolated),
                Value::Null,
            ),
            Self::Unbalanced { witness } => {
                let w = match witness {
                    Witness::Triad(t) => json!(one(t)),
                    Witness::Edge(e) => json!(one(e)),
                };
                (vec![], vec![], vec![], w)
            }
            Self::Incomplete => (vec![], vec![], vec![], Value::Null),
        };
        json!({
            "verdict": self.name(),
            "factions": factions,
            "components": components,
            "isolated": isolated,
            "witness": witness,
        })
    }
}

/// Every off-diagonal sign nonzero.
pub fn is_complete(p: &SignPattern) -> bool {
    let n = p.n();
    (0..n).all(|i| (0..n).all(|j| i == j || p.get(i, j) != 0))
}

/// Result of scanning all triads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriadCheck {
    AllPositive,
    /// Lexicographically smallest `(i, j, k)`, `i < j < k`, for which one of
    /// the two orientations has a nonpositive sign product.
    Violated([usize; 3]),
}

pub fn all_triads_positive(p: &SignPattern) -> TriadCheck {
    let n = p.n();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let fwd = p.get(i, j) * p.get(j, k) * p.get(k, i);
                let bwd = p.get(i, k) * p.get(k, j) * p.get(j, i);
                if fwd <= 0 || bwd <= 0 {
                    return TriadCheck::Violated([i, j, k]);
                }
            }
        }
    }
    TriadCheck::AllPositive
}

fn first_negative_triad(p: &SignPattern) -> Option<[usize; 3]> {
    let n = p.n();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let fwd = p.get(i, j) * p.get(j, k) * p.get(k, i);
                let bwd = p.get(i, k) * p.get(k, j) * p.get(j, i);
                if fwd < 0 || bwd < 0 {
                    return Some([i, j, k]);
                }
            }
        }
    }
    None
}

/// Two-colors the signed graph component by component (BFS from the
/// smallest unvisited node) and reports balance.
pub fn faction_partition(p: &SignPattern) -> BalanceVerdict {
    let n = p.n();

    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (p.get(i, j), p.get(j, i));
            if a != 0 && b != 0 && a != b {
                return BalanceVerdict::Unbalanced {
                    witness: Witness::Edge([i, j]),
                };
            }
        }
    }

    // Undirected edge sign; an edge present in one direction only counts
    // for connectivity but makes its component incomplete.
    let edge = |i: usize, j: usize| -> i8 {
        let a = p.get(i, j);
        if a != 0 {
            a
        } else {
            p.get(j, i)
        }
    };
    let full_edge = |i: usize, j: usize| p.get(i, j) != 0 && p.get(j, i) != 0;

    let isolated: Vec<usize> = (0..n)
        .filter(|&i| (0..n).all(|j| edge(i, j) == 0))
        .collect();

    let mut color = vec![0_i8; n];
    let mut components = Vec::new();
    let mut all_complete = true;
    for root in 0..n {
        if color[root] != 0 || isolated.contains(&root) {
            continue;
        }
        color[root] = 1;
        let mut nodes = vec![root];
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                let s = edge(u, v);
                if v == u || s == 0 {
                    continue;
                }
                let want = color[u] * s;
                if color[v] == 0 {
                    color[v] = want;
                    nodes.push(v);
                    queue.push_back(v);
                } else if color[v] != want {
                    let witness = match first_negative_triad(p) {
                        Some(t) => Witness::Triad(t),
                        None => Witness::Edge([u.min(v), u.max(v)]),
                    };
                    return BalanceVerdict::Unbalanced { witness };
                }
            }
        }
        nodes.sort_unstable();
        let complete = nodes
            .iter()
            .all(|&a| nodes.iter().all(|&b| a == b || full_edge(a, b)));
        all_complete &= complete;
        let assignment = nodes.iter().map(|&v| color[v]).collect();
        components.push(Component { nodes, assignment });
    }

    if components.is_empty() || !all_complete {
        return BalanceVerdict::Incomplete;
    }
    if components.len() == 1 && isolated.is_empty() {
        let assignment = components.pop().unwrap().assignment;
        if assignment.iter().all(|&s| s == 1) {
            BalanceVerdict::BalancedOneFaction
        } else {
            BalanceVerdict::BalancedTwoFactions { assignment }
        }
    } else {
        BalanceVerdict::BalancedComponents {
            components,
            isolated,
        }
    }
}

/// Balance verdict for a matrix state; entries with `|x_ij| <= zero_tol`
/// are treated as absent edges.
pub fn classify(z: &DMatrix<f64>, zero_tol: f64) -> BalanceVerdict {
    faction_partition(&sign_pattern(z, zero_tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EigenSigns {
    pub pos: usize,
    pub zero: usize,
    pub neg: usize,
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(z: &DMatrix<f64>) -> Result<Vec<f64>> {
    if let Some(k) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: k % z.nrows(),
            col: k / z.nrows(),
        });
    }
    let asymmetry = max_asymmetry(z);
    if asymmetry > EIGEN_SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let sym = (z + z.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Counts eigenvalue signs; `|λ| <= zero_band` counts as zero.
pub fn count_eigen_signs(z: &DMatrix<f64>, zero_band: f64) -> Result<EigenSigns> {
    let ev = symmetric_eigenvalues(z)?;
    let pos = ev.iter().filter(|&&l| l > zero_band).count();
    let neg = ev.iter().filter(|&&l| l < -zero_band).count();
    Ok(EigenSigns {
        pos,
        zero: ev.len() - pos - neg,
        neg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(n: usize, rows: &[i8]) -> SignPattern {
        SignPattern::from_signs(n, rows.to_vec()).unwrap()
    }

    fn outer(s: &[i8]) -> SignPattern {
        let n = s.len();
        let signs = (0..n * n).map(|k| s[k / n] * s[k % n]).collect();
        SignPattern::from_signs(n, signs).unwrap()
    }

    #[test]
    fn completeness() {
        assert!(is_complete(&outer(&[1, 1, 1])));
        let mut s = outer(&[1, 1, 1, 1]).signs().to_vec();
        s[1] = 0;
        assert!(!is_complete(&pattern(4, &s)));
    }

    #[test]
    fn triads() {
        assert_eq!(
            all_triads_positive(&outer(&[1, 1, -1, -1])),
            TriadCheck::AllPositive
        );
        let ngon = pattern(3, &[0, 1, -1, 1, 0, 1, -1, 1, 0]);
        assert_eq!(all_triads_positive(&ngon), TriadCheck::Violated([0, 1, 2]));
        let neg = pattern(3, &[0, -1, -1, -1, 0, -1, -1, -1, 0]);
        assert_eq!(all_triads_positive(&neg), TriadCheck::Violated([0, 1, 2]));
        assert_eq!(
            faction_partition(&neg),
            BalanceVerdict::Unbalanced {
                witness: Witness::Triad([0, 1, 2])
            }
        );
    }

    #[test]
    fn partitions() {
        assert_eq!(
            faction_partition(&outer(&[1, 1, 1, 1])),
            BalanceVerdict::BalancedOneFaction
        );
        let v = faction_partition(&outer(&[-1, 1, -1, 1, -1]));
        assert_eq!(
            v,
            BalanceVerdict::BalancedTwoFactions {
                assignment: vec![1, -1, 1, -1, 1]
            }
        );
    }

    #[test]
    fn components_with_isolated_node() {
        // {0,1} friends, {2,3} split, node 4 isolated, no cross edges.
        let mut s = vec![0_i8; 25];
        s[1] = 1;
        s[5] = 1;
        s[2 * 5 + 3] = -1;
        s[3 * 5 + 2] = -1;
        let v = faction_partition(&pattern(5, &s));
        match &v {
            BalanceVerdict::BalancedComponents {
                components,
                isolated,
            } => {
                assert_eq!(isolated, &vec![4]);
                assert_eq!(components.len(), 2);
                assert_eq!(components[1].factions(), vec![vec![2], vec![3]]);
            }
            other => panic!("{other:?}"),
        }
        let js = v.to_json(5);
        assert_eq!(js["isolated"], json!([5]));
        assert_eq!(js["verdict"], "balanced_components");
    }

    #[test]
    fn sign_asymmetry_is_unbalanced() {
        let p = pattern(3, &[0, 1, 1, -1, 0, 1, 1, 1, 0]);
        assert_eq!(
            faction_partition(&p),
            BalanceVerdict::Unbalanced {
                witness: Witness::Edge([0, 1])
            }
        );
    }

    #[test]
    fn cycle_without_triads() {
        // 4-cycle with one negative edge: unbalanced but triad-free.
        let mut s = vec![0_i8; 16];
        for (i, j, v) in [(0, 1, 1), (1, 2, 1), (2, 3, 1), (0, 3, -1)] {
            s[i * 4 + j] = v;
            s[j * 4 + i] = v;
        }
        assert!(matches!(
            faction_partition(&pattern(4, &s)),
            BalanceVerdict::Unbalanced {
                witness: Witness::Edge(_)
            }
        ));
        // All positive 4-cycle: consistent but not complete.
        for (i, j) in [(0, 3), (3, 0)] {
            s[i * 4 + j] = 1;
        }
        assert_eq!(
            faction_partition(&pattern(4, &s)),
            BalanceVerdict::Incomplete
        );
        assert_eq!(
            faction_partition(&pattern(3, &[0; 9])),
            BalanceVerdict::Incomplete
        );
    }

    #[test]
    fn eigen_signs() {
        let z = DMatrix::<f64>::zeros(4, 4);
        assert_eq!(
            count_eigen_signs(&z, 1e-7).unwrap(),
            EigenSigns {
                pos: 0,
                zero: 4,
                neg: 0
            }
        );
        let mut a = DMatrix::<f64>::zeros(3, 3);
        a[(0, 1)] = 1.0;
        assert!(count_eigen_signs(&a, 1e-7).is_err());
    }

    #[test]
    fn exhaustive_equivalence_small_n() {
        for n in [3usize, 4] {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            for mask in 0..(1u32 << pairs.len()) {
                let mut s = vec![0_i8; n * n];
                for (b, &(i, j)) in pairs.iter().enumerate() {
                    let v = if mask >> b & 1 == 1 { -1 } else { 1 };
                    s[i * n + j] = v;
                    s[j * n + i] = v;
                }
                let p = pattern(n, &s);
                let by_triads = all_triads_positive(&p) == TriadCheck::AllPositive;
                let verdict = faction_partition(&p);
                assert_eq!(verdict.is_balanced(), by_triads, "n={n} mask={mask}");
                if let BalanceVerdict::BalancedTwoFactions { assignment } = verdict {
                    // -s is also a consistent coloring
                    let flipped: Vec<i8> = assignment.iter().map(|a| -a).collect();
                    for i in 0..n {
                        for j in 0..n {
                            if i != j {
                                assert_eq!(p.get(i, j), flipped[i] * flipped[j]);
                            }
                        }
                    }
                }
            }
        }
    }
}
