//! Seeded Monte Carlo experiments over random initial conditions.
//!
//! Each trial draws its initial matrix from a ChaCha8 stream seeded by a
//! SplitMix64 mix of `(master_seed, trial index)`, so results do not
//! depend on how trials are scheduled across threads.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance::{count_eigen_signs, faction_partition, BalanceVerdict, EigenSigns};
use crate::dissonance::dissonance;
use crate::dynamics::{integrate, Event, IntegratorOptions, ModelKind, State, Trajectory};
use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, max_asymmetry, AppraisalMatrix};
use crate::scale_symmetric::{find_witness, symmetrize, WITNESS_TOL};

/// Half-width of the uniform entry distribution.
pub const ENTRY_RANGE: f64 = 100.0;
/// Confidence parameter used for the Chernoff half-width in reports.
pub const DEFAULT_ETA_CONF: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    GenericAsymmetric,
    GenericSymmetric,
    KulakowskiGeneric,
}

impl Family {
    pub const ALL: [Family; 3] = [
        Family::GenericAsymmetric,
        Family::GenericSymmetric,
        Family::KulakowskiGeneric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::GenericAsymmetric => "generic-asymmetric",
            Family::GenericSymmetric => "generic-symmetric",
            Family::KulakowskiGeneric => "kulakowski-generic",
        }
    }

    /// Whether `model` can be run from this family's initial conditions.
    pub fn supports(self, model: ModelKind) -> bool {
        match self {
            Family::KulakowskiGeneric => !model.is_zero_diagonal(),
            _ => model.is_zero_diagonal(),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown family {s:?}")))
    }
}

/// Smallest `N` with `N >= ln(2/η) / (2ε²)`.
pub fn chernoff_n(epsilon: f64, eta_conf: f64) -> Result<u64> {
    for (name, v) in [("epsilon", epsilon), ("eta", eta_conf)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "{name} must lie in (0, 1), got {v}"
            )));
        }
    }
    let bound = (2.0 / eta_conf).ln() / (2.0 * epsilon * epsilon);
    Ok(bound.ceil().max(1.0) as u64)
}

/// Half-width `ε` guaranteed by `N` trials at confidence `1 - η`.
pub fn chernoff_epsilon(n: u64, eta_conf: f64) -> Result<f64> {
    if n == 0 || !(eta_conf > 0.0 && eta_conf < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need N > 0 and η in (0, 1), got {n}, {eta_conf}"
        )));
    }
    Ok(((2.0 / eta_conf).ln() / (2.0 * n as f64)).sqrt())
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed of trial `index`: the `index`-th output of a SplitMix64 stream
/// started at `master_seed`.
pub fn trial_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e3779b97f4a7c15)))
}

/// Draws an initial matrix. Generic families have a zero diagonal and
/// entries uniform on `[-100, 100]` (the symmetric family samples the upper
/// triangle only); the Kułakowski family fills every entry, diagonal
/// included, and divides by the Frobenius norm.
pub fn gen_initial(family: Family, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need n >= 3, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-ENTRY_RANGE, ENTRY_RANGE);
    let mut m = DMatrix::zeros(n, n);
    match family {
        Family::GenericAsymmetric => {
            for i in 0..n {
                for j in 0..n {
                    let v = dist.sample(&mut rng);
                    if i != j {
                        m[(i, j)] = v;
                    }
                }
            }
        }
        Family::GenericSymmetric => {
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = dist.sample(&mut rng);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        Family::KulakowskiGeneric => {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = dist.sample(&mut rng);
                }
            }
            let norm = frobenius_norm(&m);
            m /= norm;
        }
    }
    Ok(m)
}

fn initial_state(model: ModelKind, x: DMatrix<f64>) -> State {
    let norm = frobenius_norm(&x);
    match model {
        ModelKind::EtaZ => State::EtaZ {
            eta: norm,
            z: x / norm,
        },
        m if m.is_projected() => State::Matrix(x / norm),
        _ => State::Matrix(x),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum OutcomeKind {
    /// Settled on a complete balanced sign pattern at `t_sign`.
    BalancedFinite {
        t_sign: f64,
    },
    /// Settled on balanced components plus isolated nodes.
    BalancedComponentsFinite {
        t_sign: f64,
    },
    ConvergedUnbalanced {
        verdict: String,
        dissonance: f64,
    },
    NoDecision {
        reason: String,
    },
}

impl OutcomeKind {
    pub fn name(&self) -> &'static str {
        match self {
            OutcomeKind::BalancedFinite { .. } => "balanced_finite",
            OutcomeKind::BalancedComponentsFinite { .. } => "balanced_components_finite",
            OutcomeKind::ConvergedUnbalanced { .. } => "converged_unbalanced",
            OutcomeKind::NoDecision { .. } => "no_decision",
        }
    }

    pub fn t_sign(&self) -> Option<f64> {
        match self {
            OutcomeKind::BalancedFinite { t_sign }
            | OutcomeKind::BalancedComponentsFinite { t_sign } => Some(*t_sign),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub kind: OutcomeKind,
    /// Eigenvalue signs of the final direction, directly for symmetric
    /// states or after symmetrizing with a scale witness.
    pub eigen_signs: Option<EigenSigns>,
    pub one_positive_eigenvalue: Option<bool>,
    pub scale_witness: bool,
}

/// Scores a finished trajectory.
pub fn classify_outcome(traj: &Trajectory, zero_tol: f64) -> TrialOutcome {
    let dir = traj.final_direction();
    let off = AppraisalMatrix::from_off_diagonal(dir.clone()).ok();
    let witness = off.as_ref().and_then(|x| find_witness(x, WITNESS_TOL));
    let eigen_signs = if max_asymmetry(&dir) < 1e-8 {
        count_eigen_signs(&dir, zero_tol).ok()
    } else {
        match (&witness, &off) {
            // The similarity transform only applies to the zero-diagonal part.
            (Some(w), Some(x)) if dir.diagonal().amax() == 0.0 => symmetrize(x, w)
                .ok()
                .and_then(|s| count_eigen_signs(s.as_matrix(), zero_tol).ok()),
            _ => None,
        }
    };

    let kind = match (traj.terminal_event(), traj.sign_stabilized()) {
        (Event::BudgetExhausted { .. }, _) => OutcomeKind::NoDecision {
            reason: "time budget exhausted".into(),
        },
        (_, None) => OutcomeKind::NoDecision {
            reason: "sign pattern did not stabilize".into(),
        },
        (_, Some((t_sign, pattern))) => match faction_partition(pattern) {
            v if v.is_balanced() => OutcomeKind::BalancedFinite { t_sign },
            BalanceVerdict::BalancedComponents { .. } => {
                OutcomeKind::BalancedComponentsFinite { t_sign }
            }
            v => OutcomeKind::ConvergedUnbalanced {
                verdict: v.name().to_string(),
                dissonance: dissonance(&dir),
            },
        },
    };
    TrialOutcome {
        kind,
        one_positive_eigenvalue: eigen_signs.map(|e| e.pos == 1),
        eigen_signs,
        scale_witness: witness.is_some(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: u64,
    pub seed: u64,
    pub outcome: TrialOutcome,
    pub final_time: f64,
    pub terminal_dissonance: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub balanced_finite: u64,
    pub balanced_components_finite: u64,
    pub converged_unbalanced: u64,
    pub no_decision: u64,
}

impl OutcomeCounts {
    pub fn total(&self) -> u64 {
        self.balanced_finite
            + self.balanced_components_finite
            + self.converged_unbalanced
            + self.no_decision
    }

    fn add(&mut self, k: &OutcomeKind) {
        match k {
            OutcomeKind::BalancedFinite { .. } => self.balanced_finite += 1,
            OutcomeKind::BalancedComponentsFinite { .. } => self.balanced_components_finite += 1,
            OutcomeKind::ConvergedUnbalanced { .. } => self.converged_unbalanced += 1,
            OutcomeKind::NoDecision { .. } => self.no_decision += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub model: ModelKind,
    pub family: Family,
    pub n: usize,
    #[serde(rename = "N")]
    pub trials: u64,
    pub master_seed: u64,
    pub counts: OutcomeCounts,
    /// `BalancedFinite / N`.
    pub p_hat: f64,
    /// Chernoff half-width achieved by `N` at confidence `1 - eta_conf`.
    pub epsilon: f64,
    pub eta_conf: f64,
    /// Balanced trials whose final state has exactly one positive eigenvalue,
    /// out of those where the count was available.
    pub balanced_one_positive: u64,
    pub balanced_eigen_checked: u64,
    pub options: IntegratorOptions,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

impl MonteCarloReport {
    /// One line per trial: index, seed, outcome, t_sign, final time,
    /// terminal dissonance, eigenvalue sign counts.
    pub fn trials_csv(&self) -> String {
        let mut out = String::from(
            "index,seed,outcome,t_sign,final_time,terminal_dissonance,eig_pos,eig_zero,eig_neg,scale_witness\n",
        );
        for r in &self.records {
            let t_sign = r
                .outcome
                .kind
                .t_sign()
                .map(|t| format!("{t:e}"))
                .unwrap_or_default();
            let (p, z, ng) = match r.outcome.eigen_signs {
                Some(e) => (e.pos.to_string(), e.zero.to_string(), e.neg.to_string()),
                None => Default::default(),
            };
            writeln!(
                out,
                "{},{},{},{},{:e},{:e},{},{},{},{}",
                r.index,
                r.seed,
                r.outcome.kind.name(),
                t_sign,
                r.final_time,
                r.terminal_dissonance,
                p,
                z,
                ng,
                r.outcome.scale_witness
            )
            .unwrap();
        }
        out
    }
}

fn run_trial(
    model: ModelKind,
    family: Family,
    n: usize,
    index: u64,
    seed: u64,
    opts: &IntegratorOptions,
) -> Result<TrialRecord> {
    let x0 = gen_initial(family, n, seed)?;
    let state = initial_state(model, x0);
    Ok(match integrate(model, &state, opts) {
        Ok(traj) => TrialRecord {
            index,
            seed,
            outcome: classify_outcome(&traj, opts.zero_tol),
            final_time: traj.final_time(),
            terminal_dissonance: *traj.dissonance_series.last().unwrap(),
        },
        Err(Error::IntegrationFailed { t, reason, .. }) => TrialRecord {
            index,
            seed,
            outcome: TrialOutcome {
                kind: OutcomeKind::NoDecision {
                    reason: format!("integration failed: {reason}"),
                },
                eigen_signs: None,
                one_positive_eigenvalue: None,
                scale_witness: false,
            },
            final_time: t,
            terminal_dissonance: f64::NAN,
        },
        Err(e) => return Err(e),
    })
}

/// Runs `trials` independent trials in parallel and tallies the outcomes.
pub fn run_experiment(
    model: ModelKind,
    family: Family,
    n: usize,
    trials: u64,
    master_seed: u64,
    opts: &IntegratorOptions,
) -> Result<MonteCarloReport> {
    if !family.supports(model) {
        return Err(Error::InvalidArgument(format!(
            "model {model} cannot run from {family} initial conditions"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need n >= 3, got {n}")));
    }
    let records = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(model, family, n, i, trial_seed(master_seed, i), opts))
        .collect::<Result<Vec<_>>>()?;

    let mut counts = OutcomeCounts::default();
    let (mut one_pos, mut checked) = (0, 0);
    for r in &records {
        counts.add(&r.outcome.kind);
        if let (OutcomeKind::BalancedFinite { .. }, Some(flag)) =
            (&r.outcome.kind, r.outcome.one_positive_eigenvalue)
        {
            checked += 1;
            one_pos += u64::from(flag);
        }
    }
    Ok(MonteCarloReport {
        model,
        family,
        n,
        trials,
        master_seed,
        p_hat: counts.balanced_finite as f64 / trials as f64,
        counts,
        epsilon: chernoff_epsilon(trials, DEFAULT_ETA_CONF)?,
        eta_conf: DEFAULT_ETA_CONF,
        balanced_one_positive: one_pos,
        balanced_eigen_checked: checked,
        options: opts.clone(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::enumerate_balanced;
    use crate::matrix::{sign_pattern, SignPattern};

    #[test]
    fn chernoff_sizes() {
        assert_eq!(chernoff_n(0.01, 0.01).unwrap(), 26492);
        assert_eq!(chernoff_n(0.1, 0.05).unwrap(), 185);
        assert_eq!(chernoff_n(0.999, 0.5).unwrap(), 1);
        assert!(chernoff_epsilon(27000, 0.01).unwrap() < 0.01);
        assert!(chernoff_n(0.0, 0.5).is_err());
        assert!(chernoff_n(0.5, 1.0).is_err());
    }

    #[test]
    fn generators() {
        let a = gen_initial(Family::GenericAsymmetric, 5, 9).unwrap();
        assert_eq!(a, gen_initial(Family::GenericAsymmetric, 5, 9).unwrap());
        assert_ne!(a, gen_initial(Family::GenericAsymmetric, 5, 10).unwrap());
        assert!((0..5).all(|i| a[(i, i)] == 0.0));
        assert!(a.amax() <= 100.0);
        let s = gen_initial(Family::GenericSymmetric, 6, 1).unwrap();
        assert_eq!(max_asymmetry(&s), 0.0);
        let k = gen_initial(Family::KulakowskiGeneric, 4, 1).unwrap();
        assert!((frobenius_norm(&k) - 1.0).abs() < 1e-14);
        assert!((0..4).all(|i| k[(i, i)] != 0.0));
        assert!(gen_initial(Family::GenericSymmetric, 2, 1).is_err());
    }

    #[test]
    fn entry_distribution() {
        let mut sum = 0.0;
        let mut count = 0.0_f64;
        for seed in 0..500 {
            let m = gen_initial(Family::GenericAsymmetric, 5, seed).unwrap();
            for (k, v) in m.iter().enumerate() {
                if k % 6 != 0 {
                    assert!((-100.0..=100.0).contains(v));
                    sum += v;
                    count += 1.0;
                }
            }
        }
        let se = 200.0 / 12f64.sqrt() / count.sqrt();
        assert!((sum / count).abs() < 3.0 * se);
    }

    #[test]
    fn trial_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| trial_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }

    #[test]
    fn family_model_pairs() {
        assert!(Family::GenericSymmetric.supports(ModelKind::ProjectedPureInfluence));
        assert!(!Family::GenericSymmetric.supports(ModelKind::ProjectedKulakowski));
        assert!(Family::KulakowskiGeneric.supports(ModelKind::Kulakowski));
        assert!(!Family::KulakowskiGeneric.supports(ModelKind::EtaZ));
        let opts = IntegratorOptions::default();
        assert!(run_experiment(
            ModelKind::ProjectedKulakowski,
            Family::GenericSymmetric,
            5,
            2,
            0,
            &opts
        )
        .is_err());
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
    }

    #[test]
    fn outcome_at_balanced_equilibrium() {
        let z = enumerate_balanced(4, 4).unwrap().nth(3).unwrap();
        let opts = IntegratorOptions::default();
        let tr = integrate(
            ModelKind::ProjectedPureInfluence,
            &State::Matrix(z.into_matrix()),
            &opts,
        )
        .unwrap();
        let o = classify_outcome(&tr, 1e-7);
        assert_eq!(o.kind, OutcomeKind::BalancedFinite { t_sign: 0.0 });
        assert_eq!(o.one_positive_eigenvalue, Some(true));
        assert!(o.scale_witness);
    }

    #[test]
    fn self_loop_limit_is_unbalanced() {
        let n = 4;
        let z = DMatrix::<f64>::identity(n, n) * (-1.0 / (n as f64).sqrt());
        let opts = IntegratorOptions::default();
        let tr = integrate(ModelKind::ProjectedKulakowski, &State::Matrix(z), &opts).unwrap();
        let o = classify_outcome(&tr, 1e-7);
        assert!(
            matches!(o.kind, OutcomeKind::ConvergedUnbalanced { .. }),
            "{o:?}"
        );
        assert_eq!(
            sign_pattern(tr.final_state(), 1e-7),
            SignPattern::from_signs(n, vec![0; n * n]).unwrap()
        );
    }

    #[test]
    fn budget_exhaustion_is_no_decision() {
        let x = gen_initial(Family::GenericSymmetric, 5, 3).unwrap();
        let opts = IntegratorOptions {
            max_time: 1e-3,
            ..Default::default()
        };
        let tr = integrate(
            ModelKind::ProjectedPureInfluence,
            &initial_state(ModelKind::ProjectedPureInfluence, x),
            &opts,
        )
        .unwrap();
        assert!(matches!(
            classify_outcome(&tr, 1e-7).kind,
            OutcomeKind::NoDecision { .. }
        ));
    }

    #[test]
    fn small_experiment_is_reproducible() {
        let opts = IntegratorOptions::default();
        let a = run_experiment(
            ModelKind::ProjectedPureInfluence,
            Family::GenericSymmetric,
            4,
            12,
            7,
            &opts,
        )
        .unwrap();
        let b = run_experiment(
            ModelKind::ProjectedPureInfluence,
            Family::GenericSymmetric,
            4,
            12,
            7,
            &opts,
        )
        .unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.trials_csv(), b.trials_csv());
        assert_eq!(a.counts.total(), 12);
        assert_eq!(a.p_hat, a.counts.balanced_finite as f64 / 12.0);
    }
}
