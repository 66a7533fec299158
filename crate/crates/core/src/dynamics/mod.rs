//! Right-hand sides of the influence models and their integration.
//!
//! | model                    | field                               |
//! |--------------------------|-------------------------------------|
//! | `PureInfluence`          | `X² - diag(X²)`                     |
//! | `Kulakowski`             | `X²`                                |
//! | `ProjectedPureInfluence` | `Z² - diag(Z²) + D(Z) Z`            |
//! | `ProjectedKulakowski`    | `Z² + D(Z) Z`                       |
//! | `EtaZ`                   | `η̇ = -D(Z) η²`, `Ż = η (Z² - diag(Z²) + D(Z) Z)` |
//!
//! The projected fields use `D(Z) = -<Z², Z>`, which is `-trace(Z³)` on
//! symmetric states and keeps the field tangent to the sphere for any state.

mod export;
mod integrator;
mod reparam;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dissonance::{dissonance_asym, offdiag_square};
use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, DIAGONAL_TOL, SPHERE_TOL};

pub use export::{events_json, trajectory_csv};
pub use integrator::{integrate, Event, IntegrationStats, IntegratorOptions, Trajectory};
pub use reparam::check_time_reparam;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[serde(rename = "pure")]
    PureInfluence,
    Kulakowski,
    #[serde(rename = "projected-pure")]
    ProjectedPureInfluence,
    ProjectedKulakowski,
    EtaZ,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::PureInfluence,
        ModelKind::Kulakowski,
        ModelKind::ProjectedPureInfluence,
        ModelKind::ProjectedKulakowski,
        ModelKind::EtaZ,
    ];

    /// State lives on the unit sphere (for `EtaZ`, the `Z` component does).
    pub fn is_projected(self) -> bool {
        matches!(
            self,
            ModelKind::ProjectedPureInfluence | ModelKind::ProjectedKulakowski | ModelKind::EtaZ
        )
    }

    /// Zero-diagonal state space (no self-appraisals).
    pub fn is_zero_diagonal(self) -> bool {
        !matches!(self, ModelKind::Kulakowski | ModelKind::ProjectedKulakowski)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::PureInfluence => "pure",
            ModelKind::Kulakowski => "kulakowski",
            ModelKind::ProjectedPureInfluence => "projected-pure",
            ModelKind::ProjectedKulakowski => "projected-kulakowski",
            ModelKind::EtaZ => "eta-z",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model {s:?}")))
    }
}

/// A model state: a matrix, or the `(η, Z)` pair.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Matrix(DMatrix<f64>),
    EtaZ { eta: f64, z: DMatrix<f64> },
}

impl State {
    pub fn n(&self) -> usize {
        match self {
            State::Matrix(m) => m.nrows(),
            State::EtaZ { z, .. } => z.nrows(),
        }
    }

    /// The matrix part (`Z` for `EtaZ`).
    pub fn matrix(&self) -> &DMatrix<f64> {
        match self {
            State::Matrix(m) => m,
            State::EtaZ { z, .. } => z,
        }
    }
}

fn validate(model: ModelKind, state: &State) -> Result<()> {
    let (m, eta) = match (model, state) {
        (ModelKind::EtaZ, State::EtaZ { eta, z }) => (z, Some(*eta)),
        (ModelKind::EtaZ, State::Matrix(_)) => {
            return Err(Error::InvalidArgument(
                "eta-z model needs an (eta, Z) state".into(),
            ))
        }
        (_, State::EtaZ { .. }) => {
            return Err(Error::InvalidArgument(format!(
                "{model} model needs a matrix state"
            )))
        }
        (_, State::Matrix(m)) => (m, None),
    };
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::Empty);
    }
    if let Some((k, _)) = m.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: k % m.nrows(),
            col: k / m.nrows(),
        });
    }
    if model.is_zero_diagonal() {
        for i in 0..m.nrows() {
            if m[(i, i)].abs() > DIAGONAL_TOL {
                return Err(Error::NonzeroDiagonal {
                    index: i,
                    value: m[(i, i)],
                });
            }
        }
    }
    if model.is_projected() {
        let norm = frobenius_norm(m);
        if (norm - 1.0).abs() > SPHERE_TOL {
            return Err(Error::NotUnitNorm { norm });
        }
    }
    if let Some(eta) = eta {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eta must be positive, got {eta}"
            )));
        }
    }
    Ok(())
}

/// Unvalidated matrix field; for `EtaZ` this is the `Z` direction field
/// without the `η` factor.
pub(crate) fn matrix_field(model: ModelKind, m: &DMatrix<f64>) -> DMatrix<f64> {
    match model {
        ModelKind::PureInfluence => offdiag_square(m),
        ModelKind::Kulakowski => m * m,
        ModelKind::ProjectedPureInfluence | ModelKind::EtaZ => {
            let d = dissonance_asym(m);
            offdiag_square(m) + m * d
        }
        ModelKind::ProjectedKulakowski => {
            let d = dissonance_asym(m);
            m * m + m * d
        }
    }
}

/// Evaluates the model's vector field at `state`.
pub fn rhs(model: ModelKind, state: &State) -> Result<State> {
    validate(model, state)?;
    Ok(match state {
        State::Matrix(m) => State::Matrix(matrix_field(model, m)),
        State::EtaZ { eta, z } => {
            let d = dissonance_asym(z);
            State::EtaZ {
                eta: -d * eta * eta,
                z: matrix_field(ModelKind::EtaZ, z) * *eta,
            }
        }
    })
}

/// `η(t) = η₀ / (1 + t η₀ D*)` along an equilibrium direction `Z*` with
/// `D(Z*) = d_star`.
pub fn eta_closed_form(eta0: f64, d_star: f64, t: f64) -> Result<f64> {
    if !(eta0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eta0 must be positive, got {eta0}"
        )));
    }
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    if d_star < 0.0 {
        let t_escape = 1.0 / (eta0 * -d_star);
        if t >= t_escape {
            return Err(Error::BeyondEscapeTime { t, t_escape });
        }
    }
    Ok(eta0 / (1.0 + t * eta0 * d_star))
}
