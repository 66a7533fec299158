use nalgebra::DMatrix;

use super::{matrix_field, ModelKind, Trajectory};
use crate::dissonance::dissonance_asym;
use crate::error::{Error, Result};
use crate::matrix::frobenius_norm;

const INITIAL_MATCH_TOL: f64 = 1e-9;

/// Direction `W` and scale `η` of sample `i`.
fn direction(tr: &Trajectory, i: usize) -> (DMatrix<f64>, f64) {
    let s = &tr.states[i];
    match tr.model {
        ModelKind::EtaZ => (s.clone(), tr.etas[i]),
        _ => {
            let norm = frobenius_norm(s);
            (s / norm, norm)
        }
    }
}

fn hermite(t0: f64, y0: &DMatrix<f64>, t1: f64, y1: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let f0 = matrix_field(ModelKind::ProjectedPureInfluence, y0);
    let f1 = matrix_field(ModelKind::ProjectedPureInfluence, y1);
    let h00 = (1.0 + 2.0 * s) * (1.0 - s).powi(2);
    let h10 = s * (1.0 - s).powi(2);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    y0 * h00 + f0 * (h10 * h) + y1 * h01 + f1 * (h11 * h)
}

/// Compares the direction of an unprojected run with the projected run
/// evaluated at intrinsic time `τ(t) = ∫₀ᵗ η`.
///
/// `x_traj` is a `PureInfluence` run (`W = X/‖X‖`, `η = ‖X‖`) or an `EtaZ`
/// run (`W = Z`); `z_traj` is a `ProjectedPureInfluence` run from the
/// normalized initial condition. `τ` uses the trapezoid rule with endpoint
/// derivative correction (`η̇ = -D(W) η²`), and `Z(τ)` is cubic Hermite
/// interpolation between samples of `z_traj`. Samples whose `τ` lies past
/// the end of `z_traj` are skipped.
pub fn check_time_reparam(x_traj: &Trajectory, z_traj: &Trajectory) -> Result<f64> {
    if !matches!(x_traj.model, ModelKind::PureInfluence | ModelKind::EtaZ) {
        return Err(Error::InvalidArgument(format!(
            "first trajectory must be pure or eta-z, got {}",
            x_traj.model
        )));
    }
    if z_traj.model != ModelKind::ProjectedPureInfluence {
        return Err(Error::InvalidArgument(format!(
            "second trajectory must be projected-pure, got {}",
            z_traj.model
        )));
    }
    if x_traj.n != z_traj.n {
        return Err(Error::DimensionMismatch(format!(
            "n = {} vs n = {}",
            x_traj.n, z_traj.n
        )));
    }
    if x_traj.times.is_empty() || z_traj.times.is_empty() {
        return Err(Error::Empty);
    }
    let (w0, _) = direction(x_traj, 0);
    let mismatch = (&w0 - &z_traj.states[0]).amax();
    if mismatch > INITIAL_MATCH_TOL {
        return Err(Error::InvalidArgument(format!(
            "initial conditions differ by {mismatch:e}"
        )));
    }

    let z_end = *z_traj.times.last().unwrap();
    let mut tau = 0.0;
    let mut worst: f64 = 0.0;
    let mut j = 0;
    let (mut w_prev, mut eta_prev) = (w0, x_traj.etas[0]);
    let mut deta_prev = -dissonance_asym(&w_prev) * eta_prev * eta_prev;
    for i in 0..x_traj.times.len() {
        let (w, eta) = direction(x_traj, i);
        let deta = -dissonance_asym(&w) * eta * eta;
        if i > 0 {
            let h = x_traj.times[i] - x_traj.times[i - 1];
            tau += 0.5 * h * (eta_prev + eta) + h * h / 12.0 * (deta_prev - deta);
        }
        if tau > z_end {
            break;
        }
        while j + 1 < z_traj.times.len() && z_traj.times[j + 1] < tau {
            j += 1;
        }
        let z = if j + 1 < z_traj.times.len() {
            hermite(
                z_traj.times[j],
                &z_traj.states[j],
                z_traj.times[j + 1],
                &z_traj.states[j + 1],
                tau,
            )
        } else {
            z_traj.states[j].clone()
        };
        worst = worst.max(frobenius_norm(&(&w - z)));
        w_prev = w;
        eta_prev = eta;
        deta_prev = deta;
    }
    let _ = w_prev;
    Ok(worst)
}
