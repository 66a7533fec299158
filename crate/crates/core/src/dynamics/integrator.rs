//! Dormand-Prince 5(4) integration with PI step control, dense output and
//! event detection.
//!
//! Projected states are rescaled onto the unit sphere after every accepted
//! step. Unprojected runs stop at blow-up: the norm passing `blowup_norm`
//! or the step size collapsing.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{matrix_field, validate, ModelKind, State};
use crate::balance::count_eigen_signs;
use crate::dissonance::{dissonance, dissonance_asym};
use crate::error::{Error, Result};
use crate::matrix::{frobenius_norm, max_asymmetry, sign_pattern, SignPattern, DEFAULT_ZERO_TOL};

// Dormand-Prince 5(4) tableau. The field is autonomous, so the nodes c_i are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;
const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Model-time budget; reaching it ends the run with `BudgetExhausted`.
    pub max_time: f64,
    /// Unprojected runs stop with `BlowUp` once the norm (or `η`) exceeds this.
    pub blowup_norm: f64,
    /// `‖rhs‖_F` below this on two consecutive accepted steps means converged.
    pub grad_tol: f64,
    /// Hold time for sign stabilization. Measured in model time for
    /// projected runs and in intrinsic time `∫‖X‖ dt` for unprojected runs.
    pub sign_window: f64,
    /// Sampling interval; `0` records every accepted step.
    pub sample_stride: f64,
    /// Entries at or below this (relative to the state norm) have no sign.
    pub zero_tol: f64,
    /// Eigenvalues within this band count as zero.
    pub eigen_band: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-9,
            max_time: 1e4,
            blowup_norm: 1e9,
            grad_tol: 1e-10,
            sign_window: 1.0,
            sample_stride: 0.0,
            zero_tol: DEFAULT_ZERO_TOL,
            eigen_band: 1e-7,
            max_step: 1.0,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorOptions {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_time", self.max_time),
            ("blowup_norm", self.blowup_norm),
            ("grad_tol", self.grad_tol),
            ("sign_window", self.sign_window),
            ("zero_tol", self.zero_tol),
            ("eigen_band", self.eigen_band),
            ("max_step", self.max_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.sample_stride >= 0.0 && self.sample_stride.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample_stride must be nonnegative, got {}",
                self.sample_stride
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    ConvergedToEquilibrium {
        time: f64,
        state: DMatrix<f64>,
    },
    BlowUp {
        t_escape: f64,
    },
    /// The final sign pattern, first reached at `time`.
    SignStabilized {
        time: f64,
        pattern: SignPattern,
    },
    BudgetExhausted {
        time: f64,
    },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::ConvergedToEquilibrium { .. } => "converged_to_equilibrium",
            Event::BlowUp { .. } => "blow_up",
            Event::SignStabilized { .. } => "sign_stabilized",
            Event::BudgetExhausted { .. } => "budget_exhausted",
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            Event::ConvergedToEquilibrium { time, .. }
            | Event::SignStabilized { time, .. }
            | Event::BudgetExhausted { time } => *time,
            Event::BlowUp { t_escape } => *t_escape,
        }
    }

    pub fn is_terminal(&self) -> bool {
        !matches!(self, Event::SignStabilized { .. })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Sampled integration record.
///
/// `states` holds `X` for unprojected models and `Z` for projected ones
/// (including `EtaZ`); `etas` holds `η` for `EtaZ` and `‖X‖_F` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub model: ModelKind,
    pub n: usize,
    pub times: Vec<f64>,
    pub states: Vec<DMatrix<f64>>,
    pub etas: Vec<f64>,
    pub dissonance_series: Vec<f64>,
    pub neg_eigen_counts: Vec<Option<usize>>,
    pub events: Vec<Event>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn terminal_event(&self) -> &Event {
        self.events
            .last()
            .expect("trajectory always ends with a terminal event")
    }

    pub fn sign_stabilized(&self) -> Option<(f64, &SignPattern)> {
        self.events.iter().find_map(|e| match e {
            Event::SignStabilized { time, pattern } => Some((*time, pattern)),
            _ => None,
        })
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn final_state(&self) -> &DMatrix<f64> {
        self.states.last().unwrap()
    }

    /// Final state scaled to unit Frobenius norm.
    pub fn final_direction(&self) -> DMatrix<f64> {
        let s = self.final_state();
        let norm = frobenius_norm(s);
        if norm > 0.0 {
            s / norm
        } else {
            s.clone()
        }
    }

    pub fn t_escape(&self) -> Option<f64> {
        match self.terminal_event() {
            Event::BlowUp { t_escape } => Some(*t_escape),
            _ => None,
        }
    }
}

/// Flat representation used by the stepper: column-major matrix, with `η`
/// prepended for `EtaZ`.
struct System {
    model: ModelKind,
    n: usize,
}

impl System {
    fn offset(&self) -> usize {
        usize::from(self.model == ModelKind::EtaZ)
    }

    fn matrix<'a>(&self, y: &'a [f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n, self.n, &y[self.offset()..])
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) {
        let m = self.matrix(y);
        let f = matrix_field(self.model, &m);
        if self.model == ModelKind::EtaZ {
            let eta = y[0];
            out[0] = -dissonance_asym(&m) * eta * eta;
            for (o, v) in out[1..].iter_mut().zip(f.iter()) {
                *o = eta * v;
            }
        } else {
            out.copy_from_slice(f.as_slice());
        }
    }

    fn project(&self, y: &mut [f64]) {
        if self.model.is_projected() {
            let off = self.offset();
            let norm = y[off..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                y[off..].iter_mut().for_each(|v| *v /= norm);
            }
        }
    }

    /// Scale reported as `η`.
    fn scale(&self, y: &[f64]) -> f64 {
        if self.model == ModelKind::EtaZ {
            y[0]
        } else {
            y.iter().map(|v| v * v).sum::<f64>().sqrt()
        }
    }
}

struct Stage {
    k: [Vec<f64>; 7],
    y_new: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stage {
    fn new(len: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; len]),
            y_new: vec![0.0; len],
            tmp: vec![0.0; len],
        }
    }
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], atol: f64, rtol: f64) -> f64 {
    let sum: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| {
            let sk = atol + rtol * a.abs().max(b.abs());
            (e / sk).powi(2)
        })
        .sum();
    (sum / y.len() as f64).sqrt()
}

/// One Dormand-Prince step from `y` with `k[0] = f(y)` already filled.
/// Leaves the stages in `st.k`, the solution in `st.y_new`, and returns the
/// scaled error estimate.
fn dp_step(sys: &System, y: &[f64], h: f64, st: &mut Stage, opts: &IntegratorOptions) -> f64 {
    let len = y.len();
    macro_rules! stage {
        ($idx:expr, $($c:expr => $k:expr),+) => {{
            for i in 0..len {
                st.tmp[i] = y[i] + h * (0.0 $(+ $c * st.k[$k][i])+);
            }
            let (head, tail) = st.k.split_at_mut($idx);
            let _ = head;
            sys.eval(&st.tmp, &mut tail[0]);
        }};
    }
    stage!(1, A21 => 0);
    stage!(2, A31 => 0, A32 => 1);
    stage!(3, A41 => 0, A42 => 1, A43 => 2);
    stage!(4, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
    stage!(5, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
    for i in 0..len {
        st.y_new[i] = y[i]
            + h * (B1 * st.k[0][i]
                + B3 * st.k[2][i]
                + B4 * st.k[3][i]
                + B5 * st.k[4][i]
                + B6 * st.k[5][i]);
    }
    let (head, tail) = st.k.split_at_mut(6);
    let _ = head;
    sys.eval(&st.y_new, &mut tail[0]);
    for i in 0..len {
        st.tmp[i] = h
            * (E1 * st.k[0][i]
                + E3 * st.k[2][i]
                + E4 * st.k[3][i]
                + E5 * st.k[4][i]
                + E6 * st.k[5][i]
                + E7 * st.k[6][i]);
    }
    error_norm(y, &st.y_new, &st.tmp, opts.abs_tol, opts.rel_tol)
}

/// Continuous extension of the last step at fraction `theta` in `[0, 1]`.
fn dense_output(y: &[f64], st: &Stage, h: f64, theta: f64, out: &mut [f64]) {
    let t1 = 1.0 - theta;
    for i in 0..y.len() {
        let ydiff = st.y_new[i] - y[i];
        let bspl = h * st.k[0][i] - ydiff;
        let r4 = ydiff - h * st.k[6][i] - bspl;
        let r5 = h
            * (D1 * st.k[0][i]
                + D3 * st.k[2][i]
                + D4 * st.k[3][i]
                + D5 * st.k[4][i]
                + D6 * st.k[5][i]
                + D7 * st.k[6][i]);
        out[i] = y[i] + theta * (ydiff + t1 * (bspl + theta * (r4 + t1 * r5)));
    }
}

fn initial_step(sys: &System, y: &[f64], f0: &[f64], opts: &IntegratorOptions) -> f64 {
    let scaled = |v: &[f64]| -> f64 {
        let s: f64 = v
            .iter()
            .zip(y)
            .map(|(a, b)| (a / (opts.abs_tol + opts.rel_tol * b.abs())).powi(2))
            .sum();
        (s / y.len() as f64).sqrt()
    };
    let d0 = scaled(y);
    let d1 = scaled(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    sys.eval(&y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(opts.max_step)
}

struct Recorder<'a> {
    sys: &'a System,
    opts: &'a IntegratorOptions,
    traj: Trajectory,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, y: &[f64]) {
        if let Some(&last) = self.traj.times.last() {
            if t <= last {
                return;
            }
        }
        let m = self.sys.matrix(y);
        let scale = self.sys.scale(y);
        let norm = frobenius_norm(&m);
        let neg = if max_asymmetry(&m) < 1e-8 * norm.max(f64::MIN_POSITIVE) {
            let dir = if norm > 0.0 { &m / norm } else { m.clone() };
            count_eigen_signs(&dir, self.opts.eigen_band)
                .ok()
                .map(|c| c.neg)
        } else {
            None
        };
        self.traj.times.push(t);
        self.traj.dissonance_series.push(dissonance(&m));
        self.traj.neg_eigen_counts.push(neg);
        self.traj.etas.push(scale);
        self.traj.states.push(m);
    }
}

fn pattern_of(sys: &System, y: &[f64], zero_tol: f64) -> SignPattern {
    let m = sys.matrix(y);
    let norm = frobenius_norm(&m);
    sign_pattern(&m, zero_tol * norm)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Integrates `model` from `initial` until a terminal event.
///
/// The trajectory always ends with exactly one terminal event
/// (`ConvergedToEquilibrium`, `BlowUp` or `BudgetExhausted`), preceded by
/// `SignStabilized` when the final sign pattern held for the sign window or
/// the run converged.
pub fn integrate(
    model: ModelKind,
    initial: &State,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    opts.validate()?;
    validate(model, initial)?;
    let n = initial.n();
    let sys = System { model, n };

    let mut y: Vec<f64> = match initial {
        State::Matrix(m) => m.as_slice().to_vec(),
        State::EtaZ { eta, z } => std::iter::once(*eta).chain(z.iter().copied()).collect(),
    };
    sys.project(&mut y);
    let len = y.len();

    let mut rec = Recorder {
        sys: &sys,
        opts,
        traj: Trajectory {
            model,
            n,
            times: Vec::new(),
            states: Vec::new(),
            etas: Vec::new(),
            dissonance_series: Vec::new(),
            neg_eigen_counts: Vec::new(),
            events: Vec::new(),
            stats: IntegrationStats::default(),
        },
    };

    let mut st = Stage::new(len);
    sys.eval(&y, &mut st.k[0]);
    let mut evals = 1usize;
    let mut t = 0.0_f64;
    rec.push(t, &y);
    let mut next_sample = opts.sample_stride;

    let mut small_steps = usize::from(norm2(&st.k[0]) < opts.grad_tol);
    let mut pattern = pattern_of(&sys, &y, opts.zero_tol);
    let mut pattern_since = 0.0_f64;
    // Clock used for the sign window: model time for projected runs,
    // intrinsic time ∫‖X‖dt otherwise.
    let mut clock = 0.0_f64;
    let mut pattern_since_clock = 0.0_f64;

    let mut h = if small_steps > 0 {
        1e-6
    } else {
        evals += 1;
        initial_step(&sys, &y, &st.k[0], opts)
    };
    let mut err_prev = 1e-4_f64;
    let mut last_rejected = false;
    let mut dense_buf = vec![0.0; len];

    let terminal = loop {
        if rec.traj.stats.accepted + rec.traj.stats.rejected >= opts.max_steps {
            break Event::BudgetExhausted { time: t };
        }
        h = h.min(opts.max_step).min(opts.max_time - t);
        let err = dp_step(&sys, &y, h, &mut st, opts);
        evals += 6;
        let finite = err.is_finite() && st.y_new.iter().all(|v| v.is_finite());

        if finite && err <= 1.0 {
            rec.traj.stats.accepted += 1;
            let t_old = t;
            t = if opts.max_time - t <= h {
                opts.max_time
            } else {
                t + h
            };

            if opts.sample_stride > 0.0 {
                while next_sample < t {
                    let theta = (next_sample - t_old) / h;
                    dense_output(&y, &st, h, theta, &mut dense_buf);
                    sys.project(&mut dense_buf);
                    rec.push(next_sample, &dense_buf);
                    next_sample += opts.sample_stride;
                }
            }

            let scale_old = sys.scale(&y);
            y.copy_from_slice(&st.y_new);
            if model.is_projected() {
                sys.project(&mut y);
                sys.eval(&y, &mut st.k[0]);
                evals += 1;
            } else {
                let (k0, rest) = st.k.split_at_mut(1);
                k0[0].copy_from_slice(&rest[5]);
            }
            let scale = sys.scale(&y);
            clock += if model.is_projected() {
                t - t_old
            } else {
                0.5 * (scale_old + scale) * (t - t_old)
            };
            if opts.sample_stride == 0.0 {
                rec.push(t, &y);
            }

            if !model.is_projected() && scale > opts.blowup_norm {
                break Event::BlowUp { t_escape: t };
            }
            if model == ModelKind::EtaZ && y[0] > opts.blowup_norm {
                break Event::BlowUp { t_escape: t };
            }

            let p = pattern_of(&sys, &y, opts.zero_tol);
            if p != pattern {
                pattern = p;
                pattern_since = t;
                pattern_since_clock = clock;
            }

            if norm2(&st.k[0]) < opts.grad_tol {
                small_steps += 1;
                if small_steps >= 2 {
                    break Event::ConvergedToEquilibrium {
                        time: t,
                        state: sys.matrix(&y),
                    };
                }
            } else {
                small_steps = 0;
            }

            if t >= opts.max_time {
                break Event::BudgetExhausted { time: t };
            }

            let fac = if err == 0.0 {
                FAC_MAX
            } else {
                SAFETY * err.powf(-(0.2 - 0.75 * PI_BETA)) * err_prev.powf(PI_BETA)
            };
            let mut fac = fac.clamp(FAC_MIN, FAC_MAX);
            if last_rejected {
                fac = fac.min(1.0);
            }
            err_prev = err.max(1e-4);
            last_rejected = false;
            h *= fac;
        } else {
            rec.traj.stats.rejected += 1;
            last_rejected = true;
            h *= if finite {
                (SAFETY * err.powf(-0.2)).max(FAC_MIN)
            } else {
                FAC_MIN
            };
        }

        if h < MIN_STEP.max(4.0 * f64::EPSILON * t.abs()) {
            if model.is_projected() {
                return Err(Error::IntegrationFailed {
                    t,
                    reason: format!("step size underflow (h = {h:e})"),
                    last_state: y,
                });
            }
            break Event::BlowUp { t_escape: t };
        }
    };

    if opts.sample_stride > 0.0 {
        rec.push(t, &y);
    }
    let stabilized = match &terminal {
        Event::ConvergedToEquilibrium { .. } => true,
        _ => {
            let held = if model.is_projected() {
                t - pattern_since
            } else {
                clock - pattern_since_clock
            };
            held >= opts.sign_window
        }
    };
    if stabilized {
        rec.traj.events.push(Event::SignStabilized {
            time: pattern_since,
            pattern,
        });
    }
    rec.traj.events.push(terminal);
    rec.traj.stats.rhs_evals = evals;
    Ok(rec.traj)
}
