use std::fmt::Write as _;

use serde_json::{json, Value};

use super::{Event, ModelKind, Trajectory};

/// One row per sample: `t`, the entries row-major, `dissonance` and
/// `neg_eigen_count` (empty when not computed). `EtaZ` runs get an extra
/// trailing `eta` column.
pub fn trajectory_csv(tr: &Trajectory) -> String {
    let n = tr.n;
    let mut out = String::from("t");
    for i in 1..=n {
        for j in 1..=n {
            write!(out, ",z_{i}_{j}").unwrap();
        }
    }
    out.push_str(",dissonance,neg_eigen_count");
    let with_eta = tr.model == ModelKind::EtaZ;
    if with_eta {
        out.push_str(",eta");
    }
    out.push('\n');
    for k in 0..tr.times.len() {
        write!(out, "{:e}", tr.times[k]).unwrap();
        let s = &tr.states[k];
        for i in 0..n {
            for j in 0..n {
                write!(out, ",{:e}", s[(i, j)]).unwrap();
            }
        }
        write!(out, ",{:e},", tr.dissonance_series[k]).unwrap();
        if let Some(c) = tr.neg_eigen_counts[k] {
            write!(out, "{c}").unwrap();
        }
        if with_eta {
            write!(out, ",{:e}", tr.etas[k]).unwrap();
        }
        out.push('\n');
    }
    out
}

fn payload(e: &Event) -> Value {
    match e {
        Event::ConvergedToEquilibrium { state, .. } => {
            let rows: Vec<Vec<f64>> = (0..state.nrows())
                .map(|i| (0..state.ncols()).map(|j| state[(i, j)]).collect())
                .collect();
            json!({ "state": rows })
        }
        Event::BlowUp { t_escape } => json!({ "t_escape": t_escape }),
        Event::SignStabilized { pattern, .. } => {
            json!({ "pattern": pattern.to_string(), "signs": pattern.signs() })
        }
        Event::BudgetExhausted { .. } => json!({}),
    }
}

/// Events as a JSON array of `{event, time, payload}` objects.
pub fn events_json(tr: &Trajectory) -> Value {
    Value::Array(
        tr.events
            .iter()
            .map(|e| json!({ "event": e.name(), "time": e.time(), "payload": payload(e) }))
            .collect(),
    )
}
