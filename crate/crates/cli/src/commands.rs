use std::path::{Path, PathBuf};
use std::time::Instant;

use balflow_core::balance::{classify, count_eigen_signs};
use balflow_core::dissonance::dissonance;
use balflow_core::dynamics::{
    events_json, integrate, trajectory_csv, Event, ModelKind, State, Trajectory,
};
use balflow_core::equilibria::{
    build_irreducible, build_reducible, enumerate_balanced, equilibrium_dissonance,
    instability_certificate, irreducible_pq, ngon_angles, nst_harmonic, nst_k1, nst_k2, residual,
    BlockInput,
};
use balflow_core::io::{read_appraisal, read_matrix, to_csv};
use balflow_core::matrix::{frobenius_norm, max_asymmetry, sign_pattern};
use balflow_core::montecarlo::{gen_initial, run_experiment, Family};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::args::{
    ClassifyArgs, Cli, Command, EquilibriaArgs, FamilyArg, Format, LandscapeArgs, ModelArg,
    MonteCarloArgs, SimulateArgs,
};
use crate::error::{CliError, Result};
use crate::landscape::{grid, Normalization};

/// Sample size of the full-scale sweep.
pub const FULL_TRIALS: u64 = 27000;

pub fn dispatch(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Classify(a) => cmd_classify(&a),
        Command::Equilibria(a) => cmd_equilibria(&a),
        Command::Montecarlo(a) => cmd_montecarlo(&a),
        Command::Landscape(a) => cmd_landscape(&a),
    }
}

pub fn model_kind(m: ModelArg) -> ModelKind {
    match m {
        ModelArg::Pure => ModelKind::PureInfluence,
        ModelArg::Kulakowski => ModelKind::Kulakowski,
        ModelArg::ProjectedPure => ModelKind::ProjectedPureInfluence,
        ModelArg::ProjectedKulakowski => ModelKind::ProjectedKulakowski,
        ModelArg::EtaZ => ModelKind::EtaZ,
    }
}

pub fn family(f: FamilyArg) -> Family {
    match f {
        FamilyArg::Asymmetric => Family::GenericAsymmetric,
        FamilyArg::Symmetric => Family::GenericSymmetric,
        FamilyArg::Kulakowski => Family::KulakowskiGeneric,
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// Writes every file or none: all contents are ready before the first write.
fn write_all(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for (name, content) in files {
        let path = dir.join(name);
        if let Err(e) = std::fs::write(&path, content) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(CliError::Io(format!("{}: {e}", path.display())));
        }
        written.push(path);
    }
    Ok(written)
}

fn initial_state(model: ModelKind, x: DMatrix<f64>) -> Result<State> {
    let norm = frobenius_norm(&x);
    if model.is_projected() && norm == 0.0 {
        return Err(CliError::Numeric(
            "projected models need a nonzero initial matrix".into(),
        ));
    }
    Ok(match model {
        ModelKind::EtaZ => State::EtaZ {
            eta: norm,
            z: x / norm,
        },
        m if m.is_projected() => State::Matrix(x / norm),
        _ => State::Matrix(x),
    })
}

fn event_summary(e: &Event) -> Value {
    json!({ "event": e.name(), "time": e.time() })
}

fn trajectory_json(tr: &Trajectory, params: &Value) -> Value {
    let samples: Vec<Value> = (0..tr.times.len())
        .map(|k| {
            json!({
                "t": tr.times[k],
                "state": rows(&tr.states[k]),
                "dissonance": tr.dissonance_series[k],
                "neg_eigen_count": tr.neg_eigen_counts[k],
                "eta": tr.etas[k],
            })
        })
        .collect();
    json!({
        "parameters": params,
        "model": tr.model,
        "n": tr.n,
        "samples": samples,
        "events": events_json(tr),
    })
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<String> {
    let model = model_kind(a.model);
    let params = serde_json::to_value(a)?;
    let x = match (&a.input, a.family) {
        (Some(path), _) if model.is_zero_diagonal() => read_appraisal(path)?.into_matrix(),
        (Some(path), _) => read_matrix(path)?,
        (None, Some(f)) => {
            let fam = family(f);
            if !fam.supports(model) {
                return Err(CliError::Usage(format!(
                    "model {model} cannot start from the {fam} family"
                )));
            }
            let n =
                a.n.ok_or_else(|| CliError::Usage("--family needs --n".into()))?;
            gen_initial(fam, n, a.seed)?
        }
        (None, None) => {
            return Err(CliError::Usage(
                "one of --input or --family is required".into(),
            ))
        }
    };
    let opts = a.tol.options();
    let tr = integrate(model, &initial_state(model, x)?, &opts)?;

    let files = match a.output.format {
        Format::Csv => vec![
            (format!("{}.csv", a.name), trajectory_csv(&tr)),
            (format!("{}.events.json", a.name), pretty(&events_json(&tr))),
        ],
        Format::Json => vec![(
            format!("{}.json", a.name),
            pretty(&trajectory_json(&tr, &params)),
        )],
    };
    let written = write_all(&a.output.out_dir, &files)?;
    let stabilized = tr
        .sign_stabilized()
        .map(|(t, p)| json!({ "time": t, "pattern": p.to_string() }));
    Ok(pretty(&json!({
        "command": "simulate",
        "parameters": params,
        "model": model,
        "n": tr.n,
        "samples": tr.times.len(),
        "terminal": event_summary(tr.terminal_event()),
        "sign_stabilized": stabilized,
        "final_dissonance": tr.dissonance_series.last(),
        "stats": tr.stats,
        "files": written,
    })))
}

fn verdict_json(z: &DMatrix<f64>, zero_tol: f64, eigen_band: f64) -> Value {
    let n = z.nrows();
    let verdict = classify(z, zero_tol);
    let mut out = verdict.to_json(n);
    let norm = frobenius_norm(z);
    let scaled = if norm > 0.0 { z / norm } else { z.clone() };
    out["pattern"] = json!(sign_pattern(z, zero_tol).to_string());
    out["dissonance"] = json!(dissonance(&scaled));
    out["eigen_signs"] = if max_asymmetry(z) < 1e-8 * norm.max(1.0) {
        serde_json::to_value(count_eigen_signs(&scaled, eigen_band).ok())
            .expect("eigen counts serialize")
    } else {
        Value::Null
    };
    out
}

pub fn cmd_classify(a: &ClassifyArgs) -> Result<String> {
    let z = read_matrix(&a.input)?;
    let mut out = verdict_json(&z, a.zero_tol, a.eigen_band);
    match a.format {
        Format::Json => {
            out["parameters"] = serde_json::to_value(a)?;
            Ok(pretty(&out))
        }
        Format::Csv => {
            let mut s = String::from("key,value\n");
            for key in [
                "verdict",
                "pattern",
                "dissonance",
                "witness",
                "factions",
                "isolated",
            ] {
                if let Some(v) = out.get(key) {
                    let text = match v {
                        Value::String(t) => t.clone(),
                        other => other.to_string(),
                    };
                    s.push_str(&format!("{key},\"{}\"\n", text.replace('"', "\"\"")));
                }
            }
            Ok(s)
        }
    }
}

fn irreducible_json(a: &EquilibriaArgs, k: usize) -> Result<(Value, DMatrix<f64>)> {
    let n = a.n;
    let frame = match (&a.signs, &a.angles) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("--signs and --angles are exclusive".into()))
        }
        (Some(s), None) => {
            if k != 1 || s.len() != n {
                return Err(CliError::Usage(format!(
                    "--signs needs k = 1 and {n} entries"
                )));
            }
            nst_k1(s)?
        }
        (None, Some(ang)) => {
            if k != 2 || ang.len() != n {
                return Err(CliError::Usage(format!(
                    "--angles needs k = 2 and {n} entries"
                )));
            }
            nst_k2(ang)?
        }
        (None, None) if k == 2 && n > 2 => nst_k2(&ngon_angles(n))?,
        (None, None) => nst_harmonic(n, k)?,
    };
    let (p, q) = irreducible_pq(n, k)?;
    let z = build_irreducible(n, k, &frame)?;
    let (spec, _) = build_reducible(&[BlockInput::Frame(frame)], None, None)?;
    let m = z.as_matrix().clone();
    let mut out = json!({
        "n": n,
        "k": k,
        "p": p,
        "q": q,
        "matrix": rows(&m),
        "spec": spec.to_json(),
    });
    if a.check {
        out["residual"] = json!(residual(&z));
        out["dissonance"] = json!(dissonance(&m));
        out["expected_dissonance"] = json!(equilibrium_dissonance(n, k)?);
        out["instability_certificate"] = json!(instability_certificate(&z)?);
        out["verdict"] = classify(&m, balflow_core::matrix::DEFAULT_ZERO_TOL).to_json(n);
    }
    Ok((out, m))
}

pub fn cmd_equilibria(a: &EquilibriaArgs) -> Result<String> {
    let params = serde_json::to_value(a)?;
    if a.balanced {
        let n1 = a.n1.unwrap_or(a.n);
        let all: Vec<DMatrix<f64>> = enumerate_balanced(n1, a.n)?
            .map(|z| z.into_matrix())
            .collect();
        return Ok(match a.format {
            Format::Csv => all.iter().map(|m| format!("{}\n", to_csv(m))).collect(),
            Format::Json => {
                let items: Vec<Value> = all
                    .iter()
                    .map(|m| {
                        let z = balflow_core::matrix::SphereAppraisal::from_matrix(m.clone())
                            .expect("balanced equilibria have unit norm");
                        let mut v = json!({ "matrix": rows(m) });
                        if a.check {
                            v["residual"] = json!(residual(&z));
                            v["dissonance"] = json!(dissonance(m));
                            v["verdict"] =
                                classify(m, balflow_core::matrix::DEFAULT_ZERO_TOL).to_json(a.n);
                        }
                        v
                    })
                    .collect();
                pretty(&json!({
                    "parameters": params,
                    "n": a.n,
                    "n1": n1,
                    "count": all.len(),
                    "equilibria": items,
                }))
            }
        });
    }
    let k =
        a.k.ok_or_else(|| CliError::Usage("--k is required".into()))?;
    let (mut out, m) = irreducible_json(a, k)?;
    Ok(match a.format {
        Format::Csv => to_csv(&m),
        Format::Json => {
            out["parameters"] = params;
            pretty(&out)
        }
    })
}

pub fn cmd_montecarlo(a: &MonteCarloArgs) -> Result<String> {
    let model = model_kind(a.model);
    let fam = family(a.family);
    let trials = if a.full_scale {
        FULL_TRIALS
    } else {
        a.trials
    };
    let opts = a.tol.options();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let report = pool.install(|| run_experiment(model, fam, a.n, trials, a.seed, &opts))?;
    let runtime = start.elapsed().as_secs_f64();

    let params = serde_json::to_value(a)?;
    let file = match a.output.format {
        Format::Json => {
            let mut v = serde_json::to_value(&report)?;
            v["parameters"] = params.clone();
            (format!("{}.json", a.name), pretty(&v))
        }
        Format::Csv => (format!("{}.csv", a.name), report.trials_csv()),
    };
    let written = write_all(&a.output.out_dir, &[file])?;
    Ok(pretty(&json!({
        "command": "montecarlo",
        "parameters": params,
        "N": report.trials,
        "p_hat": report.p_hat,
        "counts": report.counts,
        "epsilon": report.epsilon,
        "eta_conf": report.eta_conf,
        "runtime_seconds": runtime,
        "files": written,
    })))
}

pub fn cmd_landscape(a: &LandscapeArgs) -> Result<String> {
    if a.n != 3 {
        return Err(CliError::Usage(format!(
            "the landscape is only defined for n = 3, got {}",
            a.n
        )));
    }
    if a.lon < 3 || a.lat < 2 {
        return Err(CliError::Usage(
            "grid needs at least 3 longitudes and 2 latitudes".into(),
        ));
    }
    let normalization = if a.matrix_norm {
        Normalization::Matrix
    } else {
        Normalization::Coordinate
    };
    let l = grid(a.lon, a.lat, normalization);
    let params = serde_json::to_value(a)?;
    let minima: Vec<Value> = l
        .global_minima(1e-3)
        .iter()
        .map(|p| json!({ "x12": p.x12, "x23": p.x23, "x31": p.x31, "D": p.d }))
        .collect();
    let file = match a.output.format {
        Format::Csv => (format!("{}.csv", a.name), l.to_csv(a.stereographic)),
        Format::Json => {
            let pts: Vec<Value> = l
                .points
                .iter()
                .map(|p| {
                    let mut v = json!({ "x12": p.x12, "x23": p.x23, "x31": p.x31, "D": p.d });
                    if a.stereographic {
                        v["u"] = json!(p.u);
                        v["v"] = json!(p.v);
                    }
                    v
                })
                .collect();
            (
                format!("{}.json", a.name),
                pretty(&json!({
                    "parameters": params,
                    "normalization": normalization,
                    "lon": l.lon,
                    "lat": l.lat,
                    "points": pts,
                })),
            )
        }
    };
    let written = write_all(&a.output.out_dir, &[file])?;
    Ok(pretty(&json!({
        "command": "landscape",
        "parameters": params,
        "normalization": normalization,
        "minima": minima,
        "files": written,
    })))
}
