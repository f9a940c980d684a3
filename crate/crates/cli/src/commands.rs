use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use intermittency_core::evolve::{basis_measure, eigendecompose, evolve, horizon, spectral_measure};
use intermittency_core::experiments::{report, run_experiment, Verdict, CODE_VERSION};
use intermittency_core::observables::{moment_q, return_probability_series, time_average_series};
use intermittency_core::operator::Basis;
use intermittency_core::scaling::{alpha_scan, beta_from_series, d2_from_series, slope_envelope, D2Options};
use intermittency_core::{Operator, Quantity, TimeAverageSeries};
use serde_json::{json, Value};

use crate::args::{merge, read_json, required, Command, EvolveArgs, ExperimentArgs, ExponentsArgs, ForgeArgs, ObserveArgs, ReportArgs};
use crate::specs::{self, OperatorParams};
use crate::{CliError, EXIT_INCONCLUSIVE, EXIT_OK, EXIT_VALIDATION};

const DEFAULT_SAFETY: f64 = 0.8;
const DEFAULT_POINTS_PER_DECADE: usize = 32;

pub fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Forge(a) => forge(merge(&a, a.config.as_deref())?),
        Command::Evolve(a) => evolve_cmd(merge(&a, a.config.as_deref())?),
        Command::Observe(a) => observe(merge(&a, a.config.as_deref())?),
        Command::Exponents(a) => exponents(merge(&a, a.config.as_deref())?),
        Command::Experiment(a) => experiment(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(e.to_string()))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Everything is computed before anything is written, so a failed run
/// leaves no files behind. Without `--out` the primary file goes to stdout.
fn emit(out: Option<&Path>, files: &[(String, String)]) -> Result<(), CliError> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(files[0].1.as_bytes())?;
            stdout.flush()?;
        }
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for (name, body) in files {
                write_atomic(&dir.join(name), body.as_bytes())?;
            }
            eprintln!("wrote {} file(s) to {}", files.len(), dir.display());
        }
    }
    Ok(())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

fn meta(command: &str, args: Value, op: &Operator, extra: Value) -> Value {
    let mut m = json!({
        "command": command,
        "args": args,
        "operator": op.fingerprint(),
        "dim": op.dim(),
        "code_version": CODE_VERSION,
    });
    if let (Value::Object(m), Value::Object(x)) = (&mut m, extra) {
        m.extend(x);
    }
    m
}

fn forge(a: ForgeArgs) -> Result<i32, CliError> {
    let kind = required(&a.kind, "kind")?;
    let op = specs::forge(&kind, &a.operator_params())?;
    let body = pretty(&to_value(&op)?);
    match &a.out {
        None => emit(None, &[("operator.json".into(), body)])?,
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            write_atomic(path, body.as_bytes())?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(EXIT_OK)
}

fn load_operator(spec: &Option<String>, p: &OperatorParams) -> Result<Operator, CliError> {
    specs::operator(&required(spec, "operator")?, p)
}

fn safety(s: Option<f64>) -> f64 {
    s.unwrap_or(DEFAULT_SAFETY)
}

fn evolve_cmd(a: EvolveArgs) -> Result<i32, CliError> {
    let op = load_operator(&a.operator, &a.operator_params())?;
    let basis = op.basis();
    let xi = specs::state(&required(&a.xi, "xi")?, &basis)?;
    let t = required(&a.t, "t")?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(CliError::Validation(format!("--t must be non-negative, got {t}")));
    }
    let mut hor = None;
    if let Basis::Sites { half_width } = basis {
        let r0 = specs::support_radius(&xi.vector).unwrap_or(0);
        let cap = horizon(half_width, r0, safety(a.safety))?;
        if t > cap {
            return Err(CliError::Validation(format!(
                "t = {t} is beyond the horizon {cap} of this window; enlarge --size"
            )));
        }
        hor = Some(cap);
    }
    let es = eigendecompose(&op)?;
    let state = evolve(&es, &xi.vector, t)?;
    let mut csv = String::from("label,re,im,prob\n");
    for (i, z) in state.amplitudes().iter().enumerate() {
        csv.push_str(&format!("{},{:e},{:e},{:e}\n", basis.label(i), z.re, z.im, z.norm_sqr()));
    }
    let m = meta("evolve", to_value(&a)?, &op, json!({"horizon": hor, "t": t, "norm": state.norm()}));
    emit(a.out.as_deref(), &[("state.csv".into(), csv), ("run.json".into(), pretty(&m))])?;
    Ok(EXIT_OK)
}

struct SeriesJob<'a> {
    operator: &'a Option<String>,
    params: OperatorParams,
    xi: &'a Option<String>,
    a: &'a Option<String>,
    quantity: String,
    q: Option<f64>,
    t_decades: &'a Option<String>,
    points_per_decade: Option<usize>,
    safety: Option<f64>,
}

struct ComputedSeries {
    series: TimeAverageSeries,
    op: Operator,
    info: Value,
}

fn compute_series(job: SeriesJob) -> Result<ComputedSeries, CliError> {
    let op = load_operator(job.operator, &job.params)?;
    let basis = op.basis();
    let xi_spec = required(job.xi, "xi")?;
    let xi = specs::state(&xi_spec, &basis)?;
    let decades = specs::decades(&required(job.t_decades, "t-decades")?)?;
    let ppd = job.points_per_decade.unwrap_or(DEFAULT_POINTS_PER_DECADE);
    let observable = match job.quantity.as_str() {
        "expectation" => Some(specs::observable(&required(job.a, "A")?, &basis, job.params.seed)?),
        "return-prob" | "moment" => None,
        other => {
            return Err(CliError::Validation(format!(
                "unknown quantity {other:?}; expected expectation, return-prob or moment"
            )))
        }
    };
    let q = job.q.unwrap_or(2.0);
    let radius = specs::support_radius(&xi.vector)
        .unwrap_or(0)
        .max(observable.as_ref().and_then(|o| o.radius).unwrap_or(0));
    let (grid, hor) = specs::clipped_grid(&op, decades, ppd, radius, safety(job.safety))?;
    let requested = 10f64.powf(decades.1);
    if grid.t_max < requested {
        eprintln!("note: grid clipped at the horizon t = {} (requested {requested})", grid.t_max);
    }
    let times = grid.times();

    let series = match (job.quantity.as_str(), observable) {
        ("expectation", Some(o)) => {
            let es = eigendecompose(&op)?;
            time_average_series(&o.op, &es, &xi.vector, &times, &xi_spec)?
        }
        ("return-prob", _) => {
            // a basis vector of a tridiagonal operator needs no eigenvectors
            let mu = match (xi_spec.strip_prefix('e'), op.tridiagonal()) {
                (Some(label), Some(_)) => {
                    let index = (0..basis.dim())
                        .find(|&i| xi.vector.amplitudes()[i].norm_sqr() > 0.5)
                        .ok_or_else(|| CliError::Internal(format!("no basis vector for e{label}")))?;
                    basis_measure(&op, index)?
                }
                _ => spectral_measure(&eigendecompose(&op)?, &xi.vector)?,
            };
            return_probability_series(&mu, &times, &op.fingerprint(), &xi_spec)?
        }
        _ => moment_q(&eigendecompose(&op)?, &xi.vector, &times, q, &xi_spec)?,
    };
    let info = json!({
        "horizon": hor,
        "t_max_requested": requested,
        "t_max_used": grid.t_max,
        "clipped": grid.t_max < requested,
    });
    Ok(ComputedSeries { series, op, info })
}

fn observe(a: ObserveArgs) -> Result<i32, CliError> {
    let c = compute_series(SeriesJob {
        operator: &a.operator,
        params: a.operator_params(),
        xi: &a.xi,
        a: &a.a,
        quantity: a.quantity.clone().unwrap_or_else(|| "expectation".into()),
        q: a.q,
        t_decades: &a.t_decades,
        points_per_decade: a.points_per_decade,
        safety: a.safety,
    })?;
    let m = meta("observe", to_value(&a)?, &c.op, c.info);
    emit(a.out.as_deref(), &[("series.csv".into(), c.series.to_csv()), ("run.json".into(), pretty(&m))])?;
    Ok(EXIT_OK)
}

fn parse_quantity(s: &str) -> Option<Quantity> {
    match s {
        "expectation" => Some(Quantity::Expectation),
        "return_prob" => Some(Quantity::ReturnProb),
        _ => Some(Quantity::MomentQ {
            q: s.strip_prefix("moment_q=")?.parse().ok()?,
        }),
    }
}

/// Reads the CSV written by `observe`.
fn load_series(path: &PathBuf) -> Result<TimeAverageSeries, CliError> {
    let bad = |e: String| CliError::Validation(format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let (mut times, mut values) = (vec![], vec![]);
    let mut tag: Option<(String, String, String)> = None;
    for row in rdr.deserialize::<(f64, f64, String, String, String)>() {
        let (t, v, quantity, op, xi) = row.map_err(|e| bad(e.to_string()))?;
        times.push(t);
        values.push(v);
        tag.get_or_insert((quantity, op, xi));
    }
    let (quantity, op, xi) = tag.ok_or_else(|| bad("empty series".into()))?;
    let quantity = parse_quantity(&quantity).ok_or_else(|| bad(format!("unknown quantity {quantity}")))?;
    TimeAverageSeries::new(times, values, quantity, op, xi).map_err(|e| bad(e.to_string()))
}

fn exponents(a: ExponentsArgs) -> Result<i32, CliError> {
    let estimator = a.estimator.clone().unwrap_or_else(|| "envelope".into());
    let windows = specs::windows(a.windows.as_deref())?;
    let quantity = match estimator.as_str() {
        "d2" => "return-prob".to_string(),
        "beta" => "moment".to_string(),
        "envelope" | "alpha" => a.quantity.clone().unwrap_or_else(|| "expectation".into()),
        other => {
            return Err(CliError::Validation(format!(
                "unknown estimator {other:?}; expected envelope, d2, beta or alpha"
            )))
        }
    };
    let alpha = match (&estimator[..], &a.alpha) {
        ("alpha", Some(s)) => Some(specs::alpha(s)?),
        ("alpha", None) => return Err(CliError::Validation("missing required flag --alpha".into())),
        _ => None,
    };
    let (series, info) = match &a.series {
        Some(path) => (load_series(path)?, json!({"series_file": path})),
        None => {
            let c = compute_series(SeriesJob {
                operator: &a.operator,
                params: a.operator_params(),
                xi: &a.xi,
                a: &a.a,
                quantity,
                q: a.q,
                t_decades: &a.t_decades,
                points_per_decade: a.points_per_decade,
                safety: a.safety,
            })?;
            let mut info = c.info;
            info["operator"] = json!(c.op.fingerprint());
            (c.series, info)
        }
    };

    let mut files: Vec<(String, String)> = vec![];
    let result = match estimator.as_str() {
        "alpha" => to_value(&alpha_scan(alpha.as_ref().expect("checked above"), &series)?)?,
        _ => {
            let mut ests = vec![];
            for &w in &windows {
                let est = match (estimator.as_str(), series.quantity) {
                    ("envelope", _) => slope_envelope(&series, w)?,
                    ("d2", Quantity::ReturnProb) => d2_from_series(
                        &series,
                        0.0,
                        D2Options {
                            window_decades: w,
                            log_correction: a.log_correction,
                            subtract_floor: false,
                        },
                    )?,
                    ("beta", Quantity::MomentQ { q }) => beta_from_series(&series, q, w)?,
                    (e, q) => {
                        return Err(CliError::Validation(format!("estimator {e} does not apply to a {q} series")))
                    }
                };
                files.push((format!("slopes_w{w}.csv"), est.slopes_csv()));
                ests.push(est);
            }
            to_value(&ests)?
        }
    };
    files.insert(0, ("estimates.json".into(), pretty(&result)));
    let m = json!({
        "command": "exponents",
        "args": to_value(&a)?,
        "source": info,
        "code_version": CODE_VERSION,
    });
    files.push(("run.json".into(), pretty(&m)));
    emit(a.out.as_deref(), &files)?;
    Ok(EXIT_OK)
}

fn experiment(a: ExperimentArgs) -> Result<i32, CliError> {
    let name = required(&a.name, "name")?;
    let config = match &a.config {
        Some(p) => read_json(p)?,
        None => Value::Null,
    };
    let record = run_experiment(&name, &config, a.seed)?;
    let path = record.persist(&a.out)?;
    println!("{}", path.display());
    eprintln!("{name}: {} ({:.1}s)", record.verdict.as_str(), record.wall_time_s);
    for c in &record.checks {
        eprintln!("  {:<32} {}", c.name, c.verdict.as_str());
    }
    Ok(match record.verdict {
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
        Verdict::Pass | Verdict::Fail => EXIT_OK,
    })
}

fn report_cmd(a: ReportArgs) -> Result<i32, CliError> {
    let r = report(&a.dir)?;
    print!("{}", r.to_table());
    let bad = r.corrupt();
    if bad > 0 {
        eprintln!("{bad} corrupt record(s)");
        return Ok(EXIT_VALIDATION);
    }
    Ok(EXIT_OK)
}
