use std::path::{Path, PathBuf};

use intermittency_core::evolve::horizon;
use intermittency_core::forge::{
    build_free_laplacian, sample_anderson_realization, sparse_barriers, vk_operator, AndersonSpec,
};
use intermittency_core::operator::{Basis, Provenance};
use intermittency_core::{
    c64, AlphaFunction, CompactObservable, ContinuumSchrodinger, DenseHermitian, JacobiOperator, Operator,
    StateVector, TimeGrid,
};
use serde_json::Value;

use crate::args::read_json;
use crate::CliError;

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

#[derive(Debug, Clone, Default)]
pub struct OperatorParams {
    pub size: Option<f64>,
    pub seed: u64,
    pub realization: u64,
    pub disorder: Option<f64>,
    pub barrier_height: Option<f64>,
    pub first_exponent: Option<u32>,
    pub potential: Option<PathBuf>,
    pub spacing: Option<f64>,
    pub cap: Option<f64>,
    pub k: Option<u32>,
}

impl OperatorParams {
    fn size(&self) -> Result<f64, CliError> {
        match self.size {
            Some(s) if s > 0.0 && s.is_finite() => Ok(s),
            Some(s) => Err(bad(format!("--size must be positive, got {s}"))),
            None => Err(bad("missing required flag --size")),
        }
    }

    fn whole_size(&self) -> Result<usize, CliError> {
        let s = self.size()?;
        if s.fract() != 0.0 {
            return Err(bad(format!("--size must be an integer here, got {s}")));
        }
        Ok(s as usize)
    }

    fn potential_values(&self) -> Result<Option<Vec<f64>>, CliError> {
        let Some(path) = &self.potential else { return Ok(None) };
        serde_json::from_value(read_json(path)?)
            .map(Some)
            .map_err(|e| bad(format!("{}: expected an array of numbers: {e}", path.display())))
    }
}

pub const KINDS: [&str; 5] = ["free", "anderson", "jacobi", "continuum", "dense"];

pub fn forge(kind: &str, p: &OperatorParams) -> Result<Operator, CliError> {
    let op: Operator = match kind {
        "free" => build_free_laplacian(p.whole_size()?)?.into(),
        "anderson" => {
            let spec = AndersonSpec::uniform(p.whole_size()?, p.disorder.unwrap_or(1.0), p.seed);
            sample_anderson_realization(&spec, p.realization)?.into()
        }
        "jacobi" => {
            let n = p.whole_size()?;
            match p.potential_values()? {
                Some(v) => {
                    let bound = v.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
                    JacobiOperator::with_provenance(n, v, bound, Provenance::new("jacobi:file"))?.into()
                }
                None => sparse_barriers(n, p.barrier_height.unwrap_or(3.0), p.first_exponent.unwrap_or(5))?.into(),
            }
        }
        "continuum" => {
            let (l, h, cap) = (p.size()?, p.spacing.unwrap_or(0.05), p.cap.unwrap_or(1.0));
            let grid = ContinuumSchrodinger::grid_points(l, h)?;
            let v = match p.potential_values()? {
                Some(v) if v.len() != grid.len() => {
                    return Err(bad(format!("potential has {} values for {} grid points", v.len(), grid.len())))
                }
                Some(v) => v,
                None => vec![0.0; grid.len()],
            };
            match p.k {
                Some(k) => vk_operator(l, h, cap, k, |x| {
                    let i = (((x + l) / h).round() as usize).clamp(1, grid.len()) - 1;
                    v[i]
                })?
                .into(),
                None => ContinuumSchrodinger::new(l, h, v, cap)?.into(),
            }
        }
        "dense" => DenseHermitian::random(p.whole_size()?, p.cap.unwrap_or(1.0), p.seed, p.realization)?.into(),
        other => return Err(bad(format!("unknown operator kind {other:?}; expected one of {KINDS:?}"))),
    };
    Ok(op)
}

/// A kind name builds a fresh operator; anything else is read as a JSON
/// operator file.
pub fn operator(spec: &str, p: &OperatorParams) -> Result<Operator, CliError> {
    if KINDS.contains(&spec) {
        return forge(spec, p);
    }
    let value = read_json(Path::new(spec))?;
    serde_json::from_value(value).map_err(|e| bad(format!("{spec}: not an operator document: {e}")))
}

pub struct State {
    pub vector: StateVector,
    pub label: String,
}

fn basis_index(basis: &Basis, label: &str) -> Result<usize, CliError> {
    let miss = || bad(format!("basis vector e{label} is not in this basis"));
    match *basis {
        Basis::Sites { half_width } => {
            let n: i64 = label.parse().map_err(|_| miss())?;
            if n.unsigned_abs() as usize > half_width {
                return Err(miss());
            }
            Ok((n + half_width as i64) as usize)
        }
        Basis::Index { dim } => label.parse().ok().filter(|&i: &usize| i < dim).ok_or_else(miss),
        Basis::Grid {
            box_half_width,
            spacing,
        } => {
            let x: f64 = label.parse().map_err(|_| miss())?;
            let i = ((x + box_half_width) / spacing).round() as i64 - 1;
            if i < 0 || i as usize >= basis.dim() {
                return Err(miss());
            }
            Ok(i as usize)
        }
    }
}

pub fn state(spec: &str, basis: &Basis) -> Result<State, CliError> {
    let vector = if let Some(label) = spec.strip_prefix('e') {
        StateVector::basis_vector(basis.clone(), basis_index(basis, label)?)?
    } else if let Some(rest) = spec.strip_prefix("gauss:") {
        let (c, w) = rest
            .split_once(':')
            .and_then(|(c, w)| Some((c.parse().ok()?, w.parse().ok()?)))
            .ok_or_else(|| bad(format!("expected gauss:<center>:<width>, got {spec}")))?;
        StateVector::gaussian(basis.clone(), c, w)?
    } else if let Some(path) = spec.strip_prefix("file:") {
        let amps = coefficients(&read_json(Path::new(path))?)
            .ok_or_else(|| bad(format!("{path}: expected numbers or [re, im] pairs")))?;
        if amps.len() != basis.dim() {
            return Err(bad(format!("{path}: {} coefficients for dimension {}", amps.len(), basis.dim())));
        }
        StateVector::new(amps, basis.clone())?.normalized()?
    } else {
        return Err(bad(format!("unknown state {spec:?}; expected e<label>, gauss:c:w or file:path")));
    };
    Ok(State {
        vector,
        label: spec.to_string(),
    })
}

fn coefficients(v: &Value) -> Option<Vec<c64>> {
    v.as_array()?
        .iter()
        .map(|x| match x {
            Value::Number(n) => Some(c64::new(n.as_f64()?, 0.0)),
            Value::Array(p) if p.len() == 2 => Some(c64::new(p[0].as_f64()?, p[1].as_f64()?)),
            _ => None,
        })
        .collect()
}

/// Largest |n| carrying weight, for lattice states.
pub fn support_radius(v: &StateVector) -> Option<usize> {
    let labels = v.basis().site_labels()?;
    let total: f64 = v.amplitudes().iter().map(|z| z.norm_sqr()).sum();
    Some(
        labels
            .iter()
            .zip(v.amplitudes())
            .filter(|(_, z)| z.norm_sqr() > 1e-24 * total)
            .map(|(n, _)| n.unsigned_abs() as usize)
            .max()
            .unwrap_or(0),
    )
}

pub struct Observable {
    pub op: CompactObservable,
    pub radius: Option<usize>,
}

pub fn observable(spec: &str, basis: &Basis, seed: u64) -> Result<Observable, CliError> {
    if spec == "zero" {
        return Ok(Observable {
            op: CompactObservable::zero(basis.dim()),
            radius: Some(0),
        });
    }
    if let Some(s) = spec.strip_prefix("proj:") {
        let st = state(s, basis)?;
        return Ok(Observable {
            op: CompactObservable::projector(&st.vector)?,
            radius: support_radius(&st.vector),
        });
    }
    if let Some(rest) = spec.strip_prefix("rank:") {
        let (r, radius): (usize, usize) = rest
            .split_once(':')
            .and_then(|(r, w)| Some((r.parse().ok()?, w.parse().ok()?)))
            .ok_or_else(|| bad(format!("expected rank:<r>:<radius>, got {spec}")))?;
        let Basis::Sites { half_width } = *basis else {
            return Err(bad("rank observables need a lattice operator"));
        };
        if radius > half_width {
            return Err(bad(format!("radius {radius} exceeds the window {half_width}")));
        }
        let support = half_width - radius..half_width + radius + 1;
        return Ok(Observable {
            op: CompactObservable::random_positive(basis.dim(), r, Some(support), seed, 0)?,
            radius: Some(radius),
        });
    }
    Err(bad(format!("unknown observable {spec:?}; expected proj:<state>, rank:r:radius or zero")))
}

pub fn decades(spec: &str) -> Result<(f64, f64), CliError> {
    spec.split_once(':')
        .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
        .ok_or_else(|| bad(format!("expected --t-decades lo:hi, got {spec}")))
}

pub fn windows(spec: Option<&str>) -> Result<Vec<f64>, CliError> {
    let Some(spec) = spec else {
        return Ok(intermittency_core::scaling::WINDOW_SETTINGS.to_vec());
    };
    spec.split(',')
        .map(|w| match w.trim().parse::<f64>() {
            Ok(x) if x > 0.0 => Ok(x),
            _ => Err(bad(format!("bad window width {w:?}"))),
        })
        .collect()
}

pub fn alpha(spec: &str) -> Result<AlphaFunction, CliError> {
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad exponent in alpha spec {spec}")));
    let (head, arg) = spec.split_once(':').unwrap_or((spec, ""));
    match head {
        "power" => Ok(AlphaFunction::Power { p: num(arg)? }),
        "logpower" => Ok(AlphaFunction::LogPower { p: num(arg)? }),
        "iterlog" => Ok(AlphaFunction::IteratedLog),
        "table" => {
            let mut rdr = csv::Reader::from_path(arg).map_err(|e| bad(format!("{arg}: {e}")))?;
            let (mut times, mut values) = (vec![], vec![]);
            for row in rdr.deserialize::<(f64, f64)>() {
                let (t, v) = row.map_err(|e| bad(format!("{arg}: {e}")))?;
                times.push(t);
                values.push(v);
            }
            Ok(AlphaFunction::UserTable { times, values })
        }
        _ => Err(bad(format!("unknown alpha {spec:?}; expected power:p, logpower:p, iterlog or table:file"))),
    }
}

/// Time grid clipped at the lattice horizon. Returns the grid and the
/// horizon that applied, if any.
pub fn clipped_grid(
    op: &Operator,
    decades: (f64, f64),
    points_per_decade: usize,
    radius: usize,
    safety: f64,
) -> Result<(TimeGrid, Option<f64>), CliError> {
    let grid = TimeGrid::new(10f64.powf(decades.0), 10f64.powf(decades.1), points_per_decade)?;
    let Basis::Sites { half_width } = op.basis() else {
        return Ok((grid, None));
    };
    let cap = horizon(half_width, radius, safety)?;
    let clipped = grid
        .clipped(cap)
        .ok_or_else(|| bad(format!("horizon {cap} lies below the start of the grid")))?;
    Ok((clipped, Some(cap)))
}
