// Persistence of run records: `<root>/<experiment>/<config_hash>.json` with
// one sibling CSV per series, each written to a temp file and renamed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{config_hash, ExperimentError, RunRecord, Verdict};

fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ExperimentError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

impl RunRecord {
    /// Directory of this record under `root`.
    pub fn dir(&self, root: &Path) -> PathBuf {
        root.join(&self.experiment)
    }

    pub fn json_path(&self, root: &Path) -> PathBuf {
        self.dir(root).join(format!("{}.json", self.config_hash))
    }

    /// Writes the record and its series CSVs under `root`, replacing an
    /// earlier run with the same config hash. Returns the JSON path.
    pub fn persist(&self, root: &Path) -> Result<PathBuf, ExperimentError> {
        let dir = self.dir(root);
        fs::create_dir_all(&dir)?;
        for s in &self.series {
            let path = dir.join(format!("{}.{}.csv", self.config_hash, s.name));
            write_atomic(&path, s.series.to_csv().as_bytes())?;
        }
        for t in &self.tables {
            let path = dir.join(format!("{}.{}.csv", self.config_hash, t.name));
            write_atomic(&path, t.to_csv().as_bytes())?;
        }
        let path = self.json_path(root);
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        write_atomic(&path, json.as_bytes())?;
        Ok(path)
    }

    /// Loads and verifies a record: both hashes must recompute and the file
    /// stem must be the config hash.
    pub fn load(path: &Path) -> Result<RunRecord, ExperimentError> {
        let corrupt = |reason: String| ExperimentError::Corrupt {
            path: path.display().to_string(),
            reason,
        };
        let text = fs::read_to_string(path)?;
        let record: RunRecord =
            serde_json::from_str(&text).map_err(|e| corrupt(format!("unparsable: {e}")))?;
        if record.record_hash != record.compute_record_hash() {
            return Err(corrupt("record hash mismatch".into()));
        }
        if record.config_hash != config_hash(&record.experiment, &record.config, record.seed) {
            return Err(corrupt("config hash mismatch".into()));
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        if stem != record.config_hash {
            return Err(corrupt("file name does not match config hash".into()));
        }
        Ok(record)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub hash: String,
    pub experiment: String,
    /// `None` for corrupt records.
    pub verdict: Option<Verdict>,
    pub summary: Vec<(String, f64)>,
    pub path: PathBuf,
    pub problem: Option<String>,
}

impl ReportRow {
    pub fn is_corrupt(&self) -> bool {
        self.verdict.is_none()
    }

    pub fn line(&self) -> String {
        let short = &self.hash[..self.hash.len().min(16)];
        match (&self.verdict, &self.problem) {
            (Some(v), _) => {
                let mut out = format!("{short}  {:<18} {:<12}", self.experiment, v.as_str());
                for (k, x) in &self.summary {
                    out.push_str(&format!(" {k}={x:.6e}"));
                }
                out.trim_end().to_string()
            }
            (None, p) => format!(
                "{short}  {:<18} {:<12} {}",
                self.experiment,
                "corrupt",
                p.as_deref().unwrap_or("")
            )
            .trim_end()
            .to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn corrupt(&self) -> usize {
        self.rows.iter().filter(|r| r.is_corrupt()).count()
    }

    pub fn to_table(&self) -> String {
        self.rows.iter().map(|r| r.line() + "\n").collect()
    }
}

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_json(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    Ok(())
}

/// One row per record found under `dir`, ordered by hash. Records that fail
/// verification are kept as corrupt rows.
pub fn report(dir: &Path) -> Result<Report, ExperimentError> {
    let mut paths = Vec::new();
    if dir.exists() {
        collect_json(dir, &mut paths)?;
    }
    let mut rows: Vec<ReportRow> = paths
        .into_iter()
        .map(|path| {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
            let folder = path
                .parent()
                .and_then(|p| p.file_name())
                .and_then(|s| s.to_str())
                .unwrap_or("")
                .to_string();
            match RunRecord::load(&path) {
                Ok(r) => ReportRow {
                    hash: r.config_hash.clone(),
                    experiment: r.experiment.clone(),
                    verdict: Some(r.verdict),
                    summary: r.summary.into_iter().collect(),
                    path,
                    problem: None,
                },
                Err(e) => ReportRow {
                    hash: stem,
                    experiment: folder,
                    verdict: None,
                    summary: vec![],
                    path,
                    problem: Some(match e {
                        ExperimentError::Corrupt { reason, .. } => reason,
                        other => other.to_string(),
                    }),
                },
            }
        })
        .collect();
    rows.sort_by(|a, b| a.hash.cmp(&b.hash).then_with(|| a.path.cmp(&b.path)));
    Ok(Report { rows })
}

#[cfg(test)]
mod tests {
    use super::super::run_experiment;
    use super::*;
    use serde_json::{json, Value};

    fn scratch(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("ilab-record-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn empty_dir_gives_empty_report() {
        let dir = scratch("empty");
        fs::create_dir_all(&dir).unwrap();
        let r = report(&dir).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(r.to_table(), "");
    }

    #[test]
    fn round_trip_sorting_and_tamper_detection() {
        let dir = scratch("roundtrip");
        let a = run_experiment("eigenweight", &Value::Null, 1).unwrap();
        let b = run_experiment("eigenweight", &json!({"k_max": 4}), 2).unwrap();
        let pa = a.persist(&dir).unwrap();
        b.persist(&dir).unwrap();
        assert_eq!(RunRecord::load(&pa).unwrap(), a);

        let r = report(&dir).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows[0].hash < r.rows[1].hash);
        assert_eq!(r.corrupt(), 0);
        assert_eq!(r.to_table().lines().count(), 2);

        let text = fs::read_to_string(&pa).unwrap();
        fs::write(&pa, text.replacen("\"pass\"", "\"fail\"", 1)).unwrap();
        let r = report(&dir).unwrap();
        assert_eq!(r.corrupt(), 1);
        assert!(r.to_table().contains("corrupt"));

        fs::write(&pa, "{ not json").unwrap();
        assert_eq!(report(&dir).unwrap().corrupt(), 1);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn persisting_twice_is_byte_identical_modulo_wall_time() {
        let dir = scratch("twice");
        let a = run_experiment("eigenweight", &Value::Null, 5).unwrap();
        let p = a.persist(&dir).unwrap();
        let first = fs::read_to_string(&p).unwrap();
        let b = run_experiment("eigenweight", &Value::Null, 5).unwrap();
        b.persist(&dir).unwrap();
        let second = fs::read_to_string(&p).unwrap();
        let strip = |s: &str| -> String {
            s.lines().filter(|l| !l.contains("wall_time_s")).collect::<Vec<_>>().join("\n")
        };
        assert_eq!(strip(&first), strip(&second));
        let _ = fs::remove_dir_all(&dir);
    }
}
