//! Experiment reports: a `name,value` CSV and a JSON document carrying the
//! same numbers, plus a separate timing file so that the reports themselves
//! stay byte-identical between runs.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    /// Relative to the output directory when it lies inside it.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    pub version: String,
    pub config: Vec<(String, String)>,
    pub inputs: Vec<InputDigest>,
    pub metrics: Vec<(String, f64)>,
    pub artifacts: Vec<Artifact>,
    pub assertions: Vec<(String, bool)>,
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WrittenReport {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub timing: PathBuf,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut f = fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f
            .read(&mut buf)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

/// 17 significant digits.
pub fn machine_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// 4 significant digits, fixed notation where that stays readable. Counts
/// print as integers.
pub fn human_number(v: f64) -> String {
    if !v.is_finite() || (v.fract() == 0.0 && v.abs() < 1e15) {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if (-3..6).contains(&mag) {
        let decimals = (3 - mag).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.3e}")
    }
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: Vec<(String, String)>) -> Self {
        ExperimentReport {
            experiment: experiment.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config,
            inputs: Vec::new(),
            metrics: Vec::new(),
            artifacts: Vec::new(),
            assertions: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push((name.into(), value));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn artifact(&mut self, name: &str, path: &Path, out_dir: &Path) -> CliResult<()> {
        let sha256 = sha256_file(path)?;
        let shown = path.strip_prefix(out_dir).unwrap_or(path);
        self.artifacts.push(Artifact {
            name: name.to_owned(),
            path: shown.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn assertion(&mut self, name: &str, held: bool) {
        self.assertions.push((name.to_owned(), held));
    }

    pub fn failed_assertions(&self) -> Vec<&str> {
        self.assertions
            .iter()
            .filter(|(_, ok)| !ok)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,value\n");
        for (name, value) in &self.metrics {
            let _ = writeln!(out, "{name},{}", machine_number(*value));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let config: Map<String, Value> = self
            .config
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        let metrics: Vec<Value> = self
            .metrics
            .iter()
            .map(|(n, v)| json!({ "name": n, "value": v }))
            .collect();
        let inputs: Vec<Value> = self
            .inputs
            .iter()
            .map(|i| json!({ "path": i.path, "sha256": i.sha256 }))
            .collect();
        let artifacts: Vec<Value> = self
            .artifacts
            .iter()
            .map(|a| json!({ "name": a.name, "path": a.path, "sha256": a.sha256 }))
            .collect();
        let assertions: Vec<Value> = self
            .assertions
            .iter()
            .map(|(n, ok)| json!({ "name": n, "held": ok }))
            .collect();
        json!({
            "experiment": self.experiment,
            "version": self.version,
            "config": config,
            "inputs": inputs,
            "metrics": metrics,
            "artifacts": artifacts,
            "assertions": assertions,
        })
    }

    pub fn human_summary(&self) -> String {
        let mut out = format!("{} ({})\n", self.experiment, self.version);
        for (name, value) in &self.metrics {
            let _ = writeln!(out, "  {name:<40} {}", human_number(*value));
        }
        for (name, ok) in &self.assertions {
            let _ = writeln!(out, "  {name:<40} {}", if *ok { "held" } else { "VIOLATED" });
        }
        for a in &self.artifacts {
            let _ = writeln!(out, "  wrote {}", a.path);
        }
        out
    }

    /// Writes `<experiment>.metrics.csv`, `<experiment>.report.json` and
    /// `<experiment>.timing.txt` into `out_dir`.
    pub fn write(&self, out_dir: &Path) -> CliResult<WrittenReport> {
        fs::create_dir_all(out_dir).map_err(|e| CliError::Data(format!("{}: {e}", out_dir.display())))?;
        let csv = out_dir.join(format!("{}.metrics.csv", self.experiment));
        let json_path = out_dir.join(format!("{}.report.json", self.experiment));
        let timing = out_dir.join(format!("{}.timing.txt", self.experiment));
        let mut doc = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
        doc.push('\n');
        for (path, text) in [
            (&csv, self.to_csv()),
            (&json_path, doc),
            (&timing, format!("wall_clock_seconds={}\n", self.wall_clock_seconds)),
        ] {
            fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        }
        Ok(WrittenReport {
            csv,
            json: json_path,
            timing,
        })
    }
}

/// `(name, value)` rows of a metrics CSV.
pub fn parse_csv(text: &str) -> CliResult<Vec<(String, f64)>> {
    let mut lines = text.lines();
    if lines.next() != Some("name,value") {
        return Err(CliError::Data("metrics table lacks its header".into()));
    }
    lines
        .map(|l| {
            let (n, v) = l
                .rsplit_once(',')
                .ok_or_else(|| CliError::Data(format!("bad metrics row {l:?}")))?;
            let v = v
                .parse()
                .map_err(|_| CliError::Data(format!("bad metric value {v:?}")))?;
            Ok((n.to_owned(), v))
        })
        .collect()
}

/// `(name, value)` pairs of the `metrics` array in a JSON report.
pub fn json_metrics(doc: &Value) -> CliResult<Vec<(String, f64)>> {
    doc["metrics"]
        .as_array()
        .ok_or_else(|| CliError::Data("report has no metrics array".into()))?
        .iter()
        .map(|m| match (m["name"].as_str(), m["value"].as_f64()) {
            (Some(n), Some(v)) => Ok((n.to_owned(), v)),
            _ => Err(CliError::Data(format!("bad metric entry {m}"))),
        })
        .collect()
}
