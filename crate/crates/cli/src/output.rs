//! Output directory, run manifest and the small CSV files of the CLI.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use phasebal_core::model::{LoadProfile, PhaseAssignment, PhaseSet, SwapEvent};
use phasebal_core::simulate::Metrics;
use phasebal_core::CoreError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration; exit code 2.
    Usage(String),
    /// Bad data, infeasible model, failed solve or I/O; exit code 1.
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Domain(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<phasebal_milp::MilpError> for CliError {
    fn from(e: phasebal_milp::MilpError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn domain(msg: impl Into<String>) -> CliError {
    CliError::Domain(msg.into())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(|e| domain(format!("{}: {e}", path.display())))?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        })
    }
}

/// Everything needed to repeat a run: the resolved settings (also written as
/// `config.toml`), input digests and output digests. Holds no timestamps or
/// absolute output paths, so reruns reproduce it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub settings: toml::Table,
    pub timings: bool,
    pub inputs: Vec<FileDigest>,
    /// Output files relative to the output directory, manifest excluded.
    pub outputs: Vec<FileDigest>,
    pub rerun: String,
}

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.toml";

/// Output directory that tracks what was written to it.
pub struct OutDir {
    root: PathBuf,
    written: BTreeMap<String, PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| domain(format!("{}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Path of `name` inside the directory, registered as an output.
    pub fn file(&mut self, name: &str) -> CliResult<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.written.insert(name.to_string(), path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let path = self.file(name)?;
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    /// Writes `config.toml` and `manifest.json`; call last.
    pub fn finish(mut self, command: &str, settings: toml::Table, timings: bool, inputs: Vec<FileDigest>) -> CliResult<PathBuf> {
        let config = self.file(CONFIG)?;
        let text = toml::to_string(&settings).map_err(|e| domain(format!("config.toml: {e}")))?;
        fs::write(&config, text)?;
        let outputs = self
            .written
            .iter()
            .map(|(name, path)| {
                FileDigest::of(path).map(|d| FileDigest {
                    path: name.clone(),
                    sha256: d.sha256,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let timings_flag = if timings { " --timings" } else { "" };
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            settings,
            timings,
            inputs,
            outputs,
            rerun: format!("phasebal {command} --config {CONFIG} --out <dir>{timings_flag}"),
        };
        let path = self.root.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Method label, per-snapshot metrics and (with `--timings`) solve times;
/// the input format of `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub method: String,
    pub metrics: Vec<Metrics>,
    #[serde(default)]
    pub runtimes: Vec<f64>,
}

pub fn write_assignment(path: &Path, ids: &[String], a: &PhaseAssignment) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["load_id", "phases"])?;
    for (i, id) in ids.iter().enumerate() {
        w.write_record([id.as_str(), &a.phases_of(i).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `load_id,phases` rows, in any order, for the loads of `profile`.
pub fn read_assignment(path: &Path, profile: &LoadProfile) -> CliResult<PhaseAssignment> {
    let err = |m: String| domain(format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let mut by_id: BTreeMap<String, PhaseSet> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        if rec.len() != 2 {
            return Err(err(format!("expected load_id,phases, got {} fields", rec.len())));
        }
        let set: PhaseSet = rec[1].parse().map_err(|e: CoreError| err(e.to_string()))?;
        if by_id.insert(rec[0].to_string(), set).is_some() {
            return Err(err(format!("load {} listed twice", &rec[0])));
        }
    }
    let sets = profile
        .load_ids()
        .iter()
        .map(|id| by_id.get(id).copied().ok_or_else(|| err(format!("no phases for load {id}"))))
        .collect::<CliResult<Vec<_>>>()?;
    let a = PhaseAssignment::from_sets(&sets);
    a.validate(profile.phase_width())?;
    Ok(a)
}

/// `snapshot,phase_a,phase_b,phase_c,omega,nu,upsilon`; an undefined
/// percentage is left empty.
pub fn write_metrics(path: &Path, first: usize, metrics: &[Metrics]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["snapshot", "phase_a", "phase_b", "phase_c", "omega", "nu", "upsilon"])?;
    for (k, m) in metrics.iter().enumerate() {
        w.write_record([
            (first + k).to_string(),
            m.phase_sums[0].to_string(),
            m.phase_sums[1].to_string(),
            m.phase_sums[2].to_string(),
            m.omega.to_string(),
            m.nu.to_string(),
            m.upsilon.map_or(String::new(), |u| u.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `snapshot,load_id,from,to`, with `snapshot` an index into the data.
pub fn write_swaps(path: &Path, start: usize, events: &[SwapEvent]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["snapshot", "load_id", "from", "to"])?;
    for ev in events {
        w.write_record([
            (start + ev.snapshot - 1).to_string(),
            ev.load_id.clone(),
            ev.from.to_string(),
            ev.to.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Short decimal form for terminal output: six decimals, trailing zeros
/// dropped, `0` for values within rounding of zero.
pub fn kw(x: f64) -> String {
    let s = format!("{:.6}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" || s.is_empty() {
        "0".into()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_numbers() {
        assert_eq!(kw(0.0), "0");
        assert_eq!(kw(-1e-12), "0");
        assert_eq!(kw(4.0), "4");
        assert_eq!(kw(2.5), "2.5");
        assert_eq!(kw(1.0 / 3.0), "0.333333");
    }

    #[test]
    fn assignment_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let p = LoadProfile::from_snapshot(&[1.0, 2.0, 3.0]).unwrap();
        let a = PhaseAssignment::from_sets(&["B".parse().unwrap(), "A".parse().unwrap(), "C".parse().unwrap()]);
        write_assignment(&path, p.load_ids(), &a).unwrap();
        assert_eq!(read_assignment(&path, &p).unwrap(), a);
    }
}
