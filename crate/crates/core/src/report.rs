//! Summary statistics and the CSV/JSON files behind tables and plots.
//!
//! Standard deviations are population statistics (denominator N). CSV files
//! keep full precision; only [`render_table`] rounds.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CoreError, Result};
use crate::simulate::{Metrics, SimulationRun};

/// Column layout of summary CSV files.
pub const SUMMARY_COLUMNS: [&str; 5] = ["method", "metric", "max", "avg", "std"];
const STD_NOTE: &str = "# std is the population standard deviation (denominator N)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub max: f64,
    pub avg: f64,
    pub std: f64,
}

impl Stats {
    /// Combines the statistics of two disjoint samples.
    pub fn merge(&self, other: &Stats) -> Stats {
        let n = self.n + other.n;
        let (na, nb) = (self.n as f64, other.n as f64);
        let delta = other.avg - self.avg;
        let avg = self.avg + delta * nb / n as f64;
        let m2 = self.std.powi(2) * na + other.std.powi(2) * nb + delta * delta * na * nb / n as f64;
        Stats {
            n,
            max: self.max.max(other.max),
            avg,
            std: (m2 / n as f64).max(0.0).sqrt(),
        }
    }
}

/// Max, mean and population standard deviation (Welford's update).
pub fn summarize(values: &[f64]) -> Result<Stats> {
    if values.is_empty() {
        return Err(invalid("cannot summarize an empty list"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(invalid(format!("cannot summarize non-finite value {v}")));
    }
    let (mut mean, mut m2, mut max) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for (k, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
        max = max.max(x);
    }
    Ok(Stats {
        n: values.len(),
        max,
        avg: mean,
        std: (m2 / values.len() as f64).max(0.0).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    /// Between-phase difference (kW).
    pub omega: Stats,
    /// Single-phase deviation (kW).
    pub nu: Stats,
    /// Single-phase deviation (%); snapshots with zero total demand are left
    /// out, and `None` means every snapshot had zero demand.
    pub upsilon: Option<Stats>,
    /// Solve time per decision (s).
    pub runtime: Option<Stats>,
}

pub fn summarize_method(method: impl Into<String>, metrics: &[Metrics], runtimes: &[f64]) -> Result<MethodSummary> {
    let omega: Vec<f64> = metrics.iter().map(|m| m.omega).collect();
    let nu: Vec<f64> = metrics.iter().map(|m| m.nu).collect();
    let ups: Vec<f64> = metrics.iter().filter_map(|m| m.upsilon).map(|u| 100.0 * u).collect();
    Ok(MethodSummary {
        method: method.into(),
        omega: summarize(&omega)?,
        nu: summarize(&nu)?,
        upsilon: if ups.is_empty() { None } else { Some(summarize(&ups)?) },
        runtime: if runtimes.is_empty() { None } else { Some(summarize(runtimes)?) },
    })
}

impl MethodSummary {
    /// `(metric, stats)` rows in CSV order.
    pub fn rows(&self) -> Vec<(&'static str, Stats)> {
        let mut rows = vec![("omega_kw", self.omega), ("nu_kw", self.nu)];
        if let Some(u) = self.upsilon {
            rows.push(("upsilon_pct", u));
        }
        if let Some(r) = self.runtime {
            rows.push(("runtime_s", r));
        }
        rows
    }
}

fn csv_io(path: &Path, e: csv::Error) -> CoreError {
    CoreError::Csv {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I, note: Option<&str>) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut out = Vec::new();
    if let Some(note) = note {
        out.extend_from_slice(note.as_bytes());
        out.push(b'\n');
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header).map_err(|e| csv_io(path, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| csv_io(path, e))?;
        }
        w.flush()?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes `method,metric,max,avg,std` rows; `n` is not part of the layout.
pub fn write_summary_csv(path: impl AsRef<Path>, summaries: &[MethodSummary]) -> Result<()> {
    let rows = summaries.iter().flat_map(|s| {
        s.rows().into_iter().map(move |(metric, st)| {
            vec![s.method.clone(), metric.to_string(), st.max.to_string(), st.avg.to_string(), st.std.to_string()]
        })
    });
    write_rows(path.as_ref(), &SUMMARY_COLUMNS, rows, Some(STD_NOTE))
}

/// One parsed summary row.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub metric: String,
    pub max: f64,
    pub avg: f64,
    pub std: f64,
}

pub fn read_summary_csv(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    let header = rdr.headers().map_err(|e| csv_io(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != SUMMARY_COLUMNS {
        return Err(invalid(format!("{}: unexpected header {:?}", path.display(), header)));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_io(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let num = |k: usize| -> Result<f64> {
            rec[k].parse().map_err(|_| CoreError::Csv {
                path: path.to_path_buf(),
                line,
                message: format!("{} {:?} is not a number", SUMMARY_COLUMNS[k], &rec[k]),
            })
        };
        out.push(SummaryRow {
            method: rec[0].to_string(),
            metric: rec[1].to_string(),
            max: num(2)?,
            avg: num(3)?,
            std: num(4)?,
        });
    }
    Ok(out)
}

/// Plain-text table with two decimals.
pub fn render_table(summaries: &[MethodSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<14} {:<12} {:>10} {:>10} {:>10}", "method", "metric", "max", "avg", "std");
    for m in summaries {
        for (metric, st) in m.rows() {
            let _ = writeln!(s, "{:<14} {:<12} {:>10.2} {:>10.2} {:>10.2}", m.method, metric, st.max, st.avg, st.std);
        }
    }
    s
}

/// Values sorted in descending order; equal values keep their input order.
pub fn sorted_curve(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `method,rank,kw` rows, rank starting at 1.
pub fn write_curves_csv(path: impl AsRef<Path>, curves: &[(String, Vec<f64>)]) -> Result<()> {
    let rows = curves.iter().flat_map(|(m, c)| {
        sorted_curve(c)
            .into_iter()
            .enumerate()
            .map(move |(k, v)| vec![m.clone(), (k + 1).to_string(), v.to_string()])
    });
    write_rows(path.as_ref(), &["method", "rank", "kw"], rows, None)
}

/// Implemented swaps per load, in load order.
pub fn swap_histogram(run: &SimulationRun) -> Vec<(String, usize)> {
    let mut counts: Vec<(String, usize)> = run.load_ids.iter().map(|id| (id.clone(), 0)).collect();
    for e in &run.epochs {
        for ev in &e.implemented_swaps {
            if let Some(c) = counts.iter_mut().find(|(id, _)| *id == ev.load_id) {
                c.1 += 1;
            }
        }
    }
    counts
}

pub fn write_histogram_csv(path: impl AsRef<Path>, histogram: &[(String, usize)]) -> Result<()> {
    let rows = histogram.iter().map(|(id, c)| vec![id.clone(), c.to_string()]);
    write_rows(path.as_ref(), &["load_id", "swaps"], rows, None)
}

/// `snapshot,load_id,phases` rows for every implemented snapshot.
pub fn write_timeline_csv(path: impl AsRef<Path>, run: &SimulationRun) -> Result<()> {
    let rows = run.timeline().into_iter().flat_map(|(t, a)| {
        run.load_ids
            .iter()
            .enumerate()
            .map(move |(i, id)| vec![t.to_string(), id.clone(), a.phases_of(i).to_string()])
    });
    write_rows(path.as_ref(), &["snapshot", "load_id", "phases"], rows, None)
}

/// Per-snapshot realized metrics of a run.
pub fn write_snapshot_csv(path: impl AsRef<Path>, run: &SimulationRun) -> Result<()> {
    let rows = run.snapshots().map(|s| {
        let m = &s.metrics;
        vec![
            s.snapshot.to_string(),
            m.phase_sums[0].to_string(),
            m.phase_sums[1].to_string(),
            m.phase_sums[2].to_string(),
            m.omega.to_string(),
            m.nu.to_string(),
            m.upsilon.map_or(String::new(), |u| u.to_string()),
            s.contained.to_string(),
            s.certified_u.to_string(),
        ]
    });
    let header = ["snapshot", "phase_a", "phase_b", "phase_c", "omega", "nu", "upsilon", "contained", "certified_u"];
    write_rows(path.as_ref(), &header, rows, None)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
