//! CSV demand data, seeded scaling and uncertainty-set estimation.
//!
//! Wide layout: a `timestamp` column followed by one column per load.
//! Long layout: `load_id,timestamp,kw` rows in any order.
//! Timestamps are hourly, gap-free and start at midnight.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{Duration, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{dim, invalid, CoreError, Result};
use crate::model::{BoxUncertaintySet, LoadProfile};

pub const DEFAULT_SCALE_RANGE: (f64, f64) = (0.8, 1.2);
pub const DEFAULT_RHO: (f64, f64) = (0.10, 0.30);

const TIMESTAMP_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];
const WRITE_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsvLayout {
    Wide,
    Long,
}

impl fmt::Display for CsvLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CsvLayout::Wide => "wide",
            CsvLayout::Long => "long",
        })
    }
}

impl FromStr for CsvLayout {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wide" => Ok(CsvLayout::Wide),
            "long" => Ok(CsvLayout::Long),
            _ => Err(invalid(format!("unknown csv layout {s:?} (expected wide or long)"))),
        }
    }
}

/// Provenance written next to a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: Option<u64>,
    pub scale_range: Option<(f64, f64)>,
    pub source_note: String,
    /// SHA-256 of the demand matrix, see [`checksum`].
    pub checksum: String,
}

/// Demand over whole days, with a start time and snapshot length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadDataset {
    pub profile: LoadProfile,
    pub start: NaiveDateTime,
    /// Hours per snapshot; divides 24.
    pub snapshot_hours: u32,
    pub meta: DatasetMeta,
}

impl LoadDataset {
    pub fn new(profile: LoadProfile, start: NaiveDateTime, snapshot_hours: u32, source_note: impl Into<String>) -> Result<Self> {
        if snapshot_hours == 0 || 24 % snapshot_hours != 0 {
            return Err(invalid(format!("snapshot length {snapshot_hours} h does not divide a day")));
        }
        if start.time().num_seconds_from_midnight() != 0 {
            return Err(invalid(format!("dataset starts at {start}, not at midnight")));
        }
        let per_day = (24 / snapshot_hours) as usize;
        if profile.n_snapshots() % per_day != 0 {
            return Err(invalid(format!(
                "{} snapshots is not a whole number of {per_day}-snapshot days",
                profile.n_snapshots()
            )));
        }
        let checksum = checksum(&profile);
        Ok(Self {
            profile,
            start,
            snapshot_hours,
            meta: DatasetMeta {
                seed: None,
                scale_range: None,
                source_note: source_note.into(),
                checksum,
            },
        })
    }

    pub fn snapshots_per_day(&self) -> usize {
        (24 / self.snapshot_hours) as usize
    }

    pub fn n_days(&self) -> usize {
        self.profile.n_snapshots() / self.snapshots_per_day()
    }

    /// Snapshot index of each midnight, including the end of the last day.
    pub fn day_boundaries(&self) -> Vec<usize> {
        (0..=self.n_days()).map(|d| d * self.snapshots_per_day()).collect()
    }

    pub fn timestamp(&self, t: usize) -> NaiveDateTime {
        self.start + Duration::hours(t as i64 * self.snapshot_hours as i64)
    }

    fn with_profile(&self, profile: LoadProfile) -> Self {
        let mut out = self.clone();
        out.meta.checksum = checksum(&profile);
        out.profile = profile;
        out
    }
}

/// SHA-256 over the matrix shape and the little-endian bits of every value,
/// load-major.
pub fn checksum(profile: &LoadProfile) -> String {
    let mut h = Sha256::new();
    h.update((profile.n_loads() as u64).to_le_bytes());
    h.update((profile.n_snapshots() as u64).to_le_bytes());
    for i in 0..profile.n_loads() {
        for &v in profile.series(i) {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    format!("{:x}", h.finalize())
}

fn csv_err(path: &Path, line: usize, message: impl Into<String>) -> CoreError {
    CoreError::Csv {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s.trim(), f).ok())
}

fn parse_kw(path: &Path, line: usize, field: &str, what: &str) -> Result<f64> {
    let s = field.trim();
    if s.is_empty() {
        return Err(csv_err(path, line, format!("missing value for {what}")));
    }
    let v: f64 = s
        .parse()
        .map_err(|_| csv_err(path, line, format!("{what}: {s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(csv_err(path, line, format!("{what}: {s} is not finite")));
    }
    if v < 0.0 {
        return Err(csv_err(path, line, format!("{what}: negative demand {s}")));
    }
    Ok(v)
}

/// Checks that `(line, timestamp)` pairs are hourly, gap-free and start at
/// midnight.
fn check_hourly(path: &Path, stamps: &[(usize, NaiveDateTime)]) -> Result<NaiveDateTime> {
    let Some(&(line, first)) = stamps.first() else {
        return Err(csv_err(path, 1, "no data rows"));
    };
    if first.time().num_seconds_from_midnight() != 0 {
        return Err(csv_err(path, line, format!("data starts at {first}, not at midnight")));
    }
    for w in stamps.windows(2) {
        let ((_, a), (line, b)) = (w[0], w[1]);
        if b - a != Duration::hours(1) {
            return Err(csv_err(path, line, format!("timestamp {b} does not follow {a} by one hour")));
        }
    }
    if stamps.len() % 24 != 0 {
        return Err(csv_err(
            path,
            stamps.last().unwrap().0,
            format!("{} hourly rows is not a whole number of days", stamps.len()),
        ));
    }
    Ok(first)
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, 0, e.to_string()))
}

fn record_line(r: &csv::StringRecord) -> usize {
    r.position().map_or(0, |p| p.line() as usize)
}

/// Reads a dataset of single-phase loads.
pub fn read_csv(path: impl AsRef<Path>, layout: CsvLayout) -> Result<LoadDataset> {
    let path = path.as_ref();
    let note = format!("read from {}", path.display());
    match layout {
        CsvLayout::Wide => read_wide(path, note),
        CsvLayout::Long => read_long(path, note),
    }
}

fn read_wide(path: &Path, note: String) -> Result<LoadDataset> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_err(path, 1, e.to_string()))?.clone();
    if header.len() < 2 {
        return Err(csv_err(path, 1, "header needs a timestamp column and at least one load"));
    }
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut series = vec![Vec::new(); ids.len()];
    let mut stamps = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = record_line(&rec);
        if rec.len() != header.len() {
            return Err(csv_err(path, line, format!("{} fields, header has {}", rec.len(), header.len())));
        }
        let ts = parse_timestamp(&rec[0]).ok_or_else(|| csv_err(path, line, format!("bad timestamp {:?}", &rec[0])))?;
        stamps.push((line, ts));
        for (j, s) in series.iter_mut().enumerate() {
            s.push(parse_kw(path, line, &rec[j + 1], &format!("load {:?}", ids[j]))?);
        }
    }
    let start = check_hourly(path, &stamps)?;
    let n = ids.len();
    let profile = LoadProfile::new(ids, series, vec![1; n])?;
    LoadDataset::new(profile, start, 1, note)
}

fn read_long(path: &Path, note: String) -> Result<LoadDataset> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_err(path, 1, e.to_string()))?.clone();
    if header.len() != 3 {
        return Err(csv_err(path, 1, "long layout needs load_id,timestamp,kw columns"));
    }
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut cells: Vec<HashMap<NaiveDateTime, (usize, f64)>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = record_line(&rec);
        if rec.len() != 3 {
            return Err(csv_err(path, line, format!("{} fields, expected 3", rec.len())));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(csv_err(path, line, "empty load id"));
        }
        let ts = parse_timestamp(&rec[1]).ok_or_else(|| csv_err(path, line, format!("bad timestamp {:?}", &rec[1])))?;
        let v = parse_kw(path, line, &rec[2], &format!("load {id:?}"))?;
        let k = *index.entry(id.clone()).or_insert_with(|| {
            ids.push(id.clone());
            cells.push(HashMap::new());
            ids.len() - 1
        });
        if let Some((prev, _)) = cells[k].insert(ts, (line, v)) {
            return Err(csv_err(path, line, format!("duplicate entry for load {id:?} at {ts} (first on line {prev})")));
        }
    }
    if ids.is_empty() {
        return Err(csv_err(path, 1, "no data rows"));
    }
    // The first load defines the time axis; every other load must match it.
    let mut stamps: Vec<(usize, NaiveDateTime)> = cells[0].iter().map(|(&ts, &(line, _))| (line, ts)).collect();
    stamps.sort_by_key(|&(_, ts)| ts);
    let start = check_hourly(path, &stamps)?;
    let mut series = Vec::with_capacity(ids.len());
    for (k, id) in ids.iter().enumerate() {
        if cells[k].len() != stamps.len() {
            let line = cells[k].values().map(|&(l, _)| l).max().unwrap_or(0);
            return Err(csv_err(
                path,
                line,
                format!("load {id:?} has {} rows, load {:?} has {}", cells[k].len(), ids[0], stamps.len()),
            ));
        }
        let mut s = Vec::with_capacity(stamps.len());
        for &(_, ts) in &stamps {
            match cells[k].get(&ts) {
                Some(&(_, v)) => s.push(v),
                None => {
                    let line = cells[k].values().map(|&(l, _)| l).min().unwrap_or(0);
                    return Err(csv_err(path, line, format!("load {id:?} has no value at {ts}")));
                }
            }
        }
        series.push(s);
    }
    let n = ids.len();
    let profile = LoadProfile::new(ids, series, vec![1; n])?;
    LoadDataset::new(profile, start, 1, note)
}

/// Writes `dataset` losslessly; values use the shortest exact decimal form.
pub fn write_csv(dataset: &LoadDataset, path: impl AsRef<Path>, layout: CsvLayout) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, 0, e.to_string()))?;
    let p = &dataset.profile;
    let io = |e: csv::Error| csv_err(path, 0, e.to_string());
    match layout {
        CsvLayout::Wide => {
            let mut header = vec!["timestamp".to_string()];
            header.extend(p.load_ids().iter().cloned());
            w.write_record(&header).map_err(io)?;
            for t in 0..p.n_snapshots() {
                let mut row = vec![dataset.timestamp(t).format(WRITE_FORMAT).to_string()];
                row.extend((0..p.n_loads()).map(|i| p.demand(i, t).to_string()));
                w.write_record(&row).map_err(io)?;
            }
        }
        CsvLayout::Long => {
            w.write_record(["load_id", "timestamp", "kw"]).map_err(io)?;
            for i in 0..p.n_loads() {
                for t in 0..p.n_snapshots() {
                    let ts = dataset.timestamp(t).format(WRITE_FORMAT).to_string();
                    w.write_record([p.load_ids()[i].as_str(), &ts, &p.demand(i, t).to_string()])
                        .map_err(io)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Sidecar path for a dataset file: `<path>.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn write_meta(dataset: &LoadDataset, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&dataset.meta)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Multiplies each load's series by a factor drawn uniformly from
/// `scale_range`, one draw per load in load order.
pub fn random_scale(dataset: &LoadDataset, seed: u64, scale_range: (f64, f64)) -> Result<LoadDataset> {
    let (lo, hi) = scale_range;
    if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
        return Err(invalid(format!("scale range [{lo}, {hi}] needs 0 < lo <= hi")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors: Vec<f64> = (0..dataset.profile.n_loads())
        .map(|_| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
        .collect();
    let profile = dataset.profile.map(|i, v| factors[i] * v)?;
    let mut out = dataset.with_profile(profile);
    out.meta.seed = Some(seed);
    out.meta.scale_range = Some(scale_range);
    Ok(out)
}

/// Averages every `factor` consecutive snapshots, e.g. hourly to two-hourly.
pub fn aggregate(dataset: &LoadDataset, factor: usize) -> Result<LoadDataset> {
    if factor == 0 || dataset.snapshots_per_day() % factor != 0 {
        return Err(invalid(format!(
            "cannot group {} snapshots per day by {factor}",
            dataset.snapshots_per_day()
        )));
    }
    let p = &dataset.profile;
    let series = (0..p.n_loads())
        .map(|i| p.series(i).chunks(factor).map(|c| c.iter().sum::<f64>() / factor as f64).collect())
        .collect();
    let profile = LoadProfile::new(p.load_ids().to_vec(), series, p.phase_width().to_vec())?;
    let mut out = dataset.with_profile(profile);
    out.snapshot_hours *= factor as u32;
    Ok(out)
}

fn box_from_samples(n: usize, samples: &[Vec<f64>]) -> Result<BoxUncertaintySet> {
    let k = samples.len() as f64;
    let center: Vec<f64> = (0..n).map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / k).collect();
    let half: Vec<f64> = (0..n)
        .map(|i| samples.iter().map(|s| (s[i] - center[i]).abs()).fold(0.0, f64::max))
        .collect();
    BoxUncertaintySet::absolute(center, half)
}

/// Box from all days at one time of day: centre is the per-load mean, half
/// width the largest deviation from it. `slot` indexes snapshots within a day.
pub fn estimate_box(dataset: &LoadDataset, slot: usize) -> Result<BoxUncertaintySet> {
    let per_day = dataset.snapshots_per_day();
    if slot >= per_day {
        return Err(invalid(format!("time-of-day slot {slot} outside 0..{per_day}")));
    }
    if dataset.n_days() < 2 {
        return Err(invalid(format!("need at least 2 days of data, have {}", dataset.n_days())));
    }
    let samples: Vec<Vec<f64>> = (0..dataset.n_days())
        .map(|d| dataset.profile.snapshot(d * per_day + slot))
        .collect();
    box_from_samples(dataset.profile.n_loads(), &samples)
}

/// Box over every snapshot of the dataset.
pub fn estimate_box_all(dataset: &LoadDataset) -> Result<BoxUncertaintySet> {
    if dataset.n_days() < 2 {
        return Err(invalid(format!("need at least 2 days of data, have {}", dataset.n_days())));
    }
    let samples: Vec<Vec<f64>> = (0..dataset.profile.n_snapshots())
        .map(|t| dataset.profile.snapshot(t))
        .collect();
    box_from_samples(dataset.profile.n_loads(), &samples)
}

/// Per-load mean over every snapshot.
pub fn mean_demand(profile: &LoadProfile) -> Vec<f64> {
    let t = profile.n_snapshots() as f64;
    (0..profile.n_loads())
        .map(|i| profile.series(i).iter().sum::<f64>() / t)
        .collect()
}

/// `rho1` for the first `t1` snapshots and `rho2` for the rest of `t2`.
pub fn rho_schedule(t1: usize, t2: usize, rho1: f64, rho2: f64) -> Vec<f64> {
    (0..t2).map(|t| if t < t1 { rho1 } else { rho2 }).collect()
}

/// Relative boxes `[(1 - rho_t) f_t, (1 + rho_t) f_t]` around each forecast
/// snapshot `f_t`.
pub fn forecast_box(forecast: &[Vec<f64>], rho: &[f64]) -> Result<Vec<BoxUncertaintySet>> {
    if forecast.len() != rho.len() {
        return Err(dim(format!("{} forecast snapshots, {} rho values", forecast.len(), rho.len())));
    }
    forecast
        .iter()
        .zip(rho)
        .enumerate()
        .map(|(t, (f, &r))| {
            if let Some(v) = f.iter().find(|v| !(**v >= 0.0)) {
                return Err(invalid(format!("forecast snapshot {} has entry {v}", t + 1)));
            }
            BoxUncertaintySet::relative(f.clone(), r)
        })
        .collect()
}

/// Shape of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_loads: usize,
    pub days: usize,
    /// Share of loads following the commercial daytime shape; the rest
    /// follow the residential morning and evening shape.
    pub commercial_share: f64,
    /// Day-to-day level variation shared by all loads of a class.
    pub day_variation: f64,
    /// Independent per-load, per-hour variation.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_loads: 20,
            days: 30,
            commercial_share: 0.3,
            day_variation: 0.15,
            noise: 0.05,
            seed: 1,
        }
    }
}

fn residential(h: f64) -> f64 {
    let bump = |c: f64, w: f64| (-((h - c) / w).powi(2)).exp();
    0.35 + 0.45 * bump(7.5, 1.5) + 0.9 * bump(19.0, 2.5)
}

fn commercial(h: f64) -> f64 {
    let open = 1.0 / (1.0 + (-(h - 7.5) * 1.5).exp());
    let close = 1.0 / (1.0 + ((h - 18.5) * 1.5).exp());
    0.25 + open * close
}

fn jitter(rng: &mut ChaCha8Rng, width: f64) -> f64 {
    if width > 0.0 {
        1.0 + rng.gen_range(-width..width)
    } else {
        1.0
    }
}

/// Hourly feeder demand in which loads of one class share a daily shape and
/// daily level, so loads differ mainly by size. Apply [`random_scale`] to
/// break ties between equal-sized loads. Deterministic under `spec.seed`.
pub fn synthetic(spec: &SyntheticSpec) -> Result<LoadDataset> {
    if spec.n_loads == 0 || spec.days == 0 {
        return Err(invalid("synthetic dataset needs loads and days"));
    }
    if !(0.0..=1.0).contains(&spec.commercial_share) {
        return Err(invalid(format!("commercial share {} outside [0, 1]", spec.commercial_share)));
    }
    for (name, v) in [("day variation", spec.day_variation), ("noise", spec.noise)] {
        if !(0.0..1.0).contains(&v) {
            return Err(invalid(format!("{name} {v} outside [0, 1)")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Per-class daily levels: residential then commercial.
    let levels: Vec<[f64; 2]> = (0..spec.days)
        .map(|_| [jitter(&mut rng, spec.day_variation), jitter(&mut rng, spec.day_variation)])
        .collect();
    let n_commercial = (spec.commercial_share * spec.n_loads as f64).round() as usize;
    let mut series = Vec::with_capacity(spec.n_loads);
    for i in 0..spec.n_loads {
        let class = usize::from(i < n_commercial);
        let base = rng.gen_range(10.0..40.0);
        let mut s = Vec::with_capacity(spec.days * 24);
        for level in &levels {
            for h in 0..24 {
                let shape = if class == 1 { commercial(h as f64) } else { residential(h as f64) };
                s.push(base * level[class] * shape * jitter(&mut rng, spec.noise));
            }
        }
        series.push(s);
    }
    let ids = (0..spec.n_loads).map(|i| format!("L{:02}", i + 1)).collect();
    let profile = LoadProfile::new(ids, series, vec![1; spec.n_loads])?;
    let start = chrono::NaiveDate::from_ymd_opt(2024, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date");
    let mut out = LoadDataset::new(profile, start, 1, "synthetic suburban feeder")?;
    out.meta.seed = Some(spec.seed);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    fn wide_text(days: usize) -> String {
        let mut s = String::from("timestamp,x,y\n");
        for t in 0..24 * days {
            s += &format!("2024-03-{:02}T{:02}:00:00,{},{}\n", 1 + t / 24, t % 24, t, 2 * t + 1);
        }
        s
    }

    #[test]
    fn wide_and_long_agree() {
        let dir = tempfile::tempdir().unwrap();
        let wide = read_csv(write(dir.path(), "w.csv", &wide_text(1)), CsvLayout::Wide).unwrap();
        assert_eq!(wide.profile.n_loads(), 2);
        assert_eq!(wide.profile.n_snapshots(), 24);
        let mut long = String::from("load_id,timestamp,kw\n");
        for t in (0..24).rev() {
            long += &format!("y,2024-03-01 {t:02}:00,{}\n", 2 * t + 1);
            long += &format!("x,2024-03-01 {t:02}:00,{t}\n");
        }
        let long = read_csv(write(dir.path(), "l.csv", &long), CsvLayout::Long).unwrap();
        // Load order follows first appearance.
        assert_eq!(long.profile.load_ids(), ["y", "x"]);
        assert_eq!(long.profile.series(1), wide.profile.series(0));
        assert_eq!(long.profile.series(0), wide.profile.series(1));
    }

    #[test]
    fn rejects_bad_rows_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let base = wide_text(1);
        let cases = [
            (base.replace(",5,11\n", ",5\n"), ":7: 2 fields"),
            (base.replace(",5,11\n", ",-5,11\n"), "negative"),
            (base.replace(",5,11\n", ",,11\n"), "missing"),
            (base.replace("T05:00", "T06:00"), "one hour"),
            (base.replace("2024-03-01T00:00:00", "2024-02-29T23:00:00"), "midnight"),
        ];
        for (k, (text, needle)) in cases.iter().enumerate() {
            let err = read_csv(write(dir.path(), &format!("bad{k}.csv"), text), CsvLayout::Wide).unwrap_err();
            assert!(err.to_string().contains(needle), "{err}");
        }
        let partial: String = base.lines().take(10).map(|l| format!("{l}\n")).collect();
        let err = read_csv(write(dir.path(), "short.csv", &partial), CsvLayout::Wide).unwrap_err();
        assert!(err.to_string().contains("whole number of days"), "{err}");
    }

    #[test]
    fn round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let ds = random_scale(&synthetic(&SyntheticSpec { n_loads: 3, days: 2, ..Default::default() }).unwrap(), 9, DEFAULT_SCALE_RANGE).unwrap();
        for layout in [CsvLayout::Wide, CsvLayout::Long] {
            let p = dir.path().join(format!("{layout}.csv"));
            write_csv(&ds, &p, layout).unwrap();
            let back = read_csv(&p, layout).unwrap();
            assert_eq!(back.profile, ds.profile);
            assert_eq!(back.start, ds.start);
            assert_eq!(back.meta.checksum, ds.meta.checksum);
        }
    }

    #[test]
    fn scaling_and_boxes() {
        let ds = synthetic(&SyntheticSpec { n_loads: 4, days: 3, ..Default::default() }).unwrap();
        assert_eq!(random_scale(&ds, 5, (1.0, 1.0)).unwrap().profile, ds.profile);
        assert!(random_scale(&ds, 5, (0.0, 1.0)).is_err());

        let two = LoadProfile::from_series(vec![[vec![4.0; 24], vec![6.0; 24]].concat()]).unwrap();
        let two = LoadDataset::new(two, ds.start, 1, "").unwrap();
        let b = estimate_box(&two, 13).unwrap();
        assert_eq!((b.center()[0], b.half_width()[0]), (5.0, 1.0));
        assert!(estimate_box(&two.with_profile(two.profile.window(0, 24).unwrap()), 0).is_err());

        let boxes = forecast_box(&[vec![10.0], vec![10.0]], &[0.1, 0.0]).unwrap();
        assert!((boxes[0].lower()[0] - 9.0).abs() < 1e-12 && (boxes[0].upper()[0] - 11.0).abs() < 1e-12);
        assert_eq!(boxes[1].half_width(), [0.0]);
        assert!(forecast_box(&[vec![-1.0]], &[0.1]).is_err());

        let rho = rho_schedule(24, 48, DEFAULT_RHO.0, DEFAULT_RHO.1);
        assert!(rho[..24].iter().all(|&r| r == 0.10) && rho[24..].iter().all(|&r| r == 0.30));
    }

    #[test]
    fn aggregation_averages_pairs() {
        let ds = synthetic(&SyntheticSpec { n_loads: 2, days: 2, ..Default::default() }).unwrap();
        let agg = aggregate(&ds, 2).unwrap();
        assert_eq!(agg.snapshots_per_day(), 12);
        assert_eq!(agg.profile.n_snapshots(), 24);
        let expect = (ds.profile.demand(1, 6) + ds.profile.demand(1, 7)) / 2.0;
        assert_eq!(agg.profile.demand(1, 3), expect);
        assert!(aggregate(&ds, 5).is_err());
    }
}
