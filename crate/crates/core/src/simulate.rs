//! Realized-demand metrics and the rolling-horizon driver.
//!
//! Each epoch forecasts the next `t2` snapshots, wraps the forecast in
//! relative boxes, solves the look-ahead problem from the assignment in
//! force, implements the first `stride` snapshots of the plan against
//! realized demand and hands the last implemented assignment to the next
//! epoch.

use std::time::Instant;

use phasebal_milp::SolveConfig;
use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Result};
use crate::ingest::forecast_box;
use crate::model::{BalancePlan, LoadProfile, LookAheadConfig, PhaseAssignment, SwapEvent, UncertaintySet};
use crate::solve::{solve_lookahead, SolveStats};

/// Realized balance of one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub phase_sums: [f64; 3],
    /// Largest difference between two phases (kW).
    pub omega: f64,
    /// Largest deviation of a phase from a third of the total (kW).
    pub nu: f64,
    /// `nu` relative to a third of the total; `None` when total demand is 0.
    pub upsilon: Option<f64>,
}

/// Metrics of `assignment` under demand `d`. A load occupying several phases
/// draws its full demand on each.
pub fn evaluate_assignment(assignment: &PhaseAssignment, d: &[f64], widths: &[u8]) -> Result<Metrics> {
    if d.len() != widths.len() {
        return Err(dim(format!("{} demands for {} widths", d.len(), widths.len())));
    }
    let s = assignment.phase_sums(d)?;
    let total: f64 = d.iter().zip(widths).map(|(&x, &w)| x * w as f64).sum();
    let omega = (s[0] - s[1]).abs().max((s[1] - s[2]).abs()).max((s[0] - s[2]).abs());
    let nu = s.iter().map(|&p| (p - total / 3.0).abs()).fold(0.0, f64::max);
    let upsilon = (total > 0.0).then(|| s.iter().map(|&p| (1.0 - 3.0 * p / total).abs()).fold(0.0, f64::max));
    Ok(Metrics {
        phase_sums: s,
        omega,
        nu,
        upsilon,
    })
}

/// Metrics of a fixed assignment over snapshots `range` of `profile`.
pub fn evaluate_static(
    assignment: &PhaseAssignment,
    profile: &LoadProfile,
    range: std::ops::Range<usize>,
) -> Result<Vec<Metrics>> {
    if range.end > profile.n_snapshots() {
        return Err(dim(format!("range ends at {} of {} snapshots", range.end, profile.n_snapshots())));
    }
    range
        .map(|t| evaluate_assignment(assignment, &profile.snapshot(t), profile.phase_width()))
        .collect()
}

/// Demand forecasts for snapshots `start..start + horizon`, made with the
/// realized data observed before `start`.
pub trait Forecaster {
    fn name(&self) -> String;
    fn forecast(&self, realized: &LoadProfile, start: usize, horizon: usize) -> Result<Vec<Vec<f64>>>;
}

/// Repeats the latest observed value at the same time of day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persistence {
    /// Snapshots per day.
    pub period: usize,
}

impl Forecaster for Persistence {
    fn name(&self) -> String {
        "persistence".into()
    }

    fn forecast(&self, realized: &LoadProfile, start: usize, horizon: usize) -> Result<Vec<Vec<f64>>> {
        if self.period == 0 || start < self.period {
            return Err(invalid(format!(
                "persistence needs a full day of history before snapshot {start}"
            )));
        }
        Ok((start..start + horizon)
            .map(|t| {
                let back = (t - start) / self.period + 1;
                realized.snapshot(t - back * self.period)
            })
            .collect())
    }
}

/// Mean of the observed days at the same time of day, over the last
/// `window` days before the forecast (all observed days when `None`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyMean {
    /// Snapshots per day.
    pub period: usize,
    pub window: Option<usize>,
}

impl Forecaster for DailyMean {
    fn name(&self) -> String {
        match self.window {
            Some(w) => format!("daily-mean-{w}"),
            None => "daily-mean".into(),
        }
    }

    fn forecast(&self, realized: &LoadProfile, start: usize, horizon: usize) -> Result<Vec<Vec<f64>>> {
        if self.period == 0 || start < self.period {
            return Err(invalid(format!(
                "daily mean needs a full day of history before snapshot {start}"
            )));
        }
        let n = realized.n_loads();
        Ok((start..start + horizon)
            .map(|t| {
                let slot = t % self.period;
                // Day index of the latest observation of this slot before `start`.
                let last = (start - 1 - slot) / self.period;
                let first = self.window.map_or(0, |w| (last + 1).saturating_sub(w.max(1)));
                let mut mean = vec![0.0; n];
                for d in first..=last {
                    for (i, m) in mean.iter_mut().enumerate() {
                        *m += realized.demand(i, d * self.period + slot);
                    }
                }
                let k = (last + 1 - first) as f64;
                mean.iter_mut().for_each(|m| *m /= k);
                mean
            })
            .collect())
    }
}

/// Forecast equal to the realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perfect;

impl Forecaster for Perfect {
    fn name(&self) -> String {
        "perfect".into()
    }

    fn forecast(&self, realized: &LoadProfile, start: usize, horizon: usize) -> Result<Vec<Vec<f64>>> {
        if start + horizon > realized.n_snapshots() {
            return Err(dim(format!(
                "horizon {start}..{} beyond {} snapshots",
                start + horizon,
                realized.n_snapshots()
            )));
        }
        Ok((start..start + horizon).map(|t| realized.snapshot(t)).collect())
    }
}

/// Wraps a closure `(realized, start, horizon) -> forecast`.
pub struct FnForecaster<F> {
    pub name: String,
    pub f: F,
}

impl<F> Forecaster for FnForecaster<F>
where
    F: Fn(&LoadProfile, usize, usize) -> Result<Vec<Vec<f64>>>,
{
    fn name(&self) -> String {
        self.name.clone()
    }

    fn forecast(&self, realized: &LoadProfile, start: usize, horizon: usize) -> Result<Vec<Vec<f64>>> {
        (self.f)(realized, start, horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    /// Horizon, weight, budget and the assignment in force before the first epoch.
    pub lookahead: LookAheadConfig,
    /// Relative box width per horizon snapshot; length `t2`.
    pub rho: Vec<f64>,
    pub solver: SolveConfig,
    /// Snapshots implemented per epoch; `1..=t1`.
    pub stride: usize,
    /// First decision snapshot.
    pub start: usize,
    pub epochs: usize,
    /// Absolute tolerance of the containment test.
    pub containment_tol: f64,
}

impl RollingConfig {
    /// Non-overlapping epochs (`stride = t1`).
    pub fn new(lookahead: LookAheadConfig, rho: Vec<f64>, start: usize, epochs: usize) -> Self {
        let stride = lookahead.t1;
        Self {
            lookahead,
            rho,
            solver: SolveConfig::default(),
            stride,
            start,
            epochs,
            containment_tol: 1e-9,
        }
    }

    pub fn validate(&self, realized: &LoadProfile) -> Result<()> {
        let la = &self.lookahead;
        la.validate(realized.phase_width())?;
        if self.rho.len() != la.t2 {
            return Err(dim(format!("{} rho values for a horizon of {}", self.rho.len(), la.t2)));
        }
        if self.stride == 0 || self.stride > la.t1 {
            return Err(invalid(format!("stride {} outside 1..={}", self.stride, la.t1)));
        }
        if self.epochs == 0 {
            return Err(invalid("no epochs to run"));
        }
        let need = self.start + (self.epochs - 1) * self.stride + la.t2;
        if need > realized.n_snapshots() {
            return Err(invalid(format!(
                "{} epochs from snapshot {} need {need} snapshots, data has {}",
                self.epochs,
                self.start,
                realized.n_snapshots()
            )));
        }
        self.solver.validate()?;
        Ok(())
    }
}

/// One implemented snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    /// Index into the realized profile.
    pub snapshot: usize,
    pub demand: Vec<f64>,
    pub metrics: Metrics,
    /// Realized demand inside the snapshot's uncertainty set.
    pub contained: bool,
    /// The epoch's guaranteed bound on `nu` for contained snapshots.
    pub certified_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch_index: usize,
    pub start_snapshot: usize,
    pub initial_assignment: PhaseAssignment,
    pub plan: BalancePlan,
    pub stats: SolveStats,
    /// Swaps among the implemented snapshots.
    pub implemented_swaps: Vec<SwapEvent>,
    pub snapshots: Vec<SnapshotRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

impl EpochRecord {
    /// Last implemented assignment.
    pub fn terminal(&self) -> &PhaseAssignment {
        &self.plan.assignments[self.snapshots.len() - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    pub config: RollingConfig,
    pub forecaster: String,
    pub load_ids: Vec<String>,
    pub epochs: Vec<EpochRecord>,
    pub total_swaps: usize,
    /// Set when an epoch failed; `epochs` then holds the completed ones.
    pub halted: Option<String>,
}

impl SimulationRun {
    pub fn snapshots(&self) -> impl Iterator<Item = &SnapshotRecord> {
        self.epochs.iter().flat_map(|e| e.snapshots.iter())
    }

    pub fn metrics(&self) -> Vec<Metrics> {
        self.snapshots().map(|s| s.metrics).collect()
    }

    /// Implemented assignment at every simulated snapshot.
    pub fn timeline(&self) -> Vec<(usize, &PhaseAssignment)> {
        self.epochs
            .iter()
            .flat_map(|e| e.snapshots.iter().zip(&e.plan.assignments).map(|(s, a)| (s.snapshot, a)))
            .collect()
    }

    /// Drops wall-clock times so that records of identical runs compare equal.
    pub fn without_timings(mut self) -> Self {
        for e in &mut self.epochs {
            e.wall_seconds = None;
            e.stats.solve_seconds = 0.0;
        }
        self
    }
}

/// Runs the rolling horizon over `realized`. A failing epoch ends the run
/// with `halted` set; configuration errors are returned directly.
pub fn run_rolling(realized: &LoadProfile, forecaster: &dyn Forecaster, config: &RollingConfig) -> Result<SimulationRun> {
    config.validate(realized)?;
    let la = &config.lookahead;
    let mut current = la.initial_assignment.clone();
    let mut run = SimulationRun {
        config: config.clone(),
        forecaster: forecaster.name(),
        load_ids: realized.load_ids().to_vec(),
        epochs: Vec::with_capacity(config.epochs),
        total_swaps: 0,
        halted: None,
    };
    for e in 0..config.epochs {
        let start = config.start + e * config.stride;
        match run_epoch(realized, forecaster, config, e, start, &current) {
            Ok(record) => {
                debug_assert!(record.implemented_swaps.len() <= la.swap_budget);
                run.total_swaps += record.implemented_swaps.len();
                current = record.terminal().clone();
                run.epochs.push(record);
            }
            Err(err) => {
                run.halted = Some(format!("epoch {e} (snapshot {start}): {err}"));
                break;
            }
        }
    }
    Ok(run)
}

fn run_epoch(
    realized: &LoadProfile,
    forecaster: &dyn Forecaster,
    config: &RollingConfig,
    epoch: usize,
    start: usize,
    current: &PhaseAssignment,
) -> Result<EpochRecord> {
    let clock = Instant::now();
    let mut la = config.lookahead.clone();
    la.initial_assignment = current.clone();
    let forecast = forecaster.forecast(realized, start, la.t2)?;
    if forecast.len() != la.t2 || forecast.iter().any(|f| f.len() != realized.n_loads()) {
        return Err(dim(format!(
            "forecaster returned {} snapshots, expected {} of {} loads",
            forecast.len(),
            la.t2,
            realized.n_loads()
        )));
    }
    let boxes = forecast_box(&forecast, &config.rho)?;
    let sets: Vec<UncertaintySet> = boxes.iter().cloned().map(Into::into).collect();
    let window = realized.window(start, start + la.t2)?;
    let solved = solve_lookahead(&window, &sets, &la, &config.solver)?;
    let plan = solved.plan;

    let mut snapshots = Vec::with_capacity(config.stride);
    for k in 0..config.stride {
        let d = realized.snapshot(start + k);
        let metrics = evaluate_assignment(&plan.assignments[k], &d, realized.phase_width())?;
        snapshots.push(SnapshotRecord {
            snapshot: start + k,
            contained: boxes[k].contains(&d, config.containment_tol),
            certified_u: plan.u,
            demand: d,
            metrics,
        });
    }
    let implemented_swaps = plan
        .swap_events
        .iter()
        .filter(|ev| ev.snapshot <= config.stride)
        .cloned()
        .collect();
    Ok(EpochRecord {
        epoch_index: epoch,
        start_snapshot: start,
        initial_assignment: current.clone(),
        plan,
        stats: solved.stats,
        implemented_swaps,
        snapshots,
        wall_seconds: Some(clock.elapsed().as_secs_f64()),
    })
}
