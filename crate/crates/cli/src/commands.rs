use std::path::Path;

use log::info;
use phasebal_core::formulation::{build_deterministic, build_lookahead, build_robust, greedy_assignment, BuildOptions};
use phasebal_core::ingest::{
    aggregate, estimate_box_all, forecast_box, mean_demand, meta_path, random_scale, read_csv, rho_schedule, synthetic,
    write_csv, write_meta, LoadDataset, SyntheticSpec,
};
use phasebal_core::model::{BoxUncertaintySet, LoadProfile, LookAheadConfig, PhaseAssignment, UncertaintySet};
use phasebal_core::report::{
    render_table, summarize_method, swap_histogram, write_curves_csv, write_histogram_csv, write_snapshot_csv,
    write_summary_csv, write_timeline_csv,
};
use phasebal_core::simulate::{
    evaluate_static, run_rolling, DailyMean, Forecaster, Perfect, Persistence, RollingConfig, SimulationRun,
};
use phasebal_core::solve::{solve_deterministic, solve_lookahead, solve_robust, StaticSolution};
use phasebal_milp::{write_mps, SolveConfig};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::output::*;
use crate::params::*;
use crate::{Command, Common, Result};

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Balance { common, data, objective, solver } => balance(common, data, objective, solver),
        Command::Robust { common, data, uncertainty, solver } => robust(common, data, uncertainty, solver),
        Command::Lookahead { common, data, horizon, solver } => lookahead(common, data, horizon, solver),
        Command::Simulate { common, data, horizon, sim, solver } => simulate(common, data, horizon, sim, solver),
        Command::ExportMps { common, export, data, objective, uncertainty, horizon } => {
            export_mps(common, export, data, objective, uncertainty, horizon)
        }
        Command::Report { common, report: params } => report(common, params),
        Command::Generate { common, generate: params } => generate(common, params),
    }
}

fn read_config(path: Option<&Path>) -> Result<toml::Table> {
    let Some(path) = path else {
        return Ok(toml::Table::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let known = known_keys();
    if let Some(k) = table.keys().find(|k| !known.contains(k)) {
        return Err(usage(format!("config {}: unknown key {k:?}", path.display())));
    }
    Ok(table)
}

/// Flags over config file over defaults.
fn resolve<G>(flags: G, config: &toml::Table, defaults: G) -> Result<G>
where
    G: Overlay + DeserializeOwned,
{
    let file: G = toml::Value::Table(config.clone())
        .try_into()
        .map_err(|e: toml::de::Error| usage(format!("config: {}", e.message())))?;
    let mut g = flags;
    g.overlay(&file);
    g.overlay(&defaults);
    Ok(g)
}

/// Resolved settings of a run, as written to `config.toml`.
fn settings(groups: &[&dyn erased::Group]) -> Result<toml::Table> {
    let mut table = toml::Table::new();
    for g in groups {
        table.extend(g.table()?);
    }
    Ok(table)
}

mod erased {
    use super::*;

    pub trait Group {
        fn table(&self) -> Result<toml::Table>;
    }

    impl<T: Serialize> Group for T {
        fn table(&self) -> Result<toml::Table> {
            match toml::Value::try_from(self) {
                Ok(toml::Value::Table(t)) => Ok(t),
                Ok(_) => Err(domain("settings group is not a table")),
                Err(e) => Err(domain(format!("settings: {e}"))),
            }
        }
    }
}

fn solver_config(p: &SolverParams) -> Result<SolveConfig> {
    let gap = p.gap.expect("resolved");
    if !(gap >= 0.0) || !gap.is_finite() {
        return Err(usage(format!("--gap {gap} must be finite and >= 0")));
    }
    if let Some(t) = p.time_limit {
        if !(t > 0.0) {
            return Err(usage(format!("--time-limit {t} must be positive")));
        }
    }
    Ok(SolveConfig {
        gap_tol: gap,
        node_limit: p.node_limit,
        time_limit: p.time_limit,
        ..SolveConfig::default()
    })
}

fn load_data(d: &DataParams) -> Result<(LoadDataset, Vec<FileDigest>)> {
    let input = d.input.as_ref().ok_or_else(|| usage("--input is required"))?;
    let digest = FileDigest::of(input)?;
    let mut ds = read_csv(input, d.layout.expect("resolved"))?;
    let factor = d.aggregate.expect("resolved");
    if factor == 0 {
        return Err(usage("--aggregate must be at least 1"));
    }
    if factor > 1 {
        ds = aggregate(&ds, factor)?;
    }
    if let Some(scale) = &d.scale {
        let &[lo, hi] = scale.as_slice() else {
            return Err(usage(format!("--scale takes two values, got {}", scale.len())));
        };
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(usage(format!("--scale {lo},{hi} needs 0 < LO <= HI")));
        }
        ds = random_scale(&ds, d.seed.expect("resolved"), (lo, hi))?;
    }
    info!(
        "{} loads, {} snapshots of {} h",
        ds.profile.n_loads(),
        ds.profile.n_snapshots(),
        ds.snapshot_hours
    );
    Ok((ds, vec![digest]))
}

fn check_rho(name: &str, rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(usage(format!("--{name} {rho} outside [0, 1)")))
    }
}

fn check_horizon(h: &HorizonParams) -> Result<()> {
    let (t1, t2, lambda) = (h.t1.expect("resolved"), h.t2.expect("resolved"), h.lambda.expect("resolved"));
    if t1 < 1 || t2 <= t1 {
        return Err(usage(format!("horizon needs --t2 > --t1 >= 1, got t1 = {t1}, t2 = {t2}")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(usage(format!("--lambda {lambda} must be finite and >= 0")));
    }
    check_rho("rho1", h.rho1.expect("resolved"))?;
    check_rho("rho2", h.rho2.expect("resolved"))?;
    if h.s.as_ref().is_none_or(|s| s.is_empty()) {
        return Err(usage("--s needs at least one value"));
    }
    Ok(())
}

fn forecaster(kind: ForecasterKind, period: usize) -> Box<dyn Forecaster + Send + Sync> {
    match kind {
        ForecasterKind::Persistence => Box::new(Persistence { period }),
        ForecasterKind::DailyMean => Box::new(DailyMean { period, window: None }),
        ForecasterKind::Perfect => Box::new(Perfect),
    }
}

fn single_budget(h: &HorizonParams) -> Result<usize> {
    match h.s.as_deref() {
        Some(&[s]) => Ok(s),
        _ => Err(usage("this subcommand takes a single --s value")),
    }
}

/// Assignment before `start`: from `--initial`, else a greedy split of the
/// mean demand observed so far (of the first snapshot when nothing was).
fn initial_assignment(h: &HorizonParams, profile: &LoadProfile, start: usize, inputs: &mut Vec<FileDigest>) -> Result<PhaseAssignment> {
    if let Some(path) = &h.initial {
        inputs.push(FileDigest::of(path)?);
        return read_assignment(path, profile);
    }
    let d = if start == 0 {
        profile.snapshot(0)
    } else {
        mean_demand(&profile.window(0, start)?)
    };
    Ok(greedy_assignment(&d, profile.phase_width()))
}

/// Look-ahead configuration and start snapshot for `ds`.
fn lookahead_setup(
    h: &HorizonParams,
    ds: &LoadDataset,
    budget: usize,
    inputs: &mut Vec<FileDigest>,
) -> Result<(LookAheadConfig, usize)> {
    let start = h.start.unwrap_or(ds.snapshots_per_day());
    let initial = initial_assignment(h, &ds.profile, start, inputs)?;
    let mut la = LookAheadConfig::new(initial);
    la.t1 = h.t1.expect("resolved");
    la.t2 = h.t2.expect("resolved");
    la.lambda = h.lambda.expect("resolved");
    la.swap_budget = budget;
    Ok((la, start))
}

fn lookahead_sets(h: &HorizonParams, ds: &LoadDataset, la: &LookAheadConfig, start: usize) -> Result<Vec<UncertaintySet>> {
    let t = ds.profile.n_snapshots();
    if start + la.t2 > t {
        return Err(domain(format!("horizon {start}..{} runs past the {t} snapshots of the data", start + la.t2)));
    }
    let f = forecaster(h.forecaster.expect("resolved"), ds.snapshots_per_day());
    let forecast = f.forecast(&ds.profile, start, la.t2)?;
    let rho = rho_schedule(la.t1, la.t2, h.rho1.expect("resolved"), h.rho2.expect("resolved"));
    Ok(forecast_box(&forecast, &rho)?.into_iter().map(UncertaintySet::Box).collect())
}

fn robust_set(u: &BoxParams, profile: &LoadProfile, ds: &LoadDataset) -> Result<BoxUncertaintySet> {
    match u.kind.expect("resolved") {
        BoxKind::Data => Ok(estimate_box_all(ds)?),
        BoxKind::Relative => {
            let rho = u.rho.expect("resolved");
            check_rho("rho", rho)?;
            Ok(BoxUncertaintySet::relative(mean_demand(profile), rho)?)
        }
    }
}

#[derive(Serialize)]
struct StaticReport<'a> {
    method: &'a str,
    solution: &'a StaticSolution,
}

fn finish_static(
    mut out: OutDir,
    command: &str,
    method: &str,
    ds: &LoadDataset,
    solution: &StaticSolution,
    common: &Common,
    table: toml::Table,
    inputs: Vec<FileDigest>,
) -> Result<()> {
    let profile = &ds.profile;
    let metrics = evaluate_static(&solution.assignment, profile, 0..profile.n_snapshots())?;
    write_assignment(&out.file("assignment.csv")?, profile.load_ids(), &solution.assignment)?;
    out.write_json(
        "solution.json",
        &StaticReport {
            method,
            solution,
        },
    )?;
    write_metrics(&out.file("metrics.csv")?, 0, &metrics)?;
    let runtimes = if common.timings { vec![solution.stats.solve_seconds] } else { Vec::new() };
    out.write_json(
        "evaluation.json",
        &Evaluation {
            method: method.into(),
            metrics,
            runtimes,
        },
    )?;
    out.finish(command, table, common.timings, inputs)?;
    println!("u = {}", kw(solution.objective));
    println!(
        "status = {}, gap = {}, nodes = {}",
        solution.stats.status,
        kw(solution.stats.gap),
        solution.stats.node_count
    );
    Ok(())
}

fn balance(common: Common, data: DataParams, objective: ObjectiveParams, solver: SolverParams) -> Result<()> {
    let config = read_config(common.config.as_deref())?;
    let data = resolve(data, &config, default_data())?;
    let objective = resolve(objective, &config, default_objective())?;
    let solver = resolve(solver, &config, default_solver())?;
    let cfg = solver_config(&solver)?;
    let table = settings(&[&data, &objective, &solver])?;
    let (ds, inputs) = load_data(&data)?;
    let out = OutDir::create(&common.out)?;

    let d = mean_demand(&ds.profile);
    let kind = objective.objective.expect("resolved");
    let solution = solve_deterministic(&ds.profile, &d, kind, BuildOptions::default(), &cfg)?;
    finish_static(out, "balance", "d-PB", &ds, &solution, &common, table, inputs)
}

fn robust(common: Common, data: DataParams, uncertainty: BoxParams, solver: SolverParams) -> Result<()> {
    let config = read_config(common.config.as_deref())?;
    let data = resolve(data, &config, default_data())?;
    let uncertainty = resolve(uncertainty, &config, default_box())?;
    let solver = resolve(solver, &config, default_solver())?;
    let cfg = solver_config(&solver)?;
    let table = settings(&[&data, &uncertainty, &solver])?;
    let (ds, inputs) = load_data(&data)?;
    let out = OutDir::create(&common.out)?;

    let set = robust_set(&uncertainty, &ds.profile, &ds)?;
    let solution = solve_robust(&ds.profile, &UncertaintySet::Box(set), BuildOptions::default(), &cfg)?;
    finish_static(out, "robust", "r-PB", &ds, &solution, &common, table, inputs)
}

fn lookahead(common: Common, data: DataParams, horizon: HorizonParams, solver: SolverParams) -> Result<()> {
    let config = read_config(common.config.as_deref())?;
    let data = resolve(data, &config, default_data())?;
    let horizon = resolve(horizon, &config, default_horizon())?;
    let solver = resolve(solver, &config, default_solver())?;
    check_horizon(&horizon)?;
    let budget = single_budget(&horizon)?;
    let cfg = solver_config(&solver)?;
    let table = settings(&[&data, &horizon, &solver])?;
    let (ds, mut inputs) = load_data(&data)?;
    let (la, start) = lookahead_setup(&horizon, &ds, budget, &mut inputs)?;
    let sets = lookahead_sets(&horizon, &ds, &la, start)?;
    let mut out = OutDir::create(&common.out)?;

    let solution = solve_lookahead(&ds.profile, &sets, &la, &cfg)?;
    let plan = &solution.plan;
    let profile = &ds.profile;
    write_assignment(&out.file("initial.csv")?, profile.load_ids(), &la.initial_assignment)?;
    out.write_json("plan.json", &solution)?;
    write_swaps(&out.file("swaps.csv")?, start, &plan.swap_events)?;
    let metrics = plan
        .assignments
        .iter()
        .enumerate()
        .map(|(k, a)| evaluate_static(a, profile, start + k..start + k + 1).map(|mut m| m.remove(0)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    write_metrics(&out.file("metrics.csv")?, start, &metrics)?;
    out.finish("lookahead", table, common.timings, inputs)?;
    println!("objective = {}", kw(plan.objective));
    println!("u = {}", kw(plan.u));
    println!("v = {}", kw(plan.v));
    println!("swaps = {}", plan.swap_events.len());
    for ev in &plan.swap_events {
        println!("  snapshot {}: {} {} -> {}", start + ev.snapshot - 1, ev.load_id, ev.from, ev.to);
    }
    println!("status = {}, gap = {}", solution.stats.status, kw(solution.stats.gap));
    Ok(())
}

fn simulate(common: Common, data: DataParams, horizon: HorizonParams, sim: SimParams, solver: SolverParams) -> Result<()> {
    let config = read_config(common.config.as_deref())?;
    let data = resolve(data, &config, default_data())?;
    let horizon = resolve(horizon, &config, default_horizon())?;
    let sim = resolve(sim, &config, default_sim())?;
    let solver = resolve(solver, &config, default_solver())?;
    check_horizon(&horizon)?;
    let cfg = solver_config(&solver)?;
    let jobs = sim.jobs.expect("resolved");
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let t1 = horizon.t1.expect("resolved");
    let stride = sim.stride.unwrap_or(t1);
    if stride == 0 || stride > t1 {
        return Err(usage(format!("--stride {stride} outside 1..={t1}")));
    }
    if sim.epochs == Some(0) {
        return Err(usage("--epochs must be at least 1"));
    }
    let table = settings(&[&data, &horizon, &sim, &solver])?;
    let (ds, mut inputs) = load_data(&data)?;
    let budgets = horizon.s.clone().expect("resolved");
    let (la, start) = lookahead_setup(&horizon, &ds, budgets[0], &mut inputs)?;
    let t = ds.profile.n_snapshots();
    if start + la.t2 > t {
        return Err(domain(format!("horizon {start}..{} runs past the {t} snapshots of the data", start + la.t2)));
    }
    let epochs = sim.epochs.unwrap_or((t - start - la.t2) / stride + 1);
    let rho = rho_schedule(la.t1, la.t2, horizon.rho1.expect("resolved"), horizon.rho2.expect("resolved"));
    let f = forecaster(horizon.forecaster.expect("resolved"), ds.snapshots_per_day());

    let configs: Vec<RollingConfig> = budgets
        .iter()
        .map(|&s| {
            let mut la = la.clone();
            la.swap_budget = s;
            let mut rc = RollingConfig::new(la, rho.clone(), start, epochs);
            rc.stride = stride;
            rc.solver = cfg.clone();
            rc
        })
        .collect();
    for rc in &configs {
        rc.validate(&ds.profile)?;
    }
    let runs = run_cells(&ds.profile, f.as_ref(), &configs, jobs)?;

    let mut out = OutDir::create(&common.out)?;
    let mut summaries = Vec::new();
    let mut curves = Vec::new();
    let mut halted = Vec::new();
    for (rc, run) in configs.iter().zip(runs) {
        let s = rc.lookahead.swap_budget;
        let run = if common.timings { run } else { run.without_timings() };
        let dir = format!("s{s}");
        let method = format!("r-LAPB(s={s})");
        out.write_json(&format!("{dir}/run.json"), &run)?;
        write_snapshot_csv(out.file(&format!("{dir}/snapshots.csv"))?, &run)?;
        write_timeline_csv(out.file(&format!("{dir}/timeline.csv"))?, &run)?;
        write_histogram_csv(out.file(&format!("{dir}/histogram.csv"))?, &swap_histogram(&run))?;
        let metrics = run.metrics();
        let runtimes: Vec<f64> = run.epochs.iter().filter_map(|e| e.wall_seconds).collect();
        if let Some(msg) = &run.halted {
            halted.push(format!("s = {s}: {msg}"));
        }
        if !metrics.is_empty() {
            summaries.push(summarize_method(&method, &metrics, &runtimes)?);
            curves.push((method.clone(), metrics.iter().map(|m| m.omega).collect()));
        }
        out.write_json(&format!("{dir}/evaluation.json"), &Evaluation { method, metrics, runtimes })?;
        println!("s = {s}: {} epochs, {} swaps", run.epochs.len(), run.total_swaps);
    }
    write_summary_csv(out.file("summary.csv")?, &summaries)?;
    write_curves_csv(out.file("curves.csv")?, &curves)?;
    out.finish("simulate", table, common.timings, inputs)?;
    print!("{}", render_table(&summaries));
    if !halted.is_empty() {
        return Err(domain(format!("run halted early ({})", halted.join("; "))));
    }
    Ok(())
}

/// Runs independent rolling simulations on up to `jobs` threads; results
/// come back in input order.
fn run_cells(
    realized: &LoadProfile,
    forecaster: &(dyn Forecaster + Send + Sync),
    configs: &[RollingConfig],
    jobs: usize,
) -> Result<Vec<SimulationRun>> {
    let jobs = jobs.min(configs.len()).max(1);
    let mut slots: Vec<Option<phasebal_core::Result<SimulationRun>>> = (0..configs.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                scope.spawn(move || {
                    (j..configs.len())
                        .step_by(jobs)
                        .map(|k| (k, run_rolling(realized, forecaster, &configs[k])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (k, r) in h.join().expect("simulation thread panicked") {
                slots[k] = Some(r);
            }
        }
    });
    slots
        .into_iter()
        .map(|r| r.expect("every cell ran").map_err(CliError::from))
        .collect()
}

fn export_mps(
    common: Common,
    export: ExportParams,
    data: DataParams,
    objective: ObjectiveParams,
    uncertainty: BoxParams,
    horizon: HorizonParams,
) -> Result<()> {
    let config = read_config(common.config.as_deref())?;
    let export = resolve(export, &config, default_export())?;
    let data = resolve(data, &config, default_data())?;
    let model = export.model.expect("resolved");
    let file = export.file.clone().expect("resolved");
    if file.is_empty() || file.contains('/') {
        return Err(usage(format!("--file {file:?} must be a plain file name")));
    }
    let (ds, mut inputs) = load_data(&data)?;
    let profile = &ds.profile;
    let (f, table) = match model {
        ModelKind::Balance => {
            let objective = resolve(objective, &config, default_objective())?;
            let f = build_deterministic(
                profile,
                &mean_demand(profile),
                objective.objective.expect("resolved"),
                BuildOptions::default(),
            )?;
            (f, settings(&[&export, &data, &objective])?)
        }
        ModelKind::Robust => {
            let uncertainty = resolve(uncertainty, &config, default_box())?;
            let set = robust_set(&uncertainty, profile, &ds)?;
            let f = build_robust(profile, &UncertaintySet::Box(set), BuildOptions::default())?;
            (f, settings(&[&export, &data, &uncertainty])?)
        }
        ModelKind::Lookahead => {
            let horizon = resolve(horizon, &config, default_horizon())?;
            check_horizon(&horizon)?;
            let budget = single_budget(&horizon)?;
            let (la, start) = lookahead_setup(&horizon, &ds, budget, &mut inputs)?;
            let sets = lookahead_sets(&horizon, &ds, &la, start)?;
            (build_lookahead(profile, &sets, &la)?, settings(&[&export, &data, &horizon])?)
        }
    };
    let mut out = OutDir::create(&common.out)?;
    let path = out.file(&file)?;
    out.file(&format!("{file}.names.json"))?;
    write_mps(&f.instance, &path)?;
    out.finish("export-mps", table, common.timings, inputs)?;
    println!(
        "wrote {} ({} variables, {} binaries, {} rows)",
        path.display(),
        f.instance.num_vars(),
        f.instance.num_binaries(),
        f.instance.num_rows()
    );
    Ok(())
}

fn report(common: Common, params: ReportParams) -> Result<()> {
    let config = read_config(common.config.as_deref())?;
    let params = resolve(params, &config, ReportParams::default())?;
    let files = params.input.clone().unwrap_or_default();
    if files.is_empty() {
        return Err(usage("report needs at least one --input evaluation file"));
    }
    let mut inputs = Vec::new();
    let mut summaries = Vec::new();
    let mut curves = Vec::new();
    for path in &files {
        inputs.push(FileDigest::of(path)?);
        let text = std::fs::read_to_string(path)?;
        let e: Evaluation = serde_json::from_str(&text).map_err(|err| domain(format!("{}: {err}", path.display())))?;
        if e.metrics.is_empty() {
            return Err(domain(format!("{}: no snapshots to summarize", path.display())));
        }
        summaries.push(summarize_method(&e.method, &e.metrics, &e.runtimes)?);
        curves.push((e.method.clone(), e.metrics.iter().map(|m| m.omega).collect()));
    }
    let mut out = OutDir::create(&common.out)?;
    write_summary_csv(out.file("summary.csv")?, &summaries)?;
    write_curves_csv(out.file("curves.csv")?, &curves)?;
    out.finish("report", settings(&[&params])?, common.timings, inputs)?;
    print!("{}", render_table(&summaries));
    Ok(())
}

fn generate(common: Common, params: GenerateParams) -> Result<()> {
    let config = read_config(common.config.as_deref())?;
    let params = resolve(params, &config, default_generate())?;
    let spec = SyntheticSpec {
        n_loads: params.loads.expect("resolved"),
        days: params.days.expect("resolved"),
        seed: params.seed.expect("resolved"),
        ..SyntheticSpec::default()
    };
    if spec.n_loads == 0 || spec.days == 0 {
        return Err(usage("--loads and --days must be positive"));
    }
    let ds = synthetic(&spec)?;
    let mut out = OutDir::create(&common.out)?;
    let path = out.file("loads.csv")?;
    write_csv(&ds, &path, params.layout.expect("resolved"))?;
    let meta = meta_path(Path::new("loads.csv"));
    write_meta(&ds, out.file(&meta.display().to_string())?)?;
    out.finish("generate", settings(&[&params])?, common.timings, Vec::new())?;
    println!("wrote {} ({} loads, {} days)", path.display(), spec.n_loads, spec.days);
    Ok(())
}
