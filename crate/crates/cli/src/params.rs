//! Flag groups. Every group doubles as a slice of the flat TOML config file:
//! config keys are the flag names with `-` replaced by `_`.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use phasebal_core::formulation::ImbalanceObjective;
use phasebal_core::ingest::CsvLayout;
use serde::{Deserialize, Deserializer, Serialize};

/// Fills the unset fields of `self` from `other`.
pub trait Overlay {
    fn overlay(&mut self, other: &Self);
}

macro_rules! overlay {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl Overlay for $ty {
            fn overlay(&mut self, other: &Self) {
                $(
                    if self.$field.is_none() {
                        self.$field = other.$field.clone();
                    }
                )*
            }
        }
    };
}

/// Accepts `key = x` as well as `key = [x, y]`.
fn one_or_many<'de, D, T>(d: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(Option::<OneOrMany<T>>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForecasterKind {
    /// Previous day's value at the same hour.
    Persistence,
    /// Mean of all earlier days at the same hour.
    DailyMean,
    /// The realized demand itself.
    Perfect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxKind {
    /// Componentwise range of the data around its mean.
    Data,
    /// `(1 +- rho)` times the mean demand.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Balance,
    Robust,
    Lookahead,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct DataParams {
    /// Load CSV file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// CSV layout: `wide` (timestamp column plus one column per load) or
    /// `long` (load_id,timestamp,kw).
    #[arg(long)]
    pub layout: Option<CsvLayout>,
    /// Average this many consecutive snapshots into one.
    #[arg(long)]
    pub aggregate: Option<usize>,
    /// Scale each load by a random factor in `LO,HI`.
    #[arg(long, value_delimiter = ',', value_name = "LO,HI")]
    pub scale: Option<Vec<f64>>,
    /// Seed of every random draw.
    #[arg(long)]
    pub seed: Option<u64>,
}
overlay!(DataParams { input, layout, aggregate, scale, seed });

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct SolverParams {
    /// Relative optimality gap at which branch and bound stops.
    #[arg(long)]
    pub gap: Option<f64>,
    /// Wall-clock limit per solve in seconds; runs hitting it are not
    /// reproducible.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Branch-and-bound node limit per solve.
    #[arg(long)]
    pub node_limit: Option<usize>,
}
overlay!(SolverParams { gap, time_limit, node_limit });

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct ObjectiveParams {
    /// `single-phase` or `pairwise`.
    #[arg(long)]
    pub objective: Option<ImbalanceObjective>,
}
overlay!(ObjectiveParams { objective });

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct BoxParams {
    /// Uncertainty box of the static robust model.
    #[arg(long = "box", value_enum)]
    #[serde(rename = "box")]
    pub kind: Option<BoxKind>,
    /// Relative half width of a `relative` box.
    #[arg(long)]
    pub rho: Option<f64>,
}
overlay!(BoxParams { kind, rho });

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct HorizonParams {
    /// Snapshots in the committed period.
    #[arg(long)]
    pub t1: Option<usize>,
    /// Snapshots in the whole horizon.
    #[arg(long)]
    pub t2: Option<usize>,
    /// Weight of the advisory-period imbalance.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Swap budget per committed period; `simulate` accepts a list.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    pub s: Option<Vec<usize>>,
    /// Relative box width over the committed period.
    #[arg(long)]
    pub rho1: Option<f64>,
    /// Relative box width over the advisory period.
    #[arg(long)]
    pub rho2: Option<f64>,
    #[arg(long, value_enum)]
    pub forecaster: Option<ForecasterKind>,
    /// First planned snapshot; defaults to one day in.
    #[arg(long)]
    pub start: Option<usize>,
    /// Assignment in force before `start` (`load_id,phases` CSV); defaults
    /// to a greedy split of the mean demand observed before `start`.
    #[arg(long)]
    pub initial: Option<PathBuf>,
}
overlay!(HorizonParams { t1, t2, lambda, s, rho1, rho2, forecaster, start, initial });

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct SimParams {
    /// Decision epochs; defaults to as many as the data holds.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Snapshots implemented per epoch; defaults to `t1`.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Runs of a swap-budget sweep solved concurrently.
    #[arg(long)]
    pub jobs: Option<usize>,
}
overlay!(SimParams { epochs, stride, jobs });

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct ExportParams {
    /// Which model to export.
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// File name inside `--out`; a `.gz` suffix compresses.
    #[arg(long)]
    pub file: Option<String>,
}
overlay!(ExportParams { model, file });

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct GenerateParams {
    #[arg(long)]
    pub loads: Option<usize>,
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub layout: Option<CsvLayout>,
}
overlay!(GenerateParams { loads, days, seed, layout });

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct ReportParams {
    /// `evaluation.json` files written by the other subcommands.
    #[arg(long, num_args = 1..)]
    #[serde(default, deserialize_with = "one_or_many")]
    pub input: Option<Vec<PathBuf>>,
}
overlay!(ReportParams { input });

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_NODE_LIMIT: usize = 100;
pub const DEFAULT_JOBS: usize = 1;

pub fn default_data() -> DataParams {
    DataParams {
        input: None,
        layout: Some(CsvLayout::Wide),
        aggregate: Some(1),
        scale: None,
        seed: Some(DEFAULT_SEED),
    }
}

pub fn default_solver() -> SolverParams {
    let milp = phasebal_milp::SolveConfig::default();
    SolverParams {
        gap: Some(milp.gap_tol),
        time_limit: None,
        node_limit: Some(DEFAULT_NODE_LIMIT),
    }
}

pub fn default_objective() -> ObjectiveParams {
    ObjectiveParams {
        objective: Some(ImbalanceObjective::SinglePhase),
    }
}

pub fn default_box() -> BoxParams {
    BoxParams {
        kind: Some(BoxKind::Data),
        rho: Some(phasebal_core::ingest::DEFAULT_RHO.0),
    }
}

pub fn default_horizon() -> HorizonParams {
    use phasebal_core::model::{DEFAULT_LAMBDA, DEFAULT_SWAP_BUDGET, DEFAULT_T1, DEFAULT_T2};
    let (rho1, rho2) = phasebal_core::ingest::DEFAULT_RHO;
    HorizonParams {
        t1: Some(DEFAULT_T1),
        t2: Some(DEFAULT_T2),
        lambda: Some(DEFAULT_LAMBDA),
        s: Some(vec![DEFAULT_SWAP_BUDGET]),
        rho1: Some(rho1),
        rho2: Some(rho2),
        forecaster: Some(ForecasterKind::Persistence),
        start: None,
        initial: None,
    }
}

pub fn default_sim() -> SimParams {
    SimParams {
        epochs: None,
        stride: None,
        jobs: Some(DEFAULT_JOBS),
    }
}

pub fn default_export() -> ExportParams {
    ExportParams {
        model: Some(ModelKind::Balance),
        file: Some("model.mps".into()),
    }
}

pub fn default_generate() -> GenerateParams {
    let spec = phasebal_core::ingest::SyntheticSpec::default();
    GenerateParams {
        loads: Some(spec.n_loads),
        days: Some(spec.days),
        seed: Some(spec.seed),
        layout: Some(CsvLayout::Wide),
    }
}

/// Every key accepted in a config file.
pub fn known_keys() -> Vec<String> {
    let groups = [
        serde_json::to_value(DataParams::default()),
        serde_json::to_value(SolverParams::default()),
        serde_json::to_value(ObjectiveParams::default()),
        serde_json::to_value(BoxParams::default()),
        serde_json::to_value(HorizonParams::default()),
        serde_json::to_value(SimParams::default()),
        serde_json::to_value(ExportParams::default()),
        serde_json::to_value(GenerateParams::default()),
        serde_json::to_value(ReportParams::default()),
    ];
    let mut keys: Vec<String> = groups
        .into_iter()
        .filter_map(|g| match g {
            Ok(serde_json::Value::Object(m)) => Some(m.into_iter().map(|(k, _)| k)),
            _ => None,
        })
        .flatten()
        .collect();
    keys.sort();
    keys.dedup();
    keys
}
