//! Run configuration: a TOML or JSON file whose sections mirror the
//! command-line flags. Flags given on the command line override the file.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Copy every `Some` field of `$top` over `$base`.
macro_rules! overlay {
    ($base:expr, $top:expr; $($f:ident),* $(,)?) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryArg {
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    /// Start from nu_A (A given by --a-sites, default the origin).
    S1,
    /// Start from chi_{0}: a single 1 at the origin, all else blocked.
    S2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AxisArg {
    Beta,
    Delta,
    Alpha,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunOpts {
    /// Base random seed [default: 1]
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of replicates [default: 10000]
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u64>,
    /// Worker threads, 0 for one per core [default: 0]
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Run only shard i of k of the replicate indices, written "i/k"
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shard: Option<String>,
    /// Output directory [default: $CPENV_OUT_DIR, else the current directory]
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Output file stem [default: the subcommand name]
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ParamsOpts {
    /// Lattice dimension [default: 1]
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Environment flip intensity alpha [default: 1]
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Total birth rate beta [default: 2]
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Unblock/block rate ratio delta [default: 1]
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct GeometryOpts {
    /// Box [-radius, radius]^d [default: 50, or 1 for oracle]
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<i64>,
    /// Boundary handling [default: open]
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryArg>,
    /// Lower box corner, comma separated (overrides --radius together with --hi)
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<i64>>,
    /// Upper box corner, comma separated
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<i64>>,
    /// Confine births to [-r, r]^d [default: no restriction]
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub birth_radius: Option<i64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateOpts {
    /// Simulation horizon [default: 10]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Initial law: nu:SITES, chi:SITES or mu-rho [default: nu:all]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    /// Snapshot times for the JSON export [default: 0 and the horizon]
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SurviveOpts {
    /// Survival horizon [default: 10]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Ascending horizons estimated from the same runs [default: the horizon]
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    /// Starting condition [default: s2]
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeArg>,
    /// The set A of mode s1 [default: the origin]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_sites: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct BlocksOpts {
    /// Block half-width n [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<i64>,
    /// Block scale L [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<i64>,
    /// Time scale T [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Threshold epsilon of the pass/fail reading [default: 0.5]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Occupied-count threshold N [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub big_n: Option<u64>,
    /// Face-point threshold M [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub big_m: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DualOpts {
    /// Duality time t [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Set A of the initial law nu_A [default: all]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_sites: Option<String>,
    /// Set C probed for 1's [default: the origin]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_sites: Option<String>,
    /// Set D probed for blocked sites [default: all]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_sites: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct BoundsOpts {
    /// Critical total birth rate of the ordinary contact process
    /// [default: literature value for d = 1, 2, 3]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_c_cp: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SweepOpts {
    /// Swept parameter [default: beta]
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<AxisArg>,
    /// Ascending axis values (sweep mode)
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// Survival horizon [default: 10]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Starting condition [default: s2]
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeArg>,
    /// The set A of mode s1 [default: the origin]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_sites: Option<String>,
    /// Bisect for the pseudo-critical value instead of sweeping
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bisect: Option<bool>,
    /// Lower end of the bisection bracket
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket_lo: Option<f64>,
    /// Upper end of the bisection bracket
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket_hi: Option<f64>,
    /// Target survival probability [default: 0.5]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    /// Stop when the bracket is narrower than this [default: 0.1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConvergeOpts {
    /// Observation times [default: the horizon]
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    /// Horizon of the survival and all-occupied runs [default: 100]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Initial law: nu:SITES, chi:SITES or mu-rho [default: nu:0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<String>,
    /// Set C probed for 1's [default: the origin]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_sites: Option<String>,
    /// Set D probed for blocked sites [default: the origin]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_sites: Option<String>,
}

/// The file format. Every section is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub run: RunOpts,
    pub params: ParamsOpts,
    pub geometry: GeometryOpts,
    pub simulate: SimulateOpts,
    pub survive: SurviveOpts,
    pub blocks: BlocksOpts,
    pub dual_check: DualOpts,
    pub oracle: DualOpts,
    pub bounds: BoundsOpts,
    pub sweep: SweepOpts,
    pub converge: ConvergeOpts,
}

impl RunConfig {
    /// Parse TOML, or JSON when the file name ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        Self::parse(&text, is_json).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str, json: bool) -> Result<Self, String> {
        if json {
            serde_json::from_str(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        }
    }
}

impl RunOpts {
    pub fn overlay(&mut self, top: &RunOpts) {
        overlay!(self, top; seed, replicates, threads, shard, out_dir, name);
    }
}

impl ParamsOpts {
    pub fn overlay(&mut self, top: &ParamsOpts) {
        overlay!(self, top; d, alpha, beta, delta);
    }
}

impl GeometryOpts {
    pub fn overlay(&mut self, top: &GeometryOpts) {
        overlay!(self, top; radius, boundary, lo, hi, birth_radius);
    }
}

impl SimulateOpts {
    pub fn overlay(&mut self, top: &SimulateOpts) {
        overlay!(self, top; horizon, init, snapshots);
    }
}

impl SurviveOpts {
    pub fn overlay(&mut self, top: &SurviveOpts) {
        overlay!(self, top; horizon, times, mode, a_sites);
    }
}

impl BlocksOpts {
    pub fn overlay(&mut self, top: &BlocksOpts) {
        overlay!(self, top; n, l, t, epsilon, big_n, big_m);
    }
}

impl DualOpts {
    pub fn overlay(&mut self, top: &DualOpts) {
        overlay!(self, top; t, a_sites, c_sites, d_sites);
    }
}

impl BoundsOpts {
    pub fn overlay(&mut self, top: &BoundsOpts) {
        overlay!(self, top; beta_c_cp);
    }
}

impl SweepOpts {
    pub fn overlay(&mut self, top: &SweepOpts) {
        overlay!(self, top; axis, values, horizon, mode, a_sites, bisect, bracket_lo, bracket_hi, target, tolerance);
    }
}

impl ConvergeOpts {
    pub fn overlay(&mut self, top: &ConvergeOpts) {
        overlay!(self, top; t_grid, horizon, mu, c_sites, d_sites);
    }
}
