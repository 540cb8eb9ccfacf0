//! Resolution of the effective configuration into a validated task.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use cpenv::estimators::*;
use cpenv::oracle::MAX_STATES;
use cpenv::*;

use crate::config::*;
use crate::{Cli, CliError, Command, OUT_DIR_ENV, SCHEMA_VERSION};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_REPLICATES: u64 = 10_000;
pub const DEFAULT_RADIUS: i64 = 50;
pub const DEFAULT_ORACLE_RADIUS: i64 = 1;

/// A fully resolved unit of work. Its serialization, together with the seed
/// and the total replicate count, is what the run's config hash covers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "task")]
pub enum Task {
    Simulate {
        params: Params,
        geometry: Geometry,
        init: InitialLaw,
        horizon: f64,
        snapshots: Vec<f64>,
    },
    Survive {
        params: Params,
        geometry: Geometry,
        mode: SurvivalMode,
        times: Vec<f64>,
    },
    Blocks {
        params: Params,
        spec: BlockSpec,
    },
    DualCheck {
        params: Params,
        geometry: Geometry,
        a: SiteSelection,
        c: SiteSelection,
        d: SiteSelection,
        t: f64,
    },
    Oracle {
        params: Params,
        geometry: Geometry,
        a: SiteSelection,
        c: SiteSelection,
        d: SiteSelection,
        t: f64,
    },
    Bounds {
        d: usize,
        alpha: f64,
        beta_c_cp: Option<BoundsInput>,
    },
    Sweep {
        params: Params,
        geometry: Geometry,
        mode: SurvivalMode,
        axis: Axis,
        values: Vec<f64>,
        horizon: f64,
    },
    Bisect {
        params: Params,
        geometry: Geometry,
        mode: SurvivalMode,
        options: BisectionOptions,
    },
    Converge {
        params: Params,
        geometry: Geometry,
        mu: InitialLaw,
        c: SiteSelection,
        d: SiteSelection,
        options: ConvergenceOptions,
    },
    Merge {
        files: Vec<PathBuf>,
    },
}

impl Task {
    /// Whether replicate shards of this task can be merged afterwards.
    pub fn shardable(&self) -> bool {
        matches!(self, Task::Survive { .. } | Task::Blocks { .. } | Task::DualCheck { .. } | Task::Sweep { .. })
    }

    pub fn uses_replicates(&self) -> bool {
        !matches!(self, Task::Simulate { .. } | Task::Oracle { .. } | Task::Bounds { .. } | Task::Merge { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub command: &'static str,
    pub seed: u64,
    pub replicates: Replicates,
    pub threads: usize,
    pub out_dir: PathBuf,
    pub name: String,
    pub task: Task,
    pub config_hash: String,
}

fn cfg<T>(r: Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config(e.to_string()))
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_horizon(name: &str, h: f64) -> Result<f64, CliError> {
    if h.is_finite() && h > 0.0 && h <= MAX_HORIZON {
        Ok(h)
    } else {
        Err(bad(format!("{name} must be positive, finite and at most {MAX_HORIZON}, got {h}")))
    }
}

/// Nonempty, ascending, within `[0, max]`, with a positive last entry.
fn check_grid(name: &str, times: &[f64], max: f64) -> Result<(), CliError> {
    if times.is_empty() {
        return Err(bad(format!("{name} is empty")));
    }
    if times.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(bad(format!("{name} must be ascending")));
    }
    if !(times[0] >= 0.0) || !(times[times.len() - 1] <= max) {
        return Err(bad(format!("{name} must lie in [0, {max}]")));
    }
    check_horizon(name, times[times.len() - 1])?;
    Ok(())
}

/// `all`, `origin`, `none`, or points separated by `;` with coordinates
/// separated by `,`, e.g. `0,0;1,0`.
pub fn parse_sites(text: &str, d: usize) -> Result<SiteSelection, CliError> {
    match text.trim() {
        "all" => return Ok(SiteSelection::All),
        "origin" => return Ok(SiteSelection::origin(d)),
        "none" | "" => return Ok(SiteSelection::empty()),
        _ => {}
    }
    let mut points = Vec::new();
    for p in text.split(';') {
        let x: Coord = p
            .split(',')
            .map(|c| c.trim().parse::<i64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad(format!("malformed site list {text:?}")))?;
        if x.len() != d {
            return Err(bad(format!("site {p:?} has {} coordinates but d = {d}", x.len())));
        }
        points.push(x);
    }
    Ok(SiteSelection::Points(points))
}

/// `nu:SITES`, `chi:SITES` or `mu-rho`.
pub fn parse_law(text: &str, d: usize) -> Result<InitialLaw, CliError> {
    let text = text.trim();
    if text == "mu-rho" {
        return Ok(InitialLaw::MuRho);
    }
    match text.split_once(':') {
        Some(("nu", s)) => Ok(InitialLaw::Nu(parse_sites(s, d)?)),
        Some(("chi", s)) => Ok(InitialLaw::Chi(parse_sites(s, d)?)),
        _ => Err(bad(format!("unknown initial law {text:?}; expected nu:SITES, chi:SITES or mu-rho"))),
    }
}

fn parse_shard(text: &str) -> Result<(u64, u64), CliError> {
    let err = || bad(format!("shard must be written i/k with 0 <= i < k, got {text:?}"));
    let (i, k) = text.split_once('/').ok_or_else(err)?;
    let (i, k) = (i.trim().parse::<u64>().map_err(|_| err())?, k.trim().parse::<u64>().map_err(|_| err())?);
    if k == 0 || i >= k {
        return Err(err());
    }
    Ok((i, k))
}

fn params(p: &ParamsOpts) -> Result<Params, CliError> {
    cfg(Params::new(p.d.unwrap_or(1), p.alpha.unwrap_or(1.0), p.beta.unwrap_or(2.0), p.delta.unwrap_or(1.0)))
}

fn geometry(g: &GeometryOpts, d: usize, default_radius: i64) -> Result<Geometry, CliError> {
    let bounds = match (&g.lo, &g.hi) {
        (Some(lo), Some(hi)) => cfg(Region::new(lo.clone(), hi.clone()))?,
        (None, None) => {
            let r = g.radius.unwrap_or(default_radius);
            if r < 0 {
                return Err(bad(format!("radius must be nonnegative, got {r}")));
            }
            Region::cube(d, r)
        }
        _ => return Err(bad("lo and hi must be given together")),
    };
    if bounds.dim() != d {
        return Err(bad(format!("box has dimension {} but d = {d}", bounds.dim())));
    }
    if bounds.volume() > 50_000_000 {
        return Err(bad(format!("box has {} sites; at most 5e7 are supported", bounds.volume())));
    }
    let boundary = match g.boundary.unwrap_or(BoundaryArg::Open) {
        BoundaryArg::Open => Boundary::Open,
        BoundaryArg::Periodic => Boundary::Periodic,
    };
    let birth = match g.birth_radius {
        Some(r) if r < 0 => return Err(bad(format!("birth radius must be nonnegative, got {r}"))),
        Some(r) => Some(Region::cube(d, r)),
        None => None,
    };
    cfg(Geometry::new(bounds, boundary, birth))
}

fn survival_mode(mode: Option<ModeArg>, a: Option<&str>, geometry: &Geometry) -> Result<SurvivalMode, CliError> {
    let d = geometry.dim();
    let mode = match mode.unwrap_or(ModeArg::S2) {
        ModeArg::S1 => SurvivalMode::S1(parse_sites(a.unwrap_or("origin"), d)?),
        ModeArg::S2 => SurvivalMode::S2,
    };
    cfg(mode.law(d).resolve(&Arc::new(geometry.clone())))?;
    Ok(mode)
}

fn resolve_sites(text: Option<&str>, default: &str, geometry: &Geometry) -> Result<SiteSelection, CliError> {
    let sel = parse_sites(text.unwrap_or(default), geometry.dim())?;
    cfg(sel.resolve(geometry))?;
    Ok(sel)
}

fn resolve_law(text: Option<&str>, default: &str, geometry: &Geometry) -> Result<InitialLaw, CliError> {
    let law = parse_law(text.unwrap_or(default), geometry.dim())?;
    cfg(law.resolve(&Arc::new(geometry.clone())))?;
    Ok(law)
}

fn unit(name: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(bad(format!("{name} must lie in (0, 1), got {x}")))
    }
}

impl Plan {
    pub fn from_cli(cli: Cli) -> Result<Plan, CliError> {
        let mut file = match &cli.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        file.run.overlay(&cli.run);
        file.params.overlay(&cli.params);
        file.geometry.overlay(&cli.geometry);
        let command = cli.command.name();
        let task = match cli.command {
            Command::Simulate(o) => {
                file.simulate.overlay(&o);
                simulate(&file)?
            }
            Command::Survive(o) => {
                file.survive.overlay(&o);
                survive(&file)?
            }
            Command::Blocks(o) => {
                file.blocks.overlay(&o);
                blocks(&file)?
            }
            Command::DualCheck(o) => {
                file.dual_check.overlay(&o);
                let (params, geometry, a, c, d, t) = duality(&file, &file.dual_check, DEFAULT_RADIUS)?;
                Task::DualCheck { params, geometry, a, c, d, t }
            }
            Command::Oracle(o) => {
                file.oracle.overlay(&o);
                let (params, geometry, a, c, d, t) = duality(&file, &file.oracle, DEFAULT_ORACLE_RADIUS)?;
                let states = 3f64.powi(geometry.num_sites() as i32);
                if states > MAX_STATES as f64 {
                    return Err(bad(format!(
                        "oracle needs 3^{} states, more than {MAX_STATES}; use at most 9 sites",
                        geometry.num_sites()
                    )));
                }
                Task::Oracle { params, geometry, a, c, d, t }
            }
            Command::Bounds(o) => {
                file.bounds.overlay(&o);
                bounds(&file)?
            }
            Command::Sweep(o) => {
                file.sweep.overlay(&o);
                sweep(&file)?
            }
            Command::Converge(o) => {
                file.converge.overlay(&o);
                converge(&file)?
            }
            Command::Merge { files } => Task::Merge { files },
        };

        let run = &file.run;
        let seed = run.seed.unwrap_or(DEFAULT_SEED);
        let total = run.replicates.unwrap_or(DEFAULT_REPLICATES);
        if total == 0 {
            return Err(bad("replicates must be positive"));
        }
        let replicates = match &run.shard {
            None => Replicates::all(total),
            Some(s) => {
                if !task.shardable() {
                    return Err(bad(format!("{command} results cannot be sharded")));
                }
                let (i, k) = parse_shard(s)?;
                let r = cfg(Replicates::shard(total, i, k))?;
                if r.count() == 0 {
                    return Err(bad(format!("shard {i}/{k} of {total} replicates is empty")));
                }
                r
            }
        };
        let out_dir = run
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| bad(format!("output directory {} is not writable: {e}", out_dir.display())))?;
        if std::fs::metadata(&out_dir).map(|m| m.permissions().readonly()).unwrap_or(true) {
            return Err(bad(format!("output directory {} is not writable", out_dir.display())));
        }
        let name = run.name.clone().unwrap_or_else(|| command.to_string());
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(bad(format!("output name {name:?} must be a plain file stem")));
        }
        let config_hash = config_hash(&serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "task": &task,
            "seed": seed,
            "replicates": if task.uses_replicates() { Some(total) } else { None },
        }));
        Ok(Plan {
            command,
            seed,
            replicates,
            threads: run.threads.unwrap_or(0),
            out_dir,
            name,
            task,
            config_hash,
        })
    }
}

fn simulate(f: &RunConfig) -> Result<Task, CliError> {
    let params = params(&f.params)?;
    let geometry = geometry(&f.geometry, params.d(), DEFAULT_RADIUS)?;
    let o = &f.simulate;
    let horizon = check_horizon("horizon", o.horizon.unwrap_or(10.0))?;
    let init = resolve_law(o.init.as_deref(), "nu:all", &geometry)?;
    let snapshots = o.snapshots.clone().unwrap_or_else(|| vec![0.0, horizon]);
    if snapshots.iter().any(|&s| !(0.0..=horizon).contains(&s)) {
        return Err(bad(format!("snapshot times must lie in [0, {horizon}]")));
    }
    Ok(Task::Simulate { params, geometry, init, horizon, snapshots })
}

fn survive(f: &RunConfig) -> Result<Task, CliError> {
    let params = params(&f.params)?;
    let geometry = geometry(&f.geometry, params.d(), DEFAULT_RADIUS)?;
    let o = &f.survive;
    let horizon = check_horizon("horizon", o.horizon.unwrap_or(10.0))?;
    let times = o.times.clone().unwrap_or_else(|| vec![horizon]);
    check_grid("times", &times, MAX_HORIZON)?;
    let mode = survival_mode(o.mode, o.a_sites.as_deref(), &geometry)?;
    Ok(Task::Survive { params, geometry, mode, times })
}

fn blocks(f: &RunConfig) -> Result<Task, CliError> {
    let params = params(&f.params)?;
    let o = &f.blocks;
    let spec = cfg(BlockSpec::new(
        o.n.unwrap_or(0),
        o.l.unwrap_or(1),
        o.t.unwrap_or(1.0),
        o.epsilon.unwrap_or(0.5),
        o.big_n.unwrap_or(0),
        o.big_m.unwrap_or(0),
    ))?;
    check_horizon("block horizon T + 1", spec.t + 1.0)?;
    cfg(spec.block_geometry(params.d()))?;
    cfg(spec.occupancy_geometry(params.d()))?;
    Ok(Task::Blocks { params, spec })
}

type DualitySetup = (Params, Geometry, SiteSelection, SiteSelection, SiteSelection, f64);

fn duality(f: &RunConfig, o: &DualOpts, default_radius: i64) -> Result<DualitySetup, CliError> {
    let params = params(&f.params)?;
    let geometry = geometry(&f.geometry, params.d(), default_radius)?;
    let t = check_horizon("t", o.t.unwrap_or(1.0))?;
    let a = resolve_sites(o.a_sites.as_deref(), "all", &geometry)?;
    let c = resolve_sites(o.c_sites.as_deref(), "origin", &geometry)?;
    let d = resolve_sites(o.d_sites.as_deref(), "all", &geometry)?;
    Ok((params, geometry, a, c, d, t))
}

fn bounds(f: &RunConfig) -> Result<Task, CliError> {
    let params = params(&f.params)?;
    let beta_c_cp = match f.bounds.beta_c_cp {
        Some(v) => Some(cfg(BoundsInput::new(v, "supplied"))?),
        None => BoundsInput::literature(params.d()),
    };
    Ok(Task::Bounds { d: params.d(), alpha: params.alpha(), beta_c_cp })
}

fn sweep(f: &RunConfig) -> Result<Task, CliError> {
    let params = params(&f.params)?;
    let geometry = geometry(&f.geometry, params.d(), DEFAULT_RADIUS)?;
    let o = &f.sweep;
    let axis = match o.axis.unwrap_or(AxisArg::Beta) {
        AxisArg::Beta => Axis::Beta,
        AxisArg::Delta => Axis::Delta,
        AxisArg::Alpha => Axis::Alpha,
    };
    let horizon = check_horizon("horizon", o.horizon.unwrap_or(10.0))?;
    let mode = survival_mode(o.mode, o.a_sites.as_deref(), &geometry)?;
    if o.bisect.unwrap_or(false) {
        let (lo, hi) = match (o.bracket_lo, o.bracket_hi) {
            (Some(lo), Some(hi)) if lo < hi => (lo, hi),
            (Some(_), Some(_)) => return Err(bad("bisection needs bracket-lo < bracket-hi")),
            _ => return Err(bad("bisection needs both bracket-lo and bracket-hi")),
        };
        cfg(axis.apply(params, lo))?;
        cfg(axis.apply(params, hi))?;
        let target = unit("target", o.target.unwrap_or_else(cpenv::estimators::sweep::default_target))?;
        let tolerance = o.tolerance.unwrap_or(0.1);
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(bad(format!("tolerance must be positive, got {tolerance}")));
        }
        let options = BisectionOptions { axis, lo, hi, target, horizon, tolerance };
        return Ok(Task::Bisect { params, geometry, mode, options });
    }
    let values = o.values.clone().ok_or_else(|| bad("sweep needs values, or bisect with bracket-lo and bracket-hi"))?;
    if values.is_empty() || values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(bad("sweep values must be nonempty and strictly ascending"));
    }
    for &v in &values {
        cfg(axis.apply(params, v))?;
    }
    Ok(Task::Sweep { params, geometry, mode, axis, values, horizon })
}

fn converge(f: &RunConfig) -> Result<Task, CliError> {
    let params = params(&f.params)?;
    let geometry = geometry(&f.geometry, params.d(), DEFAULT_RADIUS)?;
    let o = &f.converge;
    let horizon = check_horizon("horizon", o.horizon.unwrap_or(100.0))?;
    let t_grid = o.t_grid.clone().unwrap_or_else(|| vec![horizon]);
    check_grid("t-grid", &t_grid, horizon)?;
    let mu = resolve_law(o.mu.as_deref(), "nu:origin", &geometry)?;
    let c = resolve_sites(o.c_sites.as_deref(), "origin", &geometry)?;
    let d = resolve_sites(o.d_sites.as_deref(), "origin", &geometry)?;
    Ok(Task::Converge { params, geometry, mu, c, d, options: ConvergenceOptions { t_grid, horizon } })
}
