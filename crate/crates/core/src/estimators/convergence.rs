//! Late-time cylinder probabilities compared with the mixture
//! `P(τ < ∞) ν_lower + P(τ = ∞) ν_upper` of the extremal invariant laws.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::SiteState;
use crate::error::{Error, Result};
use crate::forward::ChunkedRun;
use crate::geometry::Geometry;
use crate::initial::{InitialLaw, ResolvedLaw, SiteSelection};
use crate::params::Params;
use crate::rng::StreamSeed;

use super::report::{accumulate, config_hash, Accumulate, EstimateReport, Replicates, Tally};
use super::survival::{check_times, survival_path};

const SURVIVAL_SALT: u64 = 0x7375_7276;
const UPPER_SALT: u64 = 0x7570_7072;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceOptions {
    pub t_grid: Vec<f64>,
    /// Horizon of the survival runs and of the runs from the all-occupied start.
    pub horizon: f64,
}

/// A probability with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Value {
    pub estimate: f64,
    pub stderr: f64,
}

impl Value {
    fn exact(x: f64) -> Self {
        Value { estimate: x, stderr: 0.0 }
    }

    fn of(t: &Tally) -> Self {
        Value { estimate: t.estimate(), stderr: t.stderr() }
    }

    /// `|a - b| <= z * sqrt(sa^2 + sb^2)`.
    pub fn agrees(&self, other: &Value, z: f64) -> bool {
        let tol = z * (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        (self.estimate - other.estimate).abs() <= tol
    }
}

/// The three cylinder events: `A ∩ C ≠ ∅`, `B ∩ D ≠ ∅`, and both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cylinders {
    pub ones: Value,
    pub blocked: Value,
    pub joint: Value,
}

impl Cylinders {
    pub fn agrees(&self, other: &Cylinders, z: f64) -> bool {
        self.ones.agrees(&other.ones, z) && self.blocked.agrees(&other.blocked, z) && self.joint.agrees(&other.joint, z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub t: f64,
    pub cylinders: Cylinders,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<GridRow>,
    /// `P(A_horizon ≠ ∅)` from the initial law, the proxy for `P(τ = ∞)`.
    pub survival: EstimateReport,
    /// Exact values under the lower invariant law.
    pub lower: Cylinders,
    /// Values under the upper invariant law, from runs started all occupied.
    pub upper: Cylinders,
    pub prediction: Cylinders,
    pub seed: u64,
    pub config_hash: String,
}

impl ConvergenceReport {
    pub fn late(&self) -> &Cylinders {
        &self.rows.last().expect("nonempty grid").cylinders
    }

    /// Late-time values agree with the prediction within `z` combined standard errors.
    pub fn consistent(&self, z: f64) -> bool {
        self.late().agrees(&self.prediction, z)
    }

    pub const CSV_HEADER: &'static str = "t,ones,ones_se,blocked,blocked_se,joint,joint_se";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        let mut row = |label: String, c: &Cylinders| {
            out.push_str(&format!(
                "{label},{},{},{},{},{},{}\n",
                c.ones.estimate,
                c.ones.stderr,
                c.blocked.estimate,
                c.blocked.stderr,
                c.joint.estimate,
                c.joint.stderr
            ));
        };
        for r in &self.rows {
            row(r.t.to_string(), &r.cylinders);
        }
        row("lower".into(), &self.lower);
        row("upper".into(), &self.upper);
        row("prediction".into(), &self.prediction);
        out
    }
}

#[derive(Default, Clone, Copy)]
struct Triple {
    ones: Tally,
    blocked: Tally,
    joint: Tally,
}

impl Triple {
    fn record(&mut self, state: &[SiteState], c: &[usize], d: &[usize]) {
        let ones = c.iter().any(|&x| state[x] == SiteState::Occupied);
        let blocked = d.iter().any(|&x| state[x] == SiteState::Blocked);
        self.ones.record(ones, false);
        self.blocked.record(blocked, false);
        self.joint.record(ones && blocked, false);
    }

    fn values(&self) -> Cylinders {
        Cylinders { ones: Value::of(&self.ones), blocked: Value::of(&self.blocked), joint: Value::of(&self.joint) }
    }
}

impl Accumulate for Triple {
    fn merge(self, o: Self) -> Self {
        Triple {
            ones: self.ones.merge(o.ones),
            blocked: self.blocked.merge(o.blocked),
            joint: self.joint.merge(o.joint),
        }
    }
}

fn run_grid(
    params: Params,
    geometry: &Geometry,
    law: &ResolvedLaw,
    times: &[f64],
    c: &[usize],
    d: &[usize],
    replicates: &Replicates,
    seed: StreamSeed,
) -> Vec<Triple> {
    accumulate(replicates, |acc: &mut Vec<Triple>, r| {
        if acc.is_empty() {
            acc.resize(times.len(), Triple::default());
        }
        let ss = StreamSeed::new(seed.seed, r);
        let mut states = Vec::new();
        law.sample_into(params.rho(), ss, &mut states);
        let horizon = *times.last().unwrap();
        if horizon == 0.0 {
            acc.iter_mut().for_each(|t| t.record(&states, c, d));
            return;
        }
        let mut run = ChunkedRun::new(params, geometry, states, horizon, ss).expect("validated horizon");
        for (k, &t) in times.iter().enumerate() {
            run.advance_to(t, |_, _, _| {});
            acc[k].record(run.process().state(), c, d);
        }
    })
}

/// Mixture prediction `s * upper + (1 - s) * lower` with a delta-method error.
fn mixture(s: Value, lower: Value, upper: Value) -> Value {
    let estimate = s.estimate * upper.estimate + (1.0 - s.estimate) * lower.estimate;
    let var = (upper.estimate - lower.estimate).powi(2) * s.stderr.powi(2)
        + s.estimate.powi(2) * upper.stderr.powi(2)
        + (1.0 - s.estimate).powi(2) * lower.stderr.powi(2);
    Value { estimate, stderr: var.sqrt() }
}

#[allow(clippy::too_many_arguments)]
pub fn convergence_diagnostic(
    params: Params,
    geometry: Arc<Geometry>,
    mu: &InitialLaw,
    c: &SiteSelection,
    d: &SiteSelection,
    options: &ConvergenceOptions,
    replicates: Replicates,
    seed: u64,
) -> Result<ConvergenceReport> {
    replicates.check()?;
    check_times(&options.t_grid)?;
    crate::tableau::check_horizon(options.horizon)?;
    if *options.t_grid.last().unwrap() > options.horizon {
        return Err(Error::InvalidWindow(format!(
            "time grid ends after the horizon {}",
            options.horizon
        )));
    }
    if params.d() != geometry.dim() {
        return Err(Error::GeometryMismatch("params and box dimensions differ".into()));
    }
    let law = mu.resolve(&geometry)?;
    let (cs, ds) = (c.resolve(&geometry)?, d.resolve(&geometry)?);
    let base = StreamSeed::from(seed);

    let grid = run_grid(params, &geometry, &law, &options.t_grid, &cs, &ds, &replicates, base);

    let surv_seed = base.derive(SURVIVAL_SALT).seed;
    let survival: Tally = accumulate(&replicates, |acc: &mut Tally, r| {
        let (alive, censored) =
            survival_path(params, &geometry, &law, &[options.horizon], StreamSeed::new(surv_seed, r));
        acc.record(alive[0], censored);
    });

    let full = ResolvedLaw::Fixed(vec![SiteState::Occupied; geometry.num_sites()]);
    let upper = run_grid(params, &geometry, &full, &[options.horizon], &cs, &ds, &replicates, base.derive(UPPER_SALT))
        .remove(0)
        .values();

    let rho = params.rho();
    let lower = Cylinders {
        ones: Value::exact(0.0),
        blocked: Value::exact(1.0 - (1.0 - rho).powi(ds.len() as i32)),
        joint: Value::exact(0.0),
    };
    let s = Value::of(&survival);
    let prediction = Cylinders {
        ones: mixture(s, lower.ones, upper.ones),
        blocked: mixture(s, lower.blocked, upper.blocked),
        joint: mixture(s, lower.joint, upper.joint),
    };
    let hash = config_hash(&serde_json::json!({
        "op": "converge",
        "params": params,
        "geometry": geometry.spec(),
        "mu": mu,
        "C": c,
        "D": d,
        "options": options,
    }));
    Ok(ConvergenceReport {
        rows: options
            .t_grid
            .iter()
            .zip(&grid)
            .map(|(&t, tr)| GridRow { t, cylinders: tr.values() })
            .collect(),
        survival: EstimateReport::from_tally("survival", survival, Some(options.horizon), surv_seed, hash.clone(), replicates),
        lower,
        upper,
        prediction,
        seed,
        config_hash: hash,
    })
}
