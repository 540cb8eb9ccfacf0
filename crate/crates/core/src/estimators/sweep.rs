//! Parameter scans of finite-horizon survival and pseudo-critical bisection.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::SiteState;
use crate::error::{Error, Result};
use crate::forward::Process;
use crate::geometry::Geometry;
use crate::params::Params;
use crate::rng::StreamSeed;
use crate::tableau::EventTableau;

use super::report::{accumulate, config_hash, Accumulate, EstimateReport, Replicates, Tally};
use super::survival::{survival_curve, SurvivalMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Beta,
    Delta,
    Alpha,
}

impl Axis {
    pub fn apply(self, params: Params, value: f64) -> Result<Params> {
        match self {
            Axis::Beta => params.with_beta(value),
            Axis::Delta => params.with_delta(value),
            Axis::Alpha => params.with_alpha(value),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Beta => "beta",
            Axis::Delta => "delta",
            Axis::Alpha => "alpha",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub horizon: f64,
    pub reports: Vec<EstimateReport>,
    /// Replicates whose survival indicator decreased along the chain
    /// (beta axis only, where runs are pathwise coupled).
    pub pathwise_violations: Option<u64>,
}

impl SweepResult {
    pub const CSV_HEADER: &'static str =
        "axis,value,estimate,stderr,ci_low,ci_high,lower,upper,replicates,horizon,seed,config_hash";

    /// Phase-diagram table, one row per axis value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (v, r) in self.values.iter().zip(&self.reports) {
            let (lo, hi) = r.interval(2.0);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                self.axis.name(),
                v,
                r.estimate,
                r.stderr,
                lo,
                hi,
                r.lower,
                r.upper,
                r.replicates,
                self.horizon,
                r.seed,
                r.config_hash
            );
        }
        out
    }
}

/// Replay until `horizon` or extinction; returns `(alive, censored)`.
fn survives(tableau: &EventTableau, geometry: &Geometry, states: Vec<SiteState>, horizon: f64) -> (bool, bool) {
    let mut p = Process::new(geometry, states, false);
    for e in tableau.events() {
        if e.time > horizon || p.occupied() == 0 {
            break;
        }
        p.apply(e);
    }
    (p.occupied() > 0, p.censored())
}

#[derive(Default)]
struct ChainTally {
    levels: Vec<Tally>,
    violations: u64,
}

impl Accumulate for ChainTally {
    fn merge(self, o: Self) -> Self {
        ChainTally { levels: self.levels.merge(o.levels), violations: self.violations + o.violations }
    }
}

fn check_values(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidSweep("no axis values".into()));
    }
    if values.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidSweep("axis values must be ascending".into()));
    }
    Ok(())
}

/// Survival estimates along an axis. On the beta axis one tableau is drawn at
/// the largest value per replicate and thinned down the chain, so survival is
/// monotone replicate by replicate; other axes use fresh tableaus per value
/// with common replicate seeds.
#[allow(clippy::too_many_arguments)]
pub fn monotonicity_sweep(
    params: Params,
    axis: Axis,
    values: &[f64],
    geometry: Arc<Geometry>,
    mode: &SurvivalMode,
    horizon: f64,
    replicates: Replicates,
    seed: u64,
) -> Result<SweepResult> {
    replicates.check()?;
    check_values(values)?;
    for &v in values {
        axis.apply(params, v)?;
    }
    if axis != Axis::Beta {
        let reports = values
            .iter()
            .map(|&v| {
                let p = axis.apply(params, v)?;
                Ok(survival_curve(p, geometry.clone(), mode, &[horizon], replicates, seed)?.remove(0))
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(SweepResult { axis, values: values.to_vec(), horizon, reports, pathwise_violations: None });
    }

    crate::tableau::check_horizon(horizon)?;
    if params.d() != geometry.dim() {
        return Err(Error::GeometryMismatch("params and box dimensions differ".into()));
    }
    let top = params.with_beta(*values.last().unwrap())?;
    let law = mode.law(geometry.dim()).resolve(&geometry)?;
    let tally: ChainTally = accumulate(&replicates, |acc: &mut ChainTally, r| {
        if acc.levels.is_empty() {
            acc.levels = vec![Tally::default(); values.len()];
        }
        let ss = StreamSeed::new(seed, r);
        let mut init = Vec::new();
        law.sample_into(top.rho(), ss, &mut init);
        let mut tableau = EventTableau::generate(top, geometry.clone(), horizon, ss).expect("validated");
        let mut above = true;
        for (k, &beta) in values.iter().enumerate().rev() {
            tableau = tableau.thin_arrows(beta, ss.derive(k as u64)).expect("descending chain");
            let (alive, censored) = survives(&tableau, &geometry, init.clone(), horizon);
            acc.levels[k].record(alive, censored);
            if alive && !above {
                acc.violations += 1;
            }
            above = alive;
        }
    });
    let reports = values
        .iter()
        .zip(tally.levels)
        .map(|(&beta, t)| {
            let hash = config_hash(&serde_json::json!({
                "op": "sweep",
                "params": params.with_beta(beta).expect("validated"),
                "chain": values,
                "geometry": geometry.spec(),
                "mode": mode,
                "horizon": horizon,
            }));
            EstimateReport::from_tally("sweep-beta", t, Some(horizon), seed, hash, replicates)
        })
        .collect();
    Ok(SweepResult {
        axis,
        values: values.to_vec(),
        horizon,
        reports,
        pathwise_violations: Some(tally.violations),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionStep {
    pub value: f64,
    pub report: EstimateReport,
}

/// Bracket around the value where survival at `horizon` crosses `target`.
/// This is a horizon-dependent pseudo-critical point, not a critical value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionResult {
    pub label: String,
    pub axis: Axis,
    pub horizon: f64,
    pub target: f64,
    pub lo: f64,
    pub hi: f64,
    pub history: Vec<BisectionStep>,
}

impl BisectionResult {
    pub fn overlaps(&self, other: &BisectionResult) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionOptions {
    pub axis: Axis,
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_target")]
    pub target: f64,
    pub horizon: f64,
    pub tolerance: f64,
}

pub fn default_target() -> f64 {
    0.5
}

pub fn bisect_pseudo_critical(
    template: Params,
    geometry: Arc<Geometry>,
    mode: &SurvivalMode,
    options: &BisectionOptions,
    replicates: Replicates,
    seed: u64,
) -> Result<BisectionResult> {
    let BisectionOptions { axis, lo, hi, target, horizon, tolerance } = *options;
    if axis == Axis::Alpha {
        return Err(Error::InvalidSweep("survival is not known to be monotone in alpha".into()));
    }
    if !(lo < hi) || !(tolerance > 0.0) || !(0.0..=1.0).contains(&target) {
        return Err(Error::InvalidSweep(format!(
            "bracket ({lo}, {hi}), tolerance {tolerance}, target {target}"
        )));
    }
    let estimate = |v: f64| -> Result<BisectionStep> {
        let p = axis.apply(template, v)?;
        let report = survival_curve(p, geometry.clone(), mode, &[horizon], replicates, seed)?.remove(0);
        Ok(BisectionStep { value: v, report })
    };
    let label = format!("pseudo-critical {} at horizon {horizon}", axis.name());
    let mut history = vec![estimate(lo)?];
    let at_lo = history[0].report.estimate;
    if target == 0.0 && at_lo == 0.0 {
        return Ok(BisectionResult { label, axis, horizon, target, lo, hi: lo, history });
    }
    history.push(estimate(hi)?);
    let at_hi = history[1].report.estimate;
    if !(at_lo < target && target < at_hi) {
        return Err(Error::Bracket(format!(
            "survival {at_lo} at {lo} and {at_hi} at {hi} do not straddle {target}"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a >= tolerance {
        let mid = 0.5 * (a + b);
        let step = estimate(mid)?;
        if step.report.estimate < target {
            a = mid;
        } else {
            b = mid;
        }
        history.push(step);
    }
    Ok(BisectionResult { label, axis, horizon, target, lo: a, hi: b, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Boundary;

    fn cube(r: i64) -> Arc<Geometry> {
        Arc::new(Geometry::cube(1, r, Boundary::Open).unwrap())
    }

    #[test]
    fn beta_chain_is_pathwise_monotone() {
        let p = Params::new(1, 0.3, 1.0, 5.0).unwrap();
        let s = monotonicity_sweep(p, Axis::Beta, &[0.0, 1.0, 2.5, 4.0], cube(15), &SurvivalMode::S2, 3.0, Replicates::all(2000), 2)
            .unwrap();
        assert_eq!(s.pathwise_violations, Some(0));
        for w in s.reports.windows(2) {
            assert!(w[0].tally.hits <= w[1].tally.hits);
        }
        let want = (-(1.3f64) * 3.0).exp();
        assert!((s.reports[0].estimate - want).abs() <= 3.0 * s.reports[0].stderr.max(1e-3));
        assert_eq!(s.to_csv().lines().count(), 5);
    }

    #[test]
    fn equal_values_give_identical_reports() {
        let p = Params::new(1, 0.3, 1.0, 5.0).unwrap();
        let s = monotonicity_sweep(p, Axis::Beta, &[2.0, 2.0], cube(10), &SurvivalMode::S2, 2.0, Replicates::all(500), 4).unwrap();
        assert_eq!(s.reports[0], s.reports[1]);
    }

    #[test]
    fn sweep_errors() {
        let p = Params::new(1, 0.3, 1.0, 5.0).unwrap();
        let m = SurvivalMode::S2;
        assert!(monotonicity_sweep(p, Axis::Beta, &[2.0, 1.0], cube(5), &m, 2.0, Replicates::all(5), 1).is_err());
        assert!(monotonicity_sweep(p, Axis::Delta, &[], cube(5), &m, 2.0, Replicates::all(5), 1).is_err());
        let s = monotonicity_sweep(p, Axis::Delta, &[0.5, 5.0], cube(5), &m, 2.0, Replicates::all(50), 1).unwrap();
        assert_eq!(s.pathwise_violations, None);
    }

    #[test]
    fn bisection_brackets() {
        let p = Params::new(1, 0.5, 0.0, 5.0).unwrap();
        let opts = BisectionOptions { axis: Axis::Beta, lo: 0.0, hi: 40.0, target: 0.5, horizon: 4.0, tolerance: 0.5 };
        let r = bisect_pseudo_critical(p, cube(20), &SurvivalMode::S2, &opts, Replicates::all(1000), 7).unwrap();
        assert!(r.hi - r.lo < 0.5);
        assert!(r.label.contains("horizon"));
        let lo_est = r.history.iter().find(|s| s.value == r.lo).unwrap().report.estimate;
        assert!(lo_est < 0.5);

        let zero = BisectionOptions { target: 0.0, ..opts.clone() };
        let r = bisect_pseudo_critical(p.with_alpha(50.0).unwrap(), cube(5), &SurvivalMode::S2, &zero, Replicates::all(200), 7).unwrap();
        assert_eq!((r.lo, r.hi), (0.0, 0.0));

        let high = BisectionOptions { target: 0.999, ..opts.clone() };
        assert!(matches!(
            bisect_pseudo_critical(p, cube(20), &SurvivalMode::S2, &high, Replicates::all(200), 7),
            Err(Error::Bracket(_))
        ));
        let alpha = BisectionOptions { axis: Axis::Alpha, ..opts };
        assert!(bisect_pseudo_critical(p, cube(5), &SurvivalMode::S2, &alpha, Replicates::all(10), 7).is_err());
    }
}
