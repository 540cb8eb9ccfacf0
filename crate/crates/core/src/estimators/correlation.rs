//! Empirical check of positive correlations between increasing cylinder events.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::SiteState;
use crate::error::{Error, Result};
use crate::forward::ChunkedRun;
use crate::geometry::Geometry;
use crate::initial::{InitialLaw, SiteSelection};
use crate::params::Params;
use crate::rng::StreamSeed;

use super::report::{accumulate, config_hash, Accumulate, Replicates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "op", content = "state")]
pub enum Requirement {
    AtLeast(SiteState),
    AtMost(SiteState),
    Exactly(SiteState),
}

impl Requirement {
    fn test(self, s: SiteState) -> bool {
        match self {
            Requirement::AtLeast(r) => s >= r,
            Requirement::AtMost(r) => s <= r,
            Requirement::Exactly(r) => s == r,
        }
    }

    /// Increasing in the order `-1 < 0 < 1` (constant requirements included).
    pub fn is_increasing(self) -> bool {
        matches!(
            self,
            Requirement::AtLeast(_) | Requirement::AtMost(SiteState::Occupied) | Requirement::Exactly(SiteState::Occupied)
        )
    }
}

/// `{ eta(x) satisfies requirement for every x in sites }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderEvent {
    pub sites: SiteSelection,
    pub requirement: Requirement,
}

impl CylinderEvent {
    /// All sites of the set occupied.
    pub fn occupied(sites: SiteSelection) -> Self {
        CylinderEvent { sites, requirement: Requirement::AtLeast(SiteState::Occupied) }
    }

    pub fn check_increasing(&self) -> Result<()> {
        if self.requirement.is_increasing() {
            Ok(())
        } else {
            Err(Error::NonMonotoneEvent(format!("{:?}", self.requirement)))
        }
    }
}

pub(crate) struct BoundEvent {
    sites: Vec<usize>,
    requirement: Requirement,
}

impl BoundEvent {
    pub(crate) fn new(event: &CylinderEvent, geometry: &Geometry) -> Result<Self> {
        Ok(BoundEvent { sites: event.sites.resolve(geometry)?, requirement: event.requirement })
    }

    pub(crate) fn holds(&self, state: &[SiteState]) -> bool {
        self.sites.iter().all(|&s| self.requirement.test(state[s]))
    }
}

/// Cell counts of the joint `(f, g)` outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl PairCounts {
    pub fn record(&mut self, f: bool, g: bool) {
        match (f, g) {
            (true, true) => self.n11 += 1,
            (true, false) => self.n10 += 1,
            (false, true) => self.n01 += 1,
            (false, false) => self.n00 += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }
}

impl Accumulate for PairCounts {
    fn merge(self, o: Self) -> Self {
        PairCounts {
            n11: self.n11 + o.n11,
            n10: self.n10 + o.n10,
            n01: self.n01 + o.n01,
            n00: self.n00 + o.n00,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub counts: PairCounts,
    pub p_f: f64,
    pub p_g: f64,
    pub p_fg: f64,
    pub covariance: f64,
    pub stderr: f64,
    /// The one-sided test fails only for a covariance below `-4 stderr`.
    pub passes: bool,
    pub seed: u64,
    pub config_hash: String,
}

impl CorrelationReport {
    pub fn from_counts(counts: PairCounts, seed: u64, config_hash: String) -> Self {
        let n = counts.total() as f64;
        let p_f = (counts.n11 + counts.n10) as f64 / n;
        let p_g = (counts.n11 + counts.n01) as f64 / n;
        let p_fg = counts.n11 as f64 / n;
        let covariance = p_fg - p_f * p_g;
        // delta-method variance of the plug-in covariance
        let cells = [
            (counts.n11, 1.0, 1.0),
            (counts.n10, 1.0, 0.0),
            (counts.n01, 0.0, 1.0),
            (counts.n00, 0.0, 0.0),
        ];
        let m22: f64 = cells
            .iter()
            .map(|&(c, f, g)| c as f64 / n * ((f - p_f) * (g - p_g)).powi(2))
            .sum();
        let stderr = ((m22 - covariance * covariance).max(0.0) / n).sqrt();
        CorrelationReport {
            counts,
            p_f,
            p_g,
            p_fg,
            covariance,
            stderr,
            passes: covariance >= -4.0 * stderr,
            seed,
            config_hash,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn check_positive_correlations(
    params: Params,
    geometry: Arc<Geometry>,
    init: &InitialLaw,
    t: f64,
    f: &CylinderEvent,
    g: &CylinderEvent,
    replicates: Replicates,
    seed: u64,
) -> Result<CorrelationReport> {
    replicates.check()?;
    f.check_increasing()?;
    g.check_increasing()?;
    crate::tableau::check_horizon(t)?;
    if params.d() != geometry.dim() {
        return Err(Error::GeometryMismatch("params and box dimensions differ".into()));
    }
    let law = init.resolve(&geometry)?;
    let (bf, bg) = (BoundEvent::new(f, &geometry)?, BoundEvent::new(g, &geometry)?);
    let counts: PairCounts = accumulate(&replicates, |acc: &mut PairCounts, r| {
        let ss = StreamSeed::new(seed, r);
        let mut states = Vec::new();
        law.sample_into(params.rho(), ss, &mut states);
        let mut run = ChunkedRun::new(params, &geometry, states, t, ss).expect("validated horizon");
        run.advance_to(t, |_, _, _| {});
        let s = run.process().state();
        acc.record(bf.holds(s), bg.holds(s));
    });
    let hash = config_hash(&serde_json::json!({
        "op": "correlation",
        "params": params,
        "geometry": geometry.spec(),
        "init": init,
        "t": t,
        "f": f,
        "g": g,
    }));
    Ok(CorrelationReport::from_counts(counts, seed, hash))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Boundary;

    fn ring(n: usize) -> Arc<Geometry> {
        Arc::new(Geometry::line(n, Boundary::Periodic).unwrap())
    }

    #[test]
    fn monotone_requirements() {
        use SiteState::*;
        assert!(Requirement::AtLeast(Vacant).is_increasing());
        assert!(Requirement::AtLeast(Occupied).is_increasing());
        assert!(!Requirement::AtMost(Vacant).is_increasing());
        assert!(!Requirement::Exactly(Vacant).is_increasing());
        assert!(!Requirement::Exactly(Blocked).is_increasing());
        let p = Params::new(1, 1.0, 1.0, 1.0).unwrap();
        let bad = CylinderEvent { sites: SiteSelection::point(vec![0]), requirement: Requirement::AtMost(Vacant) };
        let ok = CylinderEvent::occupied(SiteSelection::point(vec![1]));
        let law = InitialLaw::Nu(SiteSelection::All);
        assert!(matches!(
            check_positive_correlations(p, ring(3), &law, 1.0, &bad, &ok, Replicates::all(10), 1),
            Err(Error::NonMonotoneEvent(_))
        ));
    }

    #[test]
    fn same_event_gives_variance() {
        let p = Params::new(1, 1.0, 2.0, 1.0).unwrap();
        let f = CylinderEvent::occupied(SiteSelection::point(vec![0]));
        let law = InitialLaw::Nu(SiteSelection::All);
        let r = check_positive_correlations(p, ring(4), &law, 1.0, &f, &f, Replicates::all(4000), 3).unwrap();
        assert!((r.covariance - r.p_f * (1.0 - r.p_f)).abs() < 1e-12);
        assert!(r.covariance >= 0.0 && r.passes);
    }

    #[test]
    fn constant_event_has_zero_covariance() {
        let p = Params::new(1, 1.0, 2.0, 1.0).unwrap();
        let f = CylinderEvent::occupied(SiteSelection::empty());
        let g = CylinderEvent::occupied(SiteSelection::point(vec![2]));
        let law = InitialLaw::Nu(SiteSelection::All);
        let r = check_positive_correlations(p, ring(4), &law, 1.0, &f, &g, Replicates::all(2000), 3).unwrap();
        assert_eq!(r.p_f, 1.0);
        assert!(r.covariance.abs() < 1e-12);
        assert!(r.passes);
    }
}
