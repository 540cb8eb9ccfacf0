//! Finite-horizon survival from `nu_A` (S1) or from a lone 1 at the origin (S2).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ChunkedRun;
use crate::geometry::Geometry;
use crate::initial::{InitialLaw, ResolvedLaw, SiteSelection};
use crate::params::Params;
use crate::rng::StreamSeed;

use super::report::{accumulate, config_hash, EstimateReport, Replicates, Tally};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "sites")]
pub enum SurvivalMode {
    /// Start from `nu_A`.
    S1(SiteSelection),
    /// Start from `chi_{0}`: one 1 at the origin, everything else blocked.
    S2,
}

impl SurvivalMode {
    pub fn law(&self, d: usize) -> InitialLaw {
        match self {
            SurvivalMode::S1(a) => InitialLaw::Nu(a.clone()),
            SurvivalMode::S2 => InitialLaw::Chi(SiteSelection::origin(d)),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            SurvivalMode::S1(_) => "survival-s1",
            SurvivalMode::S2 => "survival-s2",
        }
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidWindow("time grid must be nonempty and ascending".into()));
    }
    crate::tableau::check_horizon(*times.last().unwrap())?;
    if times[0] < 0.0 {
        return Err(Error::InvalidWindow("negative time in grid".into()));
    }
    Ok(())
}

/// One replicate: `A_t ≠ ∅` at each of the ascending `times`, plus the
/// censoring flag. Stops drawing marks once the 1's are extinct.
pub(crate) fn survival_path(
    params: Params,
    geometry: &Geometry,
    law: &ResolvedLaw,
    times: &[f64],
    seed: StreamSeed,
) -> (Vec<bool>, bool) {
    let mut states = Vec::with_capacity(geometry.num_sites());
    law.sample_into(params.rho(), seed, &mut states);
    let horizon = *times.last().expect("nonempty grid");
    let mut run = ChunkedRun::new(params, geometry, states, horizon, seed).expect("validated horizon");
    let mut alive = Vec::with_capacity(times.len());
    for &t in times {
        if run.process().occupied() == 0 {
            alive.push(false);
            continue;
        }
        run.advance_to(t, |_, _, _| {});
        alive.push(run.process().occupied() > 0);
    }
    (alive, run.process().censored())
}

fn prepare(
    params: &Params,
    geometry: &Geometry,
    mode: &SurvivalMode,
) -> Result<InitialLaw> {
    if params.d() != geometry.dim() {
        return Err(Error::GeometryMismatch("params and box dimensions differ".into()));
    }
    if matches!(mode, SurvivalMode::S2) && !geometry.contains(&vec![0; geometry.dim()]) {
        return Err(Error::OutsideBox(vec![0; geometry.dim()]));
    }
    Ok(mode.law(geometry.dim()))
}

/// Survival estimates at each time of an ascending grid, all from the same runs.
pub fn survival_curve(
    params: Params,
    geometry: Arc<Geometry>,
    mode: &SurvivalMode,
    times: &[f64],
    replicates: Replicates,
    seed: u64,
) -> Result<Vec<EstimateReport>> {
    replicates.check()?;
    check_times(times)?;
    let law = prepare(&params, &geometry, mode)?.resolve(&geometry)?;
    let tallies: Vec<Tally> = accumulate(&replicates, |acc: &mut Vec<Tally>, r| {
        if acc.is_empty() {
            acc.resize(times.len(), Tally::default());
        }
        let (alive, censored) = survival_path(params, &geometry, &law, times, StreamSeed::new(seed, r));
        for (tally, a) in acc.iter_mut().zip(alive) {
            tally.record(a, censored);
        }
    });
    let hash = config_hash(&serde_json::json!({
        "op": "survival",
        "params": params,
        "geometry": geometry.spec(),
        "mode": mode,
        "times": times,
    }));
    Ok(tallies
        .into_iter()
        .zip(times)
        .map(|(t, &h)| EstimateReport::from_tally(mode.label(), t, Some(h), seed, hash.clone(), replicates))
        .collect())
}

/// `P(A_horizon ≠ ∅)` with its censoring bracket.
pub fn estimate_survival(
    params: Params,
    geometry: Arc<Geometry>,
    mode: &SurvivalMode,
    horizon: f64,
    replicates: Replicates,
    seed: u64,
) -> Result<EstimateReport> {
    Ok(survival_curve(params, geometry, mode, &[horizon], replicates, seed)?.remove(0))
}
