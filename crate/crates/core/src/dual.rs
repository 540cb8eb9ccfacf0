//! The dual process: 1's run backwards in time along reversed arrows, against
//! the time-reversed environment of the same tableau.
//!
//! For a horizon `t` the dual at time `s` sees `B̂_s = B_{t-s}`, and `Â_s` is
//! the set of sites `y` with an active path from `(y, t - s)` to some
//! `(x, t)` with `x ∈ C \ B_t`.

use std::sync::Arc;

use serde::Serialize;

use crate::config::SiteState;
use crate::error::{Error, Result};
use crate::estimators::report::{accumulate, Accumulate, config_hash, EstimateReport, Replicates, Tally};
use crate::forward::{evolve_environment_only, Process, Replayer, Trajectory};
use crate::geometry::{Geometry, DEAD_SLOT};
use crate::initial::{sample_environment, SiteSelection};
use crate::params::Params;
use crate::rng::StreamSeed;
use crate::tableau::{EventKind, EventTableau};

/// One change of the dual occupied set at dual time `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualChange {
    pub s: f64,
    pub site: u32,
    pub added: bool,
}

#[derive(Debug, Clone)]
pub struct DualRun {
    base_time: f64,
    forward_env: Trajectory,
    dual_initial_set: Vec<usize>,
    initial: Vec<usize>,
    changes: Vec<DualChange>,
    final_set: Vec<usize>,
}

impl DualRun {
    pub fn base_time(&self) -> f64 {
        self.base_time
    }

    /// Forward environment `B` on `[0, t]` started from `mu_rho`.
    pub fn forward_env(&self) -> &Trajectory {
        &self.forward_env
    }

    /// The seed set `C`.
    pub fn dual_initial_set(&self) -> &[usize] {
        &self.dual_initial_set
    }

    /// `Â_0 = C \ B_t`.
    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn changes(&self) -> &[DualChange] {
        &self.changes
    }

    /// `Â_t`.
    pub fn final_set(&self) -> &[usize] {
        &self.final_set
    }

    /// `Â_s` (after every change at dual time `<= s`).
    pub fn dual_set_at(&self, s: f64) -> Result<Vec<usize>> {
        if !(0.0..=self.base_time).contains(&s) {
            return Err(Error::InvalidWindow(format!("dual time {s} outside [0, {}]", self.base_time)));
        }
        let mut member = vec![false; self.forward_env.geometry().num_sites()];
        for &x in &self.initial {
            member[x] = true;
        }
        for c in self.changes.iter().take_while(|c| c.s <= s) {
            member[c.site as usize] = c.added;
        }
        Ok(indices(&member))
    }

    /// `B̂_s = B_{t-s}` as a blocked mask.
    pub fn env_at(&self, s: f64) -> Result<Vec<bool>> {
        if !(0.0..=self.base_time).contains(&s) {
            return Err(Error::InvalidWindow(format!("dual time {s} outside [0, {}]", self.base_time)));
        }
        let c = self.forward_env.state_at(self.base_time - s)?;
        Ok(c.states().iter().map(|&x| x == SiteState::Blocked).collect())
    }

    /// `Â_t ∩ A ≠ ∅`.
    pub fn hits(&self, a: &[usize]) -> bool {
        self.final_set.iter().any(|x| a.contains(x))
    }
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
}

fn mask_of(n: usize, sites: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &i in sites {
        m[i] = true;
    }
    m
}

/// Backward sweep shared by [`run_dual`] and the estimators. Starting from
/// `blocked0` at forward time 0, returns `(Â_t, B_t)` as masks.
pub(crate) fn dual_sweep(
    tableau: &EventTableau,
    seed_set: &[bool],
    t: f64,
    blocked0: &[bool],
    mut on_change: impl FnMut(DualChange),
) -> Result<(Vec<bool>, Vec<bool>)> {
    let geometry: &Geometry = tableau.geometry();
    let slots = geometry.slots_per_site();
    let mut env_log = Vec::new();
    let mut forward = Replayer::environment_only(tableau, blocked0)?;
    forward.advance_to(t, |c| env_log.push((c.event, c.site, c.old)));
    let blocked_t: Vec<bool> = forward.state().iter().map(|&s| s == SiteState::Blocked).collect();

    let mut env = blocked_t.clone();
    let mut member: Vec<bool> = seed_set.iter().zip(&env).map(|(&c, &b)| c && !b).collect();
    let events = tableau.events();
    let last = events.partition_point(|e| e.time <= t);
    for k in (0..last).rev() {
        let e = &events[k];
        let mut unblocked_here = false;
        if let Some(&(idx, site, old)) = env_log.last() {
            if idx as usize == k {
                env[site as usize] = old == SiteState::Blocked;
                unblocked_here = e.kind == EventKind::Unblock;
                env_log.pop();
            }
        }
        let s = t - e.time;
        let mut set = |x: usize, v: bool, member: &mut Vec<bool>| {
            if member[x] != v {
                member[x] = v;
                on_change(DualChange { s, site: x as u32, added: v });
            }
        };
        match e.kind {
            EventKind::Arrow => {
                let y = geometry.neighbor_raw(e.id as usize);
                if y == DEAD_SLOT {
                    continue;
                }
                let (x, y) = (e.id as usize / slots, y as usize);
                if member[y] && !env[x] && geometry.births_allowed(y) {
                    set(x, true, &mut member);
                }
            }
            EventKind::Death | EventKind::Block => set(e.id as usize, false, &mut member),
            EventKind::Unblock => {
                if unblocked_here {
                    set(e.id as usize, false, &mut member);
                }
            }
        }
    }
    Ok((member, blocked_t))
}

/// Dual from `C` on the tableau's own randomness up to horizon `t`; the
/// environment starts from `mu_rho` drawn on the environment stream of `env_seed`.
pub fn run_dual(
    tableau: &EventTableau,
    c: &SiteSelection,
    t: f64,
    env_seed: impl Into<StreamSeed>,
) -> Result<DualRun> {
    let geometry = tableau.geometry();
    if !(t >= 0.0 && t <= tableau.horizon()) {
        return Err(Error::InvalidHorizon(t));
    }
    let n = geometry.num_sites();
    let seed_set = c.resolve(geometry)?;
    let blocked0 = sample_environment(n, tableau.params().rho(), env_seed.into());
    let b0: Vec<Vec<i64>> = indices(&blocked0).into_iter().map(|i| geometry.coord_of(i)).collect();
    let forward_env = evolve_environment_only(tableau, &SiteSelection::Points(b0), t)?;
    let mut changes = Vec::new();
    let (final_mask, blocked_t) = dual_sweep(tableau, &mask_of(n, &seed_set), t, &blocked0, |c| changes.push(c))?;
    let initial = seed_set.iter().copied().filter(|&x| !blocked_t[x]).collect();
    Ok(DualRun {
        base_time: t,
        forward_env,
        dual_initial_set: seed_set,
        initial,
        changes,
        final_set: indices(&final_mask),
    })
}

/// Both sides of the duality identity on shared tableaus, plus the
/// self-duality side on independent randomness.
#[derive(Debug, Clone, Serialize)]
pub struct DualityEstimate {
    /// `P^{ν_A}(A_t ∩ C ≠ ∅, B_t ∩ D ≠ ∅)`, forward runs.
    pub forward: EstimateReport,
    /// `P(Â_t ∩ A ≠ ∅, B̂_0 ∩ D ≠ ∅)`, dual runs on the same tableaus.
    pub dual: EstimateReport,
    /// `P^{ν_C}(A_t ∩ A ≠ ∅, B_0 ∩ D ≠ ∅)`, forward runs on independent tableaus.
    pub self_dual: EstimateReport,
    /// Replicates where the forward and dual hit indicators differ.
    pub pathwise_mismatches: u64,
}

impl DualityEstimate {
    pub const CSV_HEADER: &'static str = "side,estimate,stderr,replicates,seed";

    pub fn csv_rows(&self) -> Vec<String> {
        [("forward", &self.forward), ("dual", &self.dual), ("self-dual", &self.self_dual)]
            .iter()
            .map(|(side, r)| format!("{side},{},{},{},{}", r.estimate, r.stderr, r.replicates, r.seed))
            .collect()
    }
}

#[derive(Default)]
struct DualityTally {
    forward: Tally,
    dual: Tally,
    self_dual: Tally,
    mismatches: u64,
}

impl Accumulate for DualityTally {
    fn merge(self, o: Self) -> Self {
        DualityTally {
            forward: self.forward.merge(o.forward),
            dual: self.dual.merge(o.dual),
            self_dual: self.self_dual.merge(o.self_dual),
            mismatches: self.mismatches + o.mismatches,
        }
    }
}

/// Salt for the independent self-duality tableaus.
const SELF_DUAL_SALT: u64 = 0x5e1f_d0a1;

fn nu_states(blocked: &[bool], a: &[bool]) -> Vec<SiteState> {
    blocked
        .iter()
        .zip(a)
        .map(|(&b, &a)| match (b, a) {
            (true, _) => SiteState::Blocked,
            (false, true) => SiteState::Occupied,
            (false, false) => SiteState::Vacant,
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn coupled_duality_estimate(
    params: Params,
    geometry: Arc<Geometry>,
    a: &SiteSelection,
    c: &SiteSelection,
    d: &SiteSelection,
    t: f64,
    replicates: Replicates,
    seed: u64,
) -> Result<DualityEstimate> {
    replicates.check()?;
    if params.d() != geometry.dim() {
        return Err(Error::GeometryMismatch("params and box dimensions differ".into()));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidHorizon(t));
    }
    let n = geometry.num_sites();
    let a_mask = mask_of(n, &a.resolve(&geometry)?);
    let c_mask = mask_of(n, &c.resolve(&geometry)?);
    let d_mask = mask_of(n, &d.resolve(&geometry)?);
    let hits = |state: &[SiteState], m: &[bool]| state.iter().zip(m).any(|(&s, &m)| m && s == SiteState::Occupied);
    let meets = |blocked: &[bool], m: &[bool]| blocked.iter().zip(m).any(|(&b, &m)| b && m);
    let rho = params.rho();

    let tally: DualityTally = accumulate(&replicates, |acc: &mut DualityTally, r| {
        let ss = StreamSeed::new(seed, r);
        let tableau = EventTableau::generate(params, geometry.clone(), t, ss).expect("validated");
        let blocked0 = sample_environment(n, rho, ss);

        let mut p = Process::new(&geometry, nu_states(&blocked0, &a_mask), false);
        for e in tableau.slice(0.0, t).expect("validated") {
            p.apply(e);
        }
        let blocked_t: Vec<bool> = p.state().iter().map(|&s| s == SiteState::Blocked).collect();
        let d_hit = meets(&blocked_t, &d_mask);
        let fwd = hits(p.state(), &c_mask);
        acc.forward.record(fwd && d_hit, false);

        let (dual_set, _) = dual_sweep(&tableau, &c_mask, t, &blocked0, |_| {}).expect("validated");
        let dual = dual_set.iter().zip(&a_mask).any(|(&x, &a)| x && a);
        acc.dual.record(dual && d_hit, false);
        acc.mismatches += (fwd != dual) as u64;

        let aux = ss.derive(SELF_DUAL_SALT);
        let tableau = EventTableau::generate(params, geometry.clone(), t, aux).expect("validated");
        let blocked0 = sample_environment(n, rho, aux);
        let mut p = Process::new(&geometry, nu_states(&blocked0, &c_mask), false);
        for e in tableau.slice(0.0, t).expect("validated") {
            p.apply(e);
        }
        acc.self_dual.record(hits(p.state(), &a_mask) && meets(&blocked0, &d_mask), false);
    });

    let hash = config_hash(&serde_json::json!({
        "op": "duality",
        "params": params,
        "geometry": geometry.spec(),
        "A": a, "C": c, "D": d, "t": t,
    }));
    let report = |label: &str, tl: Tally| EstimateReport::from_tally(label, tl, Some(t), seed, hash.clone(), replicates);
    Ok(DualityEstimate {
        forward: report("forward", tally.forward),
        dual: report("dual", tally.dual),
        self_dual: report("self-dual", tally.self_dual),
        pathwise_mismatches: tally.mismatches,
    })
}
