//! Sequential replay of a tableau: the forward process `t -> (A_t, B_t)`.
//!
//! Event semantics:
//! * `Arrow(x -> y)`: if `x` is occupied, `y` vacant and `y` may receive births, `y` becomes occupied.
//! * `Death(x)`: an occupied `x` becomes vacant.
//! * `Block(x)`: `x` becomes blocked, killing any occupant.
//! * `Unblock(x)`: a blocked `x` becomes vacant.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{Configuration, SiteState};
use crate::error::{Error, Result};
use crate::geometry::{Boundary, Geometry, Region};
use crate::initial::SiteSelection;
use crate::params::Params;
use crate::rng::StreamSeed;
use crate::tableau::{check_horizon, chunk_count, generate_chunk, Event, EventKind, EventTableau, GENERATION_SPAN};

const SNAPSHOT_STRIDE: usize = 1024;

/// One effective state change. `event` indexes the tableau mark that caused it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Change {
    pub time: f64,
    pub site: u32,
    pub old: SiteState,
    pub new: SiteState,
    pub event: u32,
}

/// Mutable replay state shared by [`Replayer`] and the streaming estimators.
#[derive(Debug, Clone)]
pub(crate) struct Process<'g> {
    geometry: &'g Geometry,
    slots: usize,
    state: Vec<SiteState>,
    occupied: usize,
    watch_edges: bool,
    censored: bool,
    extinction: Option<f64>,
    environment_only: bool,
}

impl<'g> Process<'g> {
    pub(crate) fn new(geometry: &'g Geometry, state: Vec<SiteState>, environment_only: bool) -> Self {
        let occupied = state.iter().filter(|&&s| s == SiteState::Occupied).count();
        let watch_edges =
            !environment_only && geometry.birth_domain().is_none() && geometry.boundary() == Boundary::Open;
        let censored = watch_edges
            && state
                .iter()
                .enumerate()
                .any(|(i, &s)| s == SiteState::Occupied && geometry.touches_boundary(i));
        Process {
            geometry,
            slots: geometry.slots_per_site(),
            state,
            occupied,
            watch_edges,
            censored,
            extinction: (occupied == 0).then_some(0.0),
            environment_only,
        }
    }

    #[inline]
    pub(crate) fn state(&self) -> &[SiteState] {
        &self.state
    }

    #[inline]
    pub(crate) fn occupied(&self) -> usize {
        self.occupied
    }

    /// Apply one mark; returns `(site, old, new)` if the state changed.
    #[inline]
    pub(crate) fn apply(&mut self, e: &Event) -> Option<(usize, SiteState, SiteState)> {
        use SiteState::*;
        let (site, new) = match e.kind {
            EventKind::Arrow => {
                if self.environment_only {
                    return None;
                }
                let x = e.id as usize / self.slots;
                if self.state[x] != Occupied {
                    return None;
                }
                let y = self.geometry.neighbor_raw(e.id as usize);
                if y == crate::geometry::DEAD_SLOT {
                    return None;
                }
                let y = y as usize;
                if self.state[y] != Vacant || !self.geometry.births_allowed(y) {
                    return None;
                }
                (y, Occupied)
            }
            EventKind::Death => {
                let x = e.id as usize;
                if self.environment_only || self.state[x] != Occupied {
                    return None;
                }
                (x, Vacant)
            }
            EventKind::Block => {
                let x = e.id as usize;
                if self.state[x] == Blocked {
                    return None;
                }
                (x, Blocked)
            }
            EventKind::Unblock => {
                let x = e.id as usize;
                if self.state[x] != Blocked {
                    return None;
                }
                (x, Vacant)
            }
        };
        let old = self.state[site];
        self.state[site] = new;
        if new == Occupied {
            self.occupied += 1;
            if self.watch_edges && self.geometry.touches_boundary(site) {
                self.censored = true;
            }
        } else if old == Occupied {
            self.occupied -= 1;
            if self.occupied == 0 {
                self.extinction = Some(e.time);
            }
        }
        Some((site, old, new))
    }

    pub(crate) fn censored(&self) -> bool {
        self.censored
    }

    pub(crate) fn extinction_time(&self) -> Option<f64> {
        self.extinction
    }

    pub(crate) fn into_state(self) -> Vec<SiteState> {
        self.state
    }
}

/// Incremental replay of a tableau from a fixed initial configuration.
pub struct Replayer<'a> {
    tableau: &'a EventTableau,
    process: Process<'a>,
    cursor: usize,
    time: f64,
}

impl<'a> Replayer<'a> {
    pub fn new(tableau: &'a EventTableau, init: &Configuration) -> Result<Self> {
        init.geometry().check_same(tableau.geometry())?;
        Ok(Replayer {
            tableau,
            process: Process::new(tableau.geometry(), init.states().to_vec(), false),
            cursor: 0,
            time: 0.0,
        })
    }

    /// Replay from raw states (length must match the box).
    pub fn from_states(tableau: &'a EventTableau, states: Vec<SiteState>) -> Result<Self> {
        if states.len() != tableau.geometry().num_sites() {
            return Err(Error::GeometryMismatch(format!(
                "{} states for {} sites",
                states.len(),
                tableau.geometry().num_sites()
            )));
        }
        Ok(Replayer {
            tableau,
            process: Process::new(tableau.geometry(), states, false),
            cursor: 0,
            time: 0.0,
        })
    }

    /// Replay only the environment marks from the given blocked mask.
    pub fn environment_only(tableau: &'a EventTableau, blocked: &[bool]) -> Result<Self> {
        if blocked.len() != tableau.geometry().num_sites() {
            return Err(Error::GeometryMismatch("blocked mask has the wrong length".into()));
        }
        let states = blocked
            .iter()
            .map(|&b| if b { SiteState::Blocked } else { SiteState::Vacant })
            .collect();
        Ok(Replayer {
            tableau,
            process: Process::new(tableau.geometry(), states, true),
            cursor: 0,
            time: 0.0,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn state(&self) -> &[SiteState] {
        self.process.state()
    }

    pub fn occupied_count(&self) -> usize {
        self.process.occupied()
    }

    pub fn censored(&self) -> bool {
        self.process.censored()
    }

    /// First time the occupied set became empty, if it has.
    pub fn extinction_time(&self) -> Option<f64> {
        self.process.extinction_time()
    }

    /// Apply every mark with time `<= t`, reporting effective changes.
    pub fn advance_to(&mut self, t: f64, mut on_change: impl FnMut(&Change)) {
        let events = self.tableau.events();
        while let Some(e) = events.get(self.cursor) {
            if e.time > t {
                break;
            }
            if let Some((site, old, new)) = self.process.apply(e) {
                on_change(&Change {
                    time: e.time,
                    site: site as u32,
                    old,
                    new,
                    event: self.cursor as u32,
                });
            }
            self.cursor += 1;
        }
        self.time = self.time.max(t);
    }

    /// Apply the next mark (if any, and if it is not past `limit`).
    pub fn step(&mut self, limit: f64) -> Option<(f64, Option<Change>)> {
        let e = self.tableau.events().get(self.cursor)?;
        if e.time > limit {
            return None;
        }
        let change = self.process.apply(e).map(|(site, old, new)| Change {
            time: e.time,
            site: site as u32,
            old,
            new,
            event: self.cursor as u32,
        });
        self.cursor += 1;
        self.time = e.time;
        Some((e.time, change))
    }

    pub fn into_state(self) -> Vec<SiteState> {
        self.process.into_state()
    }
}

/// Replay that draws tableau chunks on demand, so a run can stop early.
/// The marks seen are exactly those of `EventTableau::generate` with the same
/// arguments.
pub(crate) struct ChunkedRun<'g> {
    params: Params,
    geometry: &'g Geometry,
    seed: StreamSeed,
    horizon: f64,
    process: Process<'g>,
    buf: Vec<Event>,
    pos: usize,
    next_chunk: u64,
}

impl<'g> ChunkedRun<'g> {
    pub(crate) fn new(
        params: Params,
        geometry: &'g Geometry,
        states: Vec<SiteState>,
        horizon: f64,
        seed: StreamSeed,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        Ok(ChunkedRun {
            params,
            geometry,
            seed,
            horizon,
            process: Process::new(geometry, states, false),
            buf: Vec::new(),
            pos: 0,
            next_chunk: 0,
        })
    }

    pub(crate) fn process(&self) -> &Process<'g> {
        &self.process
    }

    /// Apply every mark with time `<= t`, calling `on_change` after each effective one.
    pub(crate) fn advance_to(&mut self, t: f64, mut on_change: impl FnMut(&Process<'g>, f64, usize)) {
        let t = t.min(self.horizon);
        loop {
            while let Some(e) = self.buf.get(self.pos) {
                if e.time > t {
                    return;
                }
                if let Some((site, _, _)) = self.process.apply(e) {
                    on_change(&self.process, e.time, site);
                }
                self.pos += 1;
            }
            if self.next_chunk >= chunk_count(self.horizon) || self.next_chunk as f64 * GENERATION_SPAN >= t {
                return;
            }
            self.buf.clear();
            self.pos = 0;
            generate_chunk(&self.params, self.geometry, self.seed, self.next_chunk, self.horizon, &mut self.buf);
            self.next_chunk += 1;
        }
    }
}

/// Piecewise-constant path of the configuration on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    initial: Configuration,
    horizon: f64,
    changes: Vec<Change>,
    snapshots: Vec<Vec<SiteState>>,
    extinction: Option<f64>,
    censored: bool,
}

impl Trajectory {
    fn record(tableau: &EventTableau, initial: Configuration, mut replayer: Replayer<'_>, horizon: f64) -> Self {
        let mut changes = Vec::new();
        let mut snapshots = vec![initial.states().to_vec()];
        let mut live = initial.states().to_vec();
        replayer.advance_to(horizon, |c| {
            changes.push(*c);
            live[c.site as usize] = c.new;
            if changes.len() % SNAPSHOT_STRIDE == 0 {
                snapshots.push(live.clone());
            }
        });
        let _ = tableau;
        Trajectory {
            initial,
            horizon,
            changes,
            snapshots,
            extinction: replayer.extinction_time(),
            censored: replayer.censored(),
        }
    }

    pub fn initial(&self) -> &Configuration {
        &self.initial
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        self.initial.geometry()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn changes(&self) -> &[Change] {
        &self.changes
    }

    /// `tau = inf { t : A_t empty }` if it falls inside the horizon.
    pub fn extinction_time(&self) -> Option<f64> {
        self.extinction
    }

    /// An occupied site touched an open boundary (only tracked without a birth domain).
    pub fn censored(&self) -> bool {
        self.censored
    }

    /// Configuration immediately after the last change at time `<= t`.
    pub fn state_at(&self, t: f64) -> Result<Configuration> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::InvalidWindow(format!(
                "time {t} outside [0, {}]",
                self.horizon
            )));
        }
        let upto = self.changes.partition_point(|c| c.time <= t);
        let snap = (upto / SNAPSHOT_STRIDE).min(self.snapshots.len() - 1);
        let mut states = self.snapshots[snap].clone();
        for c in &self.changes[snap * SNAPSHOT_STRIDE..upto] {
            states[c.site as usize] = c.new;
        }
        Configuration::new(self.initial.geometry().clone(), states)
    }

    pub fn final_state(&self) -> Configuration {
        self.state_at(self.horizon).expect("horizon is in range")
    }

    /// Maximal occupancy intervals of `site` within `[0, horizon]`; the flag
    /// marks an interval that is still open at the horizon (closed there).
    pub fn occupied_intervals(&self, site: usize) -> Vec<(f64, f64, bool)> {
        let mut out = Vec::new();
        let mut start = (self.initial.get(site) == SiteState::Occupied).then_some(0.0);
        for c in self.changes.iter().filter(|c| c.site as usize == site) {
            match (start, c.new) {
                (None, SiteState::Occupied) => start = Some(c.time),
                (Some(a), s) if s != SiteState::Occupied => {
                    out.push((a, c.time, false));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(a) = start {
            out.push((a, self.horizon, true));
        }
        out
    }

    /// CSV change-log: `time,site,old,new` (site is the row-major index).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,site,old,new\n");
        for c in &self.changes {
            let _ = writeln!(out, "{},{},{},{}", c.time, c.site, c.old.value(), c.new.value());
        }
        out
    }

    pub fn snapshots_json(&self, times: &[f64]) -> Result<serde_json::Value> {
        let snaps = times
            .iter()
            .map(|&t| {
                let c = self.state_at(t)?;
                Ok(serde_json::json!({
                    "time": t,
                    "states": c.states().iter().map(|s| s.value()).collect::<Vec<_>>(),
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(serde_json::json!({
            "geometry": self.geometry().spec(),
            "horizon": self.horizon,
            "snapshots": snaps,
        }))
    }
}

fn check_run(tableau: &EventTableau, geometry: &Geometry, horizon: f64) -> Result<()> {
    geometry.check_same(tableau.geometry())?;
    if !(horizon >= 0.0 && horizon <= tableau.horizon()) {
        return Err(Error::InvalidHorizon(horizon));
    }
    Ok(())
}

/// Replay `tableau` from `init` up to `horizon`.
pub fn evolve(tableau: &EventTableau, init: &Configuration, horizon: f64) -> Result<Trajectory> {
    check_run(tableau, init.geometry(), horizon)?;
    let replayer = Replayer::new(tableau, init)?;
    Ok(Trajectory::record(tableau, init.clone(), replayer, horizon))
}

/// Replay only the environment marks: `B_t` from the initial blocked set.
pub fn evolve_environment_only(
    tableau: &EventTableau,
    init_blocked: &SiteSelection,
    horizon: f64,
) -> Result<Trajectory> {
    let geometry = tableau.geometry();
    check_run(tableau, geometry, horizon)?;
    let mut mask = vec![false; geometry.num_sites()];
    for i in init_blocked.resolve(geometry)? {
        mask[i] = true;
    }
    let replayer = Replayer::environment_only(tableau, &mask)?;
    let initial = Configuration::new(geometry.clone(), replayer.state().to_vec())?;
    Ok(Trajectory::record(tableau, initial, replayer, horizon))
}

/// The face `{L} x [0, L)^{d-1}` observed over `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceWindow {
    pub l: i64,
    pub t: f64,
}

impl FaceWindow {
    pub fn new(l: i64, t: f64) -> Result<Self> {
        if l < 1 || !(t >= 0.0) {
            return Err(Error::InvalidWindow(format!("face window L = {l}, T = {t}")));
        }
        Ok(FaceWindow { l, t })
    }

    pub fn face_region(&self, d: usize) -> Region {
        let mut lo = vec![0; d];
        let mut hi = vec![self.l - 1; d];
        lo[0] = self.l;
        hi[0] = self.l;
        Region { lo, hi }
    }

    /// The birth domain of the restricted process this window belongs to.
    pub fn birth_domain(&self, d: usize) -> Region {
        Region::cube(d, self.l)
    }

    pub fn face_sites(&self, geometry: &Geometry) -> Result<Vec<usize>> {
        let face = self.face_region(geometry.dim());
        if !geometry.bounds().contains_region(&face) {
            return Err(Error::InvalidWindow(format!(
                "face {face:?} is not inside the box {:?}",
                geometry.bounds()
            )));
        }
        Ok(geometry.sites_in(&face))
    }
}

/// Greedy earliest-first packing of points with gaps `>= 1` into a union of
/// occupancy intervals (sorted, disjoint).
pub fn pack_points(intervals: &[(f64, f64, bool)], t: f64) -> u64 {
    let mut count = 0u64;
    let mut last = f64::NEG_INFINITY;
    for &(a, b, closed) in intervals {
        if a > t {
            break;
        }
        let (end, closed) = if b >= t { (t, closed || b > t) } else { (b, closed) };
        let mut p = a.max(last + 1.0);
        while p < end || (closed && p == end) {
            count += 1;
            last = p;
            p += 1.0;
        }
    }
    count
}

/// `N_+(L, T)`: maximal number of face space-time points occupied by 1's with
/// same-site time gaps of at least 1.
pub fn count_n_plus(trajectory: &Trajectory, window: &FaceWindow) -> Result<u64> {
    let geometry = trajectory.geometry();
    let expected = window.birth_domain(geometry.dim());
    if geometry.birth_domain() != Some(&expected) {
        return Err(Error::InvalidGeometry(format!(
            "N+ needs the restricted process with birth domain {expected:?}"
        )));
    }
    if window.t > trajectory.horizon() {
        return Err(Error::InvalidWindow(format!(
            "T = {} exceeds the trajectory horizon {}",
            window.t,
            trajectory.horizon()
        )));
    }
    let sites = window.face_sites(geometry)?;
    Ok(sites
        .into_iter()
        .map(|s| pack_points(&trajectory.occupied_intervals(s), window.t))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::{sample_initial, InitialLaw};

    fn ring(n: usize) -> Arc<Geometry> {
        Arc::new(Geometry::line(n, Boundary::Periodic).unwrap())
    }

    fn ev(time: f64, id: u32, kind: EventKind) -> Event {
        Event { time, id, kind }
    }

    #[test]
    fn empty_a_stays_empty() {
        let g = ring(8);
        let p = Params::new(1, 1.0, 3.0, 1.0).unwrap();
        let t = EventTableau::generate(p, g.clone(), 10.0, 1).unwrap();
        let init = sample_initial(&InitialLaw::MuRho, &p, &g, 1).unwrap();
        let traj = evolve(&t, &init, 10.0).unwrap();
        assert!(traj.changes().iter().all(|c| c.new != SiteState::Occupied));
        assert_eq!(traj.extinction_time(), Some(0.0));
    }

    #[test]
    fn no_events_means_constant() {
        let g = ring(3);
        let p = Params::new(1, 1.0, 1.0, 1.0).unwrap();
        let t = EventTableau::from_events(p, g.clone(), 5.0, 0, vec![]).unwrap();
        let init = Configuration::from_grid(g, "1.B").unwrap();
        let traj = evolve(&t, &init, 5.0).unwrap();
        assert!(traj.changes().is_empty());
        assert_eq!(traj.state_at(3.0).unwrap(), init);
        assert_eq!(traj.extinction_time(), None);
    }

    #[test]
    fn hand_built_sequence() {
        // ring of 3, slots: 0 = left, 1 = right
        let g = ring(3);
        let p = Params::new(1, 1.0, 1.0, 1.0).unwrap();
        let events = vec![
            ev(0.5, 0 * 2 + 1, EventKind::Arrow), // 0 -> 1
            ev(1.0, 1 * 2 + 1, EventKind::Arrow), // 1 -> 2, blocked: no effect
            ev(1.5, 2, EventKind::Unblock),
            ev(2.0, 1 * 2 + 1, EventKind::Arrow), // 1 -> 2
            ev(2.5, 1, EventKind::Block),         // kills 1
            ev(3.0, 0, EventKind::Death),
            ev(3.5, 2, EventKind::Death),
        ];
        let t = EventTableau::from_events(p, g.clone(), 4.0, 0, events).unwrap();
        let init = Configuration::from_grid(g, "1.B").unwrap();
        let traj = evolve(&t, &init, 4.0).unwrap();
        let grid = |s: f64| traj.state_at(s).unwrap().to_grid();
        assert_eq!(grid(0.0), "1.B\n");
        assert_eq!(grid(0.7), "11B\n");
        assert_eq!(grid(1.2), "11B\n");
        assert_eq!(grid(1.7), "11.\n");
        assert_eq!(grid(2.0), "111\n");
        assert_eq!(grid(2.6), "1B1\n");
        assert_eq!(grid(3.2), ".B1\n");
        assert_eq!(grid(4.0), ".B.\n");
        assert_eq!(traj.changes().len(), 7 - 1);
        assert_eq!(traj.extinction_time(), Some(3.5));
        assert!(traj.state_at(4.5).is_err());
        assert!(traj.state_at(-0.1).is_err());
        // every change points to the mark that caused it
        for c in traj.changes() {
            assert_eq!(t.events()[c.event as usize].time, c.time);
        }
    }

    #[test]
    fn state_at_uses_snapshots_consistently() {
        let g = ring(40);
        let p = Params::new(1, 2.0, 4.0, 2.0).unwrap();
        let t = EventTableau::generate(p, g.clone(), 60.0, 17).unwrap();
        let init = Configuration::filled(g, SiteState::Occupied);
        let traj = evolve(&t, &init, 60.0).unwrap();
        assert!(traj.changes().len() > 3 * SNAPSHOT_STRIDE);
        let mut live = init.states().to_vec();
        for (k, c) in traj.changes().iter().enumerate() {
            live[c.site as usize] = c.new;
            if k % 97 == 0 {
                assert_eq!(traj.state_at(c.time).unwrap().states(), live.as_slice());
            }
        }
        assert_eq!(traj.final_state().states(), live.as_slice());
    }

    #[test]
    fn delta_zero_environment_is_monotone() {
        let g = ring(20);
        let p = Params::new(1, 1.0, 0.0, 0.0).unwrap();
        let t = EventTableau::generate(p, g, 10.0, 4).unwrap();
        let traj = evolve_environment_only(&t, &SiteSelection::empty(), 10.0).unwrap();
        assert!(traj.changes().iter().all(|c| c.new == SiteState::Blocked));
        let p = Params::new(1, 0.0, 1.0, 1.0).unwrap();
        let t = EventTableau::generate(p, ring(5), 10.0, 4).unwrap();
        let traj = evolve_environment_only(&t, &SiteSelection::empty(), 10.0).unwrap();
        assert!(traj.changes().is_empty());
    }

    #[test]
    fn open_box_censoring() {
        let g = Arc::new(Geometry::line(5, Boundary::Open).unwrap());
        let p = Params::new(1, 0.0, 1.0, 1.0).unwrap();
        let events = vec![ev(1.0, 2 * 2 + 1, EventKind::Arrow), ev(2.0, 3 * 2 + 1, EventKind::Arrow)];
        let t = EventTableau::from_events(p, g.clone(), 3.0, 0, events).unwrap();
        let init = Configuration::from_grid(g.clone(), "..1..").unwrap();
        assert!(!evolve(&t, &init, 1.5).unwrap().censored());
        assert!(evolve(&t, &init, 3.0).unwrap().censored());
        let restricted = Arc::new(g.with_birth_domain(Some(Region::new(vec![1], vec![3]).unwrap())).unwrap());
        let t = EventTableau::from_events(p, restricted.clone(), 3.0, 0, t.events().to_vec()).unwrap();
        let init = Configuration::from_grid(restricted, "..1..").unwrap();
        let traj = evolve(&t, &init, 3.0).unwrap();
        assert!(!traj.censored());
        // birth into site 4 is outside the domain
        assert_eq!(traj.final_state().to_grid(), "..11.\n");
    }

    #[test]
    fn rejects_mismatch_and_overrun() {
        let p = Params::new(1, 1.0, 1.0, 1.0).unwrap();
        let t = EventTableau::generate(p, ring(4), 2.0, 0).unwrap();
        let other = Configuration::filled(ring(5), SiteState::Vacant);
        assert!(evolve(&t, &other, 1.0).is_err());
        let ok = Configuration::filled(ring(4), SiteState::Vacant);
        assert!(evolve(&t, &ok, 2.5).is_err());
    }

    #[test]
    fn pack_points_examples() {
        assert_eq!(pack_points(&[], 5.0), 0);
        assert_eq!(pack_points(&[(0.0, 2.5, false)], 3.0), 3);
        assert_eq!(pack_points(&[(0.0, 2.5, true)], 2.5), 3);
        assert_eq!(pack_points(&[(0.0, 1.0, false)], 3.0), 1);
        assert_eq!(pack_points(&[(0.0, 1.0, true)], 1.0), 2);
        assert_eq!(pack_points(&[(0.0, 0.5, false), (0.9, 1.2, false)], 3.0), 2);
        assert_eq!(pack_points(&[(0.0, 0.5, false), (0.7, 0.9, false)], 3.0), 1);
        assert_eq!(pack_points(&[(4.0, 9.0, true)], 3.0), 0);
    }

    #[test]
    fn n_plus_on_hand_built_face() {
        // d = 1, L = 1: box [-1, 1] with domain [-1, 1]; face = {1}
        let g = Arc::new(
            Geometry::new(Region::cube(1, 1), Boundary::Open, Some(Region::cube(1, 1))).unwrap(),
        );
        let p = Params::new(1, 1.0, 1.0, 1.0).unwrap();
        // site indices: -1 -> 0, 0 -> 1, 1 -> 2; edge 0 -> +1 is 1 * 2 + 1
        let events = vec![ev(1e-9, 3, EventKind::Arrow), ev(2.5, 2, EventKind::Death)];
        let t = EventTableau::from_events(p, g.clone(), 4.0, 0, events).unwrap();
        let init = Configuration::from_grid(g.clone(), "B1.").unwrap();
        let traj = evolve(&t, &init, 4.0).unwrap();
        assert_eq!(count_n_plus(&traj, &FaceWindow::new(1, 4.0).unwrap()).unwrap(), 3);
        let none = Configuration::from_grid(g.clone(), "B.B").unwrap();
        let traj = evolve(&t, &none, 4.0).unwrap();
        assert_eq!(count_n_plus(&traj, &FaceWindow::new(1, 4.0).unwrap()).unwrap(), 0);
        // wrong restricted domain
        let plain = Arc::new(g.with_birth_domain(None).unwrap());
        let t2 = EventTableau::from_events(p, plain.clone(), 4.0, 0, vec![]).unwrap();
        let traj = evolve(&t2, &Configuration::filled(plain, SiteState::Vacant), 4.0).unwrap();
        assert!(count_n_plus(&traj, &FaceWindow::new(1, 4.0).unwrap()).is_err());
    }

    #[test]
    fn csv_and_snapshot_export() {
        let g = ring(3);
        let p = Params::new(1, 1.0, 1.0, 1.0).unwrap();
        let t = EventTableau::from_events(p, g.clone(), 2.0, 0, vec![ev(0.5, 0, EventKind::Death)]).unwrap();
        let traj = evolve(&t, &Configuration::from_grid(g, "1..").unwrap(), 2.0).unwrap();
        assert_eq!(traj.to_csv(), "time,site,old,new\n0.5,0,1,0\n");
        let js = traj.snapshots_json(&[0.0, 1.0]).unwrap();
        assert_eq!(js["snapshots"][0]["states"], serde_json::json!([1, 0, 0]));
        assert_eq!(js["snapshots"][1]["states"], serde_json::json!([0, 0, 0]));
        assert!(traj.snapshots_json(&[3.0]).is_err());
    }

    #[test]
    fn same_seed_same_trajectory() {
        let g = ring(25);
        let p = Params::new(1, 0.5, 3.0, 4.0).unwrap();
        let init = sample_initial(&InitialLaw::Nu(SiteSelection::All), &p, &g, StreamSeed::new(3, 1)).unwrap();
        let a = evolve(&EventTableau::generate(p, g.clone(), 5.0, 8).unwrap(), &init, 5.0).unwrap();
        let b = evolve(&EventTableau::generate(p, g, 5.0, 8).unwrap(), &init, 5.0).unwrap();
        assert_eq!(a.changes(), b.changes());
    }

    #[test]
    fn chunked_run_matches_full_tableau() {
        let g = ring(30);
        let p = Params::new(1, 0.6, 3.5, 2.0).unwrap();
        for seed in 0..10u64 {
            let ss = StreamSeed::new(seed, 3);
            let init = sample_initial(&InitialLaw::Nu(SiteSelection::All), &p, &g, ss).unwrap();
            let tab = EventTableau::generate(p, g.clone(), 7.3, ss).unwrap();
            let full = evolve(&tab, &init, 7.3).unwrap();
            let mut run = ChunkedRun::new(p, &g, init.states().to_vec(), 7.3, ss).unwrap();
            let mut n = 0;
            for t in [0.0, 0.5, 2.0, 2.0, 3.7, 7.3, 9.0] {
                run.advance_to(t, |_, _, _| n += 1);
                let want = full.state_at(t.min(7.3)).unwrap();
                assert_eq!(run.process().state(), want.states());
            }
            assert_eq!(n, full.changes().len());
        }
    }
}
