//! Block events for the restricted process started from `chi_{[-n, n]^d}`.
//!
//! Birth domains here are closed boxes: `[-(L + 2n), L + 2n]^d` for the two
//! block conditions and `[-L, L]^d` for the occupancy events, whose face
//! `{L} x [0, L)^{d-1}` must be able to hold 1's.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::SiteState;
use crate::error::{Error, Result};
use crate::forward::{pack_points, ChunkedRun, FaceWindow};
use crate::geometry::{Boundary, Coord, Geometry, Region};
use crate::params::Params;
use crate::rng::StreamSeed;

use super::report::{accumulate, config_hash, EstimateReport, Replicates, Tally};

/// Largest box (in sites) the block estimators will build.
pub const MAX_BLOCK_SITES: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    /// Half-width of the seed cube `[-n, n]^d`.
    pub n: i64,
    /// Block length.
    pub l: i64,
    /// Block time.
    pub t: f64,
    pub epsilon: f64,
    /// Occupancy target for the count event.
    #[serde(rename = "N")]
    pub big_n: u64,
    /// Target for the face space-time count.
    #[serde(rename = "M")]
    pub big_m: u64,
}

impl BlockSpec {
    pub fn new(n: i64, l: i64, t: f64, epsilon: f64, big_n: u64, big_m: u64) -> Result<Self> {
        let spec = BlockSpec { n, l, t, epsilon, big_n, big_m };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidBlockSpec(m));
        if self.n < 0 {
            return bad(format!("n = {} must be >= 0", self.n));
        }
        if self.l < 1 {
            return bad(format!("L = {} must be >= 1", self.l));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return bad(format!("T = {} must be finite and >= 0", self.t));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return bad(format!("epsilon = {} must lie in (0, 1]", self.epsilon));
        }
        Ok(())
    }

    fn cube_geometry(&self, d: usize, radius: i64, domain: i64) -> Result<Arc<Geometry>> {
        self.validate()?;
        let side = (2 * radius + 1) as f64;
        if side.powi(d as i32) > MAX_BLOCK_SITES as f64 {
            return Err(Error::InvalidBlockSpec(format!(
                "box of side {side} in d = {d} exceeds {MAX_BLOCK_SITES} sites"
            )));
        }
        Ok(Arc::new(Geometry::new(
            Region::cube(d, radius),
            Boundary::Open,
            Some(Region::cube(d, domain)),
        )?))
    }

    /// Box and birth domain `[-(L + 2n), L + 2n]^d`.
    pub fn block_geometry(&self, d: usize) -> Result<Arc<Geometry>> {
        let r = self.l + 2 * self.n;
        self.cube_geometry(d, r, r)
    }

    /// Box `[-max(L, n), max(L, n)]^d` with birth domain `[-L, L]^d`.
    pub fn occupancy_geometry(&self, d: usize) -> Result<Arc<Geometry>> {
        self.cube_geometry(d, self.l.max(self.n), self.l)
    }

    /// `chi_{[-n, n]^d}` on `geometry`.
    fn seed_states(&self, geometry: &Geometry) -> Vec<SiteState> {
        let seed = Region::cube(geometry.dim(), self.n);
        (0..geometry.num_sites())
            .map(|i| {
                if seed.contains(&geometry.coord_of(i)) {
                    SiteState::Occupied
                } else {
                    SiteState::Blocked
                }
            })
            .collect()
    }
}

/// Sites of `x + [-n, n]^d` for each center `x`.
fn translates(geometry: &Geometry, centers: &Region, n: i64) -> Vec<Vec<usize>> {
    centers
        .points()
        .into_iter()
        .map(|x: Coord| {
            let lo = x.iter().map(|v| v - n).collect();
            let hi = x.iter().map(|v| v + n).collect();
            geometry.sites_in(&Region { lo, hi })
        })
        .collect()
}

fn full(state: &[SiteState], sites: &[usize]) -> bool {
    sites.iter().all(|&s| state[s] == SiteState::Occupied)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockEstimates {
    pub spec: BlockSpec,
    pub first: EstimateReport,
    pub second: EstimateReport,
}

impl BlockEstimates {
    /// Whether each estimate exceeds `1 - epsilon`.
    pub fn holds(&self) -> (bool, bool) {
        let bar = 1.0 - self.spec.epsilon;
        (self.first.estimate > bar, self.second.estimate > bar)
    }
}

fn check_params(params: &Params, replicates: &Replicates) -> Result<()> {
    replicates.check()?;
    if params.d() == 0 {
        return Err(Error::InvalidParams("d must be positive".into()));
    }
    Ok(())
}

/// `(BC1, BC2)`: from `chi_{[-n, n]^d}`, some translate `x + [-n, n]^d` is
/// fully occupied at time `T + 1` with `x ∈ [0, L)^d`, respectively at some
/// time in `[1, T + 1]` with `x ∈ {L + n} x [0, L)^{d-1}`.
pub fn estimate_block_conditions(
    params: Params,
    spec: BlockSpec,
    replicates: Replicates,
    seed: u64,
) -> Result<BlockEstimates> {
    check_params(&params, &replicates)?;
    let d = params.d();
    let geometry = spec.block_geometry(d)?;
    let (n, l) = (spec.n, spec.l);
    let inner = translates(&geometry, &Region::new(vec![0; d], vec![l - 1; d])?, n);
    let mut face_lo = vec![0; d];
    let mut face_hi = vec![l - 1; d];
    face_lo[0] = l + n;
    face_hi[0] = l + n;
    let face = translates(&geometry, &Region::new(face_lo, face_hi)?, n);
    let mut face_of_site = vec![Vec::new(); geometry.num_sites()];
    for (k, cube) in face.iter().enumerate() {
        for &s in cube {
            face_of_site[s].push(k);
        }
    }
    let init = spec.seed_states(&geometry);
    let horizon = spec.t + 1.0;

    let (bc1, bc2): (Tally, Tally) = accumulate(&replicates, |acc: &mut (Tally, Tally), r| {
        let ss = StreamSeed::new(seed, r);
        let mut run = ChunkedRun::new(params, &geometry, init.clone(), horizon, ss).expect("validated horizon");
        run.advance_to(1.0, |_, _, _| {});
        let mut hit = face.iter().any(|c| full(run.process().state(), c));
        run.advance_to(horizon, |p, _, site| {
            if !hit && p.state()[site] == SiteState::Occupied {
                hit = face_of_site[site].iter().any(|&k| full(p.state(), &face[k]));
            }
        });
        let first = inner.iter().any(|c| full(run.process().state(), c));
        acc.0.record(first, false);
        acc.1.record(hit, false);
    });
    let hash = config_hash(&serde_json::json!({ "op": "blocks", "params": params, "spec": spec }));
    Ok(BlockEstimates {
        spec,
        first: EstimateReport::from_tally("bc1", bc1, Some(horizon), seed, hash.clone(), replicates),
        second: EstimateReport::from_tally("bc2", bc2, Some(horizon), seed, hash, replicates),
    })
}

/// `(|A_T ∩ [0, L)^d| > N, N_+(L, T) > M)` for the process with births
/// confined to `[-L, L]^d`, started from `chi_{[-n, n]^d}`.
pub fn estimate_occupation_events(
    params: Params,
    spec: BlockSpec,
    replicates: Replicates,
    seed: u64,
) -> Result<BlockEstimates> {
    check_params(&params, &replicates)?;
    let d = params.d();
    let geometry = spec.occupancy_geometry(d)?;
    let orthant = geometry.sites_in(&Region::new(vec![0; d], vec![spec.l - 1; d])?);
    let window = FaceWindow::new(spec.l, spec.t)?;
    let face = window.face_sites(&geometry)?;
    let mut face_slot = vec![usize::MAX; geometry.num_sites()];
    for (k, &s) in face.iter().enumerate() {
        face_slot[s] = k;
    }
    let init = spec.seed_states(&geometry);

    let (count, plus): (Tally, Tally) = accumulate(&replicates, |acc: &mut (Tally, Tally), r| {
        let ss = StreamSeed::new(seed, r);
        let mut open: Vec<Option<f64>> =
            face.iter().map(|&s| (init[s] == SiteState::Occupied).then_some(0.0)).collect();
        let mut intervals: Vec<Vec<(f64, f64, bool)>> = vec![Vec::new(); face.len()];
        let state = if spec.t > 0.0 {
            let mut run = ChunkedRun::new(params, &geometry, init.clone(), spec.t, ss).expect("validated horizon");
            run.advance_to(spec.t, |p, time, site| {
                let k = face_slot[site];
                if k == usize::MAX {
                    return;
                }
                let occupied = p.state()[site] == SiteState::Occupied;
                match (open[k], occupied) {
                    (None, true) => open[k] = Some(time),
                    (Some(a), false) => {
                        intervals[k].push((a, time, false));
                        open[k] = None;
                    }
                    _ => {}
                }
            });
            run.process().state().to_vec()
        } else {
            init.clone()
        };
        let mut points = 0u64;
        for (k, iv) in intervals.iter_mut().enumerate() {
            if let Some(a) = open[k] {
                iv.push((a, spec.t, true));
            }
            points += pack_points(iv, spec.t);
        }
        let occupied = orthant.iter().filter(|&&s| state[s] == SiteState::Occupied).count() as u64;
        acc.0.record(occupied > spec.big_n, false);
        acc.1.record(points > spec.big_m, false);
    });
    let hash = config_hash(&serde_json::json!({ "op": "occupancy", "params": params, "spec": spec }));
    Ok(BlockEstimates {
        spec,
        first: EstimateReport::from_tally("occupancy-count", count, Some(spec.t), seed, hash.clone(), replicates),
        second: EstimateReport::from_tally("face-points", plus, Some(spec.t), seed, hash, replicates),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Configuration;
    use crate::forward::{count_n_plus, evolve};
    use crate::tableau::EventTableau;

    #[test]
    fn spec_validation() {
        assert!(BlockSpec::new(0, 1, 0.0, 0.5, 0, 0).is_ok());
        assert!(BlockSpec::new(-1, 1, 1.0, 0.5, 1, 1).is_err());
        assert!(BlockSpec::new(0, 0, 1.0, 0.5, 1, 1).is_err());
        assert!(BlockSpec::new(0, 1, -1.0, 0.5, 1, 1).is_err());
        assert!(BlockSpec::new(0, 1, 1.0, 0.0, 1, 1).is_err());
        assert!(BlockSpec::new(0, 1, 1.0, 1.5, 1, 1).is_err());
        let huge = BlockSpec { n: 0, l: 5000, t: 1.0, epsilon: 0.5, big_n: 1, big_m: 1 };
        assert!(huge.block_geometry(2).is_err());
    }

    #[test]
    fn geometries() {
        let s = BlockSpec::new(1, 3, 2.0, 0.5, 1, 1).unwrap();
        let g = s.block_geometry(2).unwrap();
        assert_eq!(g.bounds(), &Region::cube(2, 5));
        assert_eq!(g.birth_domain(), Some(&Region::cube(2, 5)));
        let g = s.occupancy_geometry(1).unwrap();
        assert_eq!(g.bounds(), &Region::cube(1, 3));
        assert_eq!(g.birth_domain(), Some(&Region::cube(1, 3)));
        let s = BlockSpec::new(4, 2, 2.0, 0.5, 1, 1).unwrap();
        let g = s.occupancy_geometry(1).unwrap();
        assert_eq!(g.bounds(), &Region::cube(1, 4));
        assert_eq!(g.birth_domain(), Some(&Region::cube(1, 2)));
        let states = s.seed_states(&g);
        assert!(states.iter().all(|&x| x == SiteState::Occupied));
    }

    #[test]
    fn bc1_single_site_closed_form() {
        let p = Params::new(1, 0.5, 0.0, 1.0).unwrap();
        let s = BlockSpec::new(0, 1, 0.0, 0.5, 0, 0).unwrap();
        let e = estimate_block_conditions(p, s, Replicates::all(20_000), 2).unwrap();
        let want = (-1.5f64).exp();
        assert!((e.first.estimate - want).abs() <= 3.0 * e.first.stderr, "{:?}", e.first);
        // beta = 0: nothing ever reaches the face
        assert_eq!(e.second.estimate, 0.0);
    }

    #[test]
    fn vacuous_threshold() {
        let p = Params::new(1, 0.5, 2.0, 1.0).unwrap();
        let s = BlockSpec::new(0, 1, 0.5, 1.0, 0, 0).unwrap();
        let e = estimate_block_conditions(p, s, Replicates::all(2000), 2).unwrap();
        assert!(e.first.estimate > 0.0);
        assert!(e.holds().0);
    }

    #[test]
    fn impossible_count_is_zero() {
        let p = Params::new(1, 0.2, 5.0, 4.0).unwrap();
        let s = BlockSpec::new(1, 2, 1.5, 0.5, 2, 0).unwrap();
        let e = estimate_occupation_events(p, s, Replicates::all(500), 4).unwrap();
        assert_eq!(e.first.estimate, 0.0);
    }

    #[test]
    fn beta_zero_survivors_in_orthant() {
        // k = 2 initially occupied sites (0 and 1) in [0, L) for n = 1, L = 3
        let (alpha, t) = (0.4, 0.8);
        let p = Params::new(1, alpha, 0.0, 1.0).unwrap();
        let s = BlockSpec::new(1, 3, t, 0.5, 0, 0).unwrap();
        let e = estimate_occupation_events(p, s, Replicates::all(20_000), 6).unwrap();
        let want = 1.0 - (1.0 - (-(1.0 + alpha) * t).exp()).powi(2);
        assert!((e.first.estimate - want).abs() <= 3.0 * e.first.stderr, "{:?}", e.first);
    }

    #[test]
    fn streaming_face_count_matches_trajectory() {
        let p = Params::new(1, 0.3, 4.0, 3.0).unwrap();
        let s = BlockSpec::new(1, 2, 3.0, 0.5, 0, 0).unwrap();
        let g = s.occupancy_geometry(1).unwrap();
        let init = Configuration::new(g.clone(), s.seed_states(&g)).unwrap();
        let window = FaceWindow::new(2, 3.0).unwrap();
        let mut total = Tally::default();
        for r in 0..200u64 {
            let tab = EventTableau::generate(p, g.clone(), 3.0, StreamSeed::new(9, r)).unwrap();
            let traj = evolve(&tab, &init, 3.0).unwrap();
            total.record(count_n_plus(&traj, &window).unwrap() > 0, false);
        }
        let e = estimate_occupation_events(p, s, Replicates::all(200), 9).unwrap();
        assert_eq!(e.second.tally, total);
    }
}
