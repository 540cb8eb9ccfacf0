//! Monte Carlo estimators against exact small-lattice probabilities.

use std::sync::Arc;

use cpenv::dual::coupled_duality_estimate;
use cpenv::estimators::*;
use cpenv::oracle::*;
use cpenv::*;

fn band(p: f64, n: u64, z: f64) -> f64 {
    z * (p * (1.0 - p) / n as f64).sqrt()
}

fn occupied_at(geometry: &Geometry, x: i64) -> impl Fn(&[SiteState]) -> bool + Copy {
    let i = geometry.index_of(&[x]).unwrap();
    move |s: &[SiteState]| s[i] == SiteState::Occupied
}

#[test]
fn block_conditions_match_oracle() {
    const REPS: u64 = 40_000;
    let params = Params::new(1, 0.7, 2.0, 1.5).unwrap();
    let spec = BlockSpec::new(0, 1, 0.5, 0.5, 0, 0).unwrap();
    let g = spec.block_geometry(1).unwrap();
    assert_eq!(g.num_sites(), 3);
    let gen = build_generator(&params, &g).unwrap();
    let init = chi_initial(&gen, &[false, true, false]);

    let at_end = transient_distribution(&gen, &init, spec.t + 1.0, 1e-14).unwrap();
    let bc1 = event_probability(&gen, &at_end, occupied_at(&g, 0));
    let at_one = transient_distribution(&gen, &init, 1.0, 1e-14).unwrap();
    let bc2 = hitting_probability(&gen, &at_one, spec.t, occupied_at(&g, 1)).unwrap();

    let est = estimate_block_conditions(params, spec, Replicates::all(REPS), 21).unwrap();
    assert!((est.first.estimate - bc1).abs() < band(bc1, REPS, 3.0), "BC1 {} vs {bc1}", est.first.estimate);
    assert!((est.second.estimate - bc2).abs() < band(bc2, REPS, 3.0), "BC2 {} vs {bc2}", est.second.estimate);
}

#[test]
fn face_occupation_matches_hitting_probability() {
    const REPS: u64 = 40_000;
    let params = Params::new(1, 1.0, 3.0, 2.0).unwrap();
    let spec = BlockSpec::new(0, 1, 1.5, 0.5, 0, 0).unwrap();
    let g = spec.occupancy_geometry(1).unwrap();
    assert_eq!(g.num_sites(), 3);
    let gen = build_generator(&params, &g).unwrap();
    let init = chi_initial(&gen, &[false, true, false]);
    let hit = hitting_probability(&gen, &init, spec.t, occupied_at(&g, 1)).unwrap();
    let dist = transient_distribution(&gen, &init, spec.t, 1e-14).unwrap();
    let count = event_probability(&gen, &dist, |s| s[1] == SiteState::Occupied);

    let est = estimate_occupation_events(params, spec, Replicates::all(REPS), 22).unwrap();
    assert!((est.second.estimate - hit).abs() < band(hit, REPS, 3.0), "N+ > 0: {} vs {hit}", est.second.estimate);
    assert!((est.first.estimate - count).abs() < band(count, REPS, 3.0), "count: {} vs {count}", est.first.estimate);
}

#[test]
fn correlations_on_three_ring_match_oracle() {
    const REPS: u64 = 40_000;
    let params = Params::new(1, 1.0, 1.0, 1.0).unwrap();
    let ring = Arc::new(Geometry::line(3, Boundary::Periodic).unwrap());
    let gen = build_generator(&params, &ring).unwrap();
    let init = nu_initial(&gen, params.rho(), &[true; 3]);
    let dist = transient_distribution(&gen, &init, 1.0, 1e-14).unwrap();
    let law = InitialLaw::Nu(SiteSelection::All);
    let reqs = [
        Requirement::AtLeast(SiteState::Occupied),
        Requirement::AtLeast(SiteState::Vacant),
        Requirement::Exactly(SiteState::Occupied),
    ];
    for (x, y) in [(0usize, 1usize), (0, 2), (1, 1)] {
        for &rf in &reqs {
            for &rg in &reqs {
                let f = CylinderEvent { sites: SiteSelection::point(vec![x as i64]), requirement: rf };
                let g = CylinderEvent { sites: SiteSelection::point(vec![y as i64]), requirement: rg };
                let test = |r: Requirement, s: SiteState| match r {
                    Requirement::AtLeast(m) => s >= m,
                    Requirement::AtMost(m) => s <= m,
                    Requirement::Exactly(m) => s == m,
                };
                let pf = event_probability(&gen, &dist, |s| test(rf, s[x]));
                let pg = event_probability(&gen, &dist, |s| test(rg, s[y]));
                let pfg = event_probability(&gen, &dist, |s| test(rf, s[x]) && test(rg, s[y]));
                assert!(pfg - pf * pg >= -1e-12, "exact covariance {} for {x},{y}", pfg - pf * pg);

                let r = check_positive_correlations(params, ring.clone(), &law, 1.0, &f, &g, Replicates::all(REPS), 23)
                    .unwrap();
                assert!(r.passes, "{r:?}");
                assert!((r.p_fg - pfg).abs() < band(pfg, REPS, 4.0), "joint {} vs {pfg}", r.p_fg);
            }
        }
    }
}

#[test]
fn duality_sides_match_oracle() {
    const REPS: u64 = 50_000;
    let params = Params::new(1, 0.5, 2.0, 2.0).unwrap();
    let ring = Geometry::line(3, Boundary::Periodic).unwrap();
    let pts = |v: &[i64]| SiteSelection::Points(v.iter().map(|&x| vec![x]).collect());
    let (a, c, d) = (pts(&[0, 1]), pts(&[2]), pts(&[0, 2]));
    let exact = exact_duality_check(&params, &ring, &a, &c, &d, 0.7).unwrap();
    assert!(exact.gap < 1e-10);
    let sim = coupled_duality_estimate(params, Arc::new(ring), &a, &c, &d, 0.7, Replicates::all(REPS), 24).unwrap();
    assert_eq!(sim.pathwise_mismatches, 0);
    assert_eq!(sim.forward.tally, sim.dual.tally);
    for side in [&sim.forward, &sim.self_dual] {
        assert!((side.estimate - exact.lhs).abs() < band(exact.lhs, REPS, 3.0), "{} vs {}", side.estimate, exact.lhs);
    }
}

#[test]
fn survival_marginal_matches_oracle_on_small_box() {
    const REPS: u64 = 40_000;
    let params = Params::new(1, 1.0, 2.0, 1.0).unwrap();
    let g = Arc::new(Geometry::new(Region::cube(1, 1), Boundary::Open, Some(Region::cube(1, 1))).unwrap());
    let gen = build_generator(&params, &g).unwrap();
    let init = chi_initial(&gen, &[false, true, false]);
    let t = 1.5;
    let dist = transient_distribution(&gen, &init, t, 1e-14).unwrap();
    let alive = event_probability(&gen, &dist, |s| s.contains(&SiteState::Occupied));
    let est = estimate_survival(params, g, &SurvivalMode::S2, t, Replicates::all(REPS), 25).unwrap();
    assert!((est.estimate - alive).abs() < band(alive, REPS, 3.0), "{} vs {alive}", est.estimate);
    assert_eq!(est.lower, est.estimate);
    assert_eq!(est.upper, est.estimate);
}
