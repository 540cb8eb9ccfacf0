//! Pathwise properties of the forward replay: agreement with an explicit
//! active-path search, attractiveness, autonomy of the environment and
//! monotone thinning.

use std::collections::HashSet;
use std::sync::Arc;

use cpenv::*;
use proptest::prelude::*;

const STATES: [SiteState; 3] = [SiteState::Blocked, SiteState::Vacant, SiteState::Occupied];

/// Whether `site` is blocked at time `s`, from the environment marks alone.
fn blocked_at(tableau: &EventTableau, init: &[SiteState], site: usize, s: f64) -> bool {
    let mut blocked = init[site] == SiteState::Blocked;
    for e in tableau.events() {
        if e.time > s {
            break;
        }
        if e.id as usize == site {
            match e.kind {
                EventKind::Block => blocked = true,
                EventKind::Unblock => blocked = false,
                _ => {}
            }
        }
    }
    blocked
}

/// First death or block mark at `site` strictly after `s`.
fn next_kill(tableau: &EventTableau, site: usize, s: f64) -> f64 {
    tableau
        .events()
        .iter()
        .find(|e| e.time > s && e.id as usize == site && matches!(e.kind, EventKind::Death | EventKind::Block))
        .map_or(f64::INFINITY, |e| e.time)
}

/// `A_t` as the set of sites reached by an active path from `A_0`: paths
/// move up in time, avoid death and block marks, and jump along arrows into
/// unblocked sites of the birth domain.
fn active_path_set(tableau: &EventTableau, init: &[SiteState], t: f64) -> Vec<usize> {
    let g = tableau.geometry();
    let slots = g.slots_per_site();
    let mut seen: HashSet<(usize, u64)> = HashSet::new();
    let mut stack: Vec<(usize, f64)> =
        (0..init.len()).filter(|&x| init[x] == SiteState::Occupied).map(|x| (x, 0.0)).collect();
    let mut reached = vec![false; init.len()];
    while let Some((x, s)) = stack.pop() {
        if !seen.insert((x, s.to_bits())) {
            continue;
        }
        let end = next_kill(tableau, x, s);
        if end > t {
            reached[x] = true;
        }
        for e in tableau.events() {
            if e.time <= s || e.time > end.min(t) || e.kind != EventKind::Arrow || e.site(slots) != x {
                continue;
            }
            if let Some(y) = tableau.arrow_target(e) {
                if g.births_allowed(y) && !blocked_at(tableau, init, y, e.time) {
                    stack.push((y, e.time));
                }
            }
        }
    }
    (0..init.len()).filter(|&x| reached[x]).collect()
}

fn occupied(states: &[SiteState]) -> Vec<usize> {
    (0..states.len()).filter(|&x| states[x] == SiteState::Occupied).collect()
}

fn arb_params(d: usize) -> impl Strategy<Value = Params> {
    (0.0..3.0f64, 0.0..6.0f64, 0.0..4.0f64).prop_map(move |(a, b, dl)| Params::new(d, a, b, dl).unwrap())
}

fn arb_geometry() -> impl Strategy<Value = Arc<Geometry>> {
    prop_oneof![
        (1usize..=5, any::<bool>()).prop_map(|(n, periodic)| {
            let b = if periodic { Boundary::Periodic } else { Boundary::Open };
            Arc::new(Geometry::line(n, b).unwrap())
        }),
        Just(Arc::new(
            Geometry::new(Region::cube(1, 2), Boundary::Open, Some(Region::cube(1, 1))).unwrap()
        )),
        Just(Arc::new(Geometry::new(Region::new(vec![0, 0], vec![1, 1]).unwrap(), Boundary::Open, None).unwrap())),
    ]
}

fn arb_states(n: usize) -> impl Strategy<Value = Vec<SiteState>> {
    prop::collection::vec(prop::sample::select(STATES.to_vec()), n)
}

/// Geometry, params of matching dimension, an initial state and a seed.
fn arb_case() -> impl Strategy<Value = (Arc<Geometry>, Params, Vec<SiteState>, u64)> {
    arb_geometry().prop_flat_map(|g| {
        let n = g.num_sites();
        (Just(g.clone()), arb_params(g.dim()), arb_states(n), any::<u64>())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn replay_matches_active_paths((g, params, init, seed) in arb_case(), horizon in 0.5..3.0f64) {
        let tab = EventTableau::generate(params, g.clone(), horizon, seed).unwrap();
        let mut rep = Replayer::from_states(&tab, init.clone()).unwrap();
        for k in 1..=6 {
            let t = horizon * k as f64 / 6.0;
            rep.advance_to(t, |_| {});
            prop_assert_eq!(occupied(rep.state()), active_path_set(&tab, &init, t));
        }
    }

    #[test]
    fn coupled_pairs_stay_ordered((g, params, upper, seed) in arb_case(), lower_pick in prop::collection::vec(0usize..3, 10)) {
        let lower: Vec<SiteState> = upper
            .iter()
            .zip(lower_pick.iter().cycle())
            .map(|(&s, &k)| STATES[k.min((s.value() + 1) as usize)])
            .collect();
        prop_assert!(lower.iter().zip(&upper).all(|(a, b)| a <= b));
        let tab = EventTableau::generate(params, g, 4.0, seed).unwrap();
        let mut lo = Replayer::from_states(&tab, lower).unwrap();
        let mut hi = Replayer::from_states(&tab, upper).unwrap();
        while lo.step(4.0).is_some() {
            hi.step(4.0);
            prop_assert!(lo.state().iter().zip(hi.state()).all(|(a, b)| a <= b));
        }
    }

    #[test]
    fn environment_evolves_autonomously((g, params, init, seed) in arb_case()) {
        let tab = EventTableau::generate(params, g.clone(), 5.0, seed).unwrap();
        let config = Configuration::new(g.clone(), init.clone()).unwrap();
        let full = evolve(&tab, &config, 5.0).unwrap();
        let blocked: Vec<Coord> = config.blocked().into_iter().map(|i| g.coord_of(i)).collect();
        let env = evolve_environment_only(&tab, &SiteSelection::Points(blocked), 5.0).unwrap();
        let flips = |tr: &Trajectory| -> Vec<(u64, u32, bool)> {
            tr.changes()
                .iter()
                .filter(|c| c.old == SiteState::Blocked || c.new == SiteState::Blocked)
                .map(|c| (c.time.to_bits(), c.site, c.new == SiteState::Blocked))
                .collect()
        };
        prop_assert_eq!(flips(&full), flips(&env));
    }

    #[test]
    fn thinning_shrinks_occupied_sets((g, params, init, seed) in arb_case(), keep in 0.0..=1.0f64) {
        let tab = EventTableau::generate(params, g.clone(), 4.0, seed).unwrap();
        let thin = tab.thin_arrows(params.beta() * keep, seed ^ 1).unwrap();
        let mut big = Replayer::from_states(&tab, init.clone()).unwrap();
        let mut small = Replayer::from_states(&thin, init).unwrap();
        for k in 1..=40 {
            let t = k as f64 * 0.1;
            big.advance_to(t, |_| {});
            small.advance_to(t, |_| {});
            for (a, b) in small.state().iter().zip(big.state()) {
                prop_assert!(*a != SiteState::Occupied || *b == SiteState::Occupied);
                prop_assert_eq!(*a == SiteState::Blocked, *b == SiteState::Blocked);
            }
        }
    }
}
