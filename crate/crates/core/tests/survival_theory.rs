//! Finite-horizon survival behavior: agreement of the two starting
//! conditions, monotone sweeps and stability of the pseudo-critical bisection.

use std::sync::Arc;

use cpenv::estimators::*;
use cpenv::*;

fn line(radius: i64) -> Arc<Geometry> {
    Arc::new(Geometry::cube(1, radius, Boundary::Open).unwrap())
}

/// Survival from `nu_{0}` and from `chi_{0}` is either clearly positive for
/// both or indistinguishable from zero for both.
#[test]
fn s1_and_s2_agree_in_sign() {
    let s1 = SurvivalMode::S1(SiteSelection::origin(1));
    for (beta, alive) in [(12.0, true), (2.0, false)] {
        let p = Params::new(1, 0.5, beta, 20.0).unwrap();
        let a = estimate_survival(p, line(40), &s1, 30.0, Replicates::all(400), 31).unwrap();
        let b = estimate_survival(p, line(40), &SurvivalMode::S2, 30.0, Replicates::all(400), 32).unwrap();
        for r in [&a, &b] {
            let positive = r.estimate > 3.0 * r.stderr && r.estimate > 0.0;
            assert_eq!(positive, alive, "beta = {beta}: {r:?}");
        }
    }
}

#[test]
fn below_threshold_survival_decays_with_horizon() {
    let bounds = BoundsInput::literature(1).unwrap();
    let alpha = 1.0;
    let beta = 0.9 * extinction_threshold_beta(alpha, &bounds).unwrap();
    let p = Params::new(1, alpha, beta, 10.0).unwrap();
    let mode = SurvivalMode::S1(SiteSelection::origin(1));
    let curve = survival_curve(p, line(40), &mode, &[2.0, 4.0, 8.0, 16.0], Replicates::all(4000), 33).unwrap();
    assert!(curve.windows(2).all(|w| w[1].estimate < w[0].estimate), "{curve:?}");
    assert!(curve[0].interval(2.0).0 > curve[3].interval(2.0).1);
}

#[test]
fn beta_sweep_is_exactly_monotone() {
    let p = Params::new(1, 1.0, 1.0, 5.0).unwrap();
    let values = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0];
    let r = monotonicity_sweep(p, Axis::Beta, &values, line(30), &SurvivalMode::S2, 10.0, Replicates::all(500), 34)
        .unwrap();
    assert_eq!(r.pathwise_violations, Some(0));
    assert!(r.reports.windows(2).all(|w| w[0].tally.hits <= w[1].tally.hits));
    let closed = (-(1.0 + p.alpha()) * 10.0f64).exp();
    assert!((r.reports[0].estimate - closed).abs() <= 3.0 * (closed * (1.0 - closed) / 500.0).sqrt() + 1e-12);
}

#[test]
fn delta_sweep_trends_upward() {
    let p = Params::new(1, 1.0, 8.0, 1.0).unwrap();
    let values = [0.5, 4.0, 30.0];
    let r = monotonicity_sweep(p, Axis::Delta, &values, line(30), &SurvivalMode::S2, 10.0, Replicates::all(1000), 35)
        .unwrap();
    assert_eq!(r.pathwise_violations, None);
    assert!(r.reports.windows(2).all(|w| w[0].estimate <= w[1].estimate), "{:?}", r.reports);
}

/// Twenty bisections with independent seeds; the final closed brackets
/// overlap pairwise in at least 95% of pairs. The tolerance is of the order of
/// the Monte Carlo resolution of the pseudo-critical value at 200 replicates.
#[test]
fn bisection_brackets_are_stable_across_seeds() {
    let template = Params::new(1, 1.0, 1.0, 10.0).unwrap();
    let options = BisectionOptions {
        axis: Axis::Beta,
        lo: 3.0,
        hi: 15.0,
        target: 0.5,
        horizon: 50.0,
        tolerance: 2.0,
    };
    let results: Vec<BisectionResult> = (0..20u64)
        .map(|seed| {
            bisect_pseudo_critical(template, line(25), &SurvivalMode::S2, &options, Replicates::all(200), 100 + seed)
                .unwrap()
        })
        .collect();
    let mut pairs = 0;
    let mut overlapping = 0;
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            pairs += 1;
            if results[i].overlaps(&results[j]) {
                overlapping += 1;
            }
        }
    }
    let brackets: Vec<(f64, f64)> = results.iter().map(|r| (r.lo, r.hi)).collect();
    assert!(overlapping as f64 >= 0.95 * pairs as f64, "{overlapping}/{pairs}: {brackets:?}");
    assert!(results.iter().all(|r| r.label.contains("pseudo-critical beta at horizon 50")));
}
