//! Goodness of fit of the generated Poisson marks.

use std::sync::Arc;

use cpenv::*;

/// Kolmogorov-Smirnov distance between the sample and `Exp(rate)`.
fn ks_exponential(mut gaps: Vec<f64>, rate: f64) -> f64 {
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len() as f64;
    gaps.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-rate * x).exp();
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at level 0.01.
fn ks_critical(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Gaps between successive marks of one stream, starting from time 0.
fn gaps(times: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut last = 0.0;
    times
        .map(|t| {
            let g = t - last;
            last = t;
            g
        })
        .collect()
}

/// Per seed and per mark kind, the pooled gaps of all streams of that kind are
/// tested against the exponential law at level 0.01. With 100 seeds and 4
/// kinds the number of rejections is Binomial(400, 0.01), mean 4; more than
/// 12 has probability below 1e-3.
#[test]
fn inter_event_gaps_are_exponential() {
    let g = Arc::new(Geometry::line(3, Boundary::Periodic).unwrap());
    let params = Params::new(1, 1.0, 2.0, 0.5).unwrap();
    let slots = g.slots_per_site();
    let edges = g.num_sites() * slots;
    let kinds = [
        (EventKind::Arrow, params.arrow_rate(), edges),
        (EventKind::Death, 1.0, g.num_sites()),
        (EventKind::Block, params.block_rate(), g.num_sites()),
        (EventKind::Unblock, params.unblock_rate(), g.num_sites()),
    ];
    let mut rejections = 0;
    for seed in 0..100u64 {
        let tab = EventTableau::generate(params, g.clone(), 100.0, seed).unwrap();
        for &(kind, rate, streams) in &kinds {
            let mut pooled = Vec::new();
            for id in 0..streams {
                let times = tab.events().iter().filter(|e| e.kind == kind && e.id as usize == id).map(|e| e.time);
                pooled.extend(gaps(times));
            }
            assert!(pooled.len() >= 50, "{kind:?}: only {} gaps", pooled.len());
            if ks_exponential(pooled.clone(), rate) > ks_critical(pooled.len()) {
                rejections += 1;
            }
        }
    }
    assert!(rejections <= 12, "{rejections} rejections out of 400");
}

#[test]
fn gaps_across_generation_chunks_are_exponential() {
    let g = Arc::new(Geometry::line(1, Boundary::Open).unwrap());
    let params = Params::new(1, 0.0, 0.0, 0.0).unwrap();
    let mut pooled = Vec::new();
    for seed in 0..100u64 {
        let tab = EventTableau::generate(params, g.clone(), 30.0, seed).unwrap();
        pooled.extend(gaps(tab.events().iter().map(|e| e.time)));
    }
    let d = ks_exponential(pooled.clone(), 1.0);
    assert!(d < ks_critical(pooled.len()), "D = {d} over {} gaps", pooled.len());
}

/// Thinning twice, `beta -> beta' -> beta''`, retains arrows at the same mean
/// rate as thinning once, `beta -> beta''`.
#[test]
fn repeated_thinning_matches_single_thinning() {
    let g = Arc::new(Geometry::line(10, Boundary::Periodic).unwrap());
    let params = Params::new(1, 1.0, 4.0, 1.0).unwrap();
    let (mut once, mut twice) = (0.0, 0.0);
    let (mut once_sq, mut twice_sq) = (0.0, 0.0);
    let seeds = 300u64;
    for seed in 0..seeds {
        let tab = EventTableau::generate(params, g.clone(), 5.0, seed).unwrap();
        let a = tab.thin_arrows(1.0, StreamSeed::new(seed, 1)).unwrap().count(EventKind::Arrow) as f64;
        let b = tab
            .thin_arrows(2.0, StreamSeed::new(seed, 2))
            .unwrap()
            .thin_arrows(1.0, StreamSeed::new(seed, 3))
            .unwrap()
            .count(EventKind::Arrow) as f64;
        once += a;
        twice += b;
        once_sq += a * a;
        twice_sq += b * b;
    }
    let n = seeds as f64;
    let var = |s: f64, sq: f64| (sq / n - (s / n).powi(2)) / n;
    let expected = 1.0 * 10.0 * 5.0;
    let se = (var(once, once_sq) + var(twice, twice_sq)).sqrt();
    assert!((once / n - twice / n).abs() < 4.0 * se, "{} vs {}", once / n, twice / n);
    assert!((once / n - expected).abs() < 4.0 * var(once, once_sq).sqrt());
}
