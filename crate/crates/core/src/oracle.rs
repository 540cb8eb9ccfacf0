//! Exact transient computations on tiny lattices.
//!
//! Configurations are indexed in base 3 with site 0 as the most significant
//! digit and digit `state + 1` (so `B = 0`, `. = 1`, `1 = 2`). The
//! environment-only chain uses base 2 with digit 1 for a blocked site.

use serde::Serialize;

use crate::config::SiteState;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::initial::SiteSelection;
use crate::params::Params;

/// Largest state space the oracle accepts.
pub const MAX_STATES: usize = 20_000;

/// Default truncation tolerance for uniformization.
pub const POISSON_TAIL: f64 = 1e-14;

/// Largest `Λ h` per uniformization step.
const MAX_STEP_MASS: f64 = 64.0;

/// Sparse CTMC generator. Off-diagonal rates per row; each diagonal entry is
/// minus the sum of its row's off-diagonals, summed in the stored order.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    base: usize,
    n_sites: usize,
    off: Vec<Vec<(u32, f64)>>,
    diag: Vec<f64>,
}

const ORDER: [SiteState; 3] = [SiteState::Blocked, SiteState::Vacant, SiteState::Occupied];

fn pow(base: usize, n: usize) -> Option<usize> {
    base.checked_pow(n as u32)
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Number of states per site (3 for the full chain, 2 for the environment).
    pub fn base(&self) -> usize {
        self.base
    }

    pub fn encode(&self, states: &[SiteState]) -> usize {
        assert_eq!(states.len(), self.n_sites);
        states.iter().fold(0, |acc, &s| {
            let digit = if self.base == 3 {
                (s.value() + 1) as usize
            } else {
                (s == SiteState::Blocked) as usize
            };
            acc * self.base + digit
        })
    }

    pub fn decode(&self, mut index: usize) -> Vec<SiteState> {
        let mut out = vec![SiteState::Vacant; self.n_sites];
        for slot in out.iter_mut().rev() {
            let digit = index % self.base;
            index /= self.base;
            *slot = if self.base == 3 {
                ORDER[digit]
            } else if digit == 1 {
                SiteState::Blocked
            } else {
                SiteState::Vacant
            };
        }
        out
    }

    pub fn off_diagonal(&self, i: usize) -> &[(u32, f64)] {
        &self.off[i]
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.diag[i]
    }

    /// `Q(i, j)`.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.off[i]
            .iter()
            .filter(|(k, _)| *k as usize == j)
            .map(|(_, r)| r)
            .sum()
    }

    /// Exact row sum, accumulated in storage order with the diagonal last.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.off[i].iter().map(|(_, r)| r).sum::<f64>() + self.diag[i]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0, |m, &d| m.max(-d))
    }

    /// Row vector times generator: `v Q`.
    pub fn left_apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            out[i] += vi * self.diag[i];
            for &(j, r) in &self.off[i] {
                out[j as usize] += vi * r;
            }
        }
        out
    }

    /// Same chain with every state in `target` made absorbing.
    pub fn absorbing(&self, target: impl Fn(&[SiteState]) -> bool) -> GeneratorMatrix {
        let mut g = self.clone();
        for i in 0..g.dim() {
            if target(&self.decode(i)) {
                g.off[i].clear();
                g.diag[i] = 0.0;
            }
        }
        g
    }

    fn from_rows(base: usize, n_sites: usize, off: Vec<Vec<(u32, f64)>>) -> Self {
        let diag = off.iter().map(|row| -row.iter().map(|(_, r)| r).sum::<f64>()).collect();
        GeneratorMatrix { base, n_sites, off, diag }
    }
}

fn check_size(geometry: &Geometry, base: usize) -> Result<()> {
    let n = geometry.num_sites();
    match pow(base, n) {
        Some(dim) if dim <= MAX_STATES => Ok(()),
        _ => Err(Error::TooLarge { sites: n, cap: MAX_STATES }),
    }
}

fn check_dim(params: &Params, geometry: &Geometry) -> Result<()> {
    if params.d() != geometry.dim() {
        return Err(Error::GeometryMismatch(format!(
            "params have d = {} but the box has dimension {}",
            params.d(),
            geometry.dim()
        )));
    }
    Ok(())
}

/// Generator of the full chain on `3^n` configurations.
pub fn build_generator(params: &Params, geometry: &Geometry) -> Result<GeneratorMatrix> {
    check_dim(params, geometry)?;
    check_size(geometry, 3)?;
    let n = geometry.num_sites();
    let dim = 3usize.pow(n as u32);
    let weight: Vec<usize> = (0..n).map(|i| 3usize.pow((n - 1 - i) as u32)).collect();
    let mut proto = GeneratorMatrix { base: 3, n_sites: n, off: Vec::new(), diag: Vec::new() };
    proto.diag = vec![0.0; dim];
    let arrow = params.arrow_rate();
    let (block, unblock) = (params.block_rate(), params.unblock_rate());
    let off = (0..dim)
        .map(|i| {
            let x = proto.decode(i);
            let mut row = Vec::new();
            let mut push = |site: usize, to: SiteState, rate: f64| {
                if rate > 0.0 {
                    let from = x[site];
                    let j = i + weight[site] * (to.value() + 1) as usize - weight[site] * (from.value() + 1) as usize;
                    row.push((j as u32, rate));
                }
            };
            for site in 0..n {
                match x[site] {
                    SiteState::Blocked => push(site, SiteState::Vacant, unblock),
                    SiteState::Vacant => {
                        if geometry.births_allowed(site) {
                            let k = geometry
                                .neighbors(site)
                                .flatten()
                                .filter(|&y| x[y] == SiteState::Occupied)
                                .count();
                            push(site, SiteState::Occupied, arrow * k as f64);
                        }
                        push(site, SiteState::Blocked, block);
                    }
                    SiteState::Occupied => {
                        push(site, SiteState::Vacant, 1.0);
                        push(site, SiteState::Blocked, block);
                    }
                }
            }
            row
        })
        .collect();
    Ok(GeneratorMatrix::from_rows(3, n, off))
}

/// Generator of the environment alone on `2^n` blocked patterns.
pub fn environment_generator(params: &Params, geometry: &Geometry) -> Result<GeneratorMatrix> {
    check_dim(params, geometry)?;
    check_size(geometry, 2)?;
    let n = geometry.num_sites();
    let dim = 1usize << n;
    let off = (0..dim)
        .map(|i| {
            let mut row = Vec::new();
            for site in 0..n {
                let bit = 1usize << (n - 1 - site);
                let (rate, j) = if i & bit != 0 {
                    (params.unblock_rate(), i & !bit)
                } else {
                    (params.block_rate(), i | bit)
                };
                if rate > 0.0 {
                    row.push((j as u32, rate));
                }
            }
            row
        })
        .collect();
    Ok(GeneratorMatrix::from_rows(2, n, off))
}

/// `init e^{tQ}` without renormalization (linear in `init`).
pub fn propagate(gen: &GeneratorMatrix, init: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
    if init.len() != gen.dim() {
        return Err(Error::NonStochastic(format!("vector of length {} for dimension {}", init.len(), gen.dim())));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidHorizon(t));
    }
    let lambda = gen.max_exit_rate();
    if t == 0.0 || lambda == 0.0 {
        return Ok(init.to_vec());
    }
    let steps = ((lambda * t) / MAX_STEP_MASS).ceil().max(1.0) as usize;
    let mass = lambda * t / steps as f64;
    let step_tol = tol / steps as f64;
    let mut v = init.to_vec();
    for _ in 0..steps {
        v = uniformized_step(gen, &v, lambda, mass, step_tol);
    }
    Ok(v)
}

fn uniformized_step(gen: &GeneratorMatrix, v: &[f64], lambda: f64, mass: f64, tol: f64) -> Vec<f64> {
    let dim = gen.dim();
    let mut term = v.to_vec();
    let mut weight = (-mass).exp();
    let mut out: Vec<f64> = term.iter().map(|x| x * weight).collect();
    let mut next = vec![0.0; dim];
    let mut k = 0usize;
    loop {
        k += 1;
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, &vi) in term.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            next[i] += vi * (1.0 + gen.diag[i] / lambda);
            for &(j, r) in &gen.off[i] {
                next[j as usize] += vi * (r / lambda);
            }
        }
        std::mem::swap(&mut term, &mut next);
        weight *= mass / k as f64;
        for (o, &x) in out.iter_mut().zip(&term) {
            *o += weight * x;
        }
        // Poisson tail beyond k is at most w_{k+1} / (1 - mass / (k + 2)).
        let ratio = mass / (k + 2) as f64;
        if ratio < 1.0 {
            let tail = weight * mass / (k + 1) as f64 / (1.0 - ratio);
            if tail < tol {
                break;
            }
        }
    }
    out
}

fn check_stochastic(v: &[f64]) -> Result<()> {
    if let Some(x) = v.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::NonStochastic(format!("negative or NaN weight {x}")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::NonStochastic(format!("total mass {s}")));
    }
    Ok(())
}

/// `init e^{tQ}` by uniformization with Poisson truncation below `tol`, renormalized.
pub fn transient_distribution(gen: &GeneratorMatrix, init: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
    check_stochastic(init)?;
    let mut v = propagate(gen, init, t, tol)?;
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    Ok(v)
}

/// Total weight of the states satisfying `event`.
pub fn event_probability(gen: &GeneratorMatrix, dist: &[f64], event: impl Fn(&[SiteState]) -> bool) -> f64 {
    dist.iter()
        .enumerate()
        .filter(|(_, &w)| w != 0.0)
        .filter(|(i, _)| event(&gen.decode(*i)))
        .map(|(_, w)| w)
        .sum()
}

/// `P(event happens by time t)` from `init`, via the absorbing chain.
pub fn hitting_probability(
    gen: &GeneratorMatrix,
    init: &[f64],
    t: f64,
    event: impl Fn(&[SiteState]) -> bool + Copy,
) -> Result<f64> {
    let absorbing = gen.absorbing(event);
    let dist = transient_distribution(&absorbing, init, t, POISSON_TAIL)?;
    Ok(event_probability(gen, &dist, event))
}

fn mask(geometry: &Geometry, sel: &SiteSelection) -> Result<Vec<bool>> {
    let mut m = vec![false; geometry.num_sites()];
    for i in sel.resolve(geometry)? {
        m[i] = true;
    }
    Ok(m)
}

/// `nu_A` as a mixture of `2^n` point masses over blocked patterns.
pub fn nu_initial(gen: &GeneratorMatrix, rho: f64, a: &[bool]) -> Vec<f64> {
    let n = gen.n_sites();
    let mut v = vec![0.0; gen.dim()];
    let mut states = vec![SiteState::Vacant; n];
    for pattern in 0..(1usize << n) {
        let mut w = 1.0;
        for (site, s) in states.iter_mut().enumerate() {
            if pattern >> site & 1 == 1 {
                w *= rho;
                *s = SiteState::Blocked;
            } else {
                w *= 1.0 - rho;
                *s = if a[site] { SiteState::Occupied } else { SiteState::Vacant };
            }
        }
        if w > 0.0 {
            v[gen.encode(&states)] += w;
        }
    }
    v
}

/// `nu_A` built site by site as a product distribution (no pattern enumeration).
pub fn nu_initial_product(gen: &GeneratorMatrix, rho: f64, a: &[bool]) -> Vec<f64> {
    let mut v = vec![1.0];
    for &in_a in a {
        let mut per = [0.0; 3];
        per[0] = rho;
        per[if in_a { 2 } else { 1 }] = 1.0 - rho;
        let mut next = vec![0.0; v.len() * 3];
        for (i, &w) in v.iter().enumerate() {
            for (digit, &p) in per.iter().enumerate() {
                next[i * 3 + digit] = w * p;
            }
        }
        v = next;
    }
    debug_assert_eq!(v.len(), gen.dim());
    v
}

pub fn point_mass(gen: &GeneratorMatrix, states: &[SiteState]) -> Vec<f64> {
    let mut v = vec![0.0; gen.dim()];
    v[gen.encode(states)] = 1.0;
    v
}

/// `chi_A`: `A` occupied, everything else blocked.
pub fn chi_initial(gen: &GeneratorMatrix, a: &[bool]) -> Vec<f64> {
    let states: Vec<SiteState> =
        a.iter().map(|&x| if x { SiteState::Occupied } else { SiteState::Blocked }).collect();
    point_mass(gen, &states)
}

/// `mu_rho` on the environment chain.
pub fn environment_equilibrium(gen: &GeneratorMatrix, rho: f64) -> Vec<f64> {
    (0..gen.dim())
        .map(|i| {
            let k = i.count_ones() as i32;
            rho.powi(k) * (1.0 - rho).powi(gen.n_sites() as i32 - k)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    /// `max |(mu_rho Q_env)(y)|`.
    pub residual: f64,
    /// `max |mu(x) q(x, y) - mu(y) q(y, x)|`.
    pub detailed_balance: f64,
}

impl StationarityReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.residual < tol && self.detailed_balance < tol
    }
}

pub fn check_environment_stationarity(params: &Params, geometry: &Geometry) -> Result<StationarityReport> {
    let gen = environment_generator(params, geometry)?;
    let mu = environment_equilibrium(&gen, params.rho());
    let residual = gen.left_apply(&mu).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut detailed_balance = 0.0f64;
    for x in 0..gen.dim() {
        for &(y, r) in gen.off_diagonal(x) {
            let back = gen.rate(y as usize, x);
            detailed_balance = detailed_balance.max((mu[x] * r - mu[y as usize] * back).abs());
        }
    }
    Ok(StationarityReport { residual, detailed_balance })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualitySets {
    #[serde(rename = "A")]
    pub a: Vec<usize>,
    #[serde(rename = "C")]
    pub c: Vec<usize>,
    #[serde(rename = "D")]
    pub d: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityCheck {
    pub params: Params,
    pub sets: DualitySets,
    pub t: f64,
    /// `P^{nu_A}(A_t ∩ C ≠ ∅, B_t ∩ D ≠ ∅)`.
    pub lhs: f64,
    /// `P^{nu_C}(A_t ∩ A ≠ ∅, B_0 ∩ D ≠ ∅)`.
    pub rhs: f64,
    pub gap: f64,
}

fn meets(states: &[SiteState], m: &[bool], s: SiteState) -> bool {
    states.iter().zip(m).any(|(&x, &m)| m && x == s)
}

pub fn exact_duality_check(
    params: &Params,
    geometry: &Geometry,
    a: &SiteSelection,
    c: &SiteSelection,
    d: &SiteSelection,
    t: f64,
) -> Result<DualityCheck> {
    let gen = build_generator(params, geometry)?;
    let (am, cm, dm) = (mask(geometry, a)?, mask(geometry, c)?, mask(geometry, d)?);
    let rho = params.rho();

    let left = transient_distribution(&gen, &nu_initial(&gen, rho, &am), t, POISSON_TAIL)?;
    let lhs = event_probability(&gen, &left, |x| {
        meets(x, &cm, SiteState::Occupied) && meets(x, &dm, SiteState::Blocked)
    });

    let mut right = nu_initial(&gen, rho, &cm);
    for (i, w) in right.iter_mut().enumerate() {
        if !meets(&gen.decode(i), &dm, SiteState::Blocked) {
            *w = 0.0;
        }
    }
    let right = propagate(&gen, &right, t, POISSON_TAIL)?;
    let rhs = event_probability(&gen, &right, |x| meets(x, &am, SiteState::Occupied));

    let idx = |m: &[bool]| m.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
    Ok(DualityCheck {
        params: *params,
        sets: DualitySets { a: idx(&am), c: idx(&cm), d: idx(&dm) },
        t,
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}
