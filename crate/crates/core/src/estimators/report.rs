//! Replicate bookkeeping, associative tallies and the [`EstimateReport`] record.

use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A set of replicate indices: `{ r < total : r % shards == shard }`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Replicates {
    pub total: u64,
    pub shard: u64,
    pub shards: u64,
}

impl Replicates {
    pub fn all(total: u64) -> Self {
        Replicates {
            total,
            shard: 0,
            shards: 1,
        }
    }

    /// Shard `shard` of `shards` (round-robin over replicate indices).
    pub fn shard(total: u64, shard: u64, shards: u64) -> Result<Self> {
        if shards == 0 || shard >= shards {
            return Err(Error::InvalidSweep(format!("shard {shard} of {shards}")));
        }
        Ok(Replicates {
            total,
            shard,
            shards,
        })
    }

    pub fn count(&self) -> u64 {
        if self.shard >= self.total {
            0
        } else {
            (self.total - self.shard).div_ceil(self.shards)
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = u64> {
        (self.shard..self.total).step_by(self.shards as usize)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.count() == 0 {
            return Err(Error::NoReplicates);
        }
        Ok(())
    }
}

/// Combine per-replicate work with an associative, commutative merge so the
/// result does not depend on scheduling.
pub trait Accumulate: Default + Send {
    fn merge(self, other: Self) -> Self;
}

pub(crate) fn accumulate<T, F>(replicates: &Replicates, f: F) -> T
where
    T: Accumulate,
    F: Fn(&mut T, u64) + Sync,
{
    let indices: Vec<u64> = replicates.indices().collect();
    indices
        .par_iter()
        .fold(T::default, |mut acc, &r| {
            f(&mut acc, r);
            acc
        })
        .reduce(T::default, T::merge)
}

/// Counts behind a probability estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub hits: u64,
    /// Hits from replicates that touched the open boundary.
    pub censored_hits: u64,
    /// Misses from replicates that touched the open boundary.
    pub censored_misses: u64,
}

impl Tally {
    pub fn record(&mut self, hit: bool, censored: bool) {
        self.trials += 1;
        self.hits += hit as u64;
        if censored {
            if hit {
                self.censored_hits += 1;
            } else {
                self.censored_misses += 1;
            }
        }
    }

    pub fn estimate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.hits as f64 / self.trials as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.estimate();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

impl Accumulate for Tally {
    fn merge(self, o: Self) -> Self {
        Tally {
            trials: self.trials + o.trials,
            hits: self.hits + o.hits,
            censored_hits: self.censored_hits + o.censored_hits,
            censored_misses: self.censored_misses + o.censored_misses,
        }
    }
}

impl<A: Accumulate, B: Accumulate> Accumulate for (A, B) {
    fn merge(self, o: Self) -> Self {
        (self.0.merge(o.0), self.1.merge(o.1))
    }
}

impl<A: Accumulate, B: Accumulate, C: Accumulate> Accumulate for (A, B, C) {
    fn merge(self, o: Self) -> Self {
        (self.0.merge(o.0), self.1.merge(o.1), self.2.merge(o.2))
    }
}

impl<A: Accumulate> Accumulate for Vec<A> {
    fn merge(self, o: Self) -> Self {
        if self.is_empty() {
            return o;
        }
        if o.is_empty() {
            return self;
        }
        assert_eq!(self.len(), o.len(), "merging tallies of different shape");
        self.into_iter().zip(o).map(|(a, b)| a.merge(b)).collect()
    }
}

/// Monte Carlo probability estimate with its censoring bracket and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub label: String,
    pub estimate: f64,
    pub stderr: f64,
    pub replicates: u64,
    pub tally: Tally,
    /// Censored replicates counted as dead.
    pub lower: f64,
    /// Censored replicates counted as survived.
    pub upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    pub seed: u64,
    pub config_hash: String,
    pub shards: Vec<Replicates>,
}

impl EstimateReport {
    pub fn from_tally(
        label: impl Into<String>,
        tally: Tally,
        horizon: Option<f64>,
        seed: u64,
        config_hash: impl Into<String>,
        replicates: Replicates,
    ) -> Self {
        let n = tally.trials.max(1) as f64;
        EstimateReport {
            label: label.into(),
            estimate: tally.estimate(),
            stderr: tally.stderr(),
            replicates: tally.trials,
            lower: (tally.hits - tally.censored_hits) as f64 / n,
            upper: (tally.hits + tally.censored_misses) as f64 / n,
            tally,
            horizon,
            seed,
            config_hash: config_hash.into(),
            shards: vec![replicates],
        }
    }

    /// `estimate +- z * stderr`, clipped to `[0, 1]`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (
            (self.estimate - z * self.stderr).max(0.0),
            (self.estimate + z * self.stderr).min(1.0),
        )
    }

    pub const CSV_HEADER: &'static str =
        "label,estimate,stderr,replicates,hits,lower,upper,horizon,seed,config_hash";

    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            self.label,
            self.estimate,
            self.stderr,
            self.replicates,
            self.tally.hits,
            self.lower,
            self.upper,
            self.horizon.map(|h| h.to_string()).unwrap_or_default(),
            self.seed,
            self.config_hash
        );
        s
    }

    /// Merge partial reports of one run; replicate indices must be disjoint.
    pub fn merge(parts: &[EstimateReport]) -> Result<EstimateReport> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Merge("no partial reports".into()))?;
        let mut seen: HashSet<u64> = HashSet::new();
        let mut tally = Tally::default();
        let mut shards = Vec::new();
        for p in parts {
            if p.config_hash != first.config_hash {
                return Err(Error::Merge(format!(
                    "config hash {} differs from {}",
                    p.config_hash, first.config_hash
                )));
            }
            if p.label != first.label || p.seed != first.seed {
                return Err(Error::Merge(format!(
                    "report {}/{} does not match {}/{}",
                    p.label, p.seed, first.label, first.seed
                )));
            }
            for s in &p.shards {
                for r in s.indices() {
                    if !seen.insert(r) {
                        return Err(Error::Merge(format!("replicate {r} appears twice")));
                    }
                }
            }
            shards.extend(p.shards.iter().copied());
            tally = tally.merge(p.tally);
        }
        let mut merged = EstimateReport::from_tally(
            first.label.clone(),
            tally,
            first.horizon,
            first.seed,
            first.config_hash.clone(),
            shards[0],
        );
        merged.shards = normalize_shards(shards);
        Ok(merged)
    }
}

/// Collapse a complete set of shards back into a single `all` entry.
fn normalize_shards(mut shards: Vec<Replicates>) -> Vec<Replicates> {
    shards.sort_by_key(|s| (s.total, s.shards, s.shard));
    if let Some(first) = shards.first().copied() {
        let complete = shards.len() as u64 == first.shards
            && shards
                .iter()
                .enumerate()
                .all(|(i, s)| s.total == first.total && s.shards == first.shards && s.shard == i as u64);
        if complete {
            return vec![Replicates::all(first.total)];
        }
    }
    shards
}

/// Short stable digest of any serializable configuration.
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("configuration serializes");
    let digest = Sha256::digest(&bytes);
    hex::encode(&digest[..8])
}

/// `|a - b| <= z * sqrt(sa^2 + sb^2)`.
pub fn within(a: f64, sa: f64, b: f64, sb: f64, z: f64) -> bool {
    (a - b).abs() <= z * (sa * sa + sb * sb).sqrt()
}
