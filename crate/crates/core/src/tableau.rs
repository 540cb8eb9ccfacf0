//! One realization of the graphical representation on a finite space-time window.
//!
//! Events are materialized up front and globally time-sorted so that any
//! number of initial conditions, thinned copies and the dual process can replay
//! exactly the same randomness.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Geometry, GeometrySpec, DEAD_SLOT};
use crate::params::Params;
use crate::rng::{Purpose, StreamSeed};
use crate::MAX_HORIZON;

/// Events are generated in independent chunks of this much time, each with its
/// own key-derived generator.
pub const GENERATION_SPAN: f64 = 1.0;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"CPTB";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum EventKind {
    /// Birth arrow along a directed edge, rate `beta / 2d`.
    Arrow = 0,
    /// Death symbol, rate 1.
    Death = 1,
    /// Blocking symbol, rate `alpha`.
    Block = 2,
    /// Unblocking symbol, rate `alpha * delta`.
    Unblock = 3,
}

impl EventKind {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(EventKind::Arrow),
            1 => Some(EventKind::Death),
            2 => Some(EventKind::Block),
            3 => Some(EventKind::Unblock),
            _ => None,
        }
    }
}

/// A Poisson mark. For arrows `id` is the edge id `site * 2d + slot`,
/// otherwise it is the site index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub id: u32,
    pub kind: EventKind,
}

impl Event {
    /// The site carrying the mark (the source site for an arrow).
    #[inline]
    pub fn site(&self, slots: usize) -> usize {
        match self.kind {
            EventKind::Arrow => self.id as usize / slots,
            _ => self.id as usize,
        }
    }

    #[inline]
    pub fn slot(&self, slots: usize) -> usize {
        self.id as usize % slots
    }

    /// Deterministic total order: time, site, kind rank, edge direction.
    pub fn order(&self, other: &Event, slots: usize) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.site(slots).cmp(&other.site(slots)))
            .then(self.kind.cmp(&other.kind))
            .then(self.slot(slots).cmp(&other.slot(slots)))
    }
}

#[derive(Debug, Default)]
struct SiteIndex {
    offsets: Vec<usize>,
    events: Vec<u32>,
}

#[derive(Debug)]
pub struct EventTableau {
    params: Params,
    geometry: Arc<Geometry>,
    horizon: f64,
    seed: StreamSeed,
    events: Vec<Event>,
    index: OnceLock<SiteIndex>,
}

impl Clone for EventTableau {
    fn clone(&self) -> Self {
        EventTableau {
            params: self.params,
            geometry: self.geometry.clone(),
            horizon: self.horizon,
            seed: self.seed,
            events: self.events.clone(),
            index: OnceLock::new(),
        }
    }
}

impl PartialEq for EventTableau {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.geometry == other.geometry
            && self.horizon.to_bits() == other.horizon.to_bits()
            && self.seed == other.seed
            && self.events.len() == other.events.len()
            && self.events.iter().zip(&other.events).all(|(a, b)| {
                a.time.to_bits() == b.time.to_bits() && a.id == b.id && a.kind == b.kind
            })
    }
}

pub(crate) fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0 && horizon <= MAX_HORIZON) {
        return Err(Error::InvalidHorizon(horizon));
    }
    Ok(())
}

fn check_dims(params: &Params, geometry: &Geometry) -> Result<()> {
    if params.d() != geometry.dim() {
        return Err(Error::GeometryMismatch(format!(
            "params have d = {} but the box has dimension {}",
            params.d(),
            geometry.dim()
        )));
    }
    Ok(())
}

/// Number of generation chunks covering `[0, horizon]`.
pub(crate) fn chunk_count(horizon: f64) -> u64 {
    (horizon / GENERATION_SPAN).ceil().max(1.0) as u64
}

/// Append the events of chunk `k` (times in `(k * span, min((k + 1) * span, horizon)]`).
pub(crate) fn generate_chunk(
    params: &Params,
    geometry: &Geometry,
    seed: StreamSeed,
    chunk: u64,
    horizon: f64,
    out: &mut Vec<Event>,
) {
    let n = geometry.num_sites();
    let slots = geometry.slots_per_site();
    let (arrow, death, block, unblock) = (params.beta(), 1.0, params.block_rate(), params.unblock_rate());
    let site_rate = arrow + death + block + unblock;
    let total = site_rate * n as f64;
    let start = chunk as f64 * GENERATION_SPAN;
    let end = (start + GENERATION_SPAN).min(horizon);
    if total <= 0.0 || start >= end {
        return;
    }
    let first = out.len();
    let mut rng = seed.block_rng(Purpose::Tableau, chunk);
    let mut t = start;
    loop {
        let gap: f64 = rng.sample(Exp1);
        t += gap / total;
        if t > end {
            break;
        }
        let u = rng.random::<f64>() * site_rate;
        let site = rng.random_range(0..n);
        let (kind, id) = if u < arrow {
            (EventKind::Arrow, site * slots + rng.random_range(0..slots))
        } else if u < arrow + death {
            (EventKind::Death, site)
        } else if u < arrow + death + block {
            (EventKind::Block, site)
        } else {
            (EventKind::Unblock, site)
        };
        out.push(Event {
            time: t,
            id: id as u32,
            kind,
        });
    }
    let chunk_events = &mut out[first..];
    if chunk_events.windows(2).any(|w| w[0].time == w[1].time) {
        chunk_events.sort_by(|a, b| a.order(b, slots));
    }
}

impl EventTableau {
    /// Draw all Poisson marks on `box x (0, horizon]`.
    pub fn generate(
        params: Params,
        geometry: Arc<Geometry>,
        horizon: f64,
        seed: impl Into<StreamSeed>,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        check_dims(&params, &geometry)?;
        let seed = seed.into();
        let expected = (params.beta() + 1.0 + params.block_rate() + params.unblock_rate())
            * geometry.num_sites() as f64
            * horizon;
        let mut events = Vec::with_capacity((expected * 1.05 + 16.0).min(1e9) as usize);
        for k in 0..chunk_count(horizon) {
            generate_chunk(&params, &geometry, seed, k, horizon, &mut events);
        }
        Ok(EventTableau {
            params,
            geometry,
            horizon,
            seed,
            events,
            index: OnceLock::new(),
        })
    }

    /// Build a tableau from explicit marks (validated).
    pub fn from_events(
        params: Params,
        geometry: Arc<Geometry>,
        horizon: f64,
        seed: impl Into<StreamSeed>,
        mut events: Vec<Event>,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        check_dims(&params, &geometry)?;
        let n = geometry.num_sites();
        let slots = geometry.slots_per_site();
        for e in &events {
            if !(e.time > 0.0 && e.time <= horizon) {
                return Err(Error::Format(format!("event time {} outside (0, {horizon}]", e.time)));
            }
            let limit = if e.kind == EventKind::Arrow { n * slots } else { n };
            if e.id as usize >= limit {
                return Err(Error::Format(format!("event id {} out of range", e.id)));
            }
        }
        events.sort_by(|a, b| a.order(b, slots));
        Ok(EventTableau {
            params,
            geometry,
            horizon,
            seed: seed.into(),
            events,
            index: OnceLock::new(),
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geometry
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> StreamSeed {
        self.seed
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Target of an arrow, or `None` if the arrow leaves an open box.
    #[inline]
    pub fn arrow_target(&self, e: &Event) -> Option<usize> {
        let j = self.geometry.neighbor_raw(e.id as usize);
        (j != DEAD_SLOT).then_some(j as usize)
    }

    /// Arrows into dead boundary slots are stored but never act.
    pub fn is_inert(&self, e: &Event) -> bool {
        e.kind == EventKind::Arrow && self.arrow_target(e).is_none()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Events with time in `(t0, t1]`, in global order.
    pub fn slice(&self, t0: f64, t1: f64) -> Result<impl Iterator<Item = &Event> + '_> {
        if !(0.0 <= t0 && t0 <= t1 && t1 <= self.horizon) {
            return Err(Error::InvalidWindow(format!(
                "({t0}, {t1}] is not inside [0, {}]",
                self.horizon
            )));
        }
        let (a, b) = self.window_indices(t0, t1);
        Ok(self.events[a..b].iter())
    }

    /// Index range of events with time in `(t0, t1]`.
    pub fn window_indices(&self, t0: f64, t1: f64) -> (usize, usize) {
        let a = self.events.partition_point(|e| e.time <= t0);
        let b = self.events.partition_point(|e| e.time <= t1);
        (a, b.max(a))
    }

    /// Event indices whose carrying site is `site`, in time order.
    pub fn events_at(&self, site: usize) -> impl Iterator<Item = (usize, &Event)> + '_ {
        let index = self.index.get_or_init(|| self.build_index());
        index.events[index.offsets[site]..index.offsets[site + 1]]
            .iter()
            .map(move |&i| (i as usize, &self.events[i as usize]))
    }

    fn build_index(&self) -> SiteIndex {
        let n = self.geometry.num_sites();
        let slots = self.geometry.slots_per_site();
        let mut offsets = vec![0usize; n + 1];
        for e in &self.events {
            offsets[e.site(slots) + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut events = vec![0u32; self.events.len()];
        for (k, e) in self.events.iter().enumerate() {
            let s = e.site(slots);
            events[fill[s]] = k as u32;
            fill[s] += 1;
        }
        SiteIndex { offsets, events }
    }

    /// Keep each arrow independently with probability `beta_prime / beta`.
    ///
    /// Successive thinnings of the same tableau must use distinct seeds.
    pub fn thin_arrows(&self, beta_prime: f64, seed: impl Into<StreamSeed>) -> Result<Self> {
        let beta = self.params.beta();
        if !(beta_prime >= 0.0) || beta_prime > beta {
            return Err(Error::ThinningUpward {
                from: beta,
                to: beta_prime,
            });
        }
        let params = self.params.with_beta(beta_prime)?;
        let events = if beta_prime == beta {
            self.events.clone()
        } else {
            let keep = beta_prime / beta;
            let mut rng = seed.into().rng(Purpose::Thinning);
            self.events
                .iter()
                .filter(|e| e.kind != EventKind::Arrow || rng.random::<f64>() < keep)
                .copied()
                .collect()
        };
        Ok(EventTableau {
            params,
            geometry: self.geometry.clone(),
            horizon: self.horizon,
            seed: self.seed,
            events,
            index: OnceLock::new(),
        })
    }

    pub fn header(&self) -> TableauHeader {
        TableauHeader {
            format_version: FORMAT_VERSION,
            params: self.params,
            geometry: self.geometry.spec().clone(),
            horizon: self.horizon,
            seed: self.seed,
            events: self.events.len() as u64,
        }
    }

    /// Binary record stream: magic, JSON header, then `(f64, u32, u8)` records, little endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header())?;
        w.write_all(MAGIC)?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&(self.events.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.events.len() * 13);
        for e in &self.events {
            buf.extend_from_slice(&e.time.to_le_bytes());
            buf.extend_from_slice(&e.id.to_le_bytes());
            buf.push(e.kind as u8);
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a tableau stream".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
        r.read_exact(&mut header)?;
        let header: TableauHeader = serde_json::from_slice(&header)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported tableau format version {}",
                header.format_version
            )));
        }
        let mut count = [0u8; 8];
        r.read_exact(&mut count)?;
        let count = u64::from_le_bytes(count);
        if count != header.events {
            return Err(Error::Format("event count disagrees with header".into()));
        }
        let mut events = Vec::with_capacity(count as usize);
        let mut rec = [0u8; 13];
        for _ in 0..count {
            r.read_exact(&mut rec)?;
            let kind = EventKind::from_u8(rec[12])
                .ok_or_else(|| Error::Format(format!("bad event kind {}", rec[12])))?;
            events.push(Event {
                time: f64::from_le_bytes(rec[0..8].try_into().unwrap()),
                id: u32::from_le_bytes(rec[8..12].try_into().unwrap()),
                kind,
            });
        }
        let geometry = Arc::new(Geometry::from_spec(header.geometry)?);
        let tableau = EventTableau::from_events(header.params, geometry, header.horizon, header.seed, events.clone())?;
        // from_events re-sorts; a stream that was not in canonical order is malformed
        if tableau.events.iter().zip(&events).any(|(a, b)| a.time.to_bits() != b.time.to_bits() || a.id != b.id) {
            return Err(Error::Format("events are not in canonical order".into()));
        }
        Ok(tableau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableauHeader {
    pub format_version: u32,
    pub params: Params,
    pub geometry: GeometrySpec,
    pub horizon: f64,
    pub seed: StreamSeed,
    pub events: u64,
}
