//! Finite boxes of `Z^d`, neighbor tables and the optional birth domain.
//!
//! Sites are enumerated in row-major order (last coordinate fastest). Every
//! site owns `2d` neighbor slots ordered `-e_0, +e_0, -e_1, +e_1, ...`; in
//! [`Boundary::Open`] mode slots that leave the box are dead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Coord = Vec<i64>;

/// Marker stored in the neighbor table for a slot pointing outside the box.
pub const DEAD_SLOT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Arrows leaving the box are discarded.
    Open,
    /// Torus.
    Periodic,
}

/// Inclusive integer hyper-rectangle `[lo_0, hi_0] x ... x [lo_{d-1}, hi_{d-1}]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Coord,
    pub hi: Coord,
}

impl Region {
    pub fn new(lo: Coord, hi: Coord) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidGeometry(format!(
                "region corners {lo:?} and {hi:?} must have the same positive dimension"
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidGeometry(format!(
                "region lower corner {lo:?} exceeds upper corner {hi:?}"
            )));
        }
        Ok(Region { lo, hi })
    }

    /// `[-radius, radius]^d`.
    pub fn cube(d: usize, radius: i64) -> Self {
        Region {
            lo: vec![-radius; d],
            hi: vec![radius; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| l <= v && v <= h)
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }

    pub fn side(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1) as usize
    }

    pub fn volume(&self) -> usize {
        (0..self.dim()).map(|k| self.side(k)).product()
    }

    /// All points in row-major order.
    pub fn points(&self) -> Vec<Coord> {
        let mut out = Vec::with_capacity(self.volume());
        let mut cur = self.lo.clone();
        loop {
            out.push(cur.clone());
            let mut axis = self.dim();
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if cur[axis] < self.hi[axis] {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = self.lo[axis];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    #[serde(rename = "box")]
    pub bounds: Region,
    pub boundary: Boundary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub birth_domain: Option<Region>,
}

/// The simulated window together with its precomputed neighbor table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometrySpec", into = "GeometrySpec")]
pub struct Geometry {
    spec: GeometrySpec,
    neighbors: Vec<u32>,
    strides: Vec<usize>,
    births_allowed: Vec<bool>,
    on_edge: Vec<bool>,
}

impl TryFrom<GeometrySpec> for Geometry {
    type Error = Error;

    fn try_from(spec: GeometrySpec) -> Result<Self> {
        Geometry::from_spec(spec)
    }
}

impl From<Geometry> for GeometrySpec {
    fn from(g: Geometry) -> Self {
        g.spec
    }
}

impl Geometry {
    pub fn new(bounds: Region, boundary: Boundary, birth_domain: Option<Region>) -> Result<Self> {
        Geometry::from_spec(GeometrySpec {
            bounds,
            boundary,
            birth_domain,
        })
    }

    /// Sites `0..n` on the line.
    pub fn line(n: usize, boundary: Boundary) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGeometry("empty line".into()));
        }
        Geometry::new(Region::new(vec![0], vec![n as i64 - 1])?, boundary, None)
    }

    /// `[-radius, radius]^d` without a birth domain.
    pub fn cube(d: usize, radius: i64, boundary: Boundary) -> Result<Self> {
        if radius < 0 {
            return Err(Error::InvalidGeometry(format!("negative radius {radius}")));
        }
        Geometry::new(Region::cube(d, radius), boundary, None)
    }

    pub fn from_spec(spec: GeometrySpec) -> Result<Self> {
        let bounds = Region::new(spec.bounds.lo.clone(), spec.bounds.hi.clone())?;
        let d = bounds.dim();
        if let Some(dom) = &spec.birth_domain {
            Region::new(dom.lo.clone(), dom.hi.clone())?;
            if !bounds.contains_region(dom) {
                return Err(Error::InvalidGeometry(format!(
                    "birth domain {dom:?} is not contained in the box {bounds:?}"
                )));
            }
        }
        let n: usize = bounds.volume();
        if n.checked_mul(2 * d).is_none_or(|e| e >= DEAD_SLOT as usize) {
            return Err(Error::InvalidGeometry(format!("box with {n} sites is too large")));
        }

        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * bounds.side(k + 1);
        }

        let mut neighbors = vec![DEAD_SLOT; n * 2 * d];
        let mut births_allowed = vec![true; n];
        let mut on_edge = vec![false; n];
        for (i, x) in bounds.points().into_iter().enumerate() {
            for k in 0..d {
                let side = bounds.side(k) as i64;
                let offset = x[k] - bounds.lo[k];
                for (dir, step) in [(0usize, -1i64), (1, 1)] {
                    let moved = offset + step;
                    let target = if (0..side).contains(&moved) {
                        Some(moved)
                    } else if spec.boundary == Boundary::Periodic {
                        Some(moved.rem_euclid(side))
                    } else {
                        None
                    };
                    match target {
                        Some(t) => {
                            let j = (i as i64 + (t - offset) * strides[k] as i64) as usize;
                            neighbors[i * 2 * d + 2 * k + dir] = j as u32;
                        }
                        None => on_edge[i] = true,
                    }
                }
            }
            if let Some(dom) = &spec.birth_domain {
                births_allowed[i] = dom.contains(&x);
            }
        }

        Ok(Geometry {
            spec: GeometrySpec {
                bounds,
                boundary: spec.boundary,
                birth_domain: spec.birth_domain,
            },
            neighbors,
            strides,
            births_allowed,
            on_edge,
        })
    }

    pub fn spec(&self) -> &GeometrySpec {
        &self.spec
    }

    pub fn bounds(&self) -> &Region {
        &self.spec.bounds
    }

    pub fn boundary(&self) -> Boundary {
        self.spec.boundary
    }

    pub fn birth_domain(&self) -> Option<&Region> {
        self.spec.birth_domain.as_ref()
    }

    pub fn with_birth_domain(&self, domain: Option<Region>) -> Result<Self> {
        Geometry::new(self.spec.bounds.clone(), self.spec.boundary, domain)
    }

    pub fn with_boundary(&self, boundary: Boundary) -> Result<Self> {
        Geometry::new(self.spec.bounds.clone(), boundary, self.spec.birth_domain.clone())
    }

    pub fn dim(&self) -> usize {
        self.spec.bounds.dim()
    }

    pub fn num_sites(&self) -> usize {
        self.births_allowed.len()
    }

    pub fn slots_per_site(&self) -> usize {
        2 * self.dim()
    }

    /// Neighbor of `site` through `slot`, or `None` for a dead slot.
    #[inline]
    pub fn neighbor(&self, site: usize, slot: usize) -> Option<usize> {
        let j = self.neighbors[site * self.slots_per_site() + slot];
        (j != DEAD_SLOT).then_some(j as usize)
    }

    /// Raw neighbor table entry; [`DEAD_SLOT`] marks a dead slot.
    #[inline]
    pub fn neighbor_raw(&self, edge: usize) -> u32 {
        self.neighbors[edge]
    }

    pub fn neighbors(&self, site: usize) -> impl Iterator<Item = Option<usize>> + '_ {
        (0..self.slots_per_site()).map(move |slot| self.neighbor(site, slot))
    }

    #[inline]
    pub fn births_allowed(&self, site: usize) -> bool {
        self.births_allowed[site]
    }

    /// True if the site has at least one dead slot (it touches an open boundary).
    #[inline]
    pub fn touches_boundary(&self, site: usize) -> bool {
        self.on_edge[site]
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        self.spec.bounds.contains(x)
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        Some(
            x.iter()
                .zip(&self.spec.bounds.lo)
                .zip(&self.strides)
                .map(|((v, l), s)| (v - l) as usize * s)
                .sum(),
        )
    }

    pub fn coord_of(&self, index: usize) -> Coord {
        let mut rest = index;
        self.strides
            .iter()
            .zip(&self.spec.bounds.lo)
            .map(|(s, l)| {
                let q = rest / s;
                rest %= s;
                l + q as i64
            })
            .collect()
    }

    /// Resolve coordinates to sorted, deduplicated site indices.
    pub fn resolve(&self, points: &[Coord]) -> Result<Vec<usize>> {
        let mut out = points
            .iter()
            .map(|x| self.index_of(x).ok_or_else(|| Error::OutsideBox(x.clone())))
            .collect::<Result<Vec<_>>>()?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Indices of the box sites inside `region` (which may stick out of the box).
    pub fn sites_in(&self, region: &Region) -> Vec<usize> {
        (0..self.num_sites())
            .filter(|&i| region.contains(&self.coord_of(i)))
            .collect()
    }

    pub fn all_points(&self) -> Vec<Coord> {
        self.spec.bounds.points()
    }

    pub(crate) fn check_same(&self, other: &Geometry) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::GeometryMismatch(format!(
                "{:?} vs {:?}",
                self.spec, other.spec
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_roundtrip() {
        let g = Geometry::new(
            Region::new(vec![-1, 2], vec![1, 5]).unwrap(),
            Boundary::Open,
            None,
        )
        .unwrap();
        assert_eq!(g.num_sites(), 12);
        for i in 0..g.num_sites() {
            assert_eq!(g.index_of(&g.coord_of(i)), Some(i));
        }
        assert_eq!(g.index_of(&[-1, 3]), Some(1));
        assert_eq!(g.index_of(&[0, 2]), Some(4));
        assert_eq!(g.index_of(&[2, 2]), None);
        assert_eq!(g.all_points()[5], vec![0, 3]);
    }

    #[test]
    fn open_line_has_dead_end_slots() {
        let g = Geometry::line(3, Boundary::Open).unwrap();
        assert_eq!(g.neighbor(0, 0), None);
        assert_eq!(g.neighbor(0, 1), Some(1));
        assert_eq!(g.neighbor(2, 1), None);
        assert!(g.touches_boundary(0) && g.touches_boundary(2));
        assert!(!g.touches_boundary(1));
    }

    #[test]
    fn ring_wraps() {
        let g = Geometry::line(3, Boundary::Periodic).unwrap();
        assert_eq!(g.neighbor(0, 0), Some(2));
        assert_eq!(g.neighbor(2, 1), Some(0));
        assert!((0..3).all(|i| !g.touches_boundary(i)));
    }

    #[test]
    fn every_site_has_2d_slots() {
        let g = Geometry::cube(3, 1, Boundary::Periodic).unwrap();
        for i in 0..g.num_sites() {
            assert_eq!(g.neighbors(i).count(), 6);
            for (slot, j) in g.neighbors(i).enumerate() {
                let j = j.unwrap();
                let (xi, xj) = (g.coord_of(i), g.coord_of(j));
                let axis = slot / 2;
                let diff: i64 = xi.iter().zip(&xj).map(|(a, b)| (a - b).abs()).sum();
                // side 3 torus: a step is +-1 or a wrap of 2
                assert!(diff == 1 || diff == 2);
                assert!(xi.iter().zip(&xj).enumerate().all(|(k, (a, b))| k == axis || a == b));
            }
        }
    }

    #[test]
    fn birth_domain_must_be_inside() {
        let bounds = Region::cube(1, 2);
        assert!(Geometry::new(bounds.clone(), Boundary::Open, Some(Region::cube(1, 3))).is_err());
        let g = Geometry::new(bounds, Boundary::Open, Some(Region::cube(1, 1))).unwrap();
        let allowed: Vec<bool> = (0..5).map(|i| g.births_allowed(i)).collect();
        assert_eq!(allowed, vec![false, true, true, true, false]);
    }

    #[test]
    fn json_roundtrip() {
        let g = Geometry::new(Region::cube(2, 2), Boundary::Open, Some(Region::cube(2, 1))).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: Geometry = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
    }
}
