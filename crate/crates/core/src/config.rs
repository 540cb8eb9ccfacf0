use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{Geometry, GeometrySpec};

/// State of a single site, ordered `Blocked < Vacant < Occupied`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
#[repr(i8)]
pub enum SiteState {
    Blocked = -1,
    Vacant = 0,
    Occupied = 1,
}

impl SiteState {
    pub fn value(self) -> i8 {
        self as i8
    }

    pub fn from_value(v: i8) -> Option<Self> {
        match v {
            -1 => Some(SiteState::Blocked),
            0 => Some(SiteState::Vacant),
            1 => Some(SiteState::Occupied),
            _ => None,
        }
    }

    pub fn glyph(self) -> char {
        match self {
            SiteState::Blocked => 'B',
            SiteState::Vacant => '.',
            SiteState::Occupied => '1',
        }
    }

    pub fn from_glyph(c: char) -> Option<Self> {
        match c {
            'B' => Some(SiteState::Blocked),
            '.' => Some(SiteState::Vacant),
            '1' => Some(SiteState::Occupied),
            _ => None,
        }
    }
}

impl From<SiteState> for i8 {
    fn from(s: SiteState) -> i8 {
        s.value()
    }
}

impl TryFrom<i8> for SiteState {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        SiteState::from_value(v).ok_or_else(|| format!("site state {v} is not -1, 0 or 1"))
    }
}

/// Assignment of a [`SiteState`] to every site of a geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    geometry: Arc<Geometry>,
    states: Vec<SiteState>,
}

impl Configuration {
    pub fn new(geometry: Arc<Geometry>, states: Vec<SiteState>) -> Result<Self> {
        if states.len() != geometry.num_sites() {
            return Err(Error::GeometryMismatch(format!(
                "{} states for a box of {} sites",
                states.len(),
                geometry.num_sites()
            )));
        }
        Ok(Configuration { geometry, states })
    }

    pub fn filled(geometry: Arc<Geometry>, state: SiteState) -> Self {
        let n = geometry.num_sites();
        Configuration {
            geometry,
            states: vec![state; n],
        }
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geometry
    }

    pub fn states(&self) -> &[SiteState] {
        &self.states
    }

    pub fn get(&self, site: usize) -> SiteState {
        self.states[site]
    }

    pub fn set(&mut self, site: usize, state: SiteState) {
        self.states[site] = state;
    }

    pub fn into_states(self) -> Vec<SiteState> {
        self.states
    }

    /// `A(eta)`: indices of occupied sites.
    pub fn occupied(&self) -> Vec<usize> {
        self.indices_of(SiteState::Occupied)
    }

    /// `B(eta)`: indices of blocked sites.
    pub fn blocked(&self) -> Vec<usize> {
        self.indices_of(SiteState::Blocked)
    }

    fn indices_of(&self, s: SiteState) -> Vec<usize> {
        self.states
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| (v == s).then_some(i))
            .collect()
    }

    pub fn count(&self, s: SiteState) -> usize {
        self.states.iter().filter(|&&v| v == s).count()
    }

    /// Partial order: `self <= other` at every site.
    pub fn leq(&self, other: &Configuration) -> Result<bool> {
        self.geometry.check_same(&other.geometry)?;
        Ok(states_leq(&self.states, &other.states))
    }

    /// Compact text grid, one glyph per site; rows run along the last axis and
    /// higher-dimensional slabs are separated by blank lines.
    pub fn to_grid(&self) -> String {
        let bounds = self.geometry.bounds();
        let d = bounds.dim();
        let row = bounds.side(d - 1);
        let mut block_sizes = Vec::with_capacity(d);
        let mut acc = 1;
        for k in (0..d).rev() {
            acc *= bounds.side(k);
            block_sizes.push(acc);
        }
        let mut out = String::with_capacity(self.states.len() + self.states.len() / row * 2);
        for (i, s) in self.states.iter().enumerate() {
            out.push(s.glyph());
            let done = i + 1;
            if done % row == 0 {
                out.push('\n');
                if done < self.states.len() {
                    let wraps = block_sizes[1..].iter().filter(|&&b| done % b == 0).count();
                    for _ in 0..wraps {
                        out.push('\n');
                    }
                }
            }
        }
        out
    }

    pub fn from_grid(geometry: Arc<Geometry>, text: &str) -> Result<Self> {
        let states = text
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| SiteState::from_glyph(c).ok_or_else(|| Error::Format(format!("bad glyph {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Configuration::new(geometry, states)
    }
}

pub(crate) fn states_leq(a: &[SiteState], b: &[SiteState]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_grid())
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigurationDto {
    geometry: GeometrySpec,
    states: Vec<i8>,
}

impl Serialize for Configuration {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ConfigurationDto {
            geometry: self.geometry.spec().clone(),
            states: self.states.iter().map(|s| s.value()).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let dto = ConfigurationDto::deserialize(deserializer)?;
        let geometry = Geometry::from_spec(dto.geometry).map_err(D::Error::custom)?;
        let states = dto
            .states
            .into_iter()
            .map(|v| SiteState::from_value(v).ok_or_else(|| D::Error::custom(format!("bad state {v}"))))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Configuration::new(Arc::new(geometry), states).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Boundary, Region};
    use proptest::prelude::*;

    fn line(n: usize) -> Arc<Geometry> {
        Arc::new(Geometry::line(n, Boundary::Open).unwrap())
    }

    fn config(g: &Arc<Geometry>, s: &str) -> Configuration {
        Configuration::from_grid(g.clone(), s).unwrap()
    }

    #[test]
    fn leq_examples() {
        let g = line(3);
        let a = config(&g, "1.B");
        assert!(a.leq(&a).unwrap());
        let lo = Configuration::filled(g.clone(), SiteState::Blocked);
        let hi = Configuration::filled(g.clone(), SiteState::Occupied);
        assert!(lo.leq(&hi).unwrap());
        assert!(!hi.leq(&lo).unwrap());
        // A1 = {0}, B1 = {}; A2 = {}, B2 = {}
        assert!(!config(&g, "1..").leq(&config(&g, "...")).unwrap());
        assert!(config(&g, "...").leq(&config(&g, "1..")).unwrap());
        assert!(a.leq(&Configuration::filled(line(4), SiteState::Occupied)).is_err());
    }

    #[test]
    fn a_and_b_partition() {
        let g = line(5);
        let c = config(&g, "1.B1B");
        assert_eq!(c.occupied(), vec![0, 3]);
        assert_eq!(c.blocked(), vec![2, 4]);
        assert_eq!(c.count(SiteState::Vacant), 1);
    }

    #[test]
    fn grid_layout_2d_and_3d() {
        let g2 = Arc::new(Geometry::new(Region::new(vec![0, 0], vec![1, 2]).unwrap(), Boundary::Open, None).unwrap());
        let c = config(&g2, "1.B\nB.1\n");
        assert_eq!(c.to_grid(), "1.B\nB.1\n");
        let g3 = Arc::new(Geometry::cube(3, 0, Boundary::Open).unwrap().with_birth_domain(None).unwrap());
        assert_eq!(Configuration::filled(g3, SiteState::Vacant).to_grid(), ".\n");
        let g3 = Arc::new(Geometry::new(Region::new(vec![0, 0, 0], vec![1, 1, 1]).unwrap(), Boundary::Open, None).unwrap());
        let c = Configuration::filled(g3.clone(), SiteState::Occupied);
        assert_eq!(c.to_grid(), "11\n11\n\n11\n11\n");
        assert_eq!(Configuration::from_grid(g3, &c.to_grid()).unwrap(), c);
    }

    #[test]
    fn grid_rejects_bad_input() {
        let g = line(3);
        assert!(Configuration::from_grid(g.clone(), "1.").is_err());
        assert!(Configuration::from_grid(g, "1.x").is_err());
    }

    fn arb_state() -> impl Strategy<Value = SiteState> {
        prop_oneof![Just(SiteState::Blocked), Just(SiteState::Vacant), Just(SiteState::Occupied)]
    }

    proptest! {
        #[test]
        fn text_and_json_roundtrip(states in proptest::collection::vec(arb_state(), 12)) {
            let g = Arc::new(Geometry::new(Region::new(vec![-1, 0], vec![1, 3]).unwrap(), Boundary::Periodic, None).unwrap());
            let c = Configuration::new(g.clone(), states).unwrap();
            prop_assert_eq!(&Configuration::from_grid(g, &c.to_grid()).unwrap(), &c);
            let json = serde_json::to_string(&c).unwrap();
            let back: Configuration = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(serde_json::to_string(&back).unwrap(), json);
        }

        #[test]
        fn leq_is_a_partial_order(
            a in proptest::collection::vec(arb_state(), 6),
            b in proptest::collection::vec(arb_state(), 6),
            c in proptest::collection::vec(arb_state(), 6),
        ) {
            let g = line(6);
            let (a, b, c) = (
                Configuration::new(g.clone(), a).unwrap(),
                Configuration::new(g.clone(), b).unwrap(),
                Configuration::new(g, c).unwrap(),
            );
            prop_assert!(a.leq(&a).unwrap());
            if a.leq(&b).unwrap() && b.leq(&a).unwrap() {
                prop_assert_eq!(&a, &b);
            }
            if a.leq(&b).unwrap() && b.leq(&c).unwrap() {
                prop_assert!(a.leq(&c).unwrap());
            }
            // A1 subset A2 and B1 superset B2
            let sets = a.occupied().iter().all(|x| b.occupied().contains(x))
                && b.blocked().iter().all(|x| a.blocked().contains(x));
            prop_assert_eq!(sets, a.leq(&b).unwrap());
        }
    }
}
