//! Initial laws `nu_A`, `chi_A`, `mu_rho` and deterministic starts.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Configuration, SiteState};
use crate::error::{Error, Result};
use crate::geometry::{Coord, Geometry, Region};
use crate::params::Params;
use crate::rng::{Purpose, StreamSeed};

/// A finite set of sites named independently of any particular box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteSelection {
    /// Every site of the box.
    All,
    Region(Region),
    Points(Vec<Coord>),
}

impl SiteSelection {
    pub fn empty() -> Self {
        SiteSelection::Points(Vec::new())
    }

    pub fn point(x: Coord) -> Self {
        SiteSelection::Points(vec![x])
    }

    pub fn origin(d: usize) -> Self {
        SiteSelection::point(vec![0; d])
    }

    /// Sorted site indices; anything outside the box is rejected.
    pub fn resolve(&self, geometry: &Geometry) -> Result<Vec<usize>> {
        match self {
            SiteSelection::All => Ok((0..geometry.num_sites()).collect()),
            SiteSelection::Region(r) => {
                if !geometry.bounds().contains_region(r) {
                    return Err(Error::OutsideBox(if geometry.contains(&r.lo) {
                        r.hi.clone()
                    } else {
                        r.lo.clone()
                    }));
                }
                Ok(geometry.sites_in(r))
            }
            SiteSelection::Points(p) => geometry.resolve(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "sites")]
pub enum InitialLaw {
    /// Environment at equilibrium, then a 1 on every unblocked site of the set.
    Nu(SiteSelection),
    /// The set fully occupied, everything else blocked.
    Chi(SiteSelection),
    /// Environment at equilibrium and no 1's (`nu` of the empty set).
    MuRho,
    Deterministic(Configuration),
}

impl InitialLaw {
    pub fn is_random(&self) -> bool {
        matches!(self, InitialLaw::Nu(_) | InitialLaw::MuRho)
    }

    pub fn resolve(&self, geometry: &Arc<Geometry>) -> Result<ResolvedLaw> {
        let n = geometry.num_sites();
        let mask = |sel: &SiteSelection| -> Result<Vec<bool>> {
            let mut m = vec![false; n];
            for i in sel.resolve(geometry)? {
                m[i] = true;
            }
            Ok(m)
        };
        Ok(match self {
            InitialLaw::Nu(sel) => ResolvedLaw::Nu(mask(sel)?),
            InitialLaw::MuRho => ResolvedLaw::Nu(vec![false; n]),
            InitialLaw::Chi(sel) => ResolvedLaw::Fixed(
                mask(sel)?
                    .into_iter()
                    .map(|a| if a { SiteState::Occupied } else { SiteState::Blocked })
                    .collect(),
            ),
            InitialLaw::Deterministic(c) => {
                c.geometry().check_same(geometry)?;
                ResolvedLaw::Fixed(c.states().to_vec())
            }
        })
    }
}

/// An initial law bound to a geometry, ready for repeated sampling.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedLaw {
    Nu(Vec<bool>),
    Fixed(Vec<SiteState>),
}

impl ResolvedLaw {
    /// Draw into `out`. The blocked set of a `nu` law comes from the
    /// environment stream of `seed`, which is what the dual process reuses.
    pub fn sample_into(&self, rho: f64, seed: StreamSeed, out: &mut Vec<SiteState>) {
        out.clear();
        match self {
            ResolvedLaw::Fixed(states) => out.extend_from_slice(states),
            ResolvedLaw::Nu(in_a) => {
                let mut rng = seed.rng(Purpose::Environment);
                out.extend(in_a.iter().map(|&a| {
                    if rng.random::<f64>() < rho {
                        SiteState::Blocked
                    } else if a {
                        SiteState::Occupied
                    } else {
                        SiteState::Vacant
                    }
                }));
            }
        }
    }
}

/// Blocked set drawn from the product measure `mu_rho` on the environment stream.
pub fn sample_environment(n: usize, rho: f64, seed: StreamSeed) -> Vec<bool> {
    let mut rng = seed.rng(Purpose::Environment);
    (0..n).map(|_| rng.random::<f64>() < rho).collect()
}

pub fn sample_initial(
    law: &InitialLaw,
    params: &Params,
    geometry: &Arc<Geometry>,
    seed: impl Into<StreamSeed>,
) -> Result<Configuration> {
    if params.d() != geometry.dim() {
        return Err(Error::GeometryMismatch(format!(
            "params have d = {} but the box has dimension {}",
            params.d(),
            geometry.dim()
        )));
    }
    let resolved = law.resolve(geometry)?;
    let mut states = Vec::with_capacity(geometry.num_sites());
    resolved.sample_into(params.rho(), seed.into(), &mut states);
    Configuration::new(geometry.clone(), states)
}
