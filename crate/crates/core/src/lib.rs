//! Contact process in a dynamic random environment on finite boxes of `Z^d`.
//!
//! Sites are blocked (`-1`), vacant (`0`) or occupied (`1`). Occupied sites die
//! at rate 1 and send births to each neighbor at rate `beta / 2d`; every site
//! blocks at rate `alpha` (killing an occupant) and unblocks at rate
//! `alpha * delta`. All dynamics are driven by an explicit graphical
//! representation ([`EventTableau`]) so that forward runs, thinned copies and
//! the dual process can share randomness.

pub mod config;
pub mod dual;
pub mod error;
pub mod estimators;
pub mod forward;
pub mod geometry;
pub mod initial;
pub mod oracle;
pub mod params;
pub mod rng;
pub mod tableau;

/// Largest accepted simulation horizon.
pub const MAX_HORIZON: f64 = 1e6;

pub use config::{Configuration, SiteState};
pub use error::{Error, Result};
pub use forward::{count_n_plus, evolve, evolve_environment_only, pack_points, Change, FaceWindow, Replayer, Trajectory};
pub use geometry::{Boundary, Coord, Geometry, Region};
pub use initial::{sample_initial, InitialLaw, SiteSelection};
pub use params::{equilibrium_density, Params};
pub use rng::StreamSeed;
pub use tableau::{Event, EventKind, EventTableau};
