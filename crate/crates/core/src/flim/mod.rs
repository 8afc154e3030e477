//! Lifetime imaging: cube storage, per-pixel maps, edge profiles and photon budgets.

mod budget;
mod cube;
mod edge;
mod map;

pub use budget::{
    empirical_min_photons, ladder, photon_budget, LadderRung, MinPhotonsResult, MinPhotonsSpec, LADDER_MAX,
};
pub use cube::FlimCube;
pub use edge::{edge_profile, EdgeLine, EdgeProfileResult, EdgeSignal, MIN_SAMPLES_PER_SIDE};
pub use map::{fit_flim_cube, LifetimeMap, PixelClass, PixelRecord, MIN_COUNTS_FLOOR};
