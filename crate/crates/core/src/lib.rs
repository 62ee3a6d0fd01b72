pub mod der;
pub mod envelopes;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod market;
pub mod network;
pub mod opf;
pub mod plot;
pub mod powerflow;
pub mod solver;

pub use error::{NoeError, Result};
pub use geometry::{convex_hull, minkowski_sum, HalfPlane, HalfPlaneSet, PqPoint, PqPolygon};
