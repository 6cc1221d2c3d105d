//! Maxima of smoothed random point sets in the plane.

pub mod density;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod maxima;
pub mod sampling;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use geometry::{PNorm, Point};
pub use sampling::{SeedSpec, SmoothedDist};
