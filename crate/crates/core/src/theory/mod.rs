//! Regime table of `E[M_n]` and lower-bound witness constructions.

mod regime;
mod witness;

pub use regime::*;
pub use witness::*;
