//! Experiment orchestration: run grids of cells, fit growth exponents,
//! compare them with the regime table and write reports.

mod config;
mod fit;
mod report;
mod run;
mod sweep;

pub use config::*;
pub use fit::*;
pub use report::*;
pub use run::*;
pub use sweep::*;
