//! Metamorphic coverage: the symmetric difference between the coverage of
//! the source and follow-up sides of a metamorphic test.

pub mod analysis;
pub mod coverage;
pub mod guidance;
pub mod ingest;
pub mod metamorphic;
pub mod toytarget;

pub use coverage::{CoverageError, CoverageMap, CoverageUnit, Granularity, Locator};
pub use metamorphic::{mc_pair, mc_suite, McError, McOptions, McReport, TestPair};
