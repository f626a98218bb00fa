//! Coverage, load, blocking and energy analysis of a two-tier macro/femto
//! network with center/edge user classification, plus Monte-Carlo simulators
//! that check the analytic results.

pub mod blocking;
pub mod coverage;
pub mod error;
pub mod geometry;
pub mod interference;
pub mod load;
pub mod montecarlo;
pub mod quad;
pub mod report;
pub mod scenario;
pub mod special;

pub use error::{Error, Result};
pub use scenario::{ScenarioConfig, SpectrumPolicy};
