//! Frequency-domain causal effects and spectral contributions in structural
//! VAR processes, with closed-form delta-method covariances, Wald tests and
//! confidence regions.
//!
//! The modules build on each other in order: [`graph`] describes structure
//! and lag knowledge, [`svar`] holds models and their autocovariances,
//! [`estimate`] fits lag sets by least squares, [`freqdom`] evaluates
//! frequency responses, [`asymptotics`] propagates estimator covariance and
//! [`inference`] turns both into tests and intervals.

pub mod asymptotics;
pub mod estimate;
pub mod fixtures;
pub mod freqdom;
pub mod graph;
pub mod inference;
pub mod linalg;
pub mod svar;

pub use freqdom::{FreqValue, FrequencyGrid};
pub use graph::{ContempGraph, LagMap, Path, ProcessGraph};
pub use svar::SvarModel;
