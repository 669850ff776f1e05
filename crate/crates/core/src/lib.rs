//! Distributed spectrum access with spatial reuse.
//!
//! Secondary users pick channels (and, when mobile, locations) on an
//! interference graph. The resulting games are weighted potential games;
//! this crate provides the exact game core, the slot-level learning
//! mechanism with its mean-field replicator ODE, the strategic-mobility
//! Markov chain, and efficiency analytics (price of anarchy and its bound).

pub mod analysis;
pub mod error;
pub mod game;
pub mod learning;
pub mod mobility;
pub mod normalization;
pub mod presets;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use game::{Action, DeviationSpace, Profile};
pub use normalization::UtilityNormalization;
pub use rng::{SeedRoot, Substream};
pub use scenario::{Scenario, ScenarioConfig};
