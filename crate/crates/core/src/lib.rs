//! Texture-glitch detection toolkit.
//!
//! The crate covers the whole loop of a visual QA experiment on game-style
//! frames: a deterministic scene compositor that injects four kinds of
//! texture glitches ([`synth`]), balanced object-disjoint corpora
//! ([`corpus`]), a compact shuffle-unit CNN with a residual baseline
//! ([`net`]), Adam/cross-entropy training ([`trainer`]), evaluation
//! ([`metrics`]), and object-level decisions with multi-view aggregation
//! and Gaussian confidence filtering ([`decision`]).

pub mod class;
pub mod cli;
pub mod corpus;
pub mod decision;
pub mod metrics;
pub mod net;
pub mod seed;
pub mod synth;
pub mod trainer;

pub use class::GlitchClass;
