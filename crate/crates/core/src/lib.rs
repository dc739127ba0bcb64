//! Timbre-space sound design.
//!
//! The crate covers the offline pipeline that turns a compact synthesizer
//! parameter space into a navigable 2D map of timbres, and the state machine
//! that lets several people play on that map together:
//!
//! ```text
//! params ─render─▶ sound ─features─▶ timbre vector ─GTM─▶ 2D position
//!    ▲                                                        │
//!    └──────────────── KD-tree / interpolation ◀──────────────┘
//! ```
//!
//! * [`synth`]: two-oscillator Vector Phase Shaping synthesizer.
//! * [`similarity`]: MFCC Gaussian timbre models and their symmetrized KL similarity.
//! * [`corpus`]: similarity-guided hypercube search between presets.
//! * [`features`]: frame features, statistics, selection and standardization.
//! * [`gtm`]: Generative Topographic Mapping trained by EM.
//! * [`surface`]: the Timbre Surface with K-means colors and KD-tree lookup.
//! * [`session`]: nodes, paths, note streams and per-user routing.

pub mod analysis;
pub mod artifact;
pub mod corpus;
mod error;
pub mod features;
pub mod gtm;
pub mod kmeans;
pub mod linalg;
pub mod session;
pub mod similarity;
pub mod spatial;
pub mod surface;
pub mod synth;
pub mod wav;

pub use error::{Error, Result};
pub use synth::{ParameterVector, SoundSample};
