//! Detection and tracking of informal social roles in dynamic player
//! interaction networks.
//!
//! The pipeline runs ingest → graph metrics → structural embedding →
//! temporal alignment → projection and clustering into roles, then derives
//! role flows, event-sequence summaries and storyline layouts for the
//! exploration views.

pub mod alignment;
pub mod embedding;
pub mod error;
pub mod events;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod query;
pub mod roles;
pub mod seed;
pub mod stats;
pub mod store;
pub mod storyline;
pub mod synth;

pub use error::{Error, Result};
