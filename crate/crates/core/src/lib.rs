//! Streaming quantile sketches built from a hierarchy of compactors.
//!
//! [`Sketch`] summarises a stream of items in space governed by a single
//! `budget`, answering rank, quantile and CDF queries with additive error.
//! Compaction behaviour is selected by [`VariantFlags`]; weighted streams are
//! handled by [`Base2Sketch`] and [`WaSketch`]. Sketches merge and serialize.

pub mod compactor;
pub mod error;
pub mod eval;
pub mod item;
pub mod rng;
pub mod sampler;
pub mod sketch;
pub mod store;
pub mod summary;
pub mod variant;
pub mod weighted;
pub mod wire;

pub use error::{Result, SketchError};
pub use item::{Codec, Item};
pub use sampler::Sampler;
pub use sketch::{capacity_at, epsilon_for, failure_probability, k_for_budget, Sketch, DEFAULT_C};
pub use store::Backend;
pub use summary::{QuantileSummary, RankEstimate, SortedView};
pub use variant::VariantFlags;
pub use weighted::{Base2Sketch, WaSketch, WeightedMode};
pub use wire::{peek_header, Header};
