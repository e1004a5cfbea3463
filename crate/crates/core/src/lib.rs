//! Streaming meme clustering over tweet protomemes.
//!
//! Tweets are grouped by shared entities (hashtags, mentions, URLs and the
//! stemmed phrase) into protomemes, which an online k-means clusterer then
//! groups over a sliding window. Two tweet-level baselines and the overlap
//! aware evaluation measures live alongside it.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the type
//! aliases at the crate root fix it to `f64`.

pub mod engine;
pub mod eval;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod protomeme;
pub mod scalar;
pub mod synth;
pub mod simil;
pub mod sparse;
pub mod window;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Psc = engine::Psc<f64>;
pub type TweetClusterer = engine::TweetClusterer<f64>;
pub type EngineConfig = engine::EngineConfig<f64>;
pub type Protomeme = protomeme::Protomeme<f64>;
pub type FeatureView = protomeme::FeatureView<f64>;
pub type SparseVector = sparse::SparseVector<f64>;
pub type WindowConfig = window::WindowConfig<f64>;
pub type SimilarityMode = simil::SimilarityMode<f64>;
pub type SimilarityWeights = simil::SimilarityWeights<f64>;
