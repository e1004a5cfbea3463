//! Input parsing and single-pass entity extraction.

mod entity;
pub mod porter;
mod stopwords;
mod tweet;

pub use entity::{extract_entities, normalize_hashtag, AnalyzedTweet, Entity, EntityKind, Extractor};
pub use stopwords::StopWords;
pub use tweet::{parse_record, parse_tweet, read_records, Tweet, TweetRecord};
