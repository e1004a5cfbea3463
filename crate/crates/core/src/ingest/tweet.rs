use std::io::BufRead;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// One message of the input stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub timestamp: i64,
    pub author_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweet_of_author: Option<String>,
}

/// A tweet together with its optional ground-truth labels, as found on one
/// line of the JSONL input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    #[serde(flatten)]
    pub tweet: Tweet,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
}

/// Parses one JSONL line into a validated [`Tweet`], ignoring any labels.
pub fn parse_tweet(line: &str, line_no: usize) -> Result<Tweet> {
    parse_record(line, line_no).map(|r| r.tweet)
}

/// Parses one JSONL line, keeping the optional `labels` array.
pub fn parse_record(line: &str, line_no: usize) -> Result<TweetRecord> {
    let value: Value = serde_json::from_str(line).map_err(|source| Error::Json {
        line: line_no,
        source,
    })?;
    let Value::Object(obj) = value else {
        return Err(Error::Record {
            line: line_no,
            message: "expected a JSON object".into(),
        });
    };
    let schema = |field| Error::Schema {
        line: line_no,
        field,
    };

    let id = required_str(&obj, "id").ok_or_else(|| schema("id"))?;
    if id.is_empty() {
        return Err(schema("id"));
    }
    let timestamp = obj
        .get("timestamp")
        .and_then(Value::as_i64)
        .filter(|ts| *ts >= 0)
        .ok_or_else(|| schema("timestamp"))?;
    let author_id = required_str(&obj, "author_id").ok_or_else(|| schema("author_id"))?;
    let text = required_str(&obj, "text").ok_or_else(|| schema("text"))?;
    let retweet_of_author = match obj.get("retweet_of_author") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(schema("retweet_of_author")),
    };
    let labels = match obj.get("labels") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(str::to_owned))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| schema("labels"))?,
        Some(_) => return Err(schema("labels")),
    };

    Ok(TweetRecord {
        tweet: Tweet {
            id,
            timestamp,
            author_id,
            text,
            retweet_of_author,
        },
        labels,
    })
}

fn required_str(obj: &Map<String, Value>, field: &str) -> Option<String> {
    obj.get(field).and_then(Value::as_str).map(str::to_owned)
}

/// Streams records from a JSONL reader. Blank lines are skipped; line
/// numbers are 1-based.
pub fn read_records<R: BufRead>(reader: R) -> impl Iterator<Item = Result<TweetRecord>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(parse_record(&l, i + 1)),
            Err(e) => Some(Err(e.into())),
        })
}
