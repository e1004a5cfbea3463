//! Splits a time-ordered tweet stream into aligned steps.

use super::{Snapshot, StreamClusterer};
use crate::error::Result;
use crate::ingest::Tweet;
use crate::window::step_end;

/// Groups tweets into `(step_end, batch)` pairs. Steps with no tweets
/// between two non-empty ones are emitted as empty batches so that window
/// expiry still happens. Tweets older than the current step are dropped and
/// counted in `late`.
#[derive(Debug)]
pub struct Stepper {
    delta_t: i64,
    current: Option<i64>,
    pending: Vec<Tweet>,
    late: u64,
}

impl Stepper {
    pub fn new(delta_t: i64) -> Self {
        assert!(delta_t > 0, "delta_t must be positive");
        Self {
            delta_t,
            current: None,
            pending: Vec::new(),
            late: 0,
        }
    }

    pub fn late(&self) -> u64 {
        self.late
    }

    /// Feeds one tweet, returning any steps it closes.
    pub fn push(&mut self, tweet: Tweet) -> Vec<(i64, Vec<Tweet>)> {
        let end = step_end(tweet.timestamp, self.delta_t);
        let mut out = Vec::new();
        match self.current {
            None => self.current = Some(end),
            Some(cur) if end < cur => {
                self.late += 1;
                return out;
            }
            Some(cur) if end > cur => {
                out.push((cur, std::mem::take(&mut self.pending)));
                let mut gap = cur + self.delta_t;
                while gap < end {
                    out.push((gap, Vec::new()));
                    gap += self.delta_t;
                }
                self.current = Some(end);
            }
            Some(_) => {}
        }
        self.pending.push(tweet);
        out
    }

    /// Flushes the last open step.
    pub fn finish(&mut self) -> Option<(i64, Vec<Tweet>)> {
        let cur = self.current.take()?;
        Some((cur, std::mem::take(&mut self.pending)))
    }
}

/// Runs `engine` over a whole stream, one snapshot per step.
pub fn cluster_stream<I>(engine: &mut dyn StreamClusterer, tweets: I, delta_t: i64) -> Result<Vec<Snapshot>>
where
    I: IntoIterator<Item = Tweet>,
{
    let mut stepper = Stepper::new(delta_t);
    let mut out = Vec::new();
    for t in tweets {
        for (now, batch) in stepper.push(t) {
            out.push(engine.step(now, &batch)?);
        }
    }
    if let Some((now, batch)) = stepper.finish() {
        out.push(engine.step(now, &batch)?);
    }
    Ok(out)
}
