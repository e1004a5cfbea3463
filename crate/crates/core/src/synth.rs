//! Synthetic labeled streams with planted memes.
//!
//! Every meme owns a vocabulary (`m{m}w{i}`), a user community (`m{m}u{i}`),
//! a handful of URLs and a label `#meme{m}`. The label is attached to the
//! record but never written into the text. Noise tweets draw from their own
//! vocabulary and users and carry no label.

use std::io::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Tweet, TweetRecord};

const NOISE_VOCAB: usize = 2000;
const NOISE_USERS: usize = 500;
const URLS_PER_MEME: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_memes: usize,
    pub tweets_per_meme_per_hour: f64,
    pub vocab_per_meme: usize,
    /// Probability that a word of a meme tweet comes from a pool common to
    /// all memes instead of the meme's own vocabulary.
    pub shared_vocab: f64,
    pub n_users_per_meme: usize,
    /// Probability that a meme tweet is written by a member of another
    /// meme's community.
    pub user_overlap: f64,
    pub mention_prob: f64,
    pub retweet_prob: f64,
    pub url_prob: f64,
    /// Share of all tweets that are unlabeled noise.
    pub noise_tweet_fraction: f64,
    pub duration_hours: f64,
    pub words_per_tweet: usize,
    /// Epoch seconds of the stream start.
    pub start: i64,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_memes: 10,
            tweets_per_meme_per_hour: 30.0,
            vocab_per_meme: 30,
            shared_vocab: 0.0,
            n_users_per_meme: 20,
            user_overlap: 0.0,
            mention_prob: 0.3,
            retweet_prob: 0.2,
            url_prob: 0.2,
            noise_tweet_fraction: 0.0,
            duration_hours: 6.0,
            words_per_tweet: 8,
            start: 1_362_096_000,
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fractions = [
            ("shared_vocab", self.shared_vocab),
            ("user_overlap", self.user_overlap),
            ("mention_prob", self.mention_prob),
            ("retweet_prob", self.retweet_prob),
            ("url_prob", self.url_prob),
            ("noise_tweet_fraction", self.noise_tweet_fraction),
        ];
        for (name, f) in fractions {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.noise_tweet_fraction >= 1.0 {
            return Err(Error::Config("noise_tweet_fraction must be below 1".into()));
        }
        if self.n_memes == 0 || self.vocab_per_meme == 0 || self.n_users_per_meme == 0 || self.words_per_tweet == 0 {
            return Err(Error::Config("counts must be positive".into()));
        }
        if !(self.tweets_per_meme_per_hour > 0.0 && self.duration_hours > 0.0) {
            return Err(Error::Config("rate and duration must be positive".into()));
        }
        Ok(())
    }

    fn end(&self) -> i64 {
        self.start + (self.duration_hours * 3600.0).round() as i64
    }
}

pub fn meme_label(m: usize) -> String {
    format!("#meme{m}")
}

fn meme_user(m: usize, i: usize) -> String {
    format!("m{m}u{i}")
}

/// Arrival times of a Poisson process with `per_hour` events per hour,
/// strictly after `start` and no later than `end`.
fn arrivals(rng: &mut ChaCha8Rng, per_hour: f64, start: i64, end: i64) -> Vec<i64> {
    let gap = Exp::new(per_hour / 3600.0).expect("positive rate");
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        let ts = start + t.ceil().max(1.0) as i64;
        if ts > end {
            return out;
        }
        out.push(ts);
    }
}

struct Draft {
    timestamp: i64,
    author: String,
    text: String,
    retweet_of: Option<String>,
    label: Option<String>,
}

fn meme_tweet(cfg: &SynthConfig, rng: &mut ChaCha8Rng, m: usize, timestamp: i64) -> Draft {
    let community = if cfg.n_memes > 1 && rng.random_bool(cfg.user_overlap) {
        let other = rng.random_range(0..cfg.n_memes - 1);
        if other >= m {
            other + 1
        } else {
            other
        }
    } else {
        m
    };
    let author_idx = rng.random_range(0..cfg.n_users_per_meme);
    let author = meme_user(community, author_idx);
    let peer = |rng: &mut ChaCha8Rng| {
        let mut j = rng.random_range(0..cfg.n_users_per_meme);
        if cfg.n_users_per_meme > 1 && j == author_idx && community == m {
            j = (j + 1) % cfg.n_users_per_meme;
        }
        meme_user(m, j)
    };
    let mut parts = Vec::new();
    let mut retweet_of = None;
    let retweet = rng.random_bool(cfg.retweet_prob);
    let mention = rng.random_bool(cfg.mention_prob);
    if retweet {
        let source = peer(rng);
        parts.push(format!("RT @{source}:"));
        retweet_of = Some(source);
    }
    if mention {
        parts.push(format!("@{}", peer(rng)));
    }
    for _ in 0..cfg.words_per_tweet {
        let i = rng.random_range(0..cfg.vocab_per_meme);
        if rng.random_bool(cfg.shared_vocab) {
            parts.push(format!("cw{i}"));
        } else {
            parts.push(format!("m{m}w{i}"));
        }
    }
    if rng.random_bool(cfg.url_prob) {
        parts.push(format!("http://m{m}.example.com/p{}", rng.random_range(0..URLS_PER_MEME)));
    }
    Draft {
        timestamp,
        author,
        text: parts.join(" "),
        retweet_of,
        label: Some(meme_label(m)),
    }
}

fn noise_tweet(cfg: &SynthConfig, rng: &mut ChaCha8Rng, timestamp: i64) -> Draft {
    let words: Vec<String> = (0..cfg.words_per_tweet)
        .map(|_| format!("nw{}", rng.random_range(0..NOISE_VOCAB)))
        .collect();
    Draft {
        timestamp,
        author: format!("nu{}", rng.random_range(0..NOISE_USERS)),
        text: words.join(" "),
        retweet_of: None,
        label: None,
    }
}

/// Generates a stream sorted by timestamp, with ids `t0000000`, `t0000001`
/// and so on in stream order. The same config always yields the same stream.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<TweetRecord>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let end = cfg.end();
    let mut drafts = Vec::new();
    for m in 0..cfg.n_memes {
        for ts in arrivals(&mut rng, cfg.tweets_per_meme_per_hour, cfg.start, end) {
            drafts.push(meme_tweet(cfg, &mut rng, m, ts));
        }
    }
    if cfg.noise_tweet_fraction > 0.0 {
        let f = cfg.noise_tweet_fraction;
        let rate = cfg.tweets_per_meme_per_hour * cfg.n_memes as f64 * f / (1.0 - f);
        for ts in arrivals(&mut rng, rate, cfg.start, end) {
            drafts.push(noise_tweet(cfg, &mut rng, ts));
        }
    }
    // Stable: equal timestamps keep generation order.
    drafts.sort_by_key(|d| d.timestamp);
    Ok(drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| TweetRecord {
            tweet: Tweet {
                id: format!("t{i:07}"),
                timestamp: d.timestamp,
                author_id: d.author,
                text: d.text,
                retweet_of_author: d.retweet_of,
            },
            labels: d.label.into_iter().collect(),
        })
        .collect())
}

/// Follower edges aligned with the meme communities: every member follows
/// `follows_per_user` random members of its own community, and each edge
/// is redirected to a random user of another community with probability
/// `cross_prob`. Noise users follow random noise users.
pub fn follower_edges(cfg: &SynthConfig, follows_per_user: usize, cross_prob: f64) -> Result<Vec<(String, String)>> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&cross_prob) {
        return Err(Error::Config("cross_prob must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut edges = Vec::new();
    let members: Vec<usize> = (0..cfg.n_users_per_meme).collect();
    for m in 0..cfg.n_memes {
        for i in 0..cfg.n_users_per_meme {
            for _ in 0..follows_per_user {
                let target_meme = if cfg.n_memes > 1 && rng.random_bool(cross_prob) {
                    (m + rng.random_range(1..cfg.n_memes)) % cfg.n_memes
                } else {
                    m
                };
                let j = *members.choose(&mut rng).expect("non-empty community");
                if target_meme == m && j == i {
                    continue;
                }
                edges.push((meme_user(m, i), meme_user(target_meme, j)));
            }
        }
    }
    for i in 0..NOISE_USERS {
        for _ in 0..follows_per_user {
            let j = rng.random_range(0..NOISE_USERS);
            if i != j {
                edges.push((format!("nu{i}"), format!("nu{j}")));
            }
        }
    }
    edges.sort();
    edges.dedup();
    Ok(edges)
}

/// Writes records as JSONL.
pub fn write_jsonl<W: Write>(mut out: W, records: &[TweetRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
