//! Online k-means stream clusterers: PSC over protomemes, and the two
//! tweet-level baselines.
//!
//! All three share the same skeleton. The sliding window drops old data at
//! the start of every step, each arriving point goes to its nearest centroid
//! unless its distance is an outlier with respect to every nearest distance
//! seen so far, and outliers open a new cluster, evicting the least recently
//! updated one once `k` clusters are live.

mod baseline;
mod psc;
mod stream;

pub use baseline::{FollowerGraph, TweetCluster, TweetClusterer};
pub use psc::{Cluster, Psc};
pub use stream::{cluster_stream, Stepper};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Tweet;
use crate::scalar::Scalar;
use crate::simil::SimilarityMode;
use crate::window::{WindowConfig, WindowModel};

pub type ClusterId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Psc,
    B1,
    B2,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Psc => "psc",
            Self::B1 => "b1",
            Self::B2 => "b2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig<T> {
    /// Number of initial seeds, and the live-cluster count that outliers
    /// fill up to before eviction starts.
    pub k: usize,
    /// Outlier threshold in standard deviations.
    pub n_sigmas: T,
    pub window: WindowConfig<T>,
    pub similarity: SimilarityMode<T>,
    pub algorithm: Algorithm,
    /// Weight of content similarity in the B2 baseline.
    pub b2_alpha: T,
    pub seed: u64,
}

impl<T: Scalar> Default for EngineConfig<T> {
    fn default() -> Self {
        Self {
            k: 11,
            n_sigmas: T::lit(2.0),
            window: WindowConfig::default(),
            similarity: SimilarityMode::Max,
            algorithm: Algorithm::Psc,
            b2_alpha: T::lit(0.5),
            seed: 0,
        }
    }
}

impl<T: Scalar> EngineConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.n_sigmas.partial_cmp(&T::zero()) != Some(Ordering::Greater) {
            return Err(Error::Config("n_sigmas must be positive".into()));
        }
        self.window.validate()?;
        if self.window.model == WindowModel::Damped {
            return Err(Error::Config(
                "the clusterers support the sliding and landmark window models only".into(),
            ));
        }
        if let SimilarityMode::Linear(w) = &self.similarity {
            w.validate()?;
        }
        if !(self.b2_alpha >= T::zero() && self.b2_alpha <= T::one()) {
            return Err(Error::Config("b2_alpha must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Running mean and variance of nearest-centroid distances (Welford).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OutlierHistory<T> {
    pub count: u64,
    pub mean: T,
    pub m2: T,
}

impl<T: Scalar> OutlierHistory<T> {
    pub fn new() -> Self {
        Self {
            count: 0,
            mean: T::zero(),
            m2: T::zero(),
        }
    }

    pub fn record(&mut self, d: T) {
        self.count += 1;
        let delta = d - self.mean;
        self.mean = self.mean + delta / T::from_u64(self.count).expect("count representable");
        self.m2 = self.m2 + delta * (d - self.mean);
        if self.m2 < T::zero() {
            self.m2 = T::zero();
        }
    }

    /// Population standard deviation; `None` before the first record.
    pub fn std_dev(&self) -> Option<T> {
        (self.count > 0).then(|| (self.m2 / T::from_u64(self.count).unwrap()).sqrt())
    }

    /// `d > mean + n * sigma`. Never true with fewer than two records.
    pub fn is_outlier(&self, d: T, n_sigmas: T) -> bool {
        if self.count < 2 {
            return false;
        }
        d > self.mean + n_sigmas * self.std_dev().unwrap()
    }
}

/// What `assign` did with a data point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assignment {
    /// Initial seed cluster.
    Seeded(ClusterId),
    /// A live cluster already holds a protomeme with the same entity.
    ExistingByKey(ClusterId),
    Nearest(ClusterId),
    /// Outlier, with fewer than `k` clusters live (or none at all).
    Created(ClusterId),
    /// Outlier; the least recently updated cluster was replaced.
    ReplacedLru {
        evicted: ClusterId,
        created: ClusterId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSnapshot {
    pub id: ClusterId,
    pub tweet_ids: Vec<String>,
}

/// Cluster membership at the end of one window. `retired` lists clusters
/// emptied by this step's expiry, with the tweets they held before it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub window_end: i64,
    pub clusters: Vec<ClusterSnapshot>,
    pub retired: Vec<ClusterSnapshot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EngineStats {
    pub steps: u64,
    pub tweets: u64,
    /// Tweets outside the step they were delivered with.
    pub rejected: u64,
    pub seeded: u64,
    pub by_key: u64,
    pub nearest: u64,
    pub created: u64,
    pub replaced: u64,
}

impl EngineStats {
    fn count(&mut self, a: &Assignment) {
        match a {
            Assignment::Seeded(_) => self.seeded += 1,
            Assignment::ExistingByKey(_) => self.by_key += 1,
            Assignment::Nearest(_) => self.nearest += 1,
            Assignment::Created(_) => self.created += 1,
            Assignment::ReplacedLru { .. } => self.replaced += 1,
        }
    }
}

/// Common driver interface of the three clusterers.
pub trait StreamClusterer: Send {
    /// Advances the window to end at `now` and clusters `batch`, whose
    /// timestamps should fall in `(now - delta_t, now]`.
    fn step(&mut self, now: i64, batch: &[Tweet]) -> Result<Snapshot>;
    fn stats(&self) -> EngineStats;
    fn live_clusters(&self) -> usize;
}

/// Closest cluster; ties go to the lowest id. Expects ids in ascending order.
fn nearest<T: Scalar>(distances: impl IntoIterator<Item = (ClusterId, T)>) -> Option<(ClusterId, T)> {
    let mut best: Option<(ClusterId, T)> = None;
    for (id, d) in distances {
        match best {
            Some((_, bd)) if d.partial_cmp(&bd) != Some(Ordering::Less) => {}
            _ => best = Some((id, d)),
        }
    }
    best
}

/// Least recently updated cluster; ties go to the lowest id.
fn least_recent(updates: impl IntoIterator<Item = (ClusterId, i64)>) -> Option<ClusterId> {
    updates
        .into_iter()
        .min_by_key(|&(id, last)| (last, id))
        .map(|(id, _)| id)
}

/// Accepts tweets in `(now - delta_t, now]` and counts the rest.
fn in_step(ts: i64, now: i64, delta_t: i64) -> bool {
    ts > now - delta_t && ts <= now
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [0.3, 0.9, 0.5, 0.5, 0.7, 0.1];
        let mut h = OutlierHistory::<f64>::new();
        for x in xs {
            h.record(x);
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((h.mean - mean).abs() < 1e-15);
        assert!((h.std_dev().unwrap() - var.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn outlier_rule() {
        // mean 0.5, sigma 0.1
        let mut h = OutlierHistory::<f64>::new();
        h.record(0.4);
        h.record(0.6);
        assert!((h.mean - 0.5).abs() < 1e-15);
        assert!((h.std_dev().unwrap() - 0.1).abs() < 1e-15);
        assert!(h.is_outlier(0.75, 2.0));
        assert!(!h.is_outlier(0.69, 2.0));
    }

    #[test]
    fn cold_start_is_never_outlier() {
        let mut h = OutlierHistory::<f64>::new();
        assert!(!h.is_outlier(1.0, 2.0));
        h.record(0.0);
        assert!(!h.is_outlier(1.0, 2.0));
    }

    #[test]
    fn tie_breaks() {
        assert_eq!(nearest([(1, 0.5), (2, 0.3), (3, 0.3)]), Some((2, 0.3)));
        assert_eq!(nearest(Vec::<(ClusterId, f64)>::new()), None);
        assert_eq!(least_recent([(4, 10), (2, 10), (9, 11)]), Some(2));
    }

    #[test]
    fn config_validation() {
        assert!(EngineConfig::<f64>::default().validate().is_ok());
        let bad = EngineConfig::<f64> {
            k: 0,
            ..EngineConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = EngineConfig::<f64> {
            n_sigmas: 0.0,
            ..EngineConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
