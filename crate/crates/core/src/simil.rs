//! Protomeme similarity measures and the distance used for clustering.
//!
//! Each measure is a cosine over one feature projection and lies in `[0, 1]`.
//! An empty feature on either side gives similarity 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protomeme::FeatureView;
use crate::scalar::Scalar;

/// Cosine of the per-author tweet counts.
pub fn sim_user<T: Scalar>(p: &FeatureView<T>, q: &FeatureView<T>) -> T {
    p.user.cosine(&q.user)
}

/// Cosine of the raw term-frequency vectors.
pub fn sim_content<T: Scalar>(p: &FeatureView<T>, q: &FeatureView<T>) -> T {
    p.content.cosine(&q.content)
}

/// Common-tweet similarity `|p ∩ q| / sqrt(|p| |q|)`.
pub fn sim_tweet<T: Scalar>(p: &FeatureView<T>, q: &FeatureView<T>) -> T {
    p.tweets.set_cosine(&q.tweets)
}

/// Set cosine of the diffusion sets.
pub fn sim_network<T: Scalar>(p: &FeatureView<T>, q: &FeatureView<T>) -> T {
    p.diffusion.set_cosine(&q.diffusion)
}

/// All four measures for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarities<T> {
    pub user: T,
    pub content: T,
    pub tweet: T,
    pub network: T,
}

impl<T: Scalar> Similarities<T> {
    pub fn between(p: &FeatureView<T>, q: &FeatureView<T>) -> Self {
        Self {
            user: sim_user(p, q),
            content: sim_content(p, q),
            tweet: sim_tweet(p, q),
            network: sim_network(p, q),
        }
    }

    pub fn max(&self) -> T {
        self.user.max(self.content).max(self.tweet).max(self.network)
    }

    pub fn linear(&self, w: &SimilarityWeights<T>) -> T {
        (w.user * self.user + w.content * self.content + w.tweet * self.tweet + w.network * self.network)
            .min(T::one())
    }
}

/// Convex weights for the linear combination of the four measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights<T> {
    pub user: T,
    pub content: T,
    pub tweet: T,
    pub network: T,
}

impl<T: Scalar> SimilarityWeights<T> {
    pub fn new(user: T, content: T, tweet: T, network: T) -> Result<Self> {
        let w = Self {
            user,
            content,
            tweet,
            network,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn equal() -> Self {
        let q = T::lit(0.25);
        Self {
            user: q,
            content: q,
            tweet: q,
            network: q,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ws = [self.user, self.content, self.tweet, self.network];
        if ws.iter().any(|w| !(*w >= T::zero() && *w <= T::one())) {
            return Err(Error::Config("similarity weights must lie in [0, 1]".into()));
        }
        let total: T = ws.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(4.0)) {
            return Err(Error::Config(format!("similarity weights sum to {total}, expected 1")));
        }
        Ok(())
    }
}

pub fn sim_linear<T: Scalar>(p: &FeatureView<T>, q: &FeatureView<T>, w: &SimilarityWeights<T>) -> T {
    Similarities::between(p, q).linear(w)
}

pub fn sim_max<T: Scalar>(p: &FeatureView<T>, q: &FeatureView<T>) -> T {
    Similarities::between(p, q).max()
}

/// How the four measures are combined into one similarity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "weights")]
pub enum SimilarityMode<T> {
    #[default]
    Max,
    Linear(SimilarityWeights<T>),
}

impl<T: Scalar> SimilarityMode<T> {
    pub fn similarity(&self, p: &FeatureView<T>, q: &FeatureView<T>) -> T {
        match self {
            Self::Max => sim_max(p, q),
            Self::Linear(w) => sim_linear(p, q, w),
        }
    }
}

/// `1 - similarity` under `mode`.
pub fn distance<T: Scalar>(p: &FeatureView<T>, q: &FeatureView<T>, mode: &SimilarityMode<T>) -> T {
    T::one() - mode.similarity(p, q)
}
