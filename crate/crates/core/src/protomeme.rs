//! Protomemes: tweets grouped by a shared entity, with cached features.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ingest::{AnalyzedTweet, Entity};
use crate::scalar::Scalar;
use crate::sparse::{CountSet, SparseVector};

/// The four feature projections that the similarity measures operate on.
///
/// Used both for single protomemes and for cluster centroids. All fields are
/// sums of per-tweet contributions, which makes adding and removing a tweet
/// exact inverses of each other.
#[derive(Debug, Clone)]
pub struct FeatureView<T> {
    /// Author -> number of tweets.
    pub user: SparseVector<T>,
    /// Term -> frequency over the concatenated tweets.
    pub content: SparseVector<T>,
    pub tweets: CountSet,
    /// Authors, mentioned users and retweeted authors.
    pub diffusion: CountSet,
}

impl<T: Scalar> PartialEq for FeatureView<T> {
    fn eq(&self, other: &Self) -> bool {
        self.user == other.user
            && self.content == other.content
            && self.tweets == other.tweets
            && self.diffusion == other.diffusion
    }
}

impl<T: Scalar> Default for FeatureView<T> {
    fn default() -> Self {
        Self {
            user: SparseVector::new(),
            content: SparseVector::new(),
            tweets: CountSet::new(),
            diffusion: CountSet::new(),
        }
    }
}

impl<T: Scalar> FeatureView<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_tweet(&mut self, t: &AnalyzedTweet) {
        self.user.add(&t.author, T::one());
        for (term, n) in &t.terms {
            self.content.add(term, T::count(*n as usize));
        }
        self.tweets.insert(&t.id);
        for u in t.diffusion_users() {
            self.diffusion.insert(&u);
        }
    }

    pub fn remove_tweet(&mut self, t: &AnalyzedTweet) {
        self.user.add(&t.author, -T::one());
        for (term, n) in &t.terms {
            self.content.add(term, -T::count(*n as usize));
        }
        self.tweets.remove(&t.id);
        for u in t.diffusion_users() {
            self.diffusion.remove(&u);
        }
    }

    /// Adds every contribution of `other` (used to fold a protomeme into a
    /// centroid).
    pub fn add_view(&mut self, other: &Self) {
        for (k, w) in other.user.iter() {
            self.user.add(k, *w);
        }
        for (k, w) in other.content.iter() {
            self.content.add(k, *w);
        }
        for (k, n) in other.tweets.iter() {
            for _ in 0..*n {
                self.tweets.insert(k);
            }
        }
        for (k, n) in other.diffusion.iter() {
            for _ in 0..*n {
                self.diffusion.insert(k);
            }
        }
    }

    pub fn remove_view(&mut self, other: &Self) {
        for (k, w) in other.user.iter() {
            self.user.add(k, -*w);
        }
        for (k, w) in other.content.iter() {
            self.content.add(k, -*w);
        }
        for (k, n) in other.tweets.iter() {
            for _ in 0..*n {
                self.tweets.remove(k);
            }
        }
        for (k, n) in other.diffusion.iter() {
            for _ in 0..*n {
                self.diffusion.remove(k);
            }
        }
    }

    pub fn from_tweets<'a>(tweets: impl IntoIterator<Item = &'a AnalyzedTweet>) -> Self {
        let mut view = Self::new();
        for t in tweets {
            view.add_tweet(t);
        }
        view
    }
}

/// A set of tweets sharing one entity.
#[derive(Debug, Clone)]
pub struct Protomeme<T> {
    entity: Entity,
    tweets: BTreeMap<Arc<str>, Arc<AnalyzedTweet>>,
    features: FeatureView<T>,
    first_seen: i64,
    last_seen: i64,
}

impl<T: Scalar> PartialEq for Protomeme<T> {
    fn eq(&self, other: &Self) -> bool {
        self.entity == other.entity
            && self.tweets == other.tweets
            && self.features == other.features
            && self.first_seen == other.first_seen
            && self.last_seen == other.last_seen
    }
}

impl<T: Scalar> Protomeme<T> {
    /// A protomeme holding a single tweet, which must contain `entity`.
    pub fn new(entity: Entity, tweet: Arc<AnalyzedTweet>) -> Result<Self> {
        check_contains(&entity, &tweet)?;
        let mut p = Self {
            entity,
            tweets: BTreeMap::new(),
            features: FeatureView::new(),
            first_seen: tweet.timestamp,
            last_seen: tweet.timestamp,
        };
        p.features.add_tweet(&tweet);
        p.tweets.insert(tweet.id.clone(), tweet);
        Ok(p)
    }

    /// Rebuilds a protomeme from scratch out of a non-empty tweet set.
    pub fn from_tweets(entity: Entity, tweets: impl IntoIterator<Item = Arc<AnalyzedTweet>>) -> Result<Self> {
        let map: BTreeMap<_, _> = tweets.into_iter().map(|t| (t.id.clone(), t)).collect();
        if map.is_empty() {
            return Err(Error::Contract(format!("protomeme {entity} needs at least one tweet")));
        }
        for t in map.values() {
            check_contains(&entity, t)?;
        }
        let features = FeatureView::from_tweets(map.values().map(|t| t.as_ref()));
        let first_seen = map.values().map(|t| t.timestamp).min().unwrap();
        let last_seen = map.values().map(|t| t.timestamp).max().unwrap();
        Ok(Self {
            entity,
            tweets: map,
            features,
            first_seen,
            last_seen,
        })
    }

    pub fn entity(&self) -> &Entity {
        &self.entity
    }

    pub fn features(&self) -> &FeatureView<T> {
        &self.features
    }

    pub fn tweets(&self) -> impl ExactSizeIterator<Item = &Arc<AnalyzedTweet>> + '_ {
        self.tweets.values()
    }

    pub fn contains_tweet(&self, id: &str) -> bool {
        self.tweets.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    /// Always false: a protomeme holds at least one tweet.
    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn first_seen(&self) -> i64 {
        self.first_seen
    }

    pub fn last_seen(&self) -> i64 {
        self.last_seen
    }

    /// Adds a tweet. Returns `Ok(false)` when the tweet id is already present.
    pub fn merge_tweet(&mut self, tweet: Arc<AnalyzedTweet>) -> Result<bool> {
        check_contains(&self.entity, &tweet)?;
        if self.tweets.contains_key(&tweet.id) {
            return Ok(false);
        }
        self.features.add_tweet(&tweet);
        self.first_seen = self.first_seen.min(tweet.timestamp);
        self.last_seen = self.last_seen.max(tweet.timestamp);
        self.tweets.insert(tweet.id.clone(), tweet);
        Ok(true)
    }

    /// Removes every tweet with `timestamp <= cutoff` and rebuilds the
    /// features from the survivors. Returns the removed tweets.
    pub fn expire(&mut self, cutoff: i64) -> Vec<Arc<AnalyzedTweet>> {
        if self.first_seen > cutoff {
            return Vec::new();
        }
        let (old, kept): (Vec<_>, Vec<_>) = std::mem::take(&mut self.tweets)
            .into_values()
            .partition(|t| t.timestamp <= cutoff);
        self.tweets = kept.into_iter().map(|t| (t.id.clone(), t)).collect();
        self.features = FeatureView::from_tweets(self.tweets.values().map(|t| t.as_ref()));
        if let Some(min) = self.tweets.values().map(|t| t.timestamp).min() {
            self.first_seen = min;
            self.last_seen = self.tweets.values().map(|t| t.timestamp).max().unwrap();
        }
        old
    }

    /// Value form of [`Protomeme::expire`]: `None` when nothing survives.
    pub fn expire_tweets(mut self, cutoff: i64) -> Option<Self> {
        self.expire(cutoff);
        (!self.tweets.is_empty()).then_some(self)
    }

    /// From-scratch reconstruction over the current tweet set.
    pub fn rebuild(&self) -> Self {
        Self::from_tweets(self.entity.clone(), self.tweets.values().cloned())
            .expect("protomeme invariants hold")
    }
}

fn check_contains(entity: &Entity, tweet: &AnalyzedTweet) -> Result<()> {
    if tweet.has_entity(entity) {
        Ok(())
    } else {
        Err(Error::Contract(format!("tweet {} does not contain {entity}", tweet.id)))
    }
}

/// Groups a batch into one protomeme per distinct entity, in order of first
/// appearance.
pub fn build_protomemes<T: Scalar>(batch: &[Arc<AnalyzedTweet>]) -> Vec<Protomeme<T>> {
    let mut index: HashMap<&Entity, usize> = HashMap::new();
    let mut out: Vec<Protomeme<T>> = Vec::new();
    for t in batch {
        for e in &t.entities {
            match index.get(e) {
                Some(&i) => {
                    out[i].merge_tweet(t.clone()).expect("entity taken from tweet");
                }
                None => {
                    index.insert(e, out.len());
                    out.push(Protomeme::new(e.clone(), t.clone()).expect("entity taken from tweet"));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{EntityKind, Extractor, Tweet};

    fn analyzed(id: &str, ts: i64, author: &str, text: &str) -> Arc<AnalyzedTweet> {
        Arc::new(Extractor::english().analyze(&Tweet {
            id: id.into(),
            timestamp: ts,
            author_id: author.into(),
            text: text.into(),
            retweet_of_author: None,
        }))
    }

    fn hashtag(key: &str) -> Entity {
        Entity::new(EntityKind::Hashtag, key)
    }

    #[test]
    fn groups_shared_hashtag() {
        let batch = vec![analyzed("1", 1, "u1", "#x"), analyzed("2", 2, "u2", "#x")];
        let ps = build_protomemes::<f64>(&batch);
        assert_eq!(ps.len(), 1);
        assert_eq!(ps[0].len(), 2);
        assert_eq!(ps[0].features().user.get("u1"), 1.0);
        assert_eq!(ps[0].features().user.get("u2"), 1.0);
    }

    #[test]
    fn worked_example_makes_four_protomemes() {
        let t = analyzed(
            "1",
            1,
            "u1",
            "Tell your friends: #Obamacare is helping young people afford health insurance. \
             (via @OFATruthTeam) pic.twitter.com/s9QHilsSjO",
        );
        let ps = build_protomemes::<f64>(&[t]);
        assert_eq!(ps.len(), 4);
        assert!(ps.iter().all(|p| p.len() == 1));
    }

    #[test]
    fn diffusion_set_is_union() {
        let t = Arc::new(Extractor::english().analyze(&Tweet {
            id: "1".into(),
            timestamp: 1,
            author_id: "u1".into(),
            text: "#x hi @u2".into(),
            retweet_of_author: Some("u3".into()),
        }));
        let p = Protomeme::<f64>::new(hashtag("#x"), t).unwrap();
        let users: Vec<&str> = p.features().diffusion.keys().map(|k| k.as_ref()).collect();
        assert_eq!(users, vec!["u1", "u2", "u3"]);
    }

    #[test]
    fn merge_is_idempotent_and_additive() {
        let mut p = Protomeme::<f64>::new(hashtag("#x"), analyzed("1", 1, "u1", "#x health")).unwrap();
        let t2 = analyzed("2", 2, "u9", "#x health health");
        assert!(p.merge_tweet(t2.clone()).unwrap());
        assert!(!p.merge_tweet(t2).unwrap());
        assert_eq!(p.len(), 2);
        assert_eq!(p.features().content.get("health"), 3.0);
        assert_eq!(p.features().user.get("u9"), 1.0);
        assert!(p.features().diffusion.contains("u9"));
        assert_eq!(p.last_seen(), 2);
    }

    #[test]
    fn merge_rejects_foreign_tweet() {
        let mut p = Protomeme::<f64>::new(hashtag("#x"), analyzed("1", 1, "u1", "#x")).unwrap();
        assert!(matches!(
            p.merge_tweet(analyzed("2", 2, "u1", "#y")),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn expiry_cases() {
        let make = || {
            Protomeme::<f64>::from_tweets(
                hashtag("#x"),
                [
                    analyzed("1", 10, "u1", "#x a"),
                    analyzed("2", 20, "u2", "#x b"),
                    analyzed("3", 30, "u3", "#x c"),
                ],
            )
            .unwrap()
        };
        assert!(make().expire_tweets(30).is_none());
        assert_eq!(make().expire_tweets(5).unwrap(), make());

        let p = make().expire_tweets(10).unwrap();
        assert_eq!(p.features().user.sum(), 2.0);
        let oracle = Protomeme::<f64>::from_tweets(
            hashtag("#x"),
            [analyzed("2", 20, "u2", "#x b"), analyzed("3", 30, "u3", "#x c")],
        )
        .unwrap();
        assert_eq!(p, oracle);
        assert_eq!(p.first_seen(), 20);
    }
}
