use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    in_step, least_recent, nearest, Assignment, ClusterId, ClusterSnapshot, EngineConfig, EngineStats,
    OutlierHistory, Snapshot, StreamClusterer,
};
use crate::error::{Error, Result};
use crate::ingest::{AnalyzedTweet, Entity, Extractor, Tweet};
use crate::protomeme::{build_protomemes, FeatureView, Protomeme};
use crate::scalar::Scalar;
use crate::simil::distance;

/// A meme: protomemes keyed by entity, plus their aggregate centroid.
///
/// The centroid sums the vector features and takes multiset unions of the
/// tweet and diffusion sets. Cosine is scale invariant, so summing is
/// equivalent to averaging for every similarity measure.
#[derive(Debug, Clone)]
pub struct Cluster<T> {
    id: ClusterId,
    members: BTreeMap<Entity, Protomeme<T>>,
    centroid: FeatureView<T>,
    created_at: i64,
    last_updated: i64,
}

impl<T: Scalar> Cluster<T> {
    fn singleton(id: ClusterId, p: Protomeme<T>, now: i64) -> Self {
        let mut c = Self {
            id,
            members: BTreeMap::new(),
            centroid: FeatureView::new(),
            created_at: now,
            last_updated: now,
        };
        c.add_member(p);
        c
    }

    fn add_member(&mut self, p: Protomeme<T>) {
        self.centroid.add_view(p.features());
        self.members.insert(p.entity().clone(), p);
    }

    /// Folds the tweets of a same-key protomeme into the existing member.
    fn merge_same_key(&mut self, p: Protomeme<T>) {
        let member = self.members.get_mut(p.entity()).expect("key indexed in this cluster");
        for t in p.tweets() {
            if member.merge_tweet(t.clone()).expect("same entity") {
                self.centroid.add_tweet(t);
            }
        }
    }

    pub fn id(&self) -> ClusterId {
        self.id
    }

    pub fn members(&self) -> impl ExactSizeIterator<Item = &Protomeme<T>> + '_ {
        self.members.values()
    }

    pub fn centroid(&self) -> &FeatureView<T> {
        &self.centroid
    }

    pub fn created_at(&self) -> i64 {
        self.created_at
    }

    pub fn last_updated(&self) -> i64 {
        self.last_updated
    }

    /// Centroid aggregated from scratch over the current members.
    pub fn rebuild_centroid(&self) -> FeatureView<T> {
        let mut c = FeatureView::new();
        for p in self.members.values() {
            c.add_view(p.features());
        }
        c
    }

    /// Sorted ids of the tweets in any member.
    pub fn tweet_ids(&self) -> Vec<String> {
        self.centroid.tweets.keys().map(|k| k.to_string()).collect()
    }

    fn snapshot(&self) -> ClusterSnapshot {
        ClusterSnapshot {
            id: self.id,
            tweet_ids: self.tweet_ids(),
        }
    }
}

/// Protomeme stream clustering.
#[derive(Debug, Clone)]
pub struct Psc<T> {
    cfg: EngineConfig<T>,
    extractor: Arc<Extractor>,
    rng: ChaCha8Rng,
    clusters: BTreeMap<ClusterId, Cluster<T>>,
    key_index: HashMap<Entity, ClusterId>,
    history: OutlierHistory<T>,
    next_id: ClusterId,
    now: Option<i64>,
    seeded: bool,
    retired: Vec<ClusterSnapshot>,
    stats: EngineStats,
}

impl<T: Scalar> Psc<T> {
    pub fn new(cfg: EngineConfig<T>, extractor: Arc<Extractor>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            extractor,
            clusters: BTreeMap::new(),
            key_index: HashMap::new(),
            history: OutlierHistory::new(),
            next_id: 0,
            now: None,
            seeded: false,
            retired: Vec::new(),
            stats: EngineStats::default(),
        })
    }

    pub fn config(&self) -> &EngineConfig<T> {
        &self.cfg
    }

    pub fn clusters(&self) -> impl ExactSizeIterator<Item = &Cluster<T>> + '_ {
        self.clusters.values()
    }

    pub fn cluster(&self, id: ClusterId) -> Option<&Cluster<T>> {
        self.clusters.get(&id)
    }

    /// Live cluster holding a protomeme with this entity, if any.
    pub fn cluster_of(&self, entity: &Entity) -> Option<ClusterId> {
        self.key_index.get(entity).copied()
    }

    pub fn history(&self) -> &OutlierHistory<T> {
        &self.history
    }

    /// Replaces the distance history, e.g. to resume from a saved state.
    pub fn set_history(&mut self, history: OutlierHistory<T>) {
        self.history = history;
    }

    pub fn is_seeded(&self) -> bool {
        self.seeded
    }

    /// Runs one step over pre-analyzed tweets.
    pub fn step_analyzed(&mut self, now: i64, batch: Vec<Arc<AnalyzedTweet>>) -> Result<Snapshot> {
        if let Some(prev) = self.now {
            if now <= prev {
                return Err(Error::Contract(format!("step {now} does not follow {prev}")));
            }
        }
        self.now = Some(now);
        self.stats.steps += 1;
        self.retired.clear();

        if let Some(cutoff) = self.cfg.window.expiry_cutoff(now) {
            self.expire(cutoff);
        }

        let delta_t = self.cfg.window.delta_t;
        let total = batch.len();
        let batch: Vec<_> = batch
            .into_iter()
            .filter(|t| in_step(t.timestamp, now, delta_t))
            .collect();
        self.stats.tweets += batch.len() as u64;
        self.stats.rejected += (total - batch.len()) as u64;

        let protomemes = build_protomemes::<T>(&batch);
        if !self.seeded && !protomemes.is_empty() {
            self.seed(protomemes, now);
        } else {
            for p in protomemes {
                self.assign(p, now);
            }
        }
        Ok(self.snapshot(now))
    }

    /// Creates up to `k` singleton clusters from protomemes drawn uniformly
    /// at random, then assigns the rest of the batch.
    pub fn seed(&mut self, batch: Vec<Protomeme<T>>, now: i64) -> Vec<Assignment> {
        self.seeded = true;
        let k = self.cfg.k.min(batch.len());
        let picks = rand::seq::index::sample(&mut self.rng, batch.len(), k).into_vec();
        let mut slots: Vec<Option<Protomeme<T>>> = batch.into_iter().map(Some).collect();
        let mut out = Vec::with_capacity(slots.len());
        for i in picks {
            let p = slots[i].take().expect("distinct indices");
            let id = self.create(p, now);
            let a = Assignment::Seeded(id);
            self.stats.count(&a);
            out.push(a);
        }
        for p in slots.into_iter().flatten() {
            out.push(self.assign(p, now));
        }
        out
    }

    /// Places one protomeme.
    pub fn assign(&mut self, p: Protomeme<T>, now: i64) -> Assignment {
        let a = self.place(p, now);
        self.stats.count(&a);
        a
    }

    fn place(&mut self, p: Protomeme<T>, now: i64) -> Assignment {
        if let Some(&id) = self.key_index.get(p.entity()) {
            let c = self.clusters.get_mut(&id).expect("index points at live cluster");
            c.merge_same_key(p);
            c.last_updated = c.last_updated.max(now);
            return Assignment::ExistingByKey(id);
        }

        let mode = self.cfg.similarity;
        let Some((id, d)) = nearest(
            self.clusters
                .values()
                .map(|c| (c.id, distance(p.features(), &c.centroid, &mode))),
        ) else {
            return Assignment::Created(self.create(p, now));
        };

        let outlier = self.history.is_outlier(d, self.cfg.n_sigmas);
        self.history.record(d);
        if !outlier {
            self.key_index.insert(p.entity().clone(), id);
            let c = self.clusters.get_mut(&id).expect("nearest is live");
            c.add_member(p);
            c.last_updated = c.last_updated.max(now);
            return Assignment::Nearest(id);
        }

        if self.clusters.len() < self.cfg.k {
            return Assignment::Created(self.create(p, now));
        }
        let victim = least_recent(self.clusters.values().map(|c| (c.id, c.last_updated)))
            .expect("at least one live cluster");
        self.remove_cluster(victim);
        let created = self.create(p, now);
        Assignment::ReplacedLru {
            evicted: victim,
            created,
        }
    }

    fn create(&mut self, p: Protomeme<T>, now: i64) -> ClusterId {
        let id = self.next_id;
        self.next_id += 1;
        self.key_index.insert(p.entity().clone(), id);
        self.clusters.insert(id, Cluster::singleton(id, p, now));
        id
    }

    fn remove_cluster(&mut self, id: ClusterId) -> Option<Cluster<T>> {
        let c = self.clusters.remove(&id)?;
        for e in c.members.keys() {
            self.key_index.remove(e);
        }
        Some(c)
    }

    /// Drops tweets with `timestamp <= cutoff`; clusters left empty are
    /// retired for this window.
    fn expire(&mut self, cutoff: i64) {
        let mut emptied = Vec::new();
        for c in self.clusters.values_mut() {
            let newest = c.members.values().map(|p| p.last_seen()).max().unwrap_or(i64::MIN);
            if newest <= cutoff {
                emptied.push(c.id);
                continue;
            }
            let stale: Vec<Entity> = c
                .members
                .values()
                .filter(|p| p.first_seen() <= cutoff)
                .map(|p| p.entity().clone())
                .collect();
            for e in stale {
                let member = c.members.get_mut(&e).expect("listed above");
                for t in member.expire(cutoff) {
                    c.centroid.remove_tweet(&t);
                }
                if member.is_empty() {
                    c.members.remove(&e);
                    self.key_index.remove(&e);
                }
            }
        }
        for id in emptied {
            let c = self.remove_cluster(id).expect("listed above");
            self.retired.push(c.snapshot());
        }
    }

    fn snapshot(&self, now: i64) -> Snapshot {
        Snapshot {
            window_end: now,
            clusters: self.clusters.values().map(Cluster::snapshot).collect(),
            retired: self.retired.clone(),
        }
    }
}

impl<T: Scalar> StreamClusterer for Psc<T> {
    fn step(&mut self, now: i64, batch: &[Tweet]) -> Result<Snapshot> {
        let analyzed = batch.iter().map(|t| Arc::new(self.extractor.analyze(t))).collect();
        self.step_analyzed(now, analyzed)
    }

    fn stats(&self) -> EngineStats {
        self.stats
    }

    fn live_clusters(&self) -> usize {
        self.clusters.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::EntityKind;
    use crate::window::WindowConfig;

    fn tweet(id: &str, ts: i64, author: &str, text: &str) -> Tweet {
        Tweet {
            id: id.into(),
            timestamp: ts,
            author_id: author.into(),
            text: text.into(),
            retweet_of_author: None,
        }
    }

    fn engine(k: usize, ell: u32) -> Psc<f64> {
        let cfg = EngineConfig {
            k,
            window: WindowConfig::sliding(60, ell),
            ..EngineConfig::default()
        };
        Psc::new(cfg, Arc::new(Extractor::english())).unwrap()
    }

    #[test]
    fn fewer_protomemes_than_k() {
        let mut e = engine(11, 6);
        let snap = e
            .step(60, &[tweet("1", 10, "u1", "#a"), tweet("2", 20, "u2", "#b"), tweet("3", 30, "u3", "#c")])
            .unwrap();
        assert_eq!(snap.clusters.len(), 3);
        assert_eq!(e.stats().seeded, 3);
    }

    #[test]
    fn seeding_is_deterministic() {
        let batch: Vec<_> = (0..40)
            .map(|i| tweet(&i.to_string(), 1 + i, &format!("u{i}"), &format!("#t{} word{}", i % 13, i % 5)))
            .collect();
        let run = || {
            let mut e = engine(5, 6);
            e.step(60, &batch).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn recurring_key_sticks() {
        let mut e = engine(2, 6);
        e.step(60, &[tweet("1", 10, "u1", "#a"), tweet("2", 20, "u2", "#b")]).unwrap();
        let before = e.cluster_of(&Entity::new(EntityKind::Hashtag, "#a")).unwrap();
        e.step(120, &[tweet("3", 70, "u9", "#a")]).unwrap();
        assert_eq!(e.stats().by_key, 1);
        assert_eq!(e.stats().nearest + e.stats().created + e.stats().replaced, 0);
        assert_eq!(e.cluster_of(&Entity::new(EntityKind::Hashtag, "#a")), Some(before));
        let c = e.cluster(before).unwrap();
        assert_eq!(c.tweet_ids(), vec!["1", "3"]);
        assert_eq!(c.last_updated(), 120);
    }

    #[test]
    fn empty_step_only_expires() {
        let mut e = engine(2, 1);
        let s1 = e.step(60, &[tweet("1", 10, "u1", "#a")]).unwrap();
        assert_eq!(s1.clusters.len(), 1);
        let s2 = e.step(120, &[]).unwrap();
        assert!(s2.clusters.is_empty());
        assert_eq!(s2.retired, vec![ClusterSnapshot { id: 0, tweet_ids: vec!["1".into()] }]);
        let s3 = e.step(180, &[]).unwrap();
        assert!(s3.retired.is_empty());
    }

    #[test]
    fn rejects_tweets_outside_step() {
        let mut e = engine(2, 6);
        e.step(120, &[tweet("1", 30, "u1", "#a"), tweet("2", 100, "u1", "#b")]).unwrap();
        assert_eq!(e.stats().rejected, 1);
        assert_eq!(e.stats().tweets, 1);
        assert!(e.step(120, &[]).is_err());
    }

    #[test]
    fn no_live_clusters_creates() {
        let mut e = engine(2, 1);
        e.step(60, &[tweet("1", 10, "u1", "#a")]).unwrap();
        e.step(180, &[tweet("2", 170, "u2", "#b")]).unwrap();
        assert_eq!(e.stats().created, 1);
        assert_eq!(e.live_clusters(), 1);
    }
}
