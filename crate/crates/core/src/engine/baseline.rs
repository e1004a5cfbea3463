//! Tweet-level online k-means baselines.
//!
//! B1 clusters individual tweets by the cosine of their term-frequency
//! vectors. B2 mixes that with the Jaccard overlap between the author's
//! closed follower neighborhood and the union of the neighborhoods of the
//! cluster's authors:
//!
//! `sim = alpha * cos + (1 - alpha) * jaccard`
//!
//! Both use the same outlier test, eviction and window expiry as PSC.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    in_step, least_recent, nearest, Assignment, ClusterId, ClusterSnapshot, EngineConfig, EngineStats,
    OutlierHistory, Snapshot, StreamClusterer,
};
use crate::error::{Error, Result};
use crate::ingest::{AnalyzedTweet, Extractor, Tweet};
use crate::scalar::Scalar;
use crate::sparse::{CountSet, SparseVector};

/// Undirected view of a follower edge list.
#[derive(Debug, Clone, Default)]
pub struct FollowerGraph {
    neighbors: HashMap<Arc<str>, BTreeSet<Arc<str>>>,
}

impl FollowerGraph {
    pub fn from_edges<I, S>(edges: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut g = Self::default();
        for (a, b) in edges {
            g.add_edge(a.as_ref(), b.as_ref());
        }
        g
    }

    fn add_edge(&mut self, follower: &str, followee: &str) {
        let a: Arc<str> = Arc::from(follower);
        let b: Arc<str> = Arc::from(followee);
        self.neighbors.entry(a.clone()).or_default().insert(b.clone());
        self.neighbors.entry(b).or_default().insert(a);
    }

    /// Reads `follower_id followee_id` lines. Blank lines and `#` comments
    /// are skipped; anything else is an error.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut g = Self::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            match (fields.next(), fields.next(), fields.next()) {
                (Some(a), Some(b), None) => g.add_edge(a, b),
                _ => {
                    return Err(Error::Record {
                        line: i + 1,
                        message: "expected `follower_id followee_id`".into(),
                    })
                }
            }
        }
        Ok(g)
    }

    pub fn contains(&self, user: &str) -> bool {
        self.neighbors.contains_key(user)
    }

    /// The user and all followers and followees, sorted. `None` for users
    /// absent from the graph.
    pub fn closed_neighborhood(&self, user: &str) -> Option<Vec<Arc<str>>> {
        let (key, ns) = self.neighbors.get_key_value(user)?;
        let mut out: Vec<Arc<str>> = ns.iter().cloned().collect();
        if let Err(pos) = out.binary_search(key) {
            out.insert(pos, key.clone());
        }
        Some(out)
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }
}

struct NetworkTerm<T> {
    graph: Arc<FollowerGraph>,
    alpha: T,
}

/// A cluster of whole tweets.
#[derive(Debug, Clone)]
pub struct TweetCluster<T> {
    id: ClusterId,
    tweets: BTreeMap<Arc<str>, Arc<AnalyzedTweet>>,
    content: SparseVector<T>,
    neighborhood: CountSet,
    created_at: i64,
    last_updated: i64,
}

impl<T: Scalar> TweetCluster<T> {
    pub fn id(&self) -> ClusterId {
        self.id
    }

    pub fn content(&self) -> &SparseVector<T> {
        &self.content
    }

    pub fn created_at(&self) -> i64 {
        self.created_at
    }

    pub fn last_updated(&self) -> i64 {
        self.last_updated
    }

    pub fn tweet_ids(&self) -> Vec<String> {
        self.tweets.keys().map(|k| k.to_string()).collect()
    }

    fn snapshot(&self) -> ClusterSnapshot {
        ClusterSnapshot {
            id: self.id,
            tweet_ids: self.tweet_ids(),
        }
    }
}

/// Per-tweet point: its TF vector and its author's closed neighborhood.
struct Point<T> {
    tweet: Arc<AnalyzedTweet>,
    tf: SparseVector<T>,
    neighborhood: Option<Vec<Arc<str>>>,
}

/// The B1 and B2 baselines.
pub struct TweetClusterer<T> {
    cfg: EngineConfig<T>,
    extractor: Arc<Extractor>,
    network: Option<NetworkTerm<T>>,
    rng: ChaCha8Rng,
    clusters: BTreeMap<ClusterId, TweetCluster<T>>,
    history: OutlierHistory<T>,
    next_id: ClusterId,
    now: Option<i64>,
    seeded: bool,
    retired: Vec<ClusterSnapshot>,
    stats: EngineStats,
}

impl<T: Scalar> TweetClusterer<T> {
    /// Content-only baseline.
    pub fn b1(cfg: EngineConfig<T>, extractor: Arc<Extractor>) -> Result<Self> {
        Self::build(cfg, extractor, None)
    }

    /// Content plus follower-network baseline, weighted by `cfg.b2_alpha`.
    pub fn b2(cfg: EngineConfig<T>, extractor: Arc<Extractor>, graph: Arc<FollowerGraph>) -> Result<Self> {
        let alpha = cfg.b2_alpha;
        Self::build(cfg, extractor, Some(NetworkTerm { graph, alpha }))
    }

    fn build(cfg: EngineConfig<T>, extractor: Arc<Extractor>, network: Option<NetworkTerm<T>>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            extractor,
            network,
            clusters: BTreeMap::new(),
            history: OutlierHistory::new(),
            next_id: 0,
            now: None,
            seeded: false,
            retired: Vec::new(),
            stats: EngineStats::default(),
        })
    }

    pub fn clusters(&self) -> impl ExactSizeIterator<Item = &TweetCluster<T>> + '_ {
        self.clusters.values()
    }

    pub fn history(&self) -> &OutlierHistory<T> {
        &self.history
    }

    fn point(&self, tweet: Arc<AnalyzedTweet>) -> Point<T> {
        let tf = tweet
            .terms
            .iter()
            .map(|(k, n)| (k.clone(), T::count(*n as usize)))
            .collect();
        let neighborhood = self
            .network
            .as_ref()
            .and_then(|n| n.graph.closed_neighborhood(&tweet.author));
        Point {
            tweet,
            tf,
            neighborhood,
        }
    }

    fn similarity(&self, p: &Point<T>, c: &TweetCluster<T>) -> T {
        let cos = p.tf.cosine(&c.content);
        let Some(net) = &self.network else {
            return cos;
        };
        let jaccard = match &p.neighborhood {
            Some(ns) => {
                let inter = ns.iter().filter(|u| c.neighborhood.contains(u)).count();
                let union = ns.len() + c.neighborhood.len() - inter;
                if union == 0 {
                    T::zero()
                } else {
                    T::count(inter) / T::count(union)
                }
            }
            None => T::zero(),
        };
        net.alpha * cos + (T::one() - net.alpha) * jaccard
    }

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
        let points: Vec<Point<T>> = batch
            .into_iter()
            .filter(|t| in_step(t.timestamp, now, delta_t))
            .map(|t| self.point(t))
            .collect();
        self.stats.tweets += points.len() as u64;
        self.stats.rejected += (total - points.len()) as u64;

        if !self.seeded && !points.is_empty() {
            self.seeded = true;
            let k = self.cfg.k.min(points.len());
            let picks = rand::seq::index::sample(&mut self.rng, points.len(), k).into_vec();
            let mut slots: Vec<Option<Point<T>>> = points.into_iter().map(Some).collect();
            for i in picks {
                let p = slots[i].take().expect("distinct indices");
                self.create(p, now);
                self.stats.count(&Assignment::Seeded(self.next_id - 1));
            }
            for p in slots.into_iter().flatten() {
                let a = self.place(p, now);
                self.stats.count(&a);
            }
        } else {
            for p in points {
                let a = self.place(p, now);
                self.stats.count(&a);
            }
        }

        Ok(Snapshot {
            window_end: now,
            clusters: self.clusters.values().map(TweetCluster::snapshot).collect(),
            retired: self.retired.clone(),
        })
    }

    fn place(&mut self, p: Point<T>, now: i64) -> Assignment {
        let Some((id, d)) = nearest(
            self.clusters
                .values()
                .map(|c| (c.id, T::one() - self.similarity(&p, c))),
        ) else {
            return Assignment::Created(self.create(p, now));
        };
        let outlier = self.history.is_outlier(d, self.cfg.n_sigmas);
        self.history.record(d);
        if !outlier {
            let c = self.clusters.get_mut(&id).expect("nearest is live");
            add_point(c, p);
            c.last_updated = c.last_updated.max(now);
            return Assignment::Nearest(id);
        }
        if self.clusters.len() < self.cfg.k {
            return Assignment::Created(self.create(p, now));
        }
        let victim = least_recent(self.clusters.values().map(|c| (c.id, c.last_updated)))
            .expect("at least one live cluster");
        self.clusters.remove(&victim);
        let created = self.create(p, now);
        Assignment::ReplacedLru {
            evicted: victim,
            created,
        }
    }

    fn create(&mut self, p: Point<T>, now: i64) -> ClusterId {
        let id = self.next_id;
        self.next_id += 1;
        let mut c = TweetCluster {
            id,
            tweets: BTreeMap::new(),
            content: SparseVector::new(),
            neighborhood: CountSet::new(),
            created_at: now,
            last_updated: now,
        };
        add_point(&mut c, p);
        self.clusters.insert(id, c);
        id
    }

    fn expire(&mut self, cutoff: i64) {
        let mut emptied = Vec::new();
        for c in self.clusters.values_mut() {
            let stale: Vec<Arc<AnalyzedTweet>> = c
                .tweets
                .values()
                .filter(|t| t.timestamp <= cutoff)
                .cloned()
                .collect();
            if stale.is_empty() {
                continue;
            }
            if stale.len() == c.tweets.len() {
                emptied.push(c.id);
                continue;
            }
            let graph = self.network.as_ref().map(|n| n.graph.clone());
            for t in stale {
                c.tweets.remove(&t.id);
                for (k, n) in &t.terms {
                    c.content.add(k, -T::count(*n as usize));
                }
                if let Some(ns) = graph.as_ref().and_then(|g| g.closed_neighborhood(&t.author)) {
                    for u in &ns {
                        c.neighborhood.remove(u);
                    }
                }
            }
        }
        for id in emptied {
            let c = self.clusters.remove(&id).expect("listed above");
            self.retired.push(c.snapshot());
        }
    }
}

fn add_point<T: Scalar>(c: &mut TweetCluster<T>, p: Point<T>) {
    if c.tweets.contains_key(&p.tweet.id) {
        return;
    }
    for (k, w) in p.tf.iter() {
        c.content.add(k, *w);
    }
    if let Some(ns) = &p.neighborhood {
        for u in ns {
            c.neighborhood.insert(u);
        }
    }
    c.tweets.insert(p.tweet.id.clone(), p.tweet);
}

impl<T: Scalar> StreamClusterer for TweetClusterer<T> {
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

    fn cfg(k: usize) -> EngineConfig<f64> {
        EngineConfig {
            k,
            window: WindowConfig::sliding(60, 6),
            b2_alpha: 0.5,
            ..EngineConfig::default()
        }
    }

    #[test]
    fn single_tweet_single_cluster() {
        let mut b1 = TweetClusterer::b1(cfg(11), Arc::new(Extractor::english())).unwrap();
        let s = b1.step(60, &[tweet("1", 5, "u1", "hello world")]).unwrap();
        assert_eq!(s.clusters.len(), 1);
        assert_eq!(s.clusters[0].tweet_ids, vec!["1"]);
    }

    #[test]
    fn identical_texts_share_a_cluster() {
        let mut b1 = TweetClusterer::b1(cfg(1), Arc::new(Extractor::english())).unwrap();
        b1.step(60, &[tweet("1", 5, "u1", "storm coming tonight")]).unwrap();
        let s = b1.step(120, &[tweet("2", 65, "u2", "storm coming tonight")]).unwrap();
        assert_eq!(s.clusters.len(), 1);
        assert_eq!(s.clusters[0].tweet_ids, vec!["1", "2"]);
        assert_eq!(b1.history().mean, 0.0);
    }

    #[test]
    fn closed_neighborhoods() {
        let g = FollowerGraph::from_edges([("a", "b"), ("c", "a")]);
        let ns = g.closed_neighborhood("a").unwrap();
        assert_eq!(ns, vec![Arc::from("a"), Arc::from("b"), Arc::from("c")]);
        assert!(g.closed_neighborhood("zz").is_none());
    }

    #[test]
    fn graph_parse_errors() {
        assert!(FollowerGraph::parse("a b\n# c\n\nb c\n".as_bytes()).is_ok());
        assert!(FollowerGraph::parse("a b c\n".as_bytes()).is_err());
        assert!(FollowerGraph::parse("lonely\n".as_bytes()).is_err());
    }

    #[test]
    fn mutual_followers_without_shared_terms_are_similar() {
        // Closed neighborhoods are {a, b} on both sides: Jaccard 1, cosine 0.
        let g = Arc::new(FollowerGraph::from_edges([("a", "b"), ("b", "a")]));
        let b2 = TweetClusterer::b2(cfg(1), Arc::new(Extractor::english()), g).unwrap();
        let ex = Extractor::english();
        let p1 = b2.point(Arc::new(ex.analyze(&tweet("1", 5, "a", "apples"))));
        let p2 = b2.point(Arc::new(ex.analyze(&tweet("2", 6, "b", "oranges"))));
        let mut c = TweetCluster {
            id: 0,
            tweets: BTreeMap::new(),
            content: SparseVector::new(),
            neighborhood: CountSet::new(),
            created_at: 0,
            last_updated: 0,
        };
        add_point(&mut c, p1);
        assert_eq!(b2.similarity(&p2, &c), 0.5);
    }

    #[test]
    fn absent_author_has_no_network_term() {
        let g = Arc::new(FollowerGraph::from_edges([("a", "b")]));
        let b2 = TweetClusterer::b2(cfg(1), Arc::new(Extractor::english()), g).unwrap();
        let ex = Extractor::english();
        let p = b2.point(Arc::new(ex.analyze(&tweet("1", 5, "ghost", "apples"))));
        assert!(p.neighborhood.is_none());
        let q = b2.point(Arc::new(ex.analyze(&tweet("2", 5, "a", "pears"))));
        let mut c = TweetCluster {
            id: 0,
            tweets: BTreeMap::new(),
            content: SparseVector::new(),
            neighborhood: CountSet::new(),
            created_at: 0,
            last_updated: 0,
        };
        add_point(&mut c, q);
        assert_eq!(b2.similarity(&p, &c), 0.0);
    }
}
