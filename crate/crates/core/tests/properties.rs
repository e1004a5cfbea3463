use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;

use memestream::eval::{lfk_nmi, nmi};
use memestream::ingest::{Entity, EntityKind, Extractor, Tweet};
use memestream::protomeme::{FeatureView, Protomeme};
use memestream::simil::{distance, Similarities, SimilarityMode, SimilarityWeights};

fn view_strategy() -> impl Strategy<Value = FeatureView<f64>> {
    (
        prop::collection::vec((0..6u8, 1..5u8), 0..6),
        prop::collection::vec((0..10u8, 1..4u8), 0..10),
        prop::collection::vec(0..10u8, 0..6),
        prop::collection::vec(0..8u8, 0..6),
    )
        .prop_map(|(users, words, tweets, diffusion)| {
            let mut v = FeatureView::new();
            for (u, n) in users {
                v.user.add(&Arc::from(format!("u{u}")), f64::from(n));
            }
            for (w, n) in words {
                v.content.add(&Arc::from(format!("w{w}")), f64::from(n));
            }
            for t in tweets {
                v.tweets.insert(&Arc::from(format!("t{t}")));
            }
            for d in diffusion {
                v.diffusion.insert(&Arc::from(format!("d{d}")));
            }
            v
        })
}

fn partition_strategy(n: usize) -> impl Strategy<Value = Vec<BTreeSet<usize>>> {
    prop::collection::vec(0..4usize, n).prop_map(|labels| {
        let mut sets = vec![BTreeSet::new(); 4];
        for (e, l) in labels.into_iter().enumerate() {
            sets[l].insert(e);
        }
        sets.retain(|s| !s.is_empty());
        sets
    })
}

proptest! {
    #[test]
    fn similarities_are_symmetric_and_bounded(p in view_strategy(), q in view_strategy()) {
        let pq = Similarities::between(&p, &q);
        let qp = Similarities::between(&q, &p);
        prop_assert_eq!(pq, qp);
        for s in [pq.user, pq.content, pq.tweet, pq.network] {
            prop_assert!((0.0..=1.0).contains(&s));
        }
        let w = SimilarityWeights::equal();
        for mode in [SimilarityMode::Max, SimilarityMode::Linear(w)] {
            let d = distance(&p, &q, &mode);
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }

    #[test]
    fn self_similarity_is_one_when_features_exist(p in view_strategy()) {
        let s = Similarities::between(&p, &p);
        prop_assert_eq!(s.user, if p.user.is_empty() { 0.0 } else { 1.0 });
        prop_assert_eq!(s.tweet, if p.tweets.is_empty() { 0.0 } else { 1.0 });
    }

    #[test]
    fn protomeme_matches_rebuild_after_merges_and_expiry(
        times in prop::collection::vec(1..100i64, 1..30),
        cutoff in 0..100i64,
    ) {
        let ex = Extractor::english();
        let entity = Entity::new(EntityKind::Hashtag, "#x");
        let tweets: Vec<_> = times
            .iter()
            .enumerate()
            .map(|(i, ts)| {
                let t = Tweet {
                    id: format!("t{i}"),
                    timestamp: *ts,
                    author_id: format!("u{}", i % 3),
                    text: format!("#x word{} @m{}", i % 4, i % 2),
                    retweet_of_author: None,
                };
                Arc::new(ex.analyze(&t))
            })
            .collect();
        let mut p = Protomeme::<f64>::new(entity.clone(), tweets[0].clone()).unwrap();
        for t in &tweets[1..] {
            p.merge_tweet(t.clone()).unwrap();
        }
        prop_assert_eq!(&p, &p.rebuild());
        let survivors: Vec<_> = tweets.iter().filter(|t| t.timestamp > cutoff).cloned().collect();
        match p.expire_tweets(cutoff) {
            Some(p) => {
                let scratch = Protomeme::<f64>::from_tweets(entity, survivors).unwrap();
                prop_assert_eq!(p.features(), scratch.features());
            }
            None => prop_assert!(survivors.is_empty()),
        }
    }

    #[test]
    fn nmi_and_lfk_are_symmetric(a in partition_strategy(12), b in partition_strategy(12)) {
        let ab: f64 = nmi(&a, &b).unwrap();
        let ba: f64 = nmi(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
        let lab: f64 = lfk_nmi(&a, &b).unwrap();
        let lba: f64 = lfk_nmi(&b, &a).unwrap();
        prop_assert!((lab - lba).abs() < 1e-12);
        let self_score: f64 = lfk_nmi(&a, &a).unwrap();
        prop_assert!((self_score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measures_ignore_cluster_order(a in partition_strategy(10), b in partition_strategy(10)) {
        let mut b_rev = b.clone();
        b_rev.reverse();
        let x: f64 = nmi(&a, &b).unwrap();
        let y: f64 = nmi(&a, &b_rev).unwrap();
        prop_assert!((x - y).abs() < 1e-12);
        let x: f64 = lfk_nmi(&a, &b).unwrap();
        let y: f64 = lfk_nmi(&a, &b_rev).unwrap();
        prop_assert!((x - y).abs() < 1e-12);
    }
}
