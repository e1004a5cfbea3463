//! Clustering quality against ground-truth labels.
//!
//! Covers are slices of sets; a set may share elements with others in the
//! same cover. All logarithms are natural.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::{ClusterId, Snapshot};
use crate::error::{Error, Result};
use crate::ingest::TweetRecord;
use crate::scalar::Scalar;

/// `N_ij = |A_i ∩ B_j|` with rows for the truth and columns for the found
/// clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn rows(&self) -> usize {
        self.counts.len()
    }

    pub fn cols(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut out = vec![0; self.cols()];
        for r in &self.counts {
            for (o, n) in out.iter_mut().zip(r) {
                *o += n;
            }
        }
        out
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Row index lists for every element of `a`.
fn memberships<E: Ord>(a: &[BTreeSet<E>]) -> BTreeMap<&E, Vec<usize>> {
    let mut m: BTreeMap<&E, Vec<usize>> = BTreeMap::new();
    for (i, set) in a.iter().enumerate() {
        for e in set {
            m.entry(e).or_default().push(i);
        }
    }
    m
}

pub fn confusion<E: Ord>(truth: &[BTreeSet<E>], found: &[BTreeSet<E>]) -> ConfusionMatrix {
    let rows = memberships(truth);
    let mut counts = vec![vec![0u64; found.len()]; truth.len()];
    for (j, set) in found.iter().enumerate() {
        for e in set {
            if let Some(is) = rows.get(e) {
                for &i in is {
                    counts[i][j] += 1;
                }
            }
        }
    }
    ConfusionMatrix { counts }
}

fn xlogx<T: Scalar>(n: T, scale: T) -> T {
    if n > T::zero() {
        n * (n / scale).ln()
    } else {
        T::zero()
    }
}

/// NMI read directly off a confusion matrix, with row and column sums taken
/// from the matrix itself. `0 log 0 = 0`. When both marginals are
/// concentrated in a single cell the ratio is `0/0` and the result is 1.
pub fn nmi_from_confusion<T: Scalar>(m: &ConfusionMatrix) -> Result<T> {
    let total = m.total();
    if total == 0 {
        return Err(Error::Undefined("NMI of an empty confusion matrix".into()));
    }
    let n = T::from_u64(total).unwrap();
    let rows: Vec<T> = m.row_sums().into_iter().map(|x| T::from_u64(x).unwrap()).collect();
    let cols: Vec<T> = m.col_sums().into_iter().map(|x| T::from_u64(x).unwrap()).collect();
    let mut num = T::zero();
    for (i, r) in m.counts.iter().enumerate() {
        for (j, &nij) in r.iter().enumerate() {
            if nij > 0 {
                let nij = T::from_u64(nij).unwrap();
                num = num + nij * (nij * n / (rows[i] * cols[j])).ln();
            }
        }
    }
    num = num * T::lit(-2.0);
    let den = rows.iter().map(|&x| xlogx(x, n)).sum::<T>() + cols.iter().map(|&x| xlogx(x, n)).sum::<T>();
    if den == T::zero() {
        return Ok(T::one());
    }
    Ok((num / den).max(T::zero()).min(T::one()))
}

/// NMI of two partitions of the same elements.
pub fn nmi<T: Scalar, E: Ord>(truth: &[BTreeSet<E>], found: &[BTreeSet<E>]) -> Result<T> {
    let a = partition_universe(truth)?;
    let b = partition_universe(found)?;
    if a != b {
        return Err(Error::Contract("partitions cover different elements".into()));
    }
    nmi_from_confusion(&confusion(truth, found))
}

fn partition_universe<E: Ord>(p: &[BTreeSet<E>]) -> Result<BTreeSet<&E>> {
    let mut seen = BTreeSet::new();
    for set in p {
        for e in set {
            if !seen.insert(e) {
                return Err(Error::Contract("expected a partition, found overlapping sets".into()));
            }
        }
    }
    Ok(seen)
}

fn h<T: Scalar>(p: T) -> T {
    if p > T::zero() {
        -p * p.ln()
    } else {
        T::zero()
    }
}

/// Mean normalized conditional entropy of `x` given `y`, one term per set
/// of `x`. `inter[k][l] = |x_k ∩ y_l|`.
fn normalized_conditional<T: Scalar>(x_sizes: &[u64], y_sizes: &[u64], inter: &dyn Fn(usize, usize) -> u64, n: T) -> T {
    let mut total = T::zero();
    for (k, &xs) in x_sizes.iter().enumerate() {
        let px = T::from_u64(xs).unwrap() / n;
        let hx = h(px) + h(T::one() - px);
        if hx == T::zero() {
            continue;
        }
        let mut best: Option<T> = None;
        for (l, &ys) in y_sizes.iter().enumerate() {
            let both = inter(k, l);
            let p11 = T::from_u64(both).unwrap() / n;
            let p10 = T::from_u64(xs - both).unwrap() / n;
            let p01 = T::from_u64(ys - both).unwrap() / n;
            let p00 = T::one() - p11 - p10 - p01;
            if h(p11) + h(p00) <= h(p01) + h(p10) {
                continue;
            }
            let py = T::from_u64(ys).unwrap() / n;
            let cond = h(p11) + h(p10) + h(p01) + h(p00) - h(py) - h(T::one() - py);
            best = Some(best.map_or(cond, |b: T| b.min(cond)));
        }
        total = total + best.unwrap_or(hx) / hx;
    }
    total / T::count(x_sizes.len())
}

/// Overlapping NMI of Lancichinetti, Fortunato and Kertész (2009), in its
/// mean form `1 - (H(X|Y)_norm + H(Y|X)_norm) / 2`. The universe is the
/// union of both covers. A set with zero entropy (empty, or the whole
/// universe) contributes zero to its side's mean.
pub fn lfk_nmi<T: Scalar, E: Ord>(truth: &[BTreeSet<E>], found: &[BTreeSet<E>]) -> Result<T> {
    if truth.is_empty() || found.is_empty() {
        return Err(Error::Undefined("LFK-NMI of an empty cover".into()));
    }
    let universe: BTreeSet<&E> = truth.iter().chain(found).flatten().collect();
    if universe.is_empty() {
        return Err(Error::Undefined("LFK-NMI over an empty universe".into()));
    }
    let n = T::count(universe.len());
    let m = confusion(truth, found);
    let xs: Vec<u64> = truth.iter().map(|s| s.len() as u64).collect();
    let ys: Vec<u64> = found.iter().map(|s| s.len() as u64).collect();
    let hxy = normalized_conditional(&xs, &ys, &|k, l| m.counts[k][l], n);
    let hyx = normalized_conditional(&ys, &xs, &|k, l| m.counts[l][k], n);
    let v = T::one() - T::lit(0.5) * (hxy + hyx);
    Ok(v.max(T::zero()).min(T::one()))
}

/// `|A_i ∩ B_j| / |A_i ∪ B_j|`, zero when both sets are empty.
pub fn jaccard_matrix<T: Scalar, E: Ord>(truth: &[BTreeSet<E>], found: &[BTreeSet<E>]) -> Vec<Vec<T>> {
    let m = confusion(truth, found);
    truth
        .iter()
        .enumerate()
        .map(|(i, a)| {
            found
                .iter()
                .enumerate()
                .map(|(j, b)| {
                    let inter = m.counts[i][j] as usize;
                    let union = a.len() + b.len() - inter;
                    if union == 0 {
                        T::zero()
                    } else {
                        T::count(inter) / T::count(union)
                    }
                })
                .collect()
        })
        .collect()
}

/// Maximum cluster ratio: the largest share of `class` held by one cluster.
pub fn mcr<T: Scalar, E: Ord>(class: &BTreeSet<E>, found: &[BTreeSet<E>]) -> Result<T> {
    if class.is_empty() {
        return Err(Error::Undefined("MCR of a label with no tweets".into()));
    }
    let best = found
        .iter()
        .map(|c| c.iter().filter(|e| class.contains(e)).count())
        .max()
        .unwrap_or(0);
    Ok(T::count(best) / T::count(class.len()))
}

/// Tweet id to the set of labels it carries.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub labels: BTreeMap<String, BTreeSet<String>>,
}

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records labels for a tweet; an empty label list is ignored.
    pub fn insert<I, S>(&mut self, tweet_id: &str, labels: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        if !labels.is_empty() {
            self.labels.entry(tweet_id.to_string()).or_default().extend(labels);
        }
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a TweetRecord>) -> Self {
        let mut g = Self::new();
        for r in records {
            g.insert(&r.tweet.id, r.labels.iter().cloned());
        }
        g
    }

    pub fn remove(&mut self, tweet_id: &str) {
        self.labels.remove(tweet_id);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, tweet_id: &str) -> bool {
        self.labels.contains_key(tweet_id)
    }

    /// Label to tweet set, restricted to `universe` when given.
    pub fn classes(&self, universe: Option<&BTreeSet<String>>) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (id, labels) in &self.labels {
            if universe.is_some_and(|u| !u.contains(id)) {
                continue;
            }
            for l in labels {
                out.entry(l.clone()).or_default().insert(id.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMcr<T> {
    pub label: String,
    pub mcr: T,
    pub n_label_tweets: usize,
}

/// Confusion and Jaccard matrices of one window with their row and column
/// identities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport<T> {
    pub window_end: i64,
    pub labels: Vec<String>,
    pub clusters: Vec<ClusterId>,
    pub counts: Vec<Vec<u64>>,
    pub jaccard: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEvaluation<T> {
    pub window_end: i64,
    pub lfk_nmi: T,
    pub nmi: T,
    pub n_clusters: usize,
    pub n_retired: usize,
    /// Size of the evaluation universe.
    pub n_tweets: usize,
    pub mcr: Vec<LabelMcr<T>>,
    pub confusion: ConfusionReport<T>,
}

/// Scores one snapshot against the labels of the same period. The universe
/// is the labeled tweets that sit in a live or retired cluster; clusters and
/// classes are restricted to it and emptied ones dropped. `None` when the
/// universe is empty.
pub fn evaluate_snapshot<T: Scalar>(snapshot: &Snapshot, truth: &GroundTruth) -> Result<Option<WindowEvaluation<T>>> {
    let all = snapshot.clusters.iter().chain(&snapshot.retired);
    let mut universe = BTreeSet::new();
    for c in all.clone() {
        for id in &c.tweet_ids {
            if truth.contains(id) {
                universe.insert(id.clone());
            }
        }
    }
    if universe.is_empty() {
        return Ok(None);
    }
    let mut cluster_ids = Vec::new();
    let mut found = Vec::new();
    for c in all {
        let set: BTreeSet<String> = c.tweet_ids.iter().filter(|id| universe.contains(*id)).cloned().collect();
        if !set.is_empty() {
            cluster_ids.push(c.id);
            found.push(set);
        }
    }
    let classes = truth.classes(Some(&universe));
    let labels: Vec<String> = classes.keys().cloned().collect();
    let class_sets: Vec<BTreeSet<String>> = classes.into_values().collect();

    let m = confusion(&class_sets, &found);
    let mut mcrs = Vec::with_capacity(labels.len());
    for (label, set) in labels.iter().zip(&class_sets) {
        mcrs.push(LabelMcr {
            label: label.clone(),
            mcr: mcr(set, &found)?,
            n_label_tweets: set.len(),
        });
    }
    Ok(Some(WindowEvaluation {
        window_end: snapshot.window_end,
        lfk_nmi: lfk_nmi(&class_sets, &found)?,
        nmi: nmi_from_confusion(&m)?,
        n_clusters: snapshot.clusters.len(),
        n_retired: snapshot.retired.len(),
        n_tweets: universe.len(),
        mcr: mcrs,
        confusion: ConfusionReport {
            window_end: snapshot.window_end,
            labels,
            clusters: cluster_ids,
            jaccard: jaccard_matrix(&class_sets, &found),
            counts: m.counts,
        },
    }))
}
