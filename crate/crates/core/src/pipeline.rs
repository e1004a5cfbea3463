//! Streaming driver: steps an engine over a record stream and scores each
//! window against the labels of the same period.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::engine::{
    Algorithm, EngineConfig, EngineStats, FollowerGraph, Psc, Snapshot, Stepper, StreamClusterer, TweetClusterer,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_snapshot, GroundTruth, WindowEvaluation};
use crate::ingest::{Extractor, Tweet, TweetRecord};
use crate::window::WindowConfig;

/// Builds the clusterer selected by `cfg.algorithm`. B2 needs `graph`.
pub fn build_engine(
    cfg: &EngineConfig<f64>,
    extractor: Arc<Extractor>,
    graph: Option<Arc<FollowerGraph>>,
) -> Result<Box<dyn StreamClusterer>> {
    Ok(match cfg.algorithm {
        Algorithm::Psc => Box::new(Psc::new(cfg.clone(), extractor)?),
        Algorithm::B1 => Box::new(TweetClusterer::b1(cfg.clone(), extractor)?),
        Algorithm::B2 => {
            let graph = graph.ok_or_else(|| Error::Config("the b2 baseline needs a follower graph".into()))?;
            Box::new(TweetClusterer::b2(cfg.clone(), extractor, graph)?)
        }
    })
}

/// Labels of recent tweets. Retired clusters still hold tweets one step
/// older than the window, so labels are kept for `ell + 1` steps.
#[derive(Debug, Default)]
pub struct WindowedTruth {
    queue: VecDeque<(i64, String)>,
    truth: GroundTruth,
}

impl WindowedTruth {
    pub fn push(&mut self, record: &TweetRecord) {
        if record.labels.is_empty() {
            return;
        }
        self.queue.push_back((record.tweet.timestamp, record.tweet.id.clone()));
        self.truth.insert(&record.tweet.id, record.labels.iter().cloned());
    }

    /// Drops labels of tweets with `timestamp <= cutoff`.
    pub fn expire(&mut self, cutoff: i64) {
        while let Some((ts, _)) = self.queue.front() {
            if *ts > cutoff {
                break;
            }
            let (_, id) = self.queue.pop_front().expect("front exists");
            self.truth.remove(&id);
        }
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub windows: u64,
    /// Windows without any labeled tweet in a cluster.
    pub unscored: u64,
    /// Tweets older than the step being filled when they arrived.
    pub late: u64,
    pub engine: EngineStats,
}

/// Drives `engine` over `records` in arrival order. `on_window` receives
/// every snapshot and, when labels overlap it, its evaluation.
pub fn run_stream<I, F>(
    engine: &mut dyn StreamClusterer,
    window: &WindowConfig<f64>,
    records: I,
    mut on_window: F,
) -> Result<RunSummary>
where
    I: IntoIterator<Item = Result<TweetRecord>>,
    F: FnMut(&Snapshot, Option<&WindowEvaluation<f64>>) -> Result<()>,
{
    let mut stepper = Stepper::new(window.delta_t);
    let mut truth = WindowedTruth::default();
    let mut summary = RunSummary::default();
    let mut step = |now: i64, batch: Vec<Tweet>, truth: &mut WindowedTruth, summary: &mut RunSummary| -> Result<()> {
        let snapshot = engine.step(now, &batch)?;
        if let Some(cutoff) = window.expiry_cutoff(now) {
            truth.expire(cutoff - window.delta_t);
        }
        let eval = evaluate_snapshot::<f64>(&snapshot, truth.truth())?;
        summary.windows += 1;
        if eval.is_none() {
            summary.unscored += 1;
        }
        on_window(&snapshot, eval.as_ref())
    };
    for record in records {
        let record = record?;
        truth.push(&record);
        for (now, batch) in stepper.push(record.tweet) {
            step(now, batch, &mut truth, &mut summary)?;
        }
    }
    if let Some((now, batch)) = stepper.finish() {
        step(now, batch, &mut truth, &mut summary)?;
    }
    summary.late = stepper.late();
    summary.engine = engine.stats();
    Ok(summary)
}

/// Runs a whole in-memory stream and collects per-window evaluations.
pub fn evaluate_stream(
    engine: &mut dyn StreamClusterer,
    window: &WindowConfig<f64>,
    records: &[TweetRecord],
) -> Result<Vec<WindowEvaluation<f64>>> {
    let mut out = Vec::new();
    run_stream(engine, window, records.iter().cloned().map(Ok), |_, e| {
        out.extend(e.cloned());
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    #[test]
    fn b2_requires_graph() {
        let cfg = EngineConfig {
            algorithm: Algorithm::B2,
            ..EngineConfig::default()
        };
        assert!(matches!(
            build_engine(&cfg, Arc::new(Extractor::english()), None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn windowed_truth_expires_in_order() {
        let mut w = WindowedTruth::default();
        for (id, ts) in [("a", 10), ("b", 20), ("c", 30)] {
            w.push(&TweetRecord {
                tweet: Tweet {
                    id: id.into(),
                    timestamp: ts,
                    author_id: "u".into(),
                    text: String::new(),
                    retweet_of_author: None,
                },
                labels: vec!["x".into()],
            });
        }
        w.expire(20);
        assert!(!w.truth().contains("b"));
        assert!(w.truth().contains("c"));
    }

    #[test]
    fn every_step_is_reported() {
        let records = generate(&SynthConfig {
            n_memes: 3,
            duration_hours: 3.0,
            ..SynthConfig::default()
        })
        .unwrap();
        let cfg = EngineConfig::default();
        let mut engine = build_engine(&cfg, Arc::new(Extractor::english()), None).unwrap();
        let mut windows = Vec::new();
        let summary = run_stream(engine.as_mut(), &cfg.window, records.into_iter().map(Ok), |s, e| {
            windows.push((s.window_end, e.is_some()));
            Ok(())
        })
        .unwrap();
        assert_eq!(summary.windows, 3);
        assert_eq!(summary.late, 0);
        assert!(windows.iter().all(|(_, scored)| *scored));
        assert!(windows.windows(2).all(|w| w[1].0 - w[0].0 == 3600));
    }
}
