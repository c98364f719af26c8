//! End-to-end run over fixture streams: ingest → segment → store →
//! pipeline → classify → backend → notifications.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use vigil_core::classify::{run_classifier, ChunkInput, Classifier, Concurrency};
use vigil_core::ingest::{open_stream, put_chunk, segment, ChunkStore, Pacing, Segment, StreamSource};
use vigil_core::pipeline::{build_test_pipeline, SamplingStrategy, TransformConfig};
use vigil_core::ClassLabel;

use crate::backend::{Backend, BackendError};
use crate::notify::{dispatch_pending, NotificationSink, RetryPolicy};

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub window_s: f64,
    pub strategy: SamplingStrategy,
    pub transform: TransformConfig,
    pub pacing: Pacing,
    pub retry: RetryPolicy,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            window_s: vigil_core::ingest::DEFAULT_WINDOW_S,
            strategy: SamplingStrategy::parse("8x32x1").expect("valid constant strategy"),
            transform: TransformConfig::test(),
            pacing: Pacing::Simulated,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkOutcome {
    pub chunk_id: String,
    pub stream_id: String,
    pub start_ts: u64,
    pub frame_count: u32,
    pub partial: bool,
    pub label: Option<ClassLabel>,
    pub alert: bool,
    /// `stage: message` of the first failure.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamFailure {
    pub stream_id: String,
    pub error: String,
}

/// Everything a run did, in stream then time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub streams: usize,
    pub chunks_processed: usize,
    pub inferences: usize,
    pub alerts_raised: usize,
    pub notifications_sent: usize,
    pub notifications_failed: usize,
    pub chunk_failures: usize,
    pub stream_failures: Vec<StreamFailure>,
    pub chunks: Vec<ChunkOutcome>,
}

struct Shared<'a> {
    cfg: &'a SimulationConfig,
    store: &'a dyn ChunkStore,
    backend: &'a Backend,
    classifier: &'a dyn Classifier,
    gate: Mutex<()>,
}

fn process(shared: &Shared<'_>, seg: Segment) -> ChunkOutcome {
    let c = &seg.chunk;
    let mut out = ChunkOutcome {
        chunk_id: c.chunk_id.clone(),
        stream_id: c.stream_id.clone(),
        start_ts: c.start_ts,
        frame_count: c.frame_count,
        partial: c.partial,
        label: None,
        alert: false,
        error: None,
    };
    let result: Result<(), String> = (|| {
        put_chunk(shared.store, c, &seg.bytes).map_err(|e| format!("store: {e}"))?;
        shared.backend.register_chunk(c).map_err(|e| format!("backend: {e}"))?;
        let batch = build_test_pipeline(&seg.bytes, &shared.cfg.strategy, &shared.cfg.transform)
            .map_err(|e| format!("pipeline: {e}"))?;
        let input =
            ChunkInput { chunk_id: &c.chunk_id, storage_key: &c.storage_key, bytes: &seg.bytes, batch: Some(&batch) };
        let record = {
            let _flight = (shared.classifier.concurrency() == Concurrency::SingleFlight)
                .then(|| shared.gate.lock().unwrap_or_else(|p| p.into_inner()));
            run_classifier(shared.classifier, &input).map_err(|e| format!("classify: {e}"))?
        };
        out.label = Some(record.label);
        let outcome = shared.backend.record_inference(&record).map_err(|e| format!("backend: {e}"))?;
        out.alert = outcome.alert.is_some();
        Ok(())
    })();
    out.error = result.err();
    out
}

fn run_stream(shared: &Shared<'_>, source: StreamSource) -> Result<Vec<ChunkOutcome>, String> {
    let handle = open_stream(source).map_err(|e| e.to_string())?.with_pacing(shared.cfg.pacing);
    let mut outcomes = Vec::new();
    for seg in segment(handle, shared.cfg.window_s).map_err(|e| e.to_string())? {
        match seg {
            Ok(seg) => outcomes.push(process(shared, seg)),
            Err(e) => return Err(format!("segment: {e}; {} chunks done", outcomes.len())),
        }
    }
    Ok(outcomes)
}

/// Runs every stream on its own thread, then drains the notification
/// queue through `sink`. Per-chunk failures are recorded and the run goes on.
pub fn simulate(
    sources: Vec<StreamSource>,
    cfg: &SimulationConfig,
    store: &dyn ChunkStore,
    backend: &Backend,
    classifier: &dyn Classifier,
    sink: &dyn NotificationSink,
) -> Result<RunReport, BackendError> {
    let shared = Shared { cfg, store, backend, classifier, gate: Mutex::new(()) };
    let streams = sources.len();
    let results: Vec<(String, Result<Vec<ChunkOutcome>, String>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = sources
            .into_iter()
            .map(|src| {
                let id = src.stream_id.clone();
                let shared = &shared;
                (id, scope.spawn(move || run_stream(shared, src)))
            })
            .collect();
        handles
            .into_iter()
            .map(|(id, h)| (id, h.join().unwrap_or_else(|_| Err("stream worker panicked".into()))))
            .collect()
    });

    let mut chunks = Vec::new();
    let mut stream_failures = Vec::new();
    for (stream_id, r) in results {
        match r {
            Ok(c) => chunks.extend(c),
            Err(error) => stream_failures.push(StreamFailure { stream_id, error }),
        }
    }
    chunks.sort_by(|a, b| (&a.stream_id, a.start_ts).cmp(&(&b.stream_id, b.start_ts)));
    stream_failures.sort_by(|a, b| a.stream_id.cmp(&b.stream_id));

    let dispatched = dispatch_pending(backend, sink, &cfg.retry)?;
    Ok(RunReport {
        streams,
        chunks_processed: chunks.len(),
        inferences: chunks.iter().filter(|c| c.label.is_some() && c.error.is_none()).count(),
        alerts_raised: chunks.iter().filter(|c| c.alert).count(),
        notifications_sent: dispatched.sent,
        notifications_failed: dispatched.failed,
        chunk_failures: chunks.iter().filter(|c| c.error.is_some()).count(),
        stream_failures,
        chunks,
    })
}
