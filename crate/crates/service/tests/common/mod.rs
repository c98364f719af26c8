#![allow(dead_code)]

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use vigil_core::classify::InferenceRecord;
use vigil_core::ingest::VideoChunk;
use vigil_core::{ClassLabel, ScoreVector};
use vigil_service::Backend;

/// Backend whose clock advances one millisecond per reading.
pub fn backend() -> Backend {
    let t = Arc::new(AtomicI64::new(1_000));
    Backend::open_in_memory().unwrap().with_clock(Arc::new(move || t.fetch_add(1, Ordering::SeqCst)))
}

pub fn chunk(stream: &str, index: u64) -> VideoChunk {
    let start_ts = index * 10_000;
    VideoChunk {
        chunk_id: VideoChunk::chunk_id_for(stream, start_ts),
        stream_id: stream.into(),
        start_ts,
        start_frame: index * 300,
        duration_s: 10.0,
        frame_count: 300,
        storage_key: VideoChunk::storage_key_for(stream, start_ts),
        partial: false,
    }
}

pub fn record(chunk: &VideoChunk, label: ClassLabel, model_id: &str) -> InferenceRecord {
    InferenceRecord {
        chunk_id: chunk.chunk_id.clone(),
        label,
        scores: ScoreVector::smoothed_one_hot(label, 0.01),
        model_id: model_id.into(),
        latency_ms: 2.5,
        created_ts: 0,
    }
}
