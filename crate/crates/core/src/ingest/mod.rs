//! Stream intake: open a camera source, cut it into fixed-time chunks and
//! hand the chunks to a [`ChunkStore`].

pub(crate) mod source;
mod store;

pub use source::{open_stream, Pacing, StreamHandle, StreamSource};
pub use store::{get_chunk, put_chunk, ChunkStore, FsChunkStore, MemoryChunkStore, StoreError};

use serde::{Deserialize, Serialize};

use crate::svf::{write_svf, Frame, SvfError};

/// Default window length in seconds.
pub const DEFAULT_WINDOW_S: f64 = 10.0;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("source unavailable: {0}")]
    SourceUnavailable(String),
    #[error(transparent)]
    Fixture(#[from] SvfError),
    #[error("invalid stream source: {0}")]
    InvalidSource(String),
    #[error("configuration error: {0}")]
    Config(String),
}

/// A fixed-time segment of one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoChunk {
    pub chunk_id: String,
    pub stream_id: String,
    /// Milliseconds since stream start.
    pub start_ts: u64,
    pub start_frame: u64,
    pub duration_s: f64,
    pub frame_count: u32,
    pub storage_key: String,
    pub partial: bool,
}

impl VideoChunk {
    /// `{stream_id}/{start_ts}.svf`, with `start_ts` zero-padded so that
    /// lexicographic key order is temporal order.
    pub fn storage_key_for(stream_id: &str, start_ts: u64) -> String {
        format!("{stream_id}/{start_ts:010}.svf")
    }

    pub fn chunk_id_for(stream_id: &str, start_ts: u64) -> String {
        format!("{stream_id}-{start_ts:010}")
    }
}

/// A chunk together with its encoded SVF bytes.
#[derive(Debug, Clone)]
pub struct Segment {
    pub chunk: VideoChunk,
    pub bytes: Vec<u8>,
}

/// Number of frames in a window of `window_s` seconds at `fps`.
///
/// Windows are quantized to whole frames.
pub fn window_frames(window_s: f64, fps: u32) -> Result<u32, IngestError> {
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(IngestError::Config(format!("window_s must be positive, got {window_s}")));
    }
    let frames = (window_s * fps as f64).round();
    if frames < 1.0 {
        return Err(IngestError::Config(format!("window of {window_s}s is shorter than one frame at {fps} fps")));
    }
    if frames > u32::MAX as f64 {
        return Err(IngestError::Config(format!("window of {window_s}s is too long")));
    }
    Ok(frames as u32)
}

/// Fixed-time window segmentation.
///
/// Every chunk except possibly the last holds exactly one window of frames;
/// a shorter trailing remainder is emitted with `partial = true`. A stream
/// with no frames yields nothing.
pub fn segment(handle: StreamHandle, window_s: f64) -> Result<Segmenter, IngestError> {
    let per_chunk = window_frames(window_s, handle.header().fps)?;
    Ok(Segmenter { handle, per_chunk, done: false })
}

/// Convenience wrapper collecting [`segment`] into a vector.
pub fn segment_all(handle: StreamHandle, window_s: f64) -> Result<Vec<Segment>, IngestError> {
    segment(handle, window_s)?.collect()
}

/// Iterator over the chunks of one stream.
pub struct Segmenter {
    handle: StreamHandle,
    per_chunk: u32,
    done: bool,
}

impl Segmenter {
    pub fn window_frames(&self) -> u32 {
        self.per_chunk
    }

    fn next_segment(&mut self) -> Result<Option<Segment>, IngestError> {
        let start_frame = self.handle.position();
        let mut frames: Vec<Frame> = Vec::with_capacity(self.per_chunk as usize);
        while frames.len() < self.per_chunk as usize {
            match self.handle.next_frame()? {
                Some(f) => frames.push(f),
                None => break,
            }
        }
        if frames.is_empty() {
            return Ok(None);
        }
        let h = self.handle.header();
        let stream_id = &self.handle.source().stream_id;
        let start_ts = frames_to_ms(start_frame as u64, h.fps);
        let frame_count = frames.len() as u32;
        let mut bytes = Vec::new();
        write_svf(&mut bytes, h.width, h.height, h.fps, &frames)?;
        let chunk = VideoChunk {
            chunk_id: VideoChunk::chunk_id_for(stream_id, start_ts),
            stream_id: stream_id.clone(),
            start_ts,
            start_frame: start_frame as u64,
            duration_s: frame_count as f64 / h.fps as f64,
            frame_count,
            storage_key: VideoChunk::storage_key_for(stream_id, start_ts),
            partial: frame_count < self.per_chunk,
        };
        Ok(Some(Segment { chunk, bytes }))
    }
}

impl Iterator for Segmenter {
    type Item = Result<Segment, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_segment() {
            Ok(Some(s)) => Some(Ok(s)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn frames_to_ms(frames: u64, fps: u32) -> u64 {
    (frames * 1000 + fps as u64 / 2) / fps as u64
}
