//! Deterministic synthetic camera streams.
//!
//! Each stream is a small raw-RGB scene with one figure whose movement
//! depends on the scripted action; frames carry the action code (and the
//! Normal subtype) as ground truth. Anything not covered by an event is a
//! Normal activity that changes every window.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{window_frames, StreamSource, VideoChunk};
use crate::label::{argmax, ClassLabel};
use crate::svf::{write_svf, Frame, SvfHeader, NUM_NORMAL_SUBTYPES};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FixtureError {
    #[error("event {index}: unknown stream {stream_id:?}")]
    UnknownStream { index: usize, stream_id: String },
    #[error("events {first} and {second} overlap on stream {stream_id:?}")]
    Overlap { first: usize, second: usize, stream_id: String },
    #[error("event {index}: {message}")]
    InvalidEvent { index: usize, message: String },
    #[error("invalid fixture spec: {0}")]
    Spec(String),
    #[error("fixture i/o: {0}")]
    Io(String),
}

/// Name of the ground-truth manifest written next to the fixtures.
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

/// One scripted action on one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureEvent {
    pub stream_id: String,
    pub start_s: f64,
    pub duration_s: f64,
    pub action_code: u8,
    #[serde(default)]
    pub normal_subtype: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSpec {
    pub stream_ids: Vec<String>,
    pub duration_s: f64,
    #[serde(default = "default_fps")]
    pub fps: u32,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    /// Window used to derive the chunk-level expectations.
    #[serde(default = "default_window")]
    pub window_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub events: Vec<FixtureEvent>,
}

fn default_fps() -> u32 {
    30
}
fn default_width() -> u32 {
    64
}
fn default_height() -> u32 {
    48
}
fn default_window() -> f64 {
    crate::ingest::DEFAULT_WINDOW_S
}

impl FixtureSpec {
    pub fn new(streams: usize, duration_s: f64, seed: u64, events: Vec<FixtureEvent>) -> Self {
        FixtureSpec {
            stream_ids: (0..streams).map(|i| format!("cam-{i}")).collect(),
            duration_s,
            fps: default_fps(),
            width: default_width(),
            height: default_height(),
            window_s: default_window(),
            seed,
            events,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedStream {
    pub stream_id: String,
    pub header: SvfHeader,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamTruth {
    pub stream_id: String,
    pub file: String,
    pub fps: u32,
    pub width: u32,
    pub height: u32,
    pub frame_count: u32,
}

/// Expected majority label of one chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkTruth {
    pub stream_id: String,
    pub chunk_id: String,
    pub chunk_index: usize,
    pub start_ts: u64,
    pub label: ClassLabel,
    #[serde(default)]
    pub normal_subtype: Option<u8>,
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub window_s: f64,
    pub seed: u64,
    pub streams: Vec<StreamTruth>,
    pub chunks: Vec<ChunkTruth>,
}

impl GroundTruth {
    pub fn critical_chunks(&self) -> usize {
        self.chunks.iter().filter(|c| c.label.is_critical()).count()
    }

    /// Stream sources for fixtures stored under `dir`.
    pub fn sources(&self, dir: &Path) -> Vec<StreamSource> {
        self.streams
            .iter()
            .map(|s| StreamSource {
                stream_id: s.stream_id.clone(),
                uri: dir.join(&s.file).to_string_lossy().into_owned(),
                fps: s.fps,
                width: s.width,
                height: s.height,
                client_id: format!("resident-{}", s.stream_id),
            })
            .collect()
    }

    pub fn load(dir: &Path) -> Result<GroundTruth, FixtureError> {
        let path = dir.join(GROUND_TRUTH_FILE);
        let text = std::fs::read(&path).map_err(|e| FixtureError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&text).map_err(|e| FixtureError::Io(format!("{}: {e}", path.display())))
    }
}

/// Generates the fixtures and writes one SVF file per stream plus
/// [`GROUND_TRUTH_FILE`] into `dir`.
pub fn write_fixtures(dir: &Path, spec: &FixtureSpec) -> Result<GroundTruth, FixtureError> {
    let (streams, truth) = gen_fixtures(spec)?;
    let io = |p: &Path, e: std::io::Error| FixtureError::Io(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    for (s, t) in streams.iter().zip(&truth.streams) {
        let path = dir.join(&t.file);
        std::fs::write(&path, &s.bytes).map_err(|e| io(&path, e))?;
    }
    let path = dir.join(GROUND_TRUTH_FILE);
    let json = serde_json::to_vec_pretty(&truth).expect("plain data");
    std::fs::write(&path, json).map_err(|e| io(&path, e))?;
    Ok(truth)
}

/// Per-frame ground truth of a stream before rendering.
fn timeline(spec: &FixtureSpec, stream: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(u8, u8)>, FixtureError> {
    let fps = spec.fps as f64;
    let total = (spec.duration_s * fps).round() as usize;
    let per_window = window_frames(spec.window_s, spec.fps).map_err(|e| FixtureError::Spec(e.to_string()))? as usize;
    let mut frames: Vec<(u8, u8)> = Vec::with_capacity(total);
    let mut subtype = 0u8;
    for i in 0..total {
        if i % per_window == 0 {
            subtype = rng.random_range(0..NUM_NORMAL_SUBTYPES);
        }
        frames.push((ClassLabel::Normal.code(), subtype));
    }
    let id = &spec.stream_ids[stream];
    for e in spec.events.iter().filter(|e| &e.stream_id == id) {
        let start = (e.start_s * fps).round() as usize;
        let end = ((e.start_s + e.duration_s) * fps).round() as usize;
        let sub = if e.action_code == ClassLabel::Normal.code() { e.normal_subtype.unwrap_or(0) } else { 0 };
        for f in &mut frames[start..end.min(total)] {
            *f = (e.action_code, sub);
        }
    }
    Ok(frames)
}

fn validate(spec: &FixtureSpec) -> Result<(), FixtureError> {
    if spec.stream_ids.is_empty() {
        return Err(FixtureError::Spec("no streams".into()));
    }
    if !(spec.duration_s.is_finite() && spec.duration_s >= 0.0) {
        return Err(FixtureError::Spec(format!("duration {} must be non-negative", spec.duration_s)));
    }
    if spec.fps == 0 || spec.width < 16 || spec.height < 16 {
        return Err(FixtureError::Spec("fps must be positive and frames at least 16x16".into()));
    }
    for (i, a) in spec.stream_ids.iter().enumerate() {
        if !crate::ingest::source::valid_stream_id(a) || spec.stream_ids[..i].contains(a) {
            return Err(FixtureError::Spec(format!("bad or duplicate stream id {a:?}")));
        }
    }
    for (index, e) in spec.events.iter().enumerate() {
        if !spec.stream_ids.contains(&e.stream_id) {
            return Err(FixtureError::UnknownStream { index, stream_id: e.stream_id.clone() });
        }
        let invalid = |message: String| FixtureError::InvalidEvent { index, message };
        if !(e.start_s.is_finite() && e.start_s >= 0.0 && e.duration_s.is_finite() && e.duration_s > 0.0) {
            return Err(invalid("start must be >= 0 and duration > 0".into()));
        }
        if e.start_s + e.duration_s > spec.duration_s + 1e-9 {
            return Err(invalid(format!("ends after the stream ({}s)", spec.duration_s)));
        }
        if e.action_code > 3 {
            return Err(invalid(format!("action code {} out of range", e.action_code)));
        }
        match e.normal_subtype {
            Some(_) if e.action_code != ClassLabel::Normal.code() => {
                return Err(invalid("normal_subtype is only valid for Normal events".into()))
            }
            Some(s) if s >= NUM_NORMAL_SUBTYPES => return Err(invalid(format!("normal subtype {s} out of range"))),
            _ => {}
        }
    }
    for (i, a) in spec.events.iter().enumerate() {
        for (j, b) in spec.events.iter().enumerate().skip(i + 1) {
            if a.stream_id == b.stream_id
                && a.start_s < b.start_s + b.duration_s
                && b.start_s < a.start_s + a.duration_s
            {
                return Err(FixtureError::Overlap { first: i, second: j, stream_id: a.stream_id.clone() });
            }
        }
    }
    Ok(())
}

/// Renders every stream and derives the chunk-level expectations.
pub fn gen_fixtures(spec: &FixtureSpec) -> Result<(Vec<GeneratedStream>, GroundTruth), FixtureError> {
    validate(spec)?;
    let per_window = window_frames(spec.window_s, spec.fps).map_err(|e| FixtureError::Spec(e.to_string()))? as usize;
    let mut streams = Vec::new();
    let mut chunks = Vec::new();
    let mut truths = Vec::new();
    for (si, stream_id) in spec.stream_ids.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(si as u64));
        let labels = timeline(spec, si, &mut rng)?;
        let frames: Vec<Frame> = labels
            .iter()
            .enumerate()
            .map(|(i, &(code, sub))| Frame {
                action_code: code,
                normal_subtype: sub,
                rgb: render(spec.width, spec.height, spec.fps, i, code, sub, &mut rng),
            })
            .collect();
        let mut bytes = Vec::new();
        write_svf(&mut bytes, spec.width, spec.height, spec.fps, &frames).map_err(|e| FixtureError::Spec(e.to_string()))?;
        let header = SvfHeader { width: spec.width, height: spec.height, fps: spec.fps, frame_count: frames.len() as u32 };

        for (ci, window) in labels.chunks(per_window).enumerate() {
            let mut counts = [0f64; 4];
            for (code, _) in window {
                counts[*code as usize] += 1.0;
            }
            let label = ClassLabel::from_code(argmax(&counts) as u8).unwrap();
            let normal_subtype = (label == ClassLabel::Normal).then(|| {
                let mut sub_counts = [0f64; NUM_NORMAL_SUBTYPES as usize];
                for (code, sub) in window {
                    if *code == ClassLabel::Normal.code() {
                        sub_counts[*sub as usize] += 1.0;
                    }
                }
                argmax(&sub_counts) as u8
            });
            let start_ts = ((ci * per_window) as u64 * 1000 + spec.fps as u64 / 2) / spec.fps as u64;
            chunks.push(ChunkTruth {
                stream_id: stream_id.clone(),
                chunk_id: VideoChunk::chunk_id_for(stream_id, start_ts),
                chunk_index: ci,
                start_ts,
                label,
                normal_subtype,
                partial: window.len() < per_window,
            });
        }
        truths.push(StreamTruth {
            stream_id: stream_id.clone(),
            file: format!("{stream_id}.svf"),
            fps: spec.fps,
            width: spec.width,
            height: spec.height,
            frame_count: header.frame_count,
        });
        streams.push(GeneratedStream { stream_id: stream_id.clone(), header, bytes });
    }
    Ok((streams, GroundTruth { window_s: spec.window_s, seed: spec.seed, streams: truths, chunks }))
}

/// Draws one frame: textured floor, a figure posed by the action, sensor noise.
fn render(width: u32, height: u32, fps: u32, index: usize, code: u8, subtype: u8, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let (w, h) = (width as f64, height as f64);
    let t = index as f64 / fps as f64;
    let phase = (subtype as f64 + 1.0) * 0.37;
    // figure box: centre x, top y, width, height (fractions of the frame)
    let (cx, top, fw, fh, shade) = match ClassLabel::from_code(code).unwrap() {
        ClassLabel::Normal => {
            let sway = 0.05 * (t * (0.5 + 0.05 * subtype as f64) + phase).sin();
            (0.5 + sway, 0.3, 0.16, 0.55, 200.0)
        }
        ClassLabel::Falling => {
            // topples over the first second of every 3 s cycle, then lies still
            let p = ((t % 3.0) / 1.0).min(1.0);
            (0.5 + 0.15 * p, 0.3 + 0.5 * p, 0.16 + 0.4 * p, 0.55 - 0.4 * p, 210.0)
        }
        ClassLabel::Staggering => {
            let lurch = 0.25 * (t * 2.7).sin() + 0.08 * (t * 7.3).sin();
            (0.5 + lurch, 0.3 + 0.04 * (t * 5.0).sin().abs(), 0.16, 0.55, 190.0)
        }
        ClassLabel::ChestPain => (0.5, 0.32 + 0.02 * (t * 1.3).sin(), 0.18, 0.53, 180.0 + 40.0 * (t * 6.0).sin()),
    };
    let (x0, x1) = ((cx - fw / 2.0) * w, (cx + fw / 2.0) * w);
    let (y0, y1) = (top * h, (top + fh) * h);
    let mut out = Vec::with_capacity((width * height * 3) as usize);
    for y in 0..height {
        for x in 0..width {
            let (xf, yf) = (x as f64 + 0.5, y as f64 + 0.5);
            let floor = if yf > 0.8 * h { 70.0 } else { 40.0 + 10.0 * ((x / 4 + y / 4) % 2) as f64 };
            let inside = xf >= x0 && xf < x1 && yf >= y0 && yf < y1;
            let base = if inside { shade } else { floor };
            let noise = rng.random_range(-4.0..4.0);
            let v = (base + noise).clamp(0.0, 255.0) as u8;
            let tint = if inside { [v, v.saturating_sub(20), v.saturating_sub(40)] } else { [v, v, v.saturating_add(10)] };
            out.extend_from_slice(&tint);
        }
    }
    out
}
