use std::fs::File;
use std::io::{BufReader, Read};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::svf::{Frame, SvfHeader, SvfReader};

/// A camera feed as configured for one resident.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSource {
    pub stream_id: String,
    /// `file://` URI or bare path of an SVF fixture.
    pub uri: String,
    pub fps: u32,
    pub width: u32,
    pub height: u32,
    pub client_id: String,
}

impl StreamSource {
    /// Builds a source whose geometry is read from the fixture header.
    pub fn probe(stream_id: &str, uri: &str, client_id: &str) -> Result<StreamSource, IngestError> {
        let reader = SvfReader::new(BufReader::new(open_uri(uri)?))?;
        let h = reader.header();
        let source = StreamSource {
            stream_id: stream_id.to_string(),
            uri: uri.to_string(),
            fps: h.fps,
            width: h.width,
            height: h.height,
            client_id: client_id.to_string(),
        };
        source.validate()?;
        Ok(source)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if !valid_stream_id(&self.stream_id) {
            return Err(IngestError::InvalidSource(format!(
                "stream_id {:?} must be non-empty and use only [A-Za-z0-9._-]",
                self.stream_id
            )));
        }
        if self.fps == 0 {
            return Err(IngestError::InvalidSource("fps must be positive".into()));
        }
        if self.width < 16 || self.height < 16 {
            return Err(IngestError::InvalidSource(format!(
                "frames must be at least 16x16, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

pub(crate) fn valid_stream_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

/// How frames are released.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pacing {
    /// Frames are released immediately; only a virtual clock advances.
    #[default]
    Simulated,
    /// Frames are released no faster than the declared fps.
    RealTime,
}

/// An open stream yielding frames in order.
pub struct StreamHandle {
    source: StreamSource,
    reader: SvfReader<Box<dyn Read + Send>>,
    pacing: Pacing,
    started: Option<Instant>,
}

impl std::fmt::Debug for StreamHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StreamHandle")
            .field("source", &self.source)
            .field("position", &self.reader.position())
            .field("pacing", &self.pacing)
            .finish()
    }
}

/// Opens a fixture-backed stream. The fixture header must agree with the
/// geometry declared on `source`.
pub fn open_stream(source: StreamSource) -> Result<StreamHandle, IngestError> {
    source.validate()?;
    let file = open_uri(&source.uri)?;
    let reader = SvfReader::new(Box::new(BufReader::new(file)) as Box<dyn Read + Send>)?;
    let h = reader.header();
    if (h.width, h.height, h.fps) != (source.width, source.height, source.fps) {
        return Err(IngestError::InvalidSource(format!(
            "fixture is {}x{}@{} but source declares {}x{}@{}",
            h.width, h.height, h.fps, source.width, source.height, source.fps
        )));
    }
    Ok(StreamHandle { source, reader, pacing: Pacing::Simulated, started: None })
}

impl StreamHandle {
    /// Opens an in-memory SVF stream.
    pub fn from_bytes(stream_id: &str, client_id: &str, bytes: Vec<u8>) -> Result<StreamHandle, IngestError> {
        let reader = SvfReader::new(Box::new(std::io::Cursor::new(bytes)) as Box<dyn Read + Send>)?;
        let h = reader.header();
        let source = StreamSource {
            stream_id: stream_id.to_string(),
            uri: format!("mem://{stream_id}"),
            fps: h.fps,
            width: h.width,
            height: h.height,
            client_id: client_id.to_string(),
        };
        source.validate()?;
        Ok(StreamHandle { source, reader, pacing: Pacing::Simulated, started: None })
    }

    pub fn with_pacing(mut self, pacing: Pacing) -> Self {
        self.pacing = pacing;
        self
    }

    pub fn source(&self) -> &StreamSource {
        &self.source
    }

    pub fn header(&self) -> SvfHeader {
        self.reader.header()
    }

    pub fn duration_s(&self) -> f64 {
        self.header().duration_s()
    }

    /// Index of the next frame.
    pub fn position(&self) -> u32 {
        self.reader.position()
    }

    /// Stream time of the next frame in milliseconds.
    pub fn clock_ms(&self) -> u64 {
        self.position() as u64 * 1000 / self.header().fps as u64
    }

    pub fn next_frame(&mut self) -> Result<Option<Frame>, IngestError> {
        if self.pacing == Pacing::RealTime {
            let started = *self.started.get_or_insert_with(Instant::now);
            let due = Duration::from_secs_f64(self.position() as f64 / self.header().fps as f64);
            if let Some(wait) = due.checked_sub(started.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        Ok(self.reader.next_frame()?)
    }
}

fn open_uri(uri: &str) -> Result<File, IngestError> {
    let path = match uri.split_once("://") {
        Some(("file", rest)) => PathBuf::from(rest),
        Some((scheme, _)) => {
            return Err(IngestError::SourceUnavailable(format!("unsupported scheme {scheme:?} in {uri}")))
        }
        None => PathBuf::from(uri),
    };
    File::open(&path).map_err(|e| IngestError::SourceUnavailable(format!("{}: {e}", path.display())))
}
