//! SVF: a minimal raw-RGB video container carrying per-frame ground truth.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "SVF1" | width u32 | height u32 | fps u32 | frame_count u32
//! frame_count × [ action_code u8 | normal_subtype u8 | width*height*3 RGB bytes ]
//! ```
//!
//! Stream fixtures and stored chunks share this layout.

use std::io::{self, Read, Write};

pub const MAGIC: [u8; 4] = *b"SVF1";
pub const HEADER_LEN: usize = 20;
/// Normal subtypes are indices into a 40-entry table of daily actions.
pub const NUM_NORMAL_SUBTYPES: u8 = 40;

#[derive(Debug, thiserror::Error)]
pub enum SvfError {
    #[error("malformed fixture: bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("malformed fixture: {0}")]
    InvalidHeader(String),
    #[error("malformed fixture: frame {frame} has {what} {value}")]
    InvalidFrame {
        frame: u32,
        what: &'static str,
        value: u8,
    },
    #[error("truncated fixture: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("trailing data: {0} bytes after the last frame")]
    TrailingBytes(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvfHeader {
    pub width: u32,
    pub height: u32,
    pub fps: u32,
    pub frame_count: u32,
}

impl SvfHeader {
    pub fn frame_bytes(&self) -> usize {
        self.width as usize * self.height as usize * 3
    }

    pub fn record_len(&self) -> usize {
        2 + self.frame_bytes()
    }

    pub fn file_len(&self) -> usize {
        HEADER_LEN + self.frame_count as usize * self.record_len()
    }

    pub fn duration_s(&self) -> f64 {
        self.frame_count as f64 / self.fps as f64
    }

    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..4].copy_from_slice(&MAGIC);
        for (i, v) in [self.width, self.height, self.fps, self.frame_count].into_iter().enumerate() {
            out[4 + 4 * i..8 + 4 * i].copy_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<SvfHeader, SvfError> {
        if bytes.len() < HEADER_LEN {
            return Err(SvfError::Truncated { expected: HEADER_LEN, actual: bytes.len() });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(SvfError::BadMagic(magic));
        }
        let field = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        let header = SvfHeader { width: field(0), height: field(1), fps: field(2), frame_count: field(3) };
        header.validate()?;
        Ok(header)
    }

    fn validate(&self) -> Result<(), SvfError> {
        if self.width == 0 || self.height == 0 {
            return Err(SvfError::InvalidHeader(format!("zero-area frames {}x{}", self.width, self.height)));
        }
        if self.fps == 0 {
            return Err(SvfError::InvalidHeader("fps must be positive".into()));
        }
        Ok(())
    }
}

/// One decoded frame record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub action_code: u8,
    pub normal_subtype: u8,
    pub rgb: Vec<u8>,
}

impl Frame {
    fn check(&self, index: u32, frame_bytes: usize) -> Result<(), SvfError> {
        if self.action_code > 3 {
            return Err(SvfError::InvalidFrame { frame: index, what: "action code", value: self.action_code });
        }
        if self.normal_subtype >= NUM_NORMAL_SUBTYPES {
            return Err(SvfError::InvalidFrame { frame: index, what: "normal subtype", value: self.normal_subtype });
        }
        if self.rgb.len() != frame_bytes {
            return Err(SvfError::InvalidHeader(format!(
                "frame {index} carries {} pixel bytes, expected {frame_bytes}",
                self.rgb.len()
            )));
        }
        Ok(())
    }
}

/// Fully decoded SVF file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvfVideo {
    pub header: SvfHeader,
    pub frames: Vec<Frame>,
}

impl SvfVideo {
    pub fn decode(bytes: &[u8]) -> Result<SvfVideo, SvfError> {
        let header = SvfHeader::decode(bytes)?;
        let expected = header.file_len();
        if bytes.len() < expected {
            return Err(SvfError::Truncated { expected, actual: bytes.len() });
        }
        if bytes.len() > expected {
            return Err(SvfError::TrailingBytes(bytes.len() - expected));
        }
        let frames = bytes[HEADER_LEN..]
            .chunks_exact(header.record_len())
            .enumerate()
            .map(|(i, rec)| {
                let frame = Frame { action_code: rec[0], normal_subtype: rec[1], rgb: rec[2..].to_vec() };
                frame.check(i as u32, header.frame_bytes()).map(|_| frame)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SvfVideo { header, frames })
    }

    pub fn encode(&self) -> Result<Vec<u8>, SvfError> {
        let mut out = Vec::with_capacity(self.header.file_len());
        write_svf(&mut out, self.header.width, self.header.height, self.header.fps, &self.frames)?;
        Ok(out)
    }
}

/// Writes a complete SVF file; `frame_count` is taken from `frames.len()`.
pub fn write_svf<W: Write>(
    mut w: W,
    width: u32,
    height: u32,
    fps: u32,
    frames: &[Frame],
) -> Result<(), SvfError> {
    let frame_count = u32::try_from(frames.len())
        .map_err(|_| SvfError::InvalidHeader("more than u32::MAX frames".into()))?;
    let header = SvfHeader { width, height, fps, frame_count };
    header.validate()?;
    w.write_all(&header.encode())?;
    for (i, f) in frames.iter().enumerate() {
        f.check(i as u32, header.frame_bytes())?;
        w.write_all(&[f.action_code, f.normal_subtype])?;
        w.write_all(&f.rgb)?;
    }
    Ok(())
}

/// Incremental reader: parses the header eagerly, frames on demand.
pub struct SvfReader<R> {
    inner: R,
    header: SvfHeader,
    next: u32,
}

impl<R: Read> SvfReader<R> {
    pub fn new(mut inner: R) -> Result<Self, SvfError> {
        let mut buf = [0u8; HEADER_LEN];
        read_exact_or_truncated(&mut inner, &mut buf, HEADER_LEN)?;
        let header = SvfHeader::decode(&buf)?;
        Ok(SvfReader { inner, header, next: 0 })
    }

    pub fn header(&self) -> SvfHeader {
        self.header
    }

    /// Index of the frame the next call to [`next_frame`](Self::next_frame) returns.
    pub fn position(&self) -> u32 {
        self.next
    }

    pub fn next_frame(&mut self) -> Result<Option<Frame>, SvfError> {
        if self.next >= self.header.frame_count {
            return Ok(None);
        }
        let mut rec = vec![0u8; self.header.record_len()];
        let expected = self.header.file_len();
        read_exact_or_truncated(&mut self.inner, &mut rec, expected)?;
        let rgb = rec.split_off(2);
        let frame = Frame { action_code: rec[0], normal_subtype: rec[1], rgb };
        frame.check(self.next, self.header.frame_bytes())?;
        self.next += 1;
        Ok(Some(frame))
    }
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8], expected: usize) -> Result<(), SvfError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => return Err(SvfError::Truncated { expected, actual: filled }),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}
