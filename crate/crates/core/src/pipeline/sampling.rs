use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stride {
    Fixed(u32),
    /// `floor(total_frames / clip_len)`, at least 1.
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Train,
    #[default]
    Test,
}

/// `clip_len × stride × num_clips` frame selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SamplingStrategy {
    pub clip_len: u32,
    pub stride: Stride,
    pub num_clips: u32,
    pub mode: SamplingMode,
}

impl SamplingStrategy {
    pub fn new(clip_len: u32, stride: Stride, num_clips: u32, mode: SamplingMode) -> Result<Self, PipelineError> {
        let s = SamplingStrategy { clip_len, stride, num_clips, mode };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.clip_len == 0 || self.num_clips == 0 {
            return Err(PipelineError::Config("clip_len and num_clips must be at least 1".into()));
        }
        if self.stride == Stride::Fixed(0) {
            return Err(PipelineError::Config("static stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Parses `8x32x1`; the stride may be `-` or `dynamic`. A trailing
    /// `:train` selects train mode.
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let bad = || PipelineError::Config(format!("bad sampling strategy {text:?}, expected e.g. 8x32x1"));
        let (spec, mode) = match text.rsplit_once(':') {
            Some((spec, "train")) => (spec, SamplingMode::Train),
            Some((spec, "test")) => (spec, SamplingMode::Test),
            Some(_) => return Err(bad()),
            None => (text, SamplingMode::Test),
        };
        let parts: Vec<&str> = spec.split(['x', '×']).map(str::trim).collect();
        let [clip, stride, clips] = parts.as_slice() else { return Err(bad()) };
        let clip_len = clip.parse().map_err(|_| bad())?;
        let stride = match *stride {
            "-" | "dynamic" | "dyn" => Stride::Dynamic,
            s => Stride::Fixed(s.parse().map_err(|_| bad())?),
        };
        let num_clips = clips.parse().map_err(|_| bad())?;
        Self::new(clip_len, stride, num_clips, mode)
    }

    pub fn stride_for(&self, total_frames: usize) -> usize {
        match self.stride {
            Stride::Fixed(s) => s as usize,
            Stride::Dynamic => (total_frames / self.clip_len as usize).max(1),
        }
    }

    /// Frames covered by one clip.
    pub fn span(&self, total_frames: usize) -> usize {
        (self.clip_len as usize - 1) * self.stride_for(total_frames) + 1
    }
}

impl fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stride {
            Stride::Fixed(s) => write!(f, "{}x{}x{}", self.clip_len, s, self.num_clips)?,
            Stride::Dynamic => write!(f, "{}x-x{}", self.clip_len, self.num_clips)?,
        }
        if self.mode == SamplingMode::Train {
            f.write_str(":train")?;
        }
        Ok(())
    }
}

impl FromStr for SamplingStrategy {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for SamplingStrategy {
    type Error = PipelineError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<SamplingStrategy> for String {
    fn from(s: SamplingStrategy) -> String {
        s.to_string()
    }
}

/// Frame indices for every clip, clip-major.
///
/// Test mode centres each clip: with `k` clips the offsets sit at the
/// midpoints of `k` equal slices of the slack `T - span`, which for one clip
/// is `floor((T - span) / 2)`. Train mode draws each offset uniformly from
/// `[0, max(0, T - span)]`. Indices past the end are clamped to `T - 1`.
pub fn sample_indices<R: Rng + ?Sized>(
    total_frames: usize,
    strategy: &SamplingStrategy,
    rng: &mut R,
) -> Result<Vec<usize>, PipelineError> {
    strategy.validate()?;
    if total_frames == 0 {
        return Err(PipelineError::EmptyVideo);
    }
    let stride = strategy.stride_for(total_frames);
    let span = strategy.span(total_frames);
    let slack = total_frames.saturating_sub(span);
    let clips = strategy.num_clips as usize;
    let mut out = Vec::with_capacity(strategy.clip_len as usize * clips);
    for k in 0..clips {
        let offset = match strategy.mode {
            SamplingMode::Test => (2 * k + 1) * slack / (2 * clips),
            SamplingMode::Train => rng.random_range(0..=slack),
        };
        out.extend((0..strategy.clip_len as usize).map(|i| (offset + i * stride).min(total_frames - 1)));
    }
    Ok(out)
}
