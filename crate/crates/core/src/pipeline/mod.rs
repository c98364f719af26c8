//! Chunk-to-tensor preprocessing: frame sampling, resize, square crop,
//! optional flip and NCTHW packing.

mod batch;
mod image;
mod sampling;

pub use batch::{pack_ncthw, ClipBatch};
pub use image::{
    crop_and_square, crop_rect, hflip, resize_bilinear, resize_keep_aspect, scaled_width, CropRect, FrameImage,
};
pub use sampling::{sample_indices, SamplingMode, SamplingStrategy, Stride};

use std::fmt;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::svf::{SvfError, SvfHeader, HEADER_LEN};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("zero-area frame")]
    ZeroArea,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("video has no frames")]
    EmptyVideo,
    #[error(transparent)]
    Decode(#[from] SvfError),
}

/// Which pipeline step failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Decode,
    Sample,
    Resize,
    Crop,
    Flip,
    Pack,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Decode => "decode",
            Stage::Sample => "sample",
            Stage::Resize => "resize",
            Stage::Crop => "crop",
            Stage::Flip => "flip",
            Stage::Pack => "pack",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: PipelineError,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T, E: Into<PipelineError>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|e| StageError { stage, source: e.into() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CropMode {
    Center,
    RandomSquare,
}

/// Spatial transform and normalization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformConfig {
    pub resize_height: u32,
    pub target_side: u32,
    pub crop: CropMode,
    pub flip_probability: f64,
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

/// ImageNet channel statistics, the convention of the pretrained backbones.
pub const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

impl Default for TransformConfig {
    fn default() -> Self {
        Self::test()
    }
}

impl TransformConfig {
    pub fn test() -> Self {
        TransformConfig {
            resize_height: 256,
            target_side: 224,
            crop: CropMode::Center,
            flip_probability: 0.0,
            mean: IMAGENET_MEAN,
            std: IMAGENET_STD,
        }
    }

    pub fn train() -> Self {
        TransformConfig { crop: CropMode::RandomSquare, flip_probability: 0.5, ..Self::test() }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(PipelineError::Config(format!("flip_probability {} outside [0, 1]", self.flip_probability)));
        }
        if self.target_side == 0 || self.target_side > self.resize_height {
            return Err(PipelineError::Config(format!(
                "target_side {} must be in 1..={}",
                self.target_side, self.resize_height
            )));
        }
        if self.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(PipelineError::Config("normalization constants must be finite, std > 0".into()));
        }
        Ok(())
    }
}

/// Decodes only the requested frames of an SVF chunk.
pub fn decode_frames(chunk: &[u8], indices: &[usize]) -> Result<Vec<FrameImage>, PipelineError> {
    let header = SvfHeader::decode(chunk)?;
    let expected = header.file_len();
    if chunk.len() != expected {
        return Err(SvfError::Truncated { expected, actual: chunk.len() }.into());
    }
    indices
        .iter()
        .map(|&i| {
            if i >= header.frame_count as usize {
                return Err(PipelineError::Shape(format!("frame {i} beyond {}", header.frame_count)));
            }
            let start = HEADER_LEN + i * header.record_len() + 2;
            FrameImage::new(header.width, header.height, chunk[start..start + header.frame_bytes()].to_vec())
        })
        .collect()
}

/// The deterministic inference pipeline: sample → decode → resize → center
/// crop → pack. Train-mode settings in `strategy` and `cfg` are ignored.
pub fn build_test_pipeline(
    chunk: &[u8],
    strategy: &SamplingStrategy,
    cfg: &TransformConfig,
) -> Result<ClipBatch, StageError> {
    let strategy = SamplingStrategy { mode: SamplingMode::Test, ..*strategy };
    let cfg = TransformConfig { crop: CropMode::Center, flip_probability: 0.0, ..cfg.clone() };
    // test mode never draws from the generator
    let mut unused = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    run_pipeline(chunk, &strategy, &cfg, &mut unused)
}

/// The augmenting pipeline used to build training inputs.
pub fn build_train_pipeline<R: Rng + ?Sized>(
    chunk: &[u8],
    strategy: &SamplingStrategy,
    cfg: &TransformConfig,
    rng: &mut R,
) -> Result<ClipBatch, StageError> {
    run_pipeline(chunk, strategy, cfg, rng)
}

fn run_pipeline<R: Rng + ?Sized>(
    chunk: &[u8],
    strategy: &SamplingStrategy,
    cfg: &TransformConfig,
    rng: &mut R,
) -> Result<ClipBatch, StageError> {
    cfg.validate().at(Stage::Pack)?;
    let header = SvfHeader::decode(chunk).at(Stage::Decode)?;
    let indices = sample_indices(header.frame_count as usize, strategy, rng).at(Stage::Sample)?;
    let frames = decode_frames(chunk, &indices).at(Stage::Decode)?;
    let clip_len = strategy.clip_len as usize;
    let mut clips = Vec::with_capacity(strategy.num_clips as usize);
    for clip in frames.chunks(clip_len) {
        let resized = clip
            .iter()
            .map(|f| resize_keep_aspect(f, cfg.resize_height))
            .collect::<Result<Vec<_>, _>>()
            .at(Stage::Resize)?;
        // one crop per clip keeps the clip spatially coherent
        let rect = crop_rect(resized[0].width(), resized[0].height(), cfg.crop, rng);
        let mut out = Vec::with_capacity(clip_len);
        for f in &resized {
            let cropped = image::apply_crop(f, rect, cfg.target_side).at(Stage::Crop)?;
            let flip = cfg.flip_probability > 0.0 && rng.random::<f64>() < cfg.flip_probability;
            out.push(if flip { hflip(&cropped) } else { cropped });
        }
        clips.push(pack_ncthw(&out, cfg).at(Stage::Pack)?);
    }
    ClipBatch::stack(clips).at(Stage::Pack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svf::{write_svf, Frame};
    use rand_chacha::ChaCha8Rng;

    fn chunk(frames: u32, w: u32, h: u32) -> Vec<u8> {
        let frames: Vec<Frame> = (0..frames)
            .map(|i| Frame {
                action_code: 3,
                normal_subtype: 0,
                rgb: (0..w * h * 3).map(|p| ((p * 13 + i * 7) % 256) as u8).collect(),
            })
            .collect();
        let mut out = Vec::new();
        write_svf(&mut out, w, h, 30, &frames).unwrap();
        out
    }

    #[test]
    fn test_pipeline_shape_and_determinism() {
        let bytes = chunk(300, 32, 24);
        let s = SamplingStrategy::parse("8x32x1").unwrap();
        let a = build_test_pipeline(&bytes, &s, &TransformConfig::test()).unwrap();
        assert_eq!(a.shape(), [1, 3, 8, 224, 224]);
        let b = build_test_pipeline(&bytes, &s, &TransformConfig::test()).unwrap();
        assert_eq!(a.values().len(), b.values().len());
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn truncated_chunk_fails_in_decode() {
        let bytes = chunk(10, 16, 16);
        let s = SamplingStrategy::parse("4x2x1").unwrap();
        let err = build_test_pipeline(&bytes[..bytes.len() - 5], &s, &TransformConfig::test()).unwrap_err();
        assert_eq!(err.stage, Stage::Decode);
        assert!(err.to_string().contains("decode"));
        let err = build_test_pipeline(&bytes[..8], &s, &TransformConfig::test()).unwrap_err();
        assert_eq!(err.stage, Stage::Decode);
    }

    #[test]
    fn train_pipeline_flips_frames_whose_draws_fall_below_half() {
        // a left/right asymmetric chunk so flips are observable
        let w = 256u32;
        let frames: Vec<Frame> = (0..4)
            .map(|_| Frame {
                action_code: 3,
                normal_subtype: 0,
                rgb: (0..256 * w).flat_map(|p| if p % w < w / 2 { [0, 0, 0] } else { [255, 255, 255] }).collect(),
            })
            .collect();
        let mut bytes = Vec::new();
        write_svf(&mut bytes, w, 256, 30, &frames).unwrap();
        let s = SamplingStrategy::parse("4x1x1:train").unwrap();
        let cfg = TransformConfig { crop: CropMode::Center, flip_probability: 0.5, ..TransformConfig::test() };
        let batch = build_train_pipeline(&bytes, &s, &cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();

        // replay the generator: sampling, crop, then one draw per frame
        let mut replay = ChaCha8Rng::seed_from_u64(11);
        sample_indices(4, &s, &mut replay).unwrap();
        crop_rect(256, 256, CropMode::Center, &mut replay);
        let expected: Vec<bool> = (0..4).map(|_| replay.random::<f64>() < 0.5).collect();
        let observed: Vec<bool> = (0..4).map(|t| batch.at(0, 0, t, 0, 0) > 0.0).collect();
        assert_eq!(observed, expected);
    }

    #[test]
    fn config_validation() {
        assert!(TransformConfig::train().validate().is_ok());
        let bad = TransformConfig { flip_probability: 1.5, ..TransformConfig::test() };
        assert!(bad.validate().is_err());
        let bad = TransformConfig { target_side: 300, ..TransformConfig::test() };
        assert!(bad.validate().is_err());
    }
}
