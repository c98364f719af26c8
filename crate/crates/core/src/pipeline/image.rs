use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CropMode, PipelineError, TransformConfig};

/// An 8-bit RGB image, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl FrameImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, PipelineError> {
        if width == 0 || height == 0 {
            return Err(PipelineError::ZeroArea);
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(PipelineError::Shape(format!(
                "{width}x{height} frame needs {expected} bytes, got {}",
                data.len()
            )));
        }
        Ok(FrameImage { width, height, data })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, PipelineError> {
        let data = rgb.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Copies out a sub-rectangle.
    pub fn crop(&self, rect: CropRect) -> Result<FrameImage, PipelineError> {
        if rect.width == 0
            || rect.height == 0
            || rect.x + rect.width > self.width
            || rect.y + rect.height > self.height
        {
            return Err(PipelineError::Shape(format!(
                "crop {rect:?} outside {}x{} frame",
                self.width, self.height
            )));
        }
        let row = self.width as usize * 3;
        let mut data = Vec::with_capacity(rect.width as usize * rect.height as usize * 3);
        for y in rect.y..rect.y + rect.height {
            let start = y as usize * row + rect.x as usize * 3;
            data.extend_from_slice(&self.data[start..start + rect.width as usize * 3]);
        }
        FrameImage::new(rect.width, rect.height, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

/// Bilinear resize with half-pixel centres and edge clamping.
///
/// Output channels are rounded half away from zero. Resizing to the input
/// size reproduces the input exactly.
pub fn resize_bilinear(frame: &FrameImage, out_w: u32, out_h: u32) -> Result<FrameImage, PipelineError> {
    if out_w == 0 || out_h == 0 {
        return Err(PipelineError::ZeroArea);
    }
    if (out_w, out_h) == (frame.width, frame.height) {
        return Ok(frame.clone());
    }
    let xs = axis_taps(frame.width, out_w);
    let ys = axis_taps(frame.height, out_h);
    let src_row = frame.width as usize * 3;
    let mut data = Vec::with_capacity(out_w as usize * out_h as usize * 3);
    for &(y0, y1, fy) in &ys {
        let r0 = &frame.data[y0 * src_row..(y0 + 1) * src_row];
        let r1 = &frame.data[y1 * src_row..(y1 + 1) * src_row];
        for &(x0, x1, fx) in &xs {
            for c in 0..3 {
                let top = r0[x0 * 3 + c] as f64 * (1.0 - fx) + r0[x1 * 3 + c] as f64 * fx;
                let bottom = r1[x0 * 3 + c] as f64 * (1.0 - fx) + r1[x1 * 3 + c] as f64 * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    FrameImage::new(out_w, out_h, data)
}

fn axis_taps(input: u32, output: u32) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / output as f64;
    let last = (input - 1) as f64;
    (0..output)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let i0 = src.floor();
            let i1 = (i0 + 1.0).min(last);
            (i0 as usize, i1 as usize, src - i0)
        })
        .collect()
}

/// Output width when scaling `width`×`height` to `target_height`, rounded
/// half away from zero.
pub fn scaled_width(width: u32, height: u32, target_height: u32) -> u32 {
    let num = 2 * width as u64 * target_height as u64 + height as u64;
    ((num / (2 * height as u64)) as u32).max(1)
}

/// Scales to `height` rows while preserving aspect ratio.
pub fn resize_keep_aspect(frame: &FrameImage, height: u32) -> Result<FrameImage, PipelineError> {
    if height == 0 {
        return Err(PipelineError::ZeroArea);
    }
    resize_bilinear(frame, scaled_width(frame.width, frame.height, height), height)
}

/// Square crop rectangle for `frame` under `cfg`.
///
/// Center mode takes the largest centred square. Random mode draws the side
/// uniformly from [0.8, 1.0] of the largest square and the position
/// uniformly over the valid range.
pub fn crop_rect<R: Rng + ?Sized>(width: u32, height: u32, mode: CropMode, rng: &mut R) -> CropRect {
    let full = width.min(height);
    let side = match mode {
        CropMode::Center => full,
        CropMode::RandomSquare => {
            let scale: f64 = rng.random_range(0.8..=1.0);
            ((full as f64 * scale).round() as u32).clamp(1, full)
        }
    };
    let (x, y) = match mode {
        CropMode::Center => ((width - side) / 2, (height - side) / 2),
        CropMode::RandomSquare => (rng.random_range(0..=width - side), rng.random_range(0..=height - side)),
    };
    CropRect { x, y, width: side, height: side }
}

/// Square crop followed by an aspect-ignoring resize to the target side.
pub fn crop_and_square<R: Rng + ?Sized>(
    frame: &FrameImage,
    cfg: &TransformConfig,
    rng: &mut R,
) -> Result<FrameImage, PipelineError> {
    let rect = crop_rect(frame.width, frame.height, cfg.crop, rng);
    apply_crop(frame, rect, cfg.target_side)
}

pub(crate) fn apply_crop(frame: &FrameImage, rect: CropRect, side: u32) -> Result<FrameImage, PipelineError> {
    resize_bilinear(&frame.crop(rect)?, side, side)
}

/// Mirrors columns: column `j` becomes column `width - 1 - j`.
pub fn hflip(frame: &FrameImage) -> FrameImage {
    let row = frame.width as usize * 3;
    let mut data = Vec::with_capacity(frame.data.len());
    for r in frame.data.chunks_exact(row) {
        for px in r.chunks_exact(3).rev() {
            data.extend_from_slice(px);
        }
    }
    FrameImage { width: frame.width, height: frame.height, data }
}
