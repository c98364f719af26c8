use super::{FrameImage, PipelineError, TransformConfig};

/// Normalized clip tensor in (N, C, T, H, W) order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipBatch {
    shape: [usize; 5],
    values: Vec<f32>,
}

impl ClipBatch {
    pub fn from_parts(shape: [usize; 5], values: Vec<f32>) -> Result<Self, PipelineError> {
        if shape[1] != 3 {
            return Err(PipelineError::Shape(format!("expected 3 channels, got {}", shape[1])));
        }
        if shape.iter().product::<usize>() != values.len() {
            return Err(PipelineError::Shape(format!("{} values do not fill {shape:?}", values.len())));
        }
        Ok(ClipBatch { shape, values })
    }

    pub fn shape(&self) -> [usize; 5] {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.shape[0]
    }

    pub fn t(&self) -> usize {
        self.shape[2]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn offset(&self, n: usize, c: usize, t: usize, h: usize, w: usize) -> usize {
        let [_, cs, ts, hs, ws] = self.shape;
        (((n * cs + c) * ts + t) * hs + h) * ws + w
    }

    pub fn at(&self, n: usize, c: usize, t: usize, h: usize, w: usize) -> f32 {
        self.values[self.offset(n, c, t, h, w)]
    }

    /// One H×W plane.
    pub fn plane(&self, n: usize, c: usize, t: usize) -> &[f32] {
        let start = self.offset(n, c, t, 0, 0);
        &self.values[start..start + self.shape[3] * self.shape[4]]
    }

    /// Concatenates along N; all inputs must share C, T, H, W.
    pub fn stack(batches: Vec<ClipBatch>) -> Result<ClipBatch, PipelineError> {
        let first = batches.first().ok_or_else(|| PipelineError::Shape("nothing to stack".into()))?;
        let inner = &first.shape[1..];
        if let Some(b) = batches.iter().find(|b| &b.shape[1..] != inner) {
            return Err(PipelineError::Shape(format!("cannot stack {:?} with {:?}", b.shape, first.shape)));
        }
        let n = batches.iter().map(|b| b.shape[0]).sum();
        let shape = [n, inner[0], inner[1], inner[2], inner[3]];
        if batches.len() == 1 {
            return Ok(batches.into_iter().next().unwrap());
        }
        let values = batches.into_iter().flat_map(|b| b.values).collect();
        ClipBatch::from_parts(shape, values)
    }
}

/// Packs one clip as a (1, 3, T, side, side) batch with
/// `(pixel / 255 - mean[c]) / std[c]`.
pub fn pack_ncthw(frames: &[FrameImage], cfg: &TransformConfig) -> Result<ClipBatch, PipelineError> {
    if frames.is_empty() {
        return Err(PipelineError::Shape("no frames to pack".into()));
    }
    let side = cfg.target_side;
    if let Some(f) = frames.iter().find(|f| f.width() != side || f.height() != side) {
        return Err(PipelineError::Shape(format!(
            "frame is {}x{}, expected {side}x{side}",
            f.width(),
            f.height()
        )));
    }
    let t = frames.len();
    let plane = (side * side) as usize;
    let mut values = vec![0f32; 3 * t * plane];
    for c in 0..3 {
        let (mean, std) = (cfg.mean[c], cfg.std[c]);
        for (ti, frame) in frames.iter().enumerate() {
            let dst = &mut values[(c * t + ti) * plane..(c * t + ti + 1) * plane];
            for (d, px) in dst.iter_mut().zip(frame.data().chunks_exact(3)) {
                *d = (px[c] as f32 / 255.0 - mean) / std;
            }
        }
    }
    ClipBatch::from_parts([1, 3, t, side as usize, side as usize], values)
}
