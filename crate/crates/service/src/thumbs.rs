use rand::SeedableRng;
use vigil_core::pipeline::{decode_frames, sample_indices, FrameImage, SamplingMode, SamplingStrategy, Stride};
use vigil_core::svf::SvfHeader;

/// Thumbnails shown per chunk.
pub const THUMBS_PER_CHUNK: u32 = 8;

/// Frame indices of the thumbnail strip, evenly spread and in order.
pub fn thumb_frames(chunk: &[u8]) -> Result<Vec<usize>, String> {
    let header = SvfHeader::decode(chunk).map_err(|e| e.to_string())?;
    if header.frame_count == 0 {
        return Ok(Vec::new());
    }
    let strategy = SamplingStrategy::new(THUMBS_PER_CHUNK, Stride::Dynamic, 1, SamplingMode::Test)
        .expect("valid constant strategy");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut idx = sample_indices(header.frame_count as usize, &strategy, &mut rng).map_err(|e| e.to_string())?;
    idx.dedup();
    Ok(idx)
}

pub fn frame_png(chunk: &[u8], frame: usize) -> Result<Vec<u8>, String> {
    let img = decode_frames(chunk, &[frame]).map_err(|e| e.to_string())?.remove(0);
    encode_png(&img)
}

fn encode_png(img: &FrameImage) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, img.width(), img.height());
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().map_err(|e| e.to_string())?;
    w.write_image_data(img.data()).map_err(|e| e.to_string())?;
    w.finish().map_err(|e| e.to_string())?;
    Ok(out)
}
