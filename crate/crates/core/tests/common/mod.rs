#![allow(dead_code)]

use rand::Rng;
use vigil_core::svf::{write_svf, Frame};

/// SVF bytes with the given per-frame action codes and random pixels.
pub fn svf_with_codes<R: Rng>(rng: &mut R, width: u32, height: u32, fps: u32, codes: &[u8]) -> Vec<u8> {
    let frames: Vec<Frame> = codes
        .iter()
        .map(|&c| Frame {
            action_code: c,
            normal_subtype: if c == 3 { rng.random_range(0..40) } else { 0 },
            rgb: (0..width * height * 3).map(|_| rng.random()).collect(),
        })
        .collect();
    let mut out = Vec::new();
    write_svf(&mut out, width, height, fps, &frames).unwrap();
    out
}

/// Reads the header and record codes straight from the byte layout.
pub fn raw_codes(bytes: &[u8]) -> Vec<u8> {
    assert_eq!(&bytes[..4], b"SVF1");
    let u = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (w, h, n) = (u(4), u(8), u(16));
    let rec = 2 + w * h * 3;
    assert_eq!(bytes.len(), 20 + n * rec);
    (0..n).map(|i| bytes[20 + i * rec]).collect()
}
