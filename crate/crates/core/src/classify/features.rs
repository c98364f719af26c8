use crate::pipeline::ClipBatch;

use super::ClassifyError;

/// Regions per side of the spatial grid.
pub const MOTION_GRID: usize = 4;
/// Motion energy for each region, then mean intensity for each region.
pub const MOTION_FEATURES: usize = 2 * MOTION_GRID * MOTION_GRID;

/// Motion-energy descriptor of a clip batch.
///
/// The frame is divided into a 4×4 grid. For every region the first 16
/// features hold the mean absolute difference between consecutive frames
/// and the last 16 the mean value, both averaged over channels and clips.
pub fn motion_features(batch: &ClipBatch) -> Result<Vec<f64>, ClassifyError> {
    let [n, c, t, h, w] = batch.shape();
    if t < 2 {
        return Err(ClassifyError::InvalidInput(format!("motion features need at least 2 frames, got {t}")));
    }
    if h < MOTION_GRID || w < MOTION_GRID {
        return Err(ClassifyError::InvalidInput(format!("{h}x{w} frames are smaller than the region grid")));
    }
    let row_bounds: Vec<usize> = (0..=MOTION_GRID).map(|i| i * h / MOTION_GRID).collect();
    let col_bounds: Vec<usize> = (0..=MOTION_GRID).map(|i| i * w / MOTION_GRID).collect();
    let region_of = |y: usize, x: usize| {
        let ry = row_bounds.partition_point(|&b| b <= y) - 1;
        let rx = col_bounds.partition_point(|&b| b <= x) - 1;
        ry * MOTION_GRID + rx
    };
    let cells = MOTION_GRID * MOTION_GRID;
    let mut motion = vec![0f64; cells];
    let mut intensity = vec![0f64; cells];
    let mut area = vec![0usize; cells];
    let region: Vec<usize> = (0..h * w).map(|i| region_of(i / w, i % w)).collect();
    for r in &region {
        area[*r] += 1;
    }
    for ni in 0..n {
        for ci in 0..c {
            for ti in 0..t {
                let cur = batch.plane(ni, ci, ti);
                for (p, v) in cur.iter().enumerate() {
                    intensity[region[p]] += *v as f64;
                }
                if ti + 1 < t {
                    let next = batch.plane(ni, ci, ti + 1);
                    for (p, (a, b)) in cur.iter().zip(next).enumerate() {
                        motion[region[p]] += (b - a).abs() as f64;
                    }
                }
            }
        }
    }
    let motion_norm = (n * c * (t - 1)) as f64;
    let intensity_norm = (n * c * t) as f64;
    let mut out = Vec::with_capacity(MOTION_FEATURES);
    out.extend(motion.iter().zip(&area).map(|(m, a)| m / (motion_norm * *a as f64)));
    out.extend(intensity.iter().zip(&area).map(|(s, a)| s / (intensity_norm * *a as f64)));
    Ok(out)
}
