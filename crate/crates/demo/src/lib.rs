//! wasm-bindgen exports for `www/index.html`. Each export takes plain
//! values and returns a JSON string; the `*_json` functions hold the logic
//! so they can be tested natively.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use vigil_core::eval::{capacity_plan, percent, ConfusionMatrix};
use vigil_core::pipeline::{sample_indices, SamplingStrategy};
use vigil_core::ClassLabel;
use wasm_bindgen::prelude::*;

/// Frame indices a strategy picks from a chunk of `total_frames`.
/// Train-mode strategies draw their offsets from `seed`.
pub fn sample_json(strategy: &str, total_frames: u32, seed: u32) -> Result<Value, String> {
    let s = SamplingStrategy::parse(strategy.trim()).map_err(|e| e.to_string())?;
    let total = total_frames as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
    let idx = sample_indices(total, &s, &mut rng).map_err(|e| e.to_string())?;
    let clips: Vec<&[usize]> = idx.chunks(s.clip_len as usize).collect();
    Ok(json!({
        "strategy": s.to_string(),
        "total_frames": total,
        "stride": s.stride_for(total),
        "span": s.span(total),
        "clips": clips,
    }))
}

pub fn capacity_json(throughput: f64, chunk_s: f64, hourly_price: f64) -> Result<Value, String> {
    let p = capacity_plan(throughput, chunk_s, hourly_price).map_err(|e| e.to_string())?;
    serde_json::to_value(p).map_err(|e| e.to_string())
}

/// `counts` is a 4x4 JSON array, rows truth, columns prediction, in label
/// order Falling, Staggering, ChestPain, Normal.
pub fn metrics_json(counts: &str) -> Result<Value, String> {
    let counts: [[u64; 4]; 4] = serde_json::from_str(counts).map_err(|e| format!("expected a 4x4 array of counts: {e}"))?;
    let cm = ConfusionMatrix::new(counts);
    if cm.total() == 0 {
        return Err("all counts are zero".into());
    }
    let per_class: Vec<Value> = cm
        .all_class_metrics()
        .iter()
        .map(|m| {
            json!({
                "class": m.class.name(),
                "tp": m.tp, "fn": m.fn_, "fp": m.fp,
                "recall": percent(m.recall), "precision": percent(m.precision), "f1": percent(m.f1),
            })
        })
        .collect();
    let m = cm.macro_metrics();
    Ok(json!({
        "classes": ClassLabel::ALL.iter().map(|c| c.name()).collect::<Vec<_>>(),
        "per_class": per_class,
        "macro": { "recall": percent(m.macro_recall), "precision": percent(m.macro_precision), "f1": percent(m.macro_f1) },
        "micro_accuracy": percent(cm.micro_accuracy()),
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sample(strategy: &str, total_frames: u32, seed: u32) -> Result<String, JsError> {
    to_js(sample_json(strategy, total_frames, seed))
}

#[wasm_bindgen]
pub fn capacity(throughput: f64, chunk_s: f64, hourly_price: f64) -> Result<String, JsError> {
    to_js(capacity_json(throughput, chunk_s, hourly_price))
}

#[wasm_bindgen]
pub fn metrics(counts: &str) -> Result<String, JsError> {
    to_js(metrics_json(counts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_groups_by_clip() {
        let v = sample_json("4x2x2", 100, 0).unwrap();
        let clips = v["clips"].as_array().unwrap();
        assert_eq!(clips.len(), 2);
        assert!(clips.iter().all(|c| c.as_array().unwrap().len() == 4));
        assert_eq!(v["stride"], 2);
        assert!(sample_json("4x0x1", 100, 0).is_err());
        assert!(sample_json("4x2x1", 0, 0).is_err());
    }

    #[test]
    fn capacity_reference_point() {
        let v = capacity_json(3.96, 10.0, 3.06).unwrap();
        assert_eq!(v["clients"], 39);
        assert!(capacity_json(-1.0, 10.0, 3.0).is_err());
    }

    #[test]
    fn metrics_from_counts() {
        let v = metrics_json("[[9,1,0,0],[0,10,0,0],[0,0,10,0],[0,0,0,10]]").unwrap();
        assert_eq!(v["per_class"][0]["recall"], 90.0);
        assert_eq!(v["per_class"][0]["precision"], 100.0);
        assert!(metrics_json("[[1,2]]").is_err());
        assert!(metrics_json("[[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]").is_err());
    }
}
