mod common;

use std::collections::BTreeMap;

use common::{raw_codes, svf_with_codes};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vigil_core::classify::{
    softmax, stub_classify, weighted_ce, weighted_ce_grad, ChunkInput, ClassWeights, Classifier, ClassifyError,
    Concurrency, Prediction, StubClassifier,
};
use vigil_core::eval::{
    class_metrics, confusion_from_records, measure_throughput, tradeoff_report, ChunkSample, MacroMetrics,
    ThroughputError,
};
use vigil_core::ingest::{segment_all, StreamHandle};
use vigil_core::label::argmax;
use vigil_core::pipeline::{build_test_pipeline, SamplingStrategy, TransformConfig};
use vigil_core::{ClassLabel, ScoreVector};

fn random_logits(rng: &mut ChaCha8Rng, scale: f64) -> [f64; 4] {
    std::array::from_fn(|_| rng.random_range(-scale..scale))
}

#[test]
fn class_metrics_match_brute_force_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n = rng.random_range(0..200);
        let truths: Vec<ClassLabel> = (0..n).map(|_| ClassLabel::ALL[rng.random_range(0..4)]).collect();
        let preds: Vec<ClassLabel> = (0..n).map(|_| ClassLabel::ALL[rng.random_range(0..4)]).collect();
        let cm = confusion_from_records(&truths, &preds).unwrap();
        assert_eq!(cm.total(), n as u64);
        let mut trace = 0;
        for c in ClassLabel::ALL {
            let pairs = truths.iter().zip(&preds);
            let tp = pairs.clone().filter(|(t, p)| **t == c && **p == c).count() as u64;
            let fn_ = pairs.clone().filter(|(t, p)| **t == c && **p != c).count() as u64;
            let fp = pairs.filter(|(t, p)| **t != c && **p == c).count() as u64;
            let m = class_metrics(&cm, c);
            assert_eq!((m.tp, m.fn_, m.fp), (tp, fn_, fp));
            let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
            let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
            let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fn_ + fp) as f64 };
            assert!((m.recall - recall).abs() < 1e-12);
            assert!((m.precision - precision).abs() < 1e-12);
            assert!((m.f1 - f1).abs() < 1e-12);
            trace += tp;
        }
        assert_eq!(trace, cm.trace());
    }
}

#[test]
fn macro_f1_differs_from_f1_of_macros() {
    let cm = vigil_core::eval::ConfusionMatrix::new([[50, 0, 0, 0], [10, 5, 0, 0], [0, 0, 3, 7], [1, 0, 9, 40]]);
    let m = cm.macro_metrics();
    let harmonic = 2.0 * m.macro_precision * m.macro_recall / (m.macro_precision + m.macro_recall);
    assert!((m.macro_f1 - harmonic).abs() > 1e-3);
    let mean_f1 = cm.all_class_metrics().iter().map(|c| c.f1).sum::<f64>() / 4.0;
    assert!((m.macro_f1 - mean_f1).abs() < 1e-15);
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-5;
    for _ in 0..1000 {
        let logits = random_logits(&mut rng, 10.0);
        let label = ClassLabel::ALL[rng.random_range(0..4)];
        let w = ClassWeights::new(std::array::from_fn(|_| rng.random_range(0.0..2.0))).unwrap();
        let grad = weighted_ce_grad(&logits, label, &w);
        for k in 0..4 {
            let (mut up, mut down) = (logits, logits);
            up[k] += h;
            down[k] -= h;
            let numeric = (weighted_ce(&up, label, &w) - weighted_ce(&down, label, &w)) / (2.0 * h);
            assert!((numeric - grad[k]).abs() < 1e-6, "{logits:?} {label:?} k={k}: {numeric} vs {}", grad[k]);
        }
    }
}

#[test]
fn softmax_is_stable_for_large_logits() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let p = softmax(&random_logits(&mut rng, 1e4));
        assert!(p.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    let p = softmax(&[1e4, -1e4, 1e4, -1e4]);
    assert!((p[0] - 0.5).abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12);
}

#[test]
fn argmax_ignores_constant_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let logits = random_logits(&mut rng, 50.0);
        let shift = rng.random_range(-1e3..1e3);
        let shifted = logits.map(|v| v + shift);
        assert_eq!(argmax(&softmax(&logits)), argmax(&softmax(&shifted)));
        assert_eq!(argmax(&logits), argmax(&shifted));
    }
}

#[test]
fn uniform_weights_give_plain_cross_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let logits = random_logits(&mut rng, 20.0);
        let label = ClassLabel::ALL[rng.random_range(0..4)];
        let denom: f64 = logits.iter().map(|v| v.exp()).sum();
        let plain = -(logits[label.index()].exp() / denom).ln();
        assert!((weighted_ce(&logits, label, &ClassWeights::UNIFORM) - plain).abs() < 1e-9);
    }
}

#[test]
fn stub_agrees_with_frame_count_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let n = rng.random_range(1..120);
        let bias = rng.random_range(0..4u8);
        let codes: Vec<u8> =
            (0..n).map(|_| if rng.random_bool(0.4) { bias } else { rng.random_range(0..4) }).collect();
        let bytes = svf_with_codes(&mut rng, 4, 3, 30, &codes);

        let mut counts = [0usize; 4];
        for c in raw_codes(&bytes) {
            counts[c as usize] += 1;
        }
        let best = *counts.iter().max().unwrap();
        let expected = counts.iter().position(|&c| c == best).unwrap();

        let (label, scores) = stub_classify(&bytes).unwrap();
        assert_eq!(label.index(), expected, "counts {counts:?}");
        assert_eq!(scores.argmax(), label);
        assert_eq!(stub_classify(&bytes).unwrap(), (label, scores));
    }
}

#[test]
fn segments_match_independent_frame_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for &(frames, window_s) in &[(300usize, 10.0), (2850, 10.0), (61, 2.0), (1, 10.0), (450, 3.0)] {
        let codes: Vec<u8> = (0..frames).map(|_| rng.random_range(0..4)).collect();
        let bytes = svf_with_codes(&mut rng, 16, 16, 30, &codes);
        let handle = StreamHandle::from_bytes("cam", "res", bytes.clone()).unwrap();
        let segments = segment_all(handle, window_s).unwrap();

        let mut joined = Vec::new();
        for s in &segments {
            let stored = raw_codes(&s.bytes);
            let record = 2 + 16 * 16 * 3;
            assert_eq!((s.bytes.len() - 20) / record, s.chunk.frame_count as usize);
            assert_eq!(stored.len(), s.chunk.frame_count as usize);
            joined.extend(stored);
        }
        assert_eq!(joined, raw_codes(&bytes));
        let per = (window_s * 30.0) as usize;
        assert_eq!(segments.iter().filter(|s| !s.chunk.partial).count(), frames / per);
        assert_eq!(segments.iter().any(|s| s.chunk.partial), frames % per > 0);
    }
}

#[test]
fn test_pipeline_shape_and_determinism_over_resolutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = TransformConfig::test();
    for &(w, h) in &[(16u32, 16u32), (64, 48), (48, 64), (200, 30), (17, 300)] {
        let t = rng.random_range(1..40);
        let codes = vec![3u8; t];
        let bytes = svf_with_codes(&mut rng, w, h, 30, &codes);
        for s in ["8x32x1", "8x-x1", "16x4x1", "4x1x2"] {
            let strategy = SamplingStrategy::parse(s).unwrap();
            let a = build_test_pipeline(&bytes, &strategy, &cfg).unwrap();
            let b = build_test_pipeline(&bytes, &strategy, &cfg).unwrap();
            assert_eq!(a.shape(), [strategy.num_clips as usize, 3, strategy.clip_len as usize, 224, 224]);
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

struct FailsAt(usize, std::sync::atomic::AtomicUsize);

impl Classifier for FailsAt {
    fn model_id(&self) -> &str {
        "fails-at"
    }
    fn concurrency(&self) -> Concurrency {
        Concurrency::SingleFlight
    }
    fn needs_batch(&self) -> bool {
        false
    }
    fn classify(&self, _: &ChunkInput<'_>) -> Result<Prediction, ClassifyError> {
        let call = self.1.fetch_add(1, std::sync::atomic::Ordering::SeqCst) + 1;
        if call == self.0 {
            return Err(ClassifyError::Unavailable("boom".into()));
        }
        Ok(Prediction { label: ClassLabel::Normal, scores: ScoreVector::smoothed_one_hot(ClassLabel::Normal, 0.01) })
    }
}

fn chunk_samples(n: usize, seed: u64) -> Vec<ChunkSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let codes: Vec<u8> = (0..300).map(|_| rng.random_range(0..4)).collect();
            ChunkSample {
                chunk_id: format!("c-{i}"),
                storage_key: format!("s/{i:010}.svf"),
                bytes: svf_with_codes(&mut rng, 16, 16, 30, &codes),
            }
        })
        .collect()
}

#[test]
fn stub_throughput_is_positive_and_stable() {
    let strategy = SamplingStrategy::parse("8x32x1").unwrap();
    let cfg = TransformConfig::test();
    let small = chunk_samples(100, 9);
    let mut large = small.clone();
    large.extend(chunk_samples(100, 10));

    // best of a few passes to damp scheduler noise
    let best = |samples: &[ChunkSample]| {
        (0..5)
            .map(|_| measure_throughput(&StubClassifier, samples, &strategy, &cfg).unwrap().samples_per_second)
            .fold(0.0, f64::max)
    };
    let r = measure_throughput(&StubClassifier, &small, &strategy, &cfg).unwrap();
    assert_eq!(r.samples, 100);
    assert!(r.samples_per_second.is_finite() && r.samples_per_second > 0.0);
    let shown = r.rate_display();
    assert_eq!(shown.split('.').nth(1).map(str::len), Some(2), "{shown}");

    let (a, b) = (best(&small), best(&large));
    assert!((b - a).abs() / a < 0.2, "rates {a} and {b}");
}

#[test]
fn throughput_failure_reports_partial_progress() {
    let samples = chunk_samples(12, 11);
    let classifier = FailsAt(5, Default::default());
    let err = measure_throughput(&classifier, &samples, &SamplingStrategy::parse("8x32x1").unwrap(), &TransformConfig::test())
        .unwrap_err();
    match err {
        ThroughputError::Aborted { index, partial, chunk_id, .. } => {
            assert_eq!(index, 4);
            assert_eq!(chunk_id, "c-4");
            assert_eq!(partial.samples, 4);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(
        measure_throughput(&StubClassifier, &samples[..9], &SamplingStrategy::parse("8x32x1").unwrap(), &TransformConfig::test()),
        Err(ThroughputError::TooFewSamples(9))
    ));
}

#[test]
fn tradeoff_csv_carries_reference_rows() {
    let cards = vigil_core::classify::reference_model_cards();
    let report = tradeoff_report(&cards, &BTreeMap::new());
    let mut reader = csv::Reader::from_reader(report.csv.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    let divided = rows.iter().find(|r| &r[0] == "TimeSformer (divided)").unwrap();
    assert_eq!((&divided[1], &divided[2], &divided[3], &divided[4], &divided[5]), ("95.49", "3.96", "121", "196", "18.15"));

    let one = tradeoff_report(&cards[..1], &BTreeMap::new());
    assert_eq!(one.csv.lines().count(), 2);

    let mut macros = BTreeMap::new();
    macros.insert(
        "I3D".to_string(),
        MacroMetrics { macro_recall: 0.9343, macro_precision: 0.9161, macro_f1: 0.9245 },
    );
    let a = tradeoff_report(&cards, &macros);
    let b = tradeoff_report(&cards, &macros);
    assert_eq!(a.csv.as_bytes(), b.csv.as_bytes());
    assert_eq!(a.metric_vs_throughput_csv, b.metric_vs_throughput_csv);
    assert!(a.csv.contains("I3D,") && a.csv.contains("93.43"));
}
