mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vigil_core::eval::{capacity_plan, stratified_split, DatasetManifest, ManifestEntry, SplitSpec};
use vigil_core::pipeline::{hflip, sample_indices, FrameImage, SamplingMode, SamplingStrategy, Stride};
use vigil_core::ClassLabel;

fn strategy() -> impl Strategy<Value = SamplingStrategy> {
    (1u32..=64, prop_oneof![(1u32..=64).prop_map(Stride::Fixed), Just(Stride::Dynamic)], 1u32..=4, any::<bool>())
        .prop_map(|(clip_len, stride, num_clips, train)| {
            let mode = if train { SamplingMode::Train } else { SamplingMode::Test };
            SamplingStrategy::new(clip_len, stride, num_clips, mode).unwrap()
        })
}

fn frame() -> impl Strategy<Value = FrameImage> {
    (1u32..=24, 1u32..=24).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), (w * h * 3) as usize)
            .prop_map(move |data| FrameImage::new(w, h, data).unwrap())
    })
}

proptest! {
    #[test]
    fn sampled_indices_are_in_range(total in 1usize..5000, s in strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let idx = sample_indices(total, &s, &mut rng).unwrap();
        prop_assert_eq!(idx.len(), (s.clip_len * s.num_clips) as usize);
        prop_assert!(idx.iter().all(|&i| i < total));
        for clip in idx.chunks(s.clip_len as usize) {
            prop_assert!(clip.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn hflip_is_an_involution(f in frame()) {
        prop_assert_eq!(hflip(&hflip(&f)), f.clone());
        let g = hflip(&f);
        for x in 0..f.width() {
            prop_assert_eq!(g.pixel(x, 0), f.pixel(f.width() - 1 - x, 0));
        }
    }

    #[test]
    fn split_partitions_and_keeps_proportions(sizes in proptest::array::uniform4(8usize..300), seed in any::<u64>()) {
        let mut entries = Vec::new();
        for (c, &n) in sizes.iter().enumerate() {
            let label = ClassLabel::ALL[c];
            for i in 0..n {
                let normal_subtype = (label == ClassLabel::Normal).then_some((i % 40) as u8);
                entries.push(ManifestEntry { relative_path: format!("{c}/{i}.svf"), label, normal_subtype });
            }
        }
        let manifest = DatasetManifest::new(entries).unwrap();
        let spec = SplitSpec { seed, ..SplitSpec::default() };
        let (train, val, test) = stratified_split(&manifest, &spec).unwrap();

        let mut all: Vec<&str> = [&train, &val, &test]
            .iter()
            .flat_map(|m| m.entries.iter().map(|e| e.relative_path.as_str()))
            .collect();
        prop_assert_eq!(all.len(), manifest.len());
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), manifest.len());

        for (c, &n) in sizes.iter().enumerate() {
            let n = n as f64;
            for (part, frac) in [(&train, 0.75), (&val, 0.125), (&test, 0.125)] {
                let got = part.class_counts()[c] as f64;
                prop_assert!((got - frac * n).abs() <= 1.0, "class {c}: {got} vs {}", frac * n);
            }
        }
        let again = stratified_split(&manifest, &spec).unwrap();
        prop_assert_eq!(again, (train, val, test));
    }

    #[test]
    fn capacity_clients_is_floor(throughput in 0.01f64..500.0, chunk_s in 0.5f64..120.0, price in 0.01f64..50.0) {
        let product = throughput * chunk_s;
        match capacity_plan(throughput, chunk_s, price) {
            Ok(p) => {
                prop_assert!(p.clients as f64 <= product + 1e-9 && product < p.clients as f64 + 1.0);
                prop_assert!((p.monthly_cost - price * 720.0).abs() < 1e-9);
                prop_assert!((p.cost_per_client * p.clients_fractional - p.monthly_cost).abs() < 1e-6);
            }
            Err(e) => {
                prop_assert!(product < 1.0);
                prop_assert!(e.to_string().starts_with("insufficient capacity"));
            }
        }
    }
}
