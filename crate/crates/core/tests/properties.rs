mod common;

use common::*;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rnn_introspect::checkpoint::Checkpoint;
use rnn_introspect::dataset::{parse_idx_images, parse_idx_labels, to_sequences, ImageSet, LabelSet, SequenceDataset};
use rnn_introspect::geometry::{dim_at, knn_purity, pca_spectrum, stratified_subsample};
use rnn_introspect::rnn::loss_and_dlogits;
use rnn_introspect::trainer::{evaluate, initial_checkpoint, Precision, Readout, TrainConfig};

fn image_set() -> impl Strategy<Value = ImageSet> {
    (0usize..4).prop_flat_map(|count| {
        proptest::collection::vec(any::<u8>(), count * 784).prop_map(move |pixels| ImageSet {
            count,
            rows: 28,
            cols: 28,
            pixels,
        })
    })
}

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = Array2<f64>> {
    (rows, cols).prop_flat_map(|(r, c)| {
        proptest::collection::vec(-10.0f64..10.0, r * c).prop_map(move |v| Array2::from_shape_vec((r, c), v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn idx_images_round_trip(set in image_set()) {
        let bytes = set.to_idx_bytes();
        let parsed = parse_idx_images(&bytes).unwrap();
        prop_assert_eq!(parsed.to_idx_bytes(), bytes);
        prop_assert_eq!(parsed, set);
    }

    #[test]
    fn idx_labels_round_trip(labels in proptest::collection::vec(0u8..10, 0..50)) {
        let set = LabelSet { labels };
        let bytes = set.to_idx_bytes();
        prop_assert_eq!(parse_idx_labels(&bytes).unwrap().to_idx_bytes(), bytes);
    }

    #[test]
    fn truncated_idx_is_rejected(set in image_set(), cut in 1usize..8) {
        let bytes = set.to_idx_bytes();
        prop_assume!(set.count > 0);
        prop_assert!(parse_idx_images(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn normalization_is_linear(pixels in proptest::collection::vec(any::<u8>(), 784)) {
        let images = ImageSet { count: 1, rows: 28, cols: 28, pixels: pixels.clone() };
        let ds = to_sequences(&images, &LabelSet { labels: vec![3] }).unwrap();
        for (v, p) in ds.sequences[0].iter().zip(&pixels) {
            prop_assert_eq!(*v, *p as f32 / 255.0);
            prop_assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn dlogits_sum_to_zero(z in proptest::collection::vec(-50.0f64..50.0, 2..12), label in 0usize..12) {
        let label = label % z.len();
        let (loss, d) = loss_and_dlogits(Array1::from(z).view(), label).unwrap();
        prop_assert!(loss >= 0.0);
        prop_assert!(d.sum().abs() < 1e-12);
    }

    #[test]
    fn softmax_loss_is_shift_invariant(z in proptest::collection::vec(-20.0f64..20.0, 2..12), shift in -100.0f64..100.0) {
        let z = Array1::from(z);
        let (a, da) = loss_and_dlogits(z.view(), 0).unwrap();
        let (b, db) = loss_and_dlogits((&z + shift).view(), 0).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        for (x, y) in da.iter().zip(&db) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn pca_invariant_to_row_order_and_translation(data in matrix(3..20, 1..6), seed in any::<u64>(), offset in -100.0f64..100.0) {
        let base = pca_spectrum(data.view()).unwrap();
        prop_assume!(!base.degenerate);
        let mut order: Vec<usize> = (0..data.nrows()).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng(seed));
        let moved = data.select(ndarray::Axis(0), &order) + offset;
        let other = pca_spectrum(moved.view()).unwrap();
        for (a, b) in base.ratios.iter().zip(&other.ratios) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn ratios_are_a_descending_distribution(data in matrix(2..20, 1..8)) {
        let s = pca_spectrum(data.view()).unwrap();
        prop_assume!(!s.degenerate);
        prop_assert!((s.ratios.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(s.ratios.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.ratios.iter().all(|&r| r >= 0.0));
    }

    #[test]
    fn dim_is_monotone_in_threshold(data in matrix(2..20, 1..8), a in 0.01f64..1.0, b in 0.01f64..1.0) {
        let s = pca_spectrum(data.view()).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(dim_at(&s.ratios, lo) <= dim_at(&s.ratios, hi));
        prop_assert!(s.dim90() <= s.ratios.len());
    }

    #[test]
    fn purity_invariant_under_rotation_and_translation(
        data in matrix(12..30, 2..3),
        angle in 0.0f64..std::f64::consts::TAU,
        shift in -50.0f64..50.0,
        k in 1usize..8,
    ) {
        let labels: Vec<u8> = (0..data.nrows()).map(|i| (i % 3) as u8).collect();
        let (c, s) = (angle.cos(), angle.sin());
        let moved = Array2::from_shape_fn(data.dim(), |(i, j)| {
            let (x, y) = (data[[i, 0]], data[[i, 1]]);
            shift + if j == 0 { c * x - s * y } else { s * x + c * y }
        });
        let a = knn_purity(data.view(), &labels, k).unwrap();
        let b = knn_purity(moved.view(), &labels, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        // rotation can reorder exact distance ties only
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn stratified_subsample_preserves_proportions(
        labels in proptest::collection::vec(0u8..10, 10..300),
        frac in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let size = (labels.len() as f64 * frac) as usize;
        let idx = stratified_subsample(&labels, size, seed).unwrap();
        prop_assert_eq!(idx.len(), size);
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        for class in 0..10u8 {
            let have = idx.iter().filter(|&&i| labels[i] == class).count() as f64;
            let total = labels.iter().filter(|&&l| l == class).count() as f64;
            let ideal = size as f64 * total / labels.len() as f64;
            prop_assert!((have - ideal).abs() < 1.0 + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn evaluate_invariant_to_dataset_order(seed in any::<u64>()) {
        let ds = synthetic_digits(120, 3);
        let cfg = TrainConfig {
            seed,
            arch: small_arch(28, 16, 10),
            precision: Precision::Double,
            ..TrainConfig::default()
        };
        let params = initial_checkpoint::<f64>(&cfg).unwrap().params;
        let mut order: Vec<usize> = (0..ds.len()).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng(seed));
        let shuffled: SequenceDataset = ds.select(&order);
        let a = evaluate(&params, &ds, Readout::Final).unwrap();
        let b = evaluate(&params, &shuffled, Readout::Final).unwrap();
        prop_assert_eq!(a.correct, b.correct);
        prop_assert_eq!(a.confusion, b.confusion);
    }

    #[test]
    fn checkpoint_round_trips(seed in any::<u64>(), hidden in 1usize..12, bias in any::<bool>()) {
        let mut arch = small_arch(28, hidden, 10);
        arch.output_bias = bias;
        let cfg = TrainConfig { seed, arch, ..TrainConfig::default() };
        let ckpt = initial_checkpoint::<f32>(&cfg).unwrap();
        let bytes = ckpt.to_bytes();
        let back = Checkpoint::<f32>::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &ckpt);
        prop_assert_eq!(back.to_bytes(), bytes);
    }
}
