//! Property-based invariants across the library: SVD structure on arbitrary
//! shapes, feature-extraction phase invariance, LOS probability behavior,
//! split exactness, AWGN calibration, and serialization round trips.

mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{assert_svd_valid, random_cmat};
use emev::channel::{los_probability, steering_vector, ArrayConfig, LinkConfig};
use emev::dataset::{
    add_awgn, measure_power, stratified_split, Dataset, Features, Mode, Sample,
};
use emev::eigen::{extract_emev, svd};
use emev::nn::softmax;
use emev::seeding::sample_seed;

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn svd_is_valid_on_arbitrary_shapes(rows in 1usize..6, cols in 1usize..9, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_cmat(&mut rng, rows, cols);
        let result = svd(&m).unwrap();
        assert_svd_valid(&m, &result, 1e-10);
        prop_assert_eq!(result.s.len(), rows.min(cols));
    }

    #[test]
    fn svd_scales_with_input(scale in 0.01f64..100.0, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_cmat(&mut rng, 3, 5);
        let mut scaled = m.clone();
        for z in scaled.data.iter_mut() {
            *z *= scale;
        }
        let a = svd(&m).unwrap();
        let b = svd(&scaled).unwrap();
        for (x, y) in a.s.iter().zip(&b.s) {
            prop_assert!((x * scale - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn svd_is_bitwise_deterministic(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_cmat(&mut rng, 4, 7);
        let a = svd(&m).unwrap();
        let b = svd(&m).unwrap();
        prop_assert_eq!(a.s, b.s);
        prop_assert_eq!(a.u.data, b.u.data);
        prop_assert_eq!(a.v.data, b.v.data);
    }

    #[test]
    fn extract_emev_is_global_phase_invariant(seed in 0u64..500, phase in 0.0f64..6.28) {
        // A common phase rotation of H leaves U (after the phase-fixing
        // convention) and S unchanged.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n_rb, n_r, n_t) = (2usize, 2usize, 3usize);
        let h: Vec<Complex64> = (0..n_rb * n_r * n_t)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let rot = Complex64::from_polar(1.0, phase);
        let mk = |h: Vec<Complex64>| emev::channel::ChannelRealization {
            h, n_rb, n_r, n_t, label: 0, seed: 0, link: LinkConfig::default(),
        };
        let base = extract_emev(&mk(h.clone())).unwrap();
        let rotated = extract_emev(&mk(h.iter().map(|z| z * rot).collect())).unwrap();
        for (a, b) in base.s_stack.iter().zip(&rotated.s_stack) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        for (a, b) in base.u_stack.iter().zip(&rotated.u_stack) {
            prop_assert!((a - b).norm() <= 1e-9, "U not phase invariant: {a} vs {b}");
        }
    }

    #[test]
    fn los_probability_is_monotone_and_bounded(d in 0.0f64..500.0, h in 0.0f64..28.0) {
        let p = los_probability(d, h).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        if d <= 18.0 {
            prop_assert_eq!(p, 1.0);
        }
        // Non-increasing in distance.
        let p2 = los_probability(d + 10.0, h).unwrap();
        prop_assert!(p2 <= p + 1e-12);
        // Non-decreasing in UE height (the uplift term).
        let ph = los_probability(d, (h + 5.0).min(28.0)).unwrap();
        prop_assert!(ph + 1e-12 >= p);
    }

    #[test]
    fn softmax_is_shift_invariant_distribution(logits in prop::collection::vec(-20.0f64..20.0, 1..10), shift in -5.0f64..5.0) {
        let p = softmax(&logits);
        let total: f64 = p.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        let shifted: Vec<f64> = logits.iter().map(|x| x + shift).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn split_is_exact_for_any_class_sizes(sizes in prop::collection::vec(5usize..60, 1..6), seed in 0u64..100) {
        let labels: Vec<u8> = sizes
            .iter()
            .enumerate()
            .flat_map(|(l, &n)| std::iter::repeat(l as u8).take(n))
            .collect();
        let split = stratified_split(&labels, [65, 15, 20], seed).unwrap();
        let mut all: Vec<usize> = split.train.iter().chain(&split.val).chain(&split.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for (l, &n) in sizes.iter().enumerate() {
            let count = |ids: &[usize]| ids.iter().filter(|&&i| labels[i] == l as u8).count();
            let (a, b, c) = (count(&split.train), count(&split.val), count(&split.test));
            prop_assert_eq!(a + b + c, n);
            // Largest-remainder: each count within 1 of the exact share.
            prop_assert!((a as f64 - n as f64 * 0.65).abs() < 1.0);
            prop_assert!((b as f64 - n as f64 * 0.15).abs() < 1.0);
            prop_assert!((c as f64 - n as f64 * 0.20).abs() < 1.0);
        }
    }

    #[test]
    fn awgn_preserves_signal_and_hits_snr(seed in 0u64..100, snr in 5.0f64..30.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h: Vec<Complex64> = (0..4096)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let noisy = add_awgn(&h, snr, seed).unwrap();
        prop_assert_eq!(noisy.len(), h.len());
        let noise_power: f64 =
            h.iter().zip(&noisy).map(|(a, b)| (b - a).norm_sqr()).sum::<f64>() / h.len() as f64;
        let achieved = 10.0 * (measure_power(&h).unwrap() / noise_power).log10();
        // Loose bound at this sample count; the 0.1 dB claim is checked at
        // >= 1e5 entries in the acceptance suite.
        prop_assert!((achieved - snr).abs() < 1.0, "snr {snr} achieved {achieved}");
    }

    #[test]
    fn steering_vector_entries_are_unit_magnitude(az in -3.0f64..3.0, zen in 0.1f64..3.0, rows in 1usize..5, cols in 1usize..5) {
        let array = ArrayConfig::new(rows, cols);
        let v = steering_vector(&array, az, zen, 0.0107).unwrap();
        prop_assert_eq!(v.len(), rows * cols);
        for z in v {
            prop_assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_seeds_are_unique_per_index(master in 0u64..1000) {
        let seeds: std::collections::HashSet<u64> =
            (0..512).map(|i| sample_seed(master, i)).collect();
        prop_assert_eq!(seeds.len(), 512);
    }

    #[test]
    fn dataset_round_trip_arbitrary_payload(n in 0usize..4, seed in 0u64..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n_rb, n_r, n_t) = (2usize, 2usize, 3usize);
        let mut make = |mode: Mode| {
            let samples = (0..n)
                .map(|k| {
                    // f32-representable payloads so the round trip is exact.
                    let rnd = |rng: &mut ChaCha8Rng| (rng.gen::<f32>() - 0.5) as f64;
                    let features = match mode {
                        Mode::Csi => Features::Csi(
                            (0..n_rb * n_r * n_t)
                                .map(|_| Complex64::new(rnd(&mut rng), rnd(&mut rng)))
                                .collect(),
                        ),
                        Mode::Emev => Features::Emev {
                            u: (0..n_rb * n_r * n_r)
                                .map(|_| Complex64::new(rnd(&mut rng), rnd(&mut rng)))
                                .collect(),
                            s: (0..n_rb * n_r).map(|_| rnd(&mut rng).abs()).collect(),
                        },
                    };
                    Sample { features, label: (k % 5) as u8, sample_seed: rng.gen(), snr_db: None }
                })
                .collect();
            Dataset { mode, n_rb, n_r, n_t, samples }
        };
        for mode in [Mode::Csi, Mode::Emev] {
            let data = make(mode);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("d.bin");
            emev::dataset::serialize(&data, &path).unwrap();
            let back = emev::dataset::deserialize(&path).unwrap();
            prop_assert_eq!(back, data);
        }
    }
}
