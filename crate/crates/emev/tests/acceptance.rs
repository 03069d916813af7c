//! Acceptance gate. Each test covers one release criterion and prints a
//! single pass line on success; run with `--nocapture` to see them.
//!
//! The two training criteria are heavyweight (minutes of CPU); everything
//! else finishes in seconds.

mod common;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{assert_singular_values_against_oracle, assert_svd_valid, random_cmat};
use emev::channel::{
    generate_channel, generate_taps, load_profile, rms_of_taps, LinkConfig, ProfileId,
};
use emev::dataset::{
    add_awgn, apply_awgn_dataset, feature_set, generate_dataset, load_manifest, measure_power,
    stratified_split, synthesize, serialize, Mode,
};
use emev::eigen::{deprecode, precode, svd, transmit};
use emev::nn::{
    count_flops, count_params, evaluate, inference_latency, train, Arch, Grads, ModelSpec,
    ModelState, SampleInput, TrainConfig,
};

fn pass(n: usize, what: &str) {
    println!("criterion {n} ({what}): pass");
}

#[test]
fn criterion_01_parameter_counts() {
    let emev_params = count_params(&ModelSpec::at_default_dims(Arch::EmevIdNet));
    let csi_params = count_params(&ModelSpec::at_default_dims(Arch::CsiIdNet));
    assert!(
        (574_000..=576_500).contains(&emev_params),
        "emev params {emev_params} outside [574000, 576500]"
    );
    assert!(
        (6_841_000..=6_856_000).contains(&csi_params),
        "csi params {csi_params} outside [6841000, 6856000]"
    );
    pass(1, "parameter counts");
}

#[test]
fn criterion_02_flop_counts() {
    let emev_flops = count_flops(&ModelSpec::at_default_dims(Arch::EmevIdNet)) as f64;
    let csi_flops = count_flops(&ModelSpec::at_default_dims(Arch::CsiIdNet)) as f64;
    assert!((emev_flops - 14e6).abs() / 14e6 <= 0.05, "emev flops {emev_flops}");
    assert!((csi_flops - 204e6).abs() / 204e6 <= 0.05, "csi flops {csi_flops}");
    pass(2, "FLOP counts");
}

#[test]
fn criterion_03_svd_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..1000 {
        let m = random_cmat(&mut rng, 4, 64);
        let result = svd(&m).unwrap();
        assert_svd_valid(&m, &result, 1e-10);
        assert_singular_values_against_oracle(&m, &result.s, 1e-10);

        // Zero-noise transceiver identity: U^H (H V x) = diag_rect(s) x.
        let x: Vec<Complex64> = (0..64)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let noise = vec![Complex64::new(0.0, 0.0); 4];
        let x_t = precode(&result.v, &x).unwrap();
        let y = transmit(&m, &x_t, &noise).unwrap();
        let out = deprecode(&result.u, &y).unwrap();
        for i in 0..4 {
            let expected = x[i] * result.s[i];
            assert!(
                (out[i] - expected).norm() <= 1e-10 * (1.0 + expected.norm()),
                "trial {trial}: identity defect at {i}: {} vs {}",
                out[i],
                expected
            );
        }
    }
    pass(3, "SVD suite, 1000 random 4x64 matrices at 1e-10");
}

/// Central-difference check of d(-ln p_label)/d(theta) for 100 random
/// coordinates of a reduced model.
fn gradient_check(arch: Arch) {
    let spec = ModelSpec::new(arch, 3, 2, 4);
    let mut state = ModelState::<f64>::init(spec, 17);
    let mut rng = ChaCha8Rng::seed_from_u64(99);

    let ([d0, d1, d2], cin) = spec.u_branch_input();
    let primary: Vec<f64> = (0..d0 * d1 * d2 * cin).map(|_| rng.gen::<f64>() - 0.5).collect();
    let secondary = match arch {
        Arch::EmevIdNet => {
            let ([s0, s1], s_cin) = spec.s_branch_input();
            Some((0..s0 * s1 * s_cin).map(|_| rng.gen::<f64>() - 0.5).collect())
        }
        Arch::CsiIdNet => None,
    };
    let input = SampleInput { primary, secondary };
    let label = 3u8;

    let cache = state.forward(&input).unwrap();
    let analytic: Grads<f64> = state.backward(&cache, label).unwrap();
    let loss_of = |state: &ModelState<f64>| -> f64 {
        -state.predict(&input).unwrap()[label as usize].ln()
    };

    let layout: Vec<usize> = state.param_slices().iter().map(|p| p.len()).collect();
    let eps = 1e-5;
    for check in 0..100 {
        let buf = rng.gen_range(0..layout.len());
        if layout[buf] == 0 {
            continue;
        }
        let idx = rng.gen_range(0..layout[buf]);
        let original = state.param_slices()[buf][idx];

        state.param_slices_mut()[buf][idx] = original + eps;
        let up = loss_of(&state);
        state.param_slices_mut()[buf][idx] = original - eps;
        let down = loss_of(&state);
        state.param_slices_mut()[buf][idx] = original;

        let numeric = (up - down) / (2.0 * eps);
        let exact = analytic.bufs[buf][idx];
        // Absolute floor guards coordinates whose true gradient sits below
        // the central-difference cancellation noise (~1e-11 here).
        let rel = (numeric - exact).abs() / exact.abs().max(numeric.abs()).max(1e-6);
        assert!(
            rel <= 1e-4,
            "{} check {check}: buf {buf} idx {idx}: analytic {exact:e} vs numeric {numeric:e} (rel {rel:e})",
            match arch {
                Arch::EmevIdNet => "emev",
                Arch::CsiIdNet => "csi",
            }
        );
    }
}

#[test]
fn criterion_04_gradient_checks() {
    gradient_check(Arch::EmevIdNet);
    gradient_check(Arch::CsiIdNet);
    pass(4, "finite-difference gradients, 100 coordinates per arch at 64-bit");
}

fn train_on(
    dir: &std::path::Path,
    arch: Arch,
    epochs: usize,
    seed: u64,
) -> (ModelState<f32>, emev::dataset::DatasetManifest, emev::dataset::Dataset) {
    let manifest = load_manifest(&dir.join("manifest.json")).unwrap();
    let mode = match arch {
        Arch::EmevIdNet => Mode::Emev,
        Arch::CsiIdNet => Mode::Csi,
    };
    let set = emev::dataset::deserialize(&dir.join(format!("dataset_{}.bin", mode.as_str())))
        .unwrap();
    let spec = ModelSpec::new(arch, set.n_rb, set.n_r, set.n_t);
    let mut state = ModelState::<f32>::init(spec, seed);
    let train_feats = feature_set(&set, &manifest.split.train).unwrap();
    let val_feats = feature_set(&set, &manifest.split.val).unwrap();
    let cfg = TrainConfig { epochs, seed, ..TrainConfig::default() };
    let history = train(&mut state, &train_feats, &val_feats, &cfg).unwrap();
    let last = history.last().unwrap();
    println!(
        "  trained {} for {} epochs: val accuracy {:.4}",
        match arch {
            Arch::EmevIdNet => "emev",
            Arch::CsiIdNet => "csi",
        },
        history.len(),
        last.val_accuracy
    );
    (state, manifest, set)
}

#[test]
fn criterion_05_desk_scale_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(2000, &LinkConfig::default(), 42, dir.path()).unwrap();
    let (state, manifest, set) = train_on(dir.path(), Arch::EmevIdNet, 30, 1);
    let test_feats = feature_set(&set, &manifest.split.test).unwrap();
    let report = evaluate(&state, &test_feats).unwrap();
    println!("  clean test accuracy {:.4} on {} samples", report.accuracy, report.samples);
    assert!(report.accuracy >= 0.95, "clean test accuracy {} below 0.95", report.accuracy);

    // LOS/NLOS super-class confusion: {A,B,C} (labels 0-2) vs {D,E} (3-4).
    let mut cross = 0usize;
    for (truth, row) in report.confusion.iter().enumerate() {
        for (pred, &count) in row.iter().enumerate() {
            if (truth <= 2) != (pred <= 2) {
                cross += count;
            }
        }
    }
    let rate = cross as f64 / report.samples as f64;
    println!("  LOS/NLOS super-class confusion {rate:.5}");
    assert!(rate <= 0.005, "super-class confusion {rate} above 0.5%");
    pass(5, "desk-scale clean accuracy >= 95% with LOS/NLOS separation");
}

#[test]
fn criterion_06_noise_robustness_shape() {
    // Reduced scale (500/class) so both architectures train in reasonable
    // single-core time; the criterion is qualitative, not about absolute
    // accuracy.
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(500, &LinkConfig::default(), 42, dir.path()).unwrap();
    let (emev_model, manifest, _) = train_on(dir.path(), Arch::EmevIdNet, 20, 1);
    let (csi_model, _, _) = train_on(dir.path(), Arch::CsiIdNet, 12, 1);
    let clean_csi = emev::dataset::deserialize(&dir.path().join("dataset_csi.bin")).unwrap();

    let grid = [10.0, 12.0, 14.0, 16.0, 18.0, 20.0];
    let mut acc = std::collections::HashMap::new();
    for (arch, model, target) in [
        (Arch::EmevIdNet, &emev_model, Mode::Emev),
        (Arch::CsiIdNet, &csi_model, Mode::Csi),
    ] {
        for &snr in &grid {
            let noisy = apply_awgn_dataset(&clean_csi, snr, target).unwrap();
            let feats = feature_set(&noisy, &manifest.split.test).unwrap();
            let report = evaluate(model, &feats).unwrap();
            println!("  {:?} at {snr} dB: {:.4}", arch, report.accuracy);
            acc.insert((arch.as_str(), snr as i64), report.accuracy);
        }
    }
    let a = |arch: Arch, snr: i64| acc[&(arch.as_str(), snr)];

    // Non-decreasing within a 2-point tolerance.
    for w in grid.windows(2) {
        let (lo, hi) = (w[0] as i64, w[1] as i64);
        assert!(
            a(Arch::EmevIdNet, hi) >= a(Arch::EmevIdNet, lo) - 0.02,
            "emev accuracy drops from {lo} dB ({}) to {hi} dB ({})",
            a(Arch::EmevIdNet, lo),
            a(Arch::EmevIdNet, hi)
        );
    }
    assert!(
        a(Arch::EmevIdNet, 20) >= a(Arch::EmevIdNet, 10) + 0.10,
        "emev 20 dB {} not >= 10 dB {} + 10 points",
        a(Arch::EmevIdNet, 20),
        a(Arch::EmevIdNet, 10)
    );
    for snr in [10, 12] {
        assert!(
            a(Arch::CsiIdNet, snr) >= a(Arch::EmevIdNet, snr),
            "csi {} < emev {} at {snr} dB",
            a(Arch::CsiIdNet, snr),
            a(Arch::EmevIdNet, snr)
        );
    }
    pass(6, "noise robustness shape over 10..20 dB");
}

#[test]
fn criterion_07_awgn_calibration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h: Vec<Complex64> = (0..150_000)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let p_h = measure_power(&h).unwrap();
    for &snr in &[10.0, 12.0, 14.0, 16.0, 18.0, 20.0] {
        let noisy = add_awgn(&h, snr, 777).unwrap();
        let noise_power: f64 =
            h.iter().zip(&noisy).map(|(a, b)| (b - a).norm_sqr()).sum::<f64>() / h.len() as f64;
        let achieved = 10.0 * (p_h / noise_power).log10();
        assert!((achieved - snr).abs() <= 0.1, "requested {snr} dB, achieved {achieved}");
    }
    pass(7, "AWGN calibration within 0.1 dB at 150k entries");
}

#[test]
fn criterion_08_dataset_determinism_and_split_exactness() {
    // Byte-identical regeneration from the manifest alone.
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(20, &LinkConfig::default(), 42, dir.path()).unwrap();
    let manifest = load_manifest(&dir.path().join("manifest.json")).unwrap();
    let (csi, emev_set) = synthesize(&manifest).unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    serialize(&csi, &dir2.path().join("c.bin")).unwrap();
    serialize(&emev_set, &dir2.path().join("e.bin")).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("dataset_csi.bin")).unwrap(),
        std::fs::read(dir2.path().join("c.bin")).unwrap(),
        "csi regeneration differs"
    );
    assert_eq!(
        std::fs::read(dir.path().join("dataset_emev.bin")).unwrap(),
        std::fs::read(dir2.path().join("e.bin")).unwrap(),
        "emev regeneration differs"
    );

    // 10,000/class splits to exactly 6,500/1,500/2,000 per class.
    let labels: Vec<u8> = (0..5u8).flat_map(|l| std::iter::repeat(l).take(10_000)).collect();
    let split = stratified_split(&labels, [65, 15, 20], 42).unwrap();
    for l in 0..5u8 {
        let count = |ids: &[usize]| ids.iter().filter(|&&i| labels[i] == l).count();
        assert_eq!(count(&split.train), 6_500);
        assert_eq!(count(&split.val), 1_500);
        assert_eq!(count(&split.test), 2_000);
    }
    pass(8, "dataset determinism and split exactness");
}

#[test]
fn criterion_09_channel_physics() {
    let profile = load_profile(ProfileId::A).unwrap();
    let link = LinkConfig { delay_spread_s: 129e-9, ..LinkConfig::default() };

    // Measured RMS delay spread within 20% of the 129 ns target over 120
    // seeds, and mean tensor power near unity.
    let mut rms_sum = 0.0;
    let mut power_sum = 0.0;
    let n_seeds = 120;
    for seed in 0..n_seeds {
        let taps = generate_taps(&profile, &link, seed).unwrap();
        rms_sum += rms_of_taps(&taps);
        let ch = generate_channel(&profile, &link, seed).unwrap();
        power_sum += measure_power(&ch.h).unwrap();
    }
    let mean_rms = rms_sum / n_seeds as f64;
    let mean_power = power_sum / n_seeds as f64;
    println!("  mean RMS delay spread {:.1} ns, mean power {mean_power:.4}", mean_rms * 1e9);
    assert!(
        (mean_rms - 129e-9).abs() / 129e-9 <= 0.20,
        "mean RMS delay spread {mean_rms:e} not within 20% of 129 ns"
    );
    assert!((0.9..=1.1).contains(&mean_power), "mean |h|^2 {mean_power} outside [0.9, 1.1]");

    // Zero-speed channels are time-invariant bit-for-bit.
    let at = |t: f64| {
        let link = LinkConfig { ue_speed_mps: 0.0, snapshot_time_s: t, ..LinkConfig::default() };
        generate_channel(&profile, &link, 5).unwrap().h
    };
    assert_eq!(at(0.0), at(1e-3), "zero-speed channel depends on snapshot time");
    pass(9, "channel physics: delay spread, power, time invariance");
}

#[test]
fn criterion_10_latency_ordering() {
    let mut medians = Vec::new();
    for arch in [Arch::EmevIdNet, Arch::CsiIdNet] {
        let spec = ModelSpec::at_default_dims(arch);
        let state = ModelState::<f32>::init(spec, 0);
        let ([d0, d1, d2], cin) = spec.u_branch_input();
        let secondary = match arch {
            Arch::EmevIdNet => {
                let ([s0, s1], s_cin) = spec.s_branch_input();
                Some(vec![0.1f32; s0 * s1 * s_cin])
            }
            Arch::CsiIdNet => None,
        };
        let input = SampleInput { primary: vec![0.1f32; d0 * d1 * d2 * cin], secondary };
        let median = inference_latency(&state, &input, 15).unwrap();
        println!("  {:?} median latency {:?}", arch, median);
        medians.push(median);
    }
    assert!(
        medians[0] < medians[1],
        "emev latency {:?} not below csi latency {:?}",
        medians[0],
        medians[1]
    );
    pass(10, "EMEV inference latency strictly below CSI");
}
