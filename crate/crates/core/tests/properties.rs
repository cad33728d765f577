//! Randomized properties over the DSP and metric layers.
//!
//! Seeded statistical checks live in unit tests next to the code they cover;
//! this suite uses proptest to push arbitrary inputs through the invariants
//! that must hold for *every* input, not just typical ones.

use bargebench::aec::nlms_process;
use bargebench::audio::{
    log_mel, read_wav, synth_keyword, text_to_phonemes, write_wav, Waveform, SAMPLE_RATE,
};
use bargebench::metrics::{auc, eer, mae, roc, ScoredSet};
use bargebench::room::{
    fft_convolve, generate_rir, generate_rir_with_absorption, mix_at_sir, RoomSpec, ScenarioKind,
};
use proptest::prelude::*;

fn wave(samples: Vec<f64>) -> Waveform {
    Waveform::new(samples, SAMPLE_RATE)
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn wav_round_trip_stays_within_one_quantization_step(
        samples in proptest::collection::vec(-1.0f64..=1.0, 0..400),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let w = wave(samples);
        write_wav(&path, &w).unwrap();
        let back = read_wav(&path).unwrap();
        prop_assert_eq!(back.sample_rate, SAMPLE_RATE);
        prop_assert_eq!(back.len(), w.len());
        // Half a 16-bit code of rounding error, a full code at +1.0 where
        // the positive code range saturates.
        for (a, b) in w.samples.iter().zip(&back.samples) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0 + 1e-12);
        }
    }

    #[test]
    fn convolution_matches_the_quadratic_oracle(
        a in proptest::collection::vec(-2.0f64..2.0, 1..48),
        b in proptest::collection::vec(-2.0f64..2.0, 1..48),
    ) {
        let fast = fft_convolve(&a, &b);
        let mut slow = vec![0.0; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                slow[i + j] += x * y;
            }
        }
        prop_assert_eq!(fast.len(), slow.len());
        let scale = slow.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (f, s) in fast.iter().zip(&slow) {
            prop_assert!((f - s).abs() <= 1e-9 * scale, "{f} vs {s}");
        }
    }

    #[test]
    fn requested_sir_is_always_hit(
        t in proptest::collection::vec(-0.8f64..0.8, 64..256),
        e in proptest::collection::vec(-0.8f64..0.8, 64..256),
        sir in -20.0f64..20.0,
    ) {
        let n = t.len().min(e.len());
        let mut t = t; t.truncate(n); t[0] = 0.5;
        let mut e = e; e.truncate(n); e[0] = -0.4;
        let (tw, ew) = (wave(t), wave(e));
        let (mixed, g) = mix_at_sir(&tw, &ew, sir).unwrap();
        prop_assert_eq!(mixed.len(), n);
        let measured = 10.0 * (tw.power_nonzero() / (g * g * ew.power_nonzero())).log10();
        prop_assert!((measured - sir).abs() < 1e-9, "{measured} vs {sir}");
    }

    #[test]
    fn nlms_with_a_zero_reference_is_the_identity(
        mic in proptest::collection::vec(-1.0f64..1.0, 1..400),
        taps in 1usize..64,
    ) {
        let m = wave(mic.clone());
        let silent = Waveform::silence(mic.len(), SAMPLE_RATE);
        let (residual, state) = nlms_process(&m, &silent, taps, 0.5, 1e-6).unwrap();
        prop_assert_eq!(residual.samples, mic); // bit-identical, not approximate
        prop_assert!(state.weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn direct_path_tap_follows_geometry(
        length in 3.0f64..8.0,
        width in 2.5f64..6.0,
        height in 2.4f64..4.0,
        rt60 in 0.15f64..0.5,
        src_f in [0.18f64..0.82, 0.18f64..0.82, 0.2f64..0.8],
        mic_f in [0.18f64..0.82, 0.18f64..0.82, 0.2f64..0.8],
    ) {
        let room = RoomSpec::new(length, width, height, rt60);
        let dims = room.dims();
        let src = [src_f[0] * dims[0], src_f[1] * dims[1], src_f[2] * dims[2]];
        let mic = [mic_f[0] * dims[0], mic_f[1] * dims[1], mic_f[2] * dims[2]];
        let d = dist(src, mic);
        prop_assume!(d >= 0.5);
        let expected = (d / room.speed_of_sound * SAMPLE_RATE as f64).round() as i64;

        // With full absorption only the direct path survives, so the global
        // peak *is* the direct tap. (In the reverberant render the global
        // peak can legitimately sit elsewhere: e.g. when src_z + mic_z is
        // close to the room height, the floor and ceiling images land on the
        // same tap and their sum can outweigh 1/d.)
        let dry = generate_rir_with_absorption(&room, src, mic, 2, 1.0).unwrap();
        let peak = dry.peak_index() as i64;
        prop_assert!((peak - expected).abs() <= 1, "direct tap {peak} vs {expected}");

        // Causality of the reverberant render: the windowed sinc has finite
        // support, so everything strictly before the direct arrival's window
        // is exactly zero.
        let wet = generate_rir(&room, src, mic, 2).unwrap();
        let first_possible = (d / room.speed_of_sound * SAMPLE_RATE as f64 - 32.0).ceil() as usize;
        prop_assert!(wet.taps[..first_possible.min(wet.taps.len())]
            .iter()
            .all(|&t| t == 0.0));
    }

    #[test]
    fn log_mel_gain_is_an_additive_shift(
        gain_db in -12.0f64..12.0,
        seed in 0u64..1000,
    ) {
        let mut r = bargebench::rng::chacha(seed);
        let x: Vec<f64> = (0..1600)
            .map(|_| bargebench::rng::uniform(&mut r, -0.05, 0.05))
            .collect();
        let g = 10f64.powf(gain_db / 20.0);
        let scaled: Vec<f64> = x.iter().map(|v| v * g).collect();
        let a = log_mel(&wave(x), 40, 0.025, 0.010).unwrap();
        let b = log_mel(&wave(scaled), 40, 0.025, 0.010).unwrap();
        let shift = 2.0 * g.ln(); // log power scales with the square
        let mut compared = 0usize;
        for (ya, yb) in a.data.iter().zip(&b.data) {
            // Skip cells near the spectral floor, where the shift clips.
            if *ya > -16.0 && *yb > -16.0 {
                prop_assert!(((yb - ya) - shift).abs() < 1e-6, "{} vs {shift}", yb - ya);
                compared += 1;
            }
        }
        prop_assert!(compared > 0);
    }

    #[test]
    fn ranking_metrics_hold_for_arbitrary_sets(
        raw in proptest::collection::vec((0.0f64..=1.0, proptest::bool::ANY), 2..80),
    ) {
        // Snap to a grid so exact ties are common.
        let scores: Vec<f64> = raw.iter().map(|(s, _)| (s * 20.0).round() / 20.0).collect();
        let labels: Vec<u8> = raw.iter().map(|&(_, l)| l as u8).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let set = ScoredSet::new(scores, labels, ScenarioKind::NonPlayback).unwrap();

        let pts = roc(&set).unwrap();
        prop_assert_eq!(pts[0], (0.0, 0.0));
        prop_assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
        for w in pts.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1, "ROC must be monotone");
        }
        let a = auc(&set).unwrap();
        let (e, _) = eer(&set).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert!((0.0..=1.0).contains(&mae(&set)));
    }

    #[test]
    fn every_lexicon_keyword_synthesizes_deterministically(
        word in proptest::collection::vec(0usize..20, 1..=6),
        jitter in 0u64..50,
    ) {
        let text: String = word.iter().map(|&i| (b'a' + i as u8) as char).collect();
        prop_assert_eq!(text_to_phonemes(&text).unwrap(), word.clone());
        let (w1, kw1) = synth_keyword(&word, jitter).unwrap();
        let (w2, kw2) = synth_keyword(&word, jitter).unwrap();
        prop_assert_eq!(&w1.samples, &w2.samples);
        prop_assert_eq!(kw1, kw2);
        prop_assert_eq!(w1.sample_rate, SAMPLE_RATE);
        prop_assert!(w1.samples.iter().all(|s| s.abs() <= 1.0));
    }
}
