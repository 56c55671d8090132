mod common;

use common::{naive_dft, reference_filterbank, reference_mfcc};
use emovox::dsp::{fft, hz_to_mel, ifft, mel_to_hz, FeatureConfig, FeatureExtractor, MelConfig, MelFilterbank};
use emovox::nn::Rng;
use num_complex::Complex64;
use proptest::prelude::*;

fn random_signal(n: usize, rng: &mut Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.uniform_range(-1.0, 1.0), rng.uniform_range(-1.0, 1.0)))
        .collect()
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn fft_matches_naive_dft() {
    let mut rng = Rng::new(1);
    for log_n in 1..=10 {
        let n = 1 << log_n;
        for _ in 0..3 {
            let x = random_signal(n, &mut rng);
            let want = naive_dft(&x);
            let got = fft(&x).unwrap();
            let err = got.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err / max_abs(&want) < 1e-9, "n={n}: {err}");
        }
    }
}

#[test]
fn fft_rejects_other_lengths() {
    for n in [0, 3, 6, 1000] {
        assert!(fft(&vec![Complex64::new(1.0, 0.0); n]).is_err(), "n={n}");
    }
}

proptest! {
    #[test]
    fn ifft_inverts_fft(log_n in 1usize..9, seed in any::<u64>()) {
        let x = random_signal(1 << log_n, &mut Rng::new(seed));
        let back = ifft(&fft(&x).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval_holds(log_n in 1usize..9, seed in any::<u64>()) {
        let x = random_signal(1 << log_n, &mut Rng::new(seed));
        let time: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let freq: f64 = fft(&x).unwrap().iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len() as f64;
        prop_assert!((time - freq).abs() <= 1e-10 * time.max(1.0));
    }
}

#[test]
fn mel_reference_point_and_round_trip() {
    let m = hz_to_mel(1000.0).unwrap();
    assert!((999.99..=1000.01).contains(&m), "{m}");
    let mut f = 1.0;
    while f <= 11_025.0 {
        let back = mel_to_hz(hz_to_mel(f).unwrap()).unwrap();
        assert!((back - f).abs() / f < 1e-6, "{f}");
        // The log10 form with its own constant agrees to within 2e-5.
        assert!((hz_to_mel(f).unwrap() - common::hz_to_mel(f)).abs() / common::hz_to_mel(f) < 2e-5);
        f *= 1.07;
    }
    assert!(hz_to_mel(-1.0).is_err());
}

#[test]
fn filterbank_matches_dense_reference() {
    for (n_mels, n_fft) in [(128, 2048), (40, 512), (128, 256)] {
        let fb = MelFilterbank::new(&MelConfig { n_mels, ..MelConfig::default() }, n_fft, 22_050).unwrap();
        let want = reference_filterbank(n_mels, n_fft, 22_050.0);
        let got = fb.matrix();
        for (m, (g, w)) in got.iter().zip(&want).enumerate() {
            for (k, (a, b)) in g.iter().zip(w).enumerate() {
                assert!((a - b).abs() < 1e-9, "mels={n_mels} fft={n_fft} row {m} bin {k}: {a} vs {b}");
            }
            assert!((g.iter().cloned().fold(0.0, f64::max) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn mfcc_matches_step_by_step_reference() {
    let mut rng = Rng::new(7);
    let mut ex = FeatureExtractor::new(FeatureConfig::default()).unwrap();
    for _ in 0..4 {
        let n = 11_025 + rng.below(55_126);
        let samples: Vec<f64> = (0..n).map(|_| rng.uniform_range(-0.5, 0.5)).collect();
        let fm = ex.extract_samples(&samples).unwrap();
        let (want, frames) = reference_mfcc(&samples, 22_050.0, 2048, 512, 128, 100);
        assert_eq!(fm.shape(), (100, 1 + n / 512));
        assert_eq!(frames, fm.frames());
        let err = fm.values().iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "n={n}: {err}");
    }
}

#[test]
fn silent_clip_sits_on_the_floor() {
    let mut ex = FeatureExtractor::new(FeatureConfig::default()).unwrap();
    let fm = ex.extract_samples(&vec![0.0; 22_050]).unwrap();
    let (want, _) = reference_mfcc(&vec![0.0; 22_050], 22_050.0, 2048, 512, 128, 100);
    for (a, b) in fm.values().iter().zip(&want) {
        assert!((a - b).abs() < 1e-9);
    }
}
