//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

pub mod artifacts;
pub mod contracts;
pub mod gradcheck;
pub mod overfit;
pub mod streaming;

use emovox::nn::{Rng, Tensor};
use num_complex::Complex64;

/// O(N²) discrete Fourier transform.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| {
                    // Reduce k·t mod n first so the angle stays accurate.
                    let ang = -std::f64::consts::TAU * ((k * t) % n) as f64 / n as f64;
                    v * Complex64::from_polar(1.0, ang)
                })
                .sum()
        })
        .collect()
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Dense mel filterbank: triangles between mel-spaced corners evaluated at
/// bin frequencies, each row scaled to peak 1, sub-bin filters replaced by
/// a unit spike at the bin nearest their centre.
pub fn reference_filterbank(n_mels: usize, n_fft: usize, sr: f64) -> Vec<Vec<f64>> {
    let n_bins = n_fft / 2 + 1;
    let top = hz_to_mel(sr / 2.0);
    let corners: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    (0..n_mels)
        .map(|m| {
            let (l, c, r) = (corners[m], corners[m + 1], corners[m + 2]);
            let mut row: Vec<f64> = (0..n_bins)
                .map(|k| {
                    let f = k as f64 * sr / n_fft as f64;
                    if f <= l || f >= r {
                        0.0
                    } else if f <= c {
                        (f - l) / (c - l)
                    } else {
                        (r - f) / (r - c)
                    }
                })
                .collect();
            let peak = row.iter().cloned().fold(0.0, f64::max);
            if peak > 0.0 {
                row.iter_mut().for_each(|w| *w /= peak);
            } else {
                let k = ((c * n_fft as f64 / sr).round() as usize).min(n_bins - 1);
                row[k] = 1.0;
            }
            row
        })
        .collect()
}

/// Step-by-step MFCC: centred reflect-padded STFT with a periodic Hann
/// window, power spectrum, mel filterbank, dB relative to the global
/// maximum with an 80 dB floor, orthonormal DCT-II truncated to `n_mfcc`.
/// Returns row-major `(n_mfcc, frames)` and the frame count.
pub fn reference_mfcc(samples: &[f64], sr: f64, n_fft: usize, hop: usize, n_mels: usize, n_mfcc: usize) -> (Vec<f64>, usize) {
    let pad = n_fft / 2;
    let len = samples.len() as isize;
    let reflect = |i: isize| -> f64 {
        let mut j = i;
        while j < 0 || j >= len {
            j = if j < 0 { -j } else { 2 * (len - 1) - j };
        }
        samples[j as usize]
    };
    let padded: Vec<f64> = (-(pad as isize)..len + pad as isize).map(reflect).collect();
    let frames = 1 + samples.len() / hop;
    let window: Vec<f64> = (0..n_fft)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n_fft as f64).cos())
        .collect();
    let fft = rustfft::FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let fb = reference_filterbank(n_mels, n_fft, sr);
    let mut mel = vec![vec![0.0; frames]; n_mels];
    for t in 0..frames {
        let mut buf: Vec<rustfft::num_complex::Complex<f64>> = (0..n_fft)
            .map(|i| rustfft::num_complex::Complex::new(padded[t * hop + i] * window[i], 0.0))
            .collect();
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..n_fft / 2 + 1].iter().map(|z| z.norm_sqr()).collect();
        for (m, row) in fb.iter().enumerate() {
            mel[m][t] = row.iter().zip(&power).map(|(w, p)| w * p).sum();
        }
    }
    let peak = mel.iter().flatten().cloned().fold(0.0, f64::max);
    let db: Vec<Vec<f64>> = mel
        .iter()
        .map(|r| {
            r.iter()
                .map(|&v| if v > 0.0 && peak > 0.0 { (10.0 * (v / peak).log10()).max(-80.0) } else { -80.0 })
                .collect()
        })
        .collect();
    let mut out = vec![0.0; n_mfcc * frames];
    for k in 0..n_mfcc {
        let scale = if k == 0 { (1.0 / n_mels as f64).sqrt() } else { (2.0 / n_mels as f64).sqrt() };
        for t in 0..frames {
            let s: f64 = (0..n_mels)
                .map(|m| db[m][t] * (std::f64::consts::PI * k as f64 * (m as f64 + 0.5) / n_mels as f64).cos())
                .sum();
            out[k * frames + t] = scale * s;
        }
    }
    (out, frames)
}

pub fn random_tensor(shape: &[usize], rng: &mut Rng, scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| scale * rng.uniform_range(-1.0, 1.0)).collect()).unwrap()
}

/// Gradients below this magnitude are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-6;

/// `|a − b| / max(|a|, |b|, GRAD_FLOOR)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR)
}

/// Central difference of `f` along coordinate `i` of `x`.
pub fn central_diff(x: &mut [f64], i: usize, h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + h;
    let plus = f(x);
    x[i] = orig - h;
    let minus = f(x);
    x[i] = orig;
    (plus - minus) / (2.0 * h)
}

/// `Σ a ⊙ b`, the scalar probe used to check vector-valued kernels.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
