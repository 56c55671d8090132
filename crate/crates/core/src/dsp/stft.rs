use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::RealFft;
use super::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// Periodic Hann window.
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
            WindowKind::Rectangular => vec![1.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub window: WindowKind,
    /// Reflect-pad by `n_fft / 2` on both sides so frame `t` is centred on
    /// sample `t * hop`.
    pub center: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            hop: 512,
            window: WindowKind::Hann,
            center: true,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        if self.n_fft < 2 || !self.n_fft.is_power_of_two() {
            return Err(DspError::LengthNotPowerOfTwo(self.n_fft));
        }
        if self.hop == 0 || self.hop > self.n_fft {
            return Err(DspError::InvalidConfig(format!(
                "hop {} must be in 1..={}",
                self.hop, self.n_fft
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Number of frames for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> Result<usize, DspError> {
        if self.center {
            Ok(1 + len / self.hop)
        } else if len < self.n_fft {
            Err(DspError::InputTooShort {
                len,
                needed: self.n_fft,
            })
        } else {
            Ok(1 + (len - self.n_fft) / self.hop)
        }
    }

    /// Time in seconds at the centre of frame `t`.
    pub fn frame_time(&self, t: usize, sample_rate: u32) -> f64 {
        let offset = if self.center { 0 } else { self.n_fft / 2 };
        (t * self.hop + offset) as f64 / sample_rate as f64
    }
}

/// Index into `0..len` after repeated mirror reflection that excludes the
/// edge sample (numpy's `reflect` mode).
fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// The analysed signal: the input itself, or its reflect-padded version.
pub(crate) fn padded_signal(samples: &[f64], cfg: &StftConfig) -> Vec<f64> {
    if !cfg.center {
        return samples.to_vec();
    }
    if samples.is_empty() {
        return vec![0.0; cfg.n_fft];
    }
    let pad = (cfg.n_fft / 2) as isize;
    (0..samples.len() as isize + 2 * pad)
        .map(|i| samples[reflect_index(i - pad, samples.len())])
        .collect()
}

/// Complex spectrogram with `bins = n_fft/2 + 1` rows and one column per
/// frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub bins: usize,
    pub frames: usize,
    /// Row-major `(bins, frames)`.
    pub data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[bin * self.frames + frame]
    }

    pub fn frame(&self, t: usize) -> Vec<Complex64> {
        (0..self.bins).map(|k| self.get(k, t)).collect()
    }
}

/// Calls `visit(t, spectrum)` for every frame of the windowed STFT.
pub(crate) fn for_each_frame(
    samples: &[f64],
    cfg: &StftConfig,
    window: &[f64],
    rfft: &mut RealFft,
    mut visit: impl FnMut(usize, &[Complex64]),
) -> Result<usize, DspError> {
    let frames = cfg.frame_count(samples.len())?;
    let signal = padded_signal(samples, cfg);
    let mut buf = vec![0.0; cfg.n_fft];
    let mut spec = vec![Complex64::default(); cfg.n_bins()];
    for t in 0..frames {
        let start = t * cfg.hop;
        for ((b, &x), &w) in buf.iter_mut().zip(&signal[start..start + cfg.n_fft]).zip(window) {
            *b = x * w;
        }
        rfft.forward(&buf, &mut spec);
        visit(t, &spec);
    }
    Ok(frames)
}

/// Short-time Fourier transform keeping only non-negative frequencies.
pub fn stft(samples: &[f64], cfg: &StftConfig) -> Result<Spectrogram, DspError> {
    cfg.validate()?;
    let frames = cfg.frame_count(samples.len())?;
    let bins = cfg.n_bins();
    let window = cfg.window.coefficients(cfg.n_fft);
    let mut rfft = RealFft::new(cfg.n_fft)?;
    let mut data = vec![Complex64::default(); bins * frames];
    for_each_frame(samples, cfg, &window, &mut rfft, |t, spec| {
        for (k, z) in spec.iter().enumerate() {
            data[k * frames + t] = *z;
        }
    })?;
    Ok(Spectrogram { bins, frames, data })
}
