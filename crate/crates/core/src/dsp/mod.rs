//! Feature extraction: FFT, STFT, mel filterbank, Mel spectrograms and MFCCs.

mod dct;
mod features;
mod fft;
mod mel;
mod stft;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioClip;

pub use dct::{dct2_ortho, idct2_ortho, DctMatrix};
pub use features::{Descriptor, FeatureMap};
pub use fft::{fft, ifft, FftPlan, RealFft};
pub use mel::{
    hz_to_mel, mel_corner_frequencies, mel_filterbank, mel_to_hz, MelConfig, MelFilterbank,
    MEL_BREAK_HZ, MEL_SCALE,
};
pub use stft::{stft, Spectrogram, StftConfig, WindowKind};

#[derive(Debug, Error)]
pub enum DspError {
    #[error("length {0} is not a power of two")]
    LengthNotPowerOfTwo(usize),
    #[error("input of {len} samples is shorter than the {needed} required")]
    InputTooShort { len: usize, needed: usize },
    #[error("negative frequency {0}")]
    NegativeFrequency(f64),
    #[error("invalid feature configuration: {0}")]
    InvalidConfig(String),
    #[error("expected a mono clip, got {0} channels")]
    NotMono(u16),
    #[error("clip sample rate {found} Hz does not match the configured {expected} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },
    #[error("power spectrum contains a negative entry")]
    NegativePower,
    #[error("invalid feature map: {0}")]
    InvalidFeatureMap(String),
    #[error("malformed feature file: {0}")]
    MalformedFeatureFile(String),
}

impl DspError {
    pub fn name(&self) -> &'static str {
        match self {
            DspError::LengthNotPowerOfTwo(_) => "LengthNotPowerOfTwo",
            DspError::InputTooShort { .. } => "InputTooShort",
            DspError::NegativeFrequency(_) => "NegativeFrequency",
            DspError::InvalidConfig(_) => "InvalidConfig",
            DspError::NotMono(_) => "NotMono",
            DspError::SampleRateMismatch { .. } => "SampleRateMismatch",
            DspError::NegativePower => "NegativePower",
            DspError::InvalidFeatureMap(_) => "InvalidFeatureMap",
            DspError::MalformedFeatureFile(_) => "MalformedFeatureFile",
        }
    }
}

/// Decibels relative to the largest entry: `max(10·log10(x / max), floor)`.
/// An all-zero input maps to `floor` everywhere.
pub fn power_to_db(values: &[f64], floor_db: f64) -> Result<Vec<f64>, DspError> {
    if values.iter().any(|&v| v < 0.0 || v.is_nan()) {
        return Err(DspError::NegativePower);
    }
    let peak = values.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(vec![floor_db; values.len()]);
    }
    Ok(values
        .iter()
        .map(|&v| {
            if v == 0.0 {
                floor_db
            } else {
                (10.0 * (v / peak).log10()).max(floor_db)
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub stft: StftConfig,
    pub mel: MelConfig,
    pub n_mfcc: usize,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            mel: MelConfig::default(),
            n_mfcc: 100,
        }
    }
}

/// Everything needed to turn a clip into the classifier's input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub descriptor: Descriptor,
    pub stft: StftConfig,
    pub mel: MelConfig,
    pub n_mfcc: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: crate::CANONICAL_SAMPLE_RATE,
            descriptor: Descriptor::Mfcc,
            stft: StftConfig::default(),
            mel: MelConfig::default(),
            n_mfcc: 100,
        }
    }
}

impl FeatureConfig {
    pub fn mfcc(&self) -> MfccConfig {
        MfccConfig {
            stft: self.stft,
            mel: self.mel,
            n_mfcc: self.n_mfcc,
        }
    }

    pub fn validate(&self) -> Result<(), DspError> {
        self.stft.validate()?;
        self.mel.validate(self.sample_rate)?;
        if self.descriptor == Descriptor::Mfcc && !(1..=self.mel.n_mels).contains(&self.n_mfcc) {
            return Err(DspError::InvalidConfig(format!(
                "n_mfcc {} must be in 1..={}",
                self.n_mfcc, self.mel.n_mels
            )));
        }
        Ok(())
    }

    /// Feature rows produced per frame.
    pub fn bins(&self) -> usize {
        match self.descriptor {
            Descriptor::Mfcc => self.n_mfcc,
            _ => self.mel.n_mels,
        }
    }

    /// Shortest clip, in samples, that yields at least `frames` frames.
    pub fn min_samples_for_frames(&self, frames: usize) -> usize {
        if self.stft.center {
            frames.saturating_sub(1) * self.stft.hop
        } else {
            self.stft.n_fft + frames.saturating_sub(1) * self.stft.hop
        }
    }

    /// Stable textual identity, used to key feature caches.
    pub fn fingerprint(&self) -> String {
        serde_json::to_string(self).expect("feature config serialises")
    }
}

/// Reusable extractor holding the window, FFT plan, filterbank and DCT.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    window: Vec<f64>,
    rfft: RealFft,
    filterbank: MelFilterbank,
    dct: Option<DctMatrix>,
}

impl FeatureExtractor {
    pub fn new(cfg: FeatureConfig) -> Result<Self, DspError> {
        cfg.validate()?;
        let dct = (cfg.descriptor == Descriptor::Mfcc).then(|| DctMatrix::new(cfg.mel.n_mels, cfg.n_mfcc));
        Ok(Self {
            window: cfg.stft.window.coefficients(cfg.stft.n_fft),
            rfft: RealFft::new(cfg.stft.n_fft)?,
            filterbank: MelFilterbank::new(&cfg.mel, cfg.stft.n_fft, cfg.sample_rate)?,
            dct,
            cfg,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Features for a mono clip at the configured sample rate.
    pub fn extract(&mut self, clip: &AudioClip) -> Result<FeatureMap, DspError> {
        if !clip.is_mono() {
            return Err(DspError::NotMono(clip.channels()));
        }
        if clip.sample_rate() != self.cfg.sample_rate {
            return Err(DspError::SampleRateMismatch {
                expected: self.cfg.sample_rate,
                found: clip.sample_rate(),
            });
        }
        let samples: Vec<f64> = clip.samples().iter().map(|&s| s as f64).collect();
        self.extract_samples(&samples)
    }

    /// Features for raw mono samples assumed to be at the configured rate.
    pub fn extract_samples(&mut self, samples: &[f64]) -> Result<FeatureMap, DspError> {
        let cfg = self.cfg;
        let frames = cfg.stft.frame_count(samples.len())?;
        let n_mels = self.filterbank.n_mels();
        let mut power = vec![0.0; cfg.stft.n_bins()];
        let mut mel_col = vec![0.0; n_mels];
        // Mel energies, row-major (n_mels, frames).
        let mut mel = vec![0.0; n_mels * frames];
        let filterbank = &self.filterbank;
        stft::for_each_frame(samples, &cfg.stft, &self.window, &mut self.rfft, |t, spec| {
            if cfg.mel.power == 2.0 {
                for (p, z) in power.iter_mut().zip(spec) {
                    *p = z.norm_sqr();
                }
            } else {
                for (p, z) in power.iter_mut().zip(spec) {
                    *p = z.norm().powf(cfg.mel.power);
                }
            }
            filterbank.apply(&power, &mut mel_col);
            for (m, &e) in mel_col.iter().enumerate() {
                mel[m * frames + t] = e;
            }
        })?;
        let times = (0..frames)
            .map(|t| cfg.stft.frame_time(t, cfg.sample_rate))
            .collect();

        match cfg.descriptor {
            Descriptor::MelSpectrogramPower => {
                FeatureMap::new(n_mels, frames, mel, times, Descriptor::MelSpectrogramPower)
            }
            Descriptor::MelSpectrogramDb => {
                let db = power_to_db(&mel, cfg.mel.db_floor)?;
                FeatureMap::new(n_mels, frames, db, times, Descriptor::MelSpectrogramDb)
            }
            Descriptor::Mfcc => {
                let db = power_to_db(&mel, cfg.mel.db_floor)?;
                let dct = self.dct.as_ref().expect("mfcc extractor has a DCT");
                let n_out = dct.output_len();
                let mut out = vec![0.0; n_out * frames];
                let mut coeffs = vec![0.0; n_out];
                for t in 0..frames {
                    for (m, c) in mel_col.iter_mut().enumerate() {
                        *c = db[m * frames + t];
                    }
                    dct.apply(&mel_col, &mut coeffs);
                    for (k, &c) in coeffs.iter().enumerate() {
                        out[k * frames + t] = c;
                    }
                }
                FeatureMap::new(n_out, frames, out, times, Descriptor::Mfcc)
            }
        }
    }
}

/// Mel spectrogram of a mono clip (in dB unless `mel_cfg.to_db` is off).
pub fn mel_spectrogram(
    clip: &AudioClip,
    stft_cfg: &StftConfig,
    mel_cfg: &MelConfig,
) -> Result<FeatureMap, DspError> {
    let descriptor = if mel_cfg.to_db {
        Descriptor::MelSpectrogramDb
    } else {
        Descriptor::MelSpectrogramPower
    };
    FeatureExtractor::new(FeatureConfig {
        sample_rate: clip.sample_rate(),
        descriptor,
        stft: *stft_cfg,
        mel: *mel_cfg,
        n_mfcc: mel_cfg.n_mels,
    })?
    .extract(clip)
}

/// MFCCs of a mono clip: power spectrum, mel energies, dB, orthonormal
/// DCT-II, first `n_mfcc` coefficients.
pub fn mfcc(clip: &AudioClip, cfg: &MfccConfig) -> Result<FeatureMap, DspError> {
    FeatureExtractor::new(FeatureConfig {
        sample_rate: clip.sample_rate(),
        descriptor: Descriptor::Mfcc,
        stft: cfg.stft,
        mel: cfg.mel,
        n_mfcc: cfg.n_mfcc,
    })?
    .extract(clip)
}
