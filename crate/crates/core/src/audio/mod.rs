//! Audio decoding and conditioning.
//!
//! Everything downstream of this module works on mono `f32` samples at a
//! single canonical rate. No silence trimming, pre-emphasis or gain
//! normalisation is applied anywhere on the default path.

mod resample;
mod segment;
mod wav;

use thiserror::Error;

pub use resample::{resample, Resampler};
pub use segment::{segment, segment_bounds, SegmentMode, SegmentPolicy};
pub use wav::{decode_wav, encode_wav_pcm16, probe_wav, read_wav, write_wav_pcm16, WavInfo};

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed RIFF/WAVE container: {0}")]
    MalformedContainer(String),
    #[error("unsupported WAVE encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),
    #[error("clip of {duration_s:.4} s is shorter than the minimum {min_duration_s:.4} s")]
    ClipTooShort { duration_s: f64, min_duration_s: f64 },
    #[error("invalid segment policy: {0}")]
    InvalidPolicy(String),
}

impl AudioError {
    pub fn name(&self) -> &'static str {
        match self {
            AudioError::MalformedContainer(_) => "MalformedContainer",
            AudioError::UnsupportedEncoding(_) => "UnsupportedEncoding",
            AudioError::InvalidClip(_) => "InvalidClip",
            AudioError::ClipTooShort { .. } => "ClipTooShort",
            AudioError::InvalidPolicy(_) => "InvalidPolicy",
        }
    }
}

/// Largest `f32` strictly below 1.0; upper clamp for decoded float audio.
pub(crate) const MAX_AMPLITUDE: f32 = 1.0 - f32::EPSILON / 2.0;

/// Interleaved sample buffer plus its format.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
    channels: u16,
    source_id: String,
}

impl AudioClip {
    /// Builds a clip, checking every invariant: finite samples in
    /// `[-1.0, 1.0)`, a positive rate and a length divisible by `channels`.
    pub fn new(
        samples: Vec<f32>,
        sample_rate: u32,
        channels: u16,
        source_id: impl Into<String>,
    ) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        if channels == 0 {
            return Err(AudioError::InvalidClip("channel count must be positive".into()));
        }
        if samples.len() % channels as usize != 0 {
            return Err(AudioError::InvalidClip(format!(
                "{} samples is not a multiple of {} channels",
                samples.len(),
                channels
            )));
        }
        if let Some(pos) = samples
            .iter()
            .position(|s| !s.is_finite() || *s < -1.0 || *s >= 1.0)
        {
            return Err(AudioError::InvalidClip(format!(
                "sample {} = {} outside [-1, 1)",
                pos, samples[pos]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
            channels,
            source_id: source_id.into(),
        })
    }

    /// Mono convenience constructor.
    pub fn mono(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        Self::new(samples, sample_rate, 1, "")
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> u16 {
        self.channels
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    /// Number of sample frames (samples per channel).
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels as usize
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    pub fn is_mono(&self) -> bool {
        self.channels == 1
    }

    /// Sub-clip of sample frames `[start, end)`; keeps format and source.
    pub fn slice(&self, start: usize, end: usize) -> AudioClip {
        let ch = self.channels as usize;
        AudioClip {
            samples: self.samples[start * ch..end * ch].to_vec(),
            sample_rate: self.sample_rate,
            channels: self.channels,
            source_id: self.source_id.clone(),
        }
    }

    /// Splits an interleaved clip into one mono clip per channel.
    pub fn split_channels(&self) -> Vec<AudioClip> {
        let ch = self.channels as usize;
        (0..ch)
            .map(|c| AudioClip {
                samples: self.samples.iter().skip(c).step_by(ch).copied().collect(),
                sample_rate: self.sample_rate,
                channels: 1,
                source_id: self.source_id.clone(),
            })
            .collect()
    }
}

/// Averages all channels into one.
pub fn to_mono(clip: AudioClip) -> AudioClip {
    if clip.channels == 1 {
        return clip;
    }
    let ch = clip.channels as usize;
    let samples = clip
        .samples
        .chunks_exact(ch)
        .map(|frame| (frame.iter().map(|&s| s as f64).sum::<f64>() / ch as f64) as f32)
        .collect();
    AudioClip {
        samples,
        sample_rate: clip.sample_rate,
        channels: 1,
        source_id: clip.source_id,
    }
}

/// Decodes, down-mixes and resamples in one call; the usual entry point
/// for file-based pipelines.
pub fn load_canonical(bytes: &[u8], target_rate: u32) -> Result<AudioClip, AudioError> {
    let clip = to_mono(decode_wav(bytes)?);
    Ok(resample(&clip, target_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_samples() {
        assert!(AudioClip::mono(vec![0.0, 1.0], 8000).is_err());
        assert!(AudioClip::mono(vec![f32::NAN], 8000).is_err());
        assert!(AudioClip::mono(vec![-1.0, 0.999], 8000).is_ok());
        assert!(AudioClip::new(vec![0.0; 3], 8000, 2, "").is_err());
        assert!(AudioClip::mono(vec![0.0], 0).is_err());
    }

    #[test]
    fn mono_is_identity() {
        let clip = AudioClip::mono(vec![0.1, -0.2, 0.3], 8000).unwrap();
        assert_eq!(to_mono(clip.clone()), clip);
    }

    #[test]
    fn stereo_identical_channels_collapse() {
        let left = [0.1f32, -0.7, 0.33, 0.9];
        let inter: Vec<f32> = left.iter().flat_map(|&s| [s, s]).collect();
        let clip = AudioClip::new(inter, 8000, 2, "x").unwrap();
        let mono = to_mono(clip);
        assert_eq!(mono.channels(), 1);
        assert_eq!(mono.samples(), &left);
    }

    #[test]
    fn opposite_channels_cancel() {
        let clip = AudioClip::new(vec![0.5, -0.5], 8000, 2, "").unwrap();
        assert_eq!(to_mono(clip).samples(), &[0.0]);
    }
}
