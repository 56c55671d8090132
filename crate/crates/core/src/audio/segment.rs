use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{AudioClip, AudioError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentMode {
    /// `n` equal, contiguous pieces; the last one absorbs the remainder.
    EqualSplits(usize),
    /// Consecutive windows of the given duration in seconds.
    FixedWindow(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentPolicy {
    pub mode: SegmentMode,
    pub min_duration_s: f64,
}

impl SegmentPolicy {
    pub fn new(mode: SegmentMode, min_duration_s: f64) -> Result<Self, AudioError> {
        let policy = Self {
            mode,
            min_duration_s,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn equal_splits(n: usize, min_duration_s: f64) -> Result<Self, AudioError> {
        Self::new(SegmentMode::EqualSplits(n), min_duration_s)
    }

    pub fn fixed_window(duration_s: f64, min_duration_s: f64) -> Result<Self, AudioError> {
        Self::new(SegmentMode::FixedWindow(duration_s), min_duration_s)
    }

    /// Shortest duration that still yields `min_frames` centred STFT frames
    /// with the given hop: `(min_frames - 1) * hop` samples.
    pub fn min_duration_for(min_frames: usize, hop: usize, sample_rate: u32) -> f64 {
        (min_frames.saturating_sub(1) * hop) as f64 / sample_rate as f64
    }

    pub fn validate(&self) -> Result<(), AudioError> {
        if !(self.min_duration_s.is_finite() && self.min_duration_s > 0.0) {
            return Err(AudioError::InvalidPolicy(
                "min_duration_s must be positive".into(),
            ));
        }
        match self.mode {
            SegmentMode::EqualSplits(0) => {
                Err(AudioError::InvalidPolicy("equal_splits needs n >= 1".into()))
            }
            SegmentMode::FixedWindow(d) if !(d.is_finite() && d >= self.min_duration_s) => {
                Err(AudioError::InvalidPolicy(format!(
                    "window {d} s is shorter than the minimum {} s",
                    self.min_duration_s
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Smallest sample count whose duration reaches `seconds`.
pub(crate) fn samples_for(seconds: f64, rate: u32) -> usize {
    (seconds * rate as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Frame ranges for each segment of a clip with `frames` sample frames.
pub fn segment_bounds(
    frames: usize,
    sample_rate: u32,
    policy: &SegmentPolicy,
) -> Result<Vec<Range<usize>>, AudioError> {
    policy.validate()?;
    let min_len = samples_for(policy.min_duration_s, sample_rate);
    let too_short = || AudioError::ClipTooShort {
        duration_s: frames as f64 / sample_rate as f64,
        min_duration_s: policy.min_duration_s,
    };
    if frames < min_len.max(1) {
        return Err(too_short());
    }
    let bounds = match policy.mode {
        SegmentMode::EqualSplits(n) => {
            let base = frames / n;
            if base < min_len.max(1) {
                return Err(AudioError::ClipTooShort {
                    duration_s: frames as f64 / sample_rate as f64,
                    min_duration_s: policy.min_duration_s * n as f64,
                });
            }
            (0..n)
                .map(|i| {
                    let end = if i + 1 == n { frames } else { (i + 1) * base };
                    i * base..end
                })
                .collect()
        }
        SegmentMode::FixedWindow(d) => {
            let win = ((d * sample_rate as f64).round() as usize).max(1);
            let mut out: Vec<Range<usize>> = Vec::new();
            let mut start = 0;
            while start < frames {
                let end = (start + win).min(frames);
                if end - start < min_len {
                    match out.last_mut() {
                        Some(prev) => prev.end = end,
                        None => out.push(start..end),
                    }
                } else {
                    out.push(start..end);
                }
                start = end;
            }
            out
        }
    };
    Ok(bounds)
}

/// Splits a clip per `policy`. Concatenating the pieces reproduces the clip.
pub fn segment(clip: &AudioClip, policy: &SegmentPolicy) -> Result<Vec<AudioClip>, AudioError> {
    Ok(segment_bounds(clip.frames(), clip.sample_rate(), policy)?
        .into_iter()
        .map(|r| clip.slice(r.start, r.end))
        .collect())
}
