use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Descriptor {
    MelSpectrogramDb,
    Mfcc,
    /// Mel spectrogram left in linear power units.
    MelSpectrogramPower,
}

impl Descriptor {
    pub fn tag(self) -> u8 {
        match self {
            Descriptor::MelSpectrogramDb => 0,
            Descriptor::Mfcc => 1,
            Descriptor::MelSpectrogramPower => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Descriptor::MelSpectrogramDb),
            1 => Some(Descriptor::Mfcc),
            2 => Some(Descriptor::MelSpectrogramPower),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Descriptor::MelSpectrogramDb => "mel_spectrogram_db",
            Descriptor::Mfcc => "mfcc",
            Descriptor::MelSpectrogramPower => "mel_spectrogram_power",
        }
    }
}

impl std::str::FromStr for Descriptor {
    type Err = DspError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mfcc" => Ok(Descriptor::Mfcc),
            "mel" | "mel_spectrogram" | "mel_spectrogram_db" => Ok(Descriptor::MelSpectrogramDb),
            "mel_spectrogram_power" | "mel_power" => Ok(Descriptor::MelSpectrogramPower),
            other => Err(DspError::InvalidConfig(format!("unknown descriptor '{other}'"))),
        }
    }
}

impl std::fmt::Display for Descriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

const FMAP_MAGIC: &[u8; 4] = b"FMAP";
const FMAP_VERSION: u32 = 1;
const FMAP_HEADER_LEN: usize = 4 + 4 + 4 + 4 + 1;

/// `(bins, frames)` feature matrix, treated as a single-channel image by
/// the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    bins: usize,
    frames: usize,
    /// Row-major `(bins, frames)`.
    values: Vec<f64>,
    frame_times: Vec<f64>,
    descriptor: Descriptor,
}

impl FeatureMap {
    pub fn new(
        bins: usize,
        frames: usize,
        values: Vec<f64>,
        frame_times: Vec<f64>,
        descriptor: Descriptor,
    ) -> Result<Self, DspError> {
        if bins == 0 || frames == 0 {
            return Err(DspError::InvalidFeatureMap("empty feature map".into()));
        }
        if values.len() != bins * frames || frame_times.len() != frames {
            return Err(DspError::InvalidFeatureMap(format!(
                "{} values / {} times for shape ({bins}, {frames})",
                values.len(),
                frame_times.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DspError::InvalidFeatureMap("non-finite entry".into()));
        }
        if frame_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DspError::InvalidFeatureMap(
                "frame times must strictly increase".into(),
            ));
        }
        Ok(Self {
            bins,
            frames,
            values,
            frame_times,
            descriptor,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.bins, self.frames)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frame_times(&self) -> &[f64] {
        &self.frame_times
    }

    pub fn descriptor(&self) -> Descriptor {
        self.descriptor
    }

    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.values[bin * self.frames + frame]
    }

    pub fn row(&self, bin: usize) -> &[f64] {
        &self.values[bin * self.frames..(bin + 1) * self.frames]
    }

    pub fn column(&self, frame: usize) -> Vec<f64> {
        (0..self.bins).map(|b| self.get(b, frame)).collect()
    }

    /// Bins as rows, frames as columns, 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 16);
        for b in 0..self.bins {
            for (i, v) in self.row(b).iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v:.8e}");
            }
            out.push('\n');
        }
        out
    }

    /// Binary `FMAP` form: magic, u32 version, u32 bins, u32 frames, u8
    /// descriptor tag, then little-endian `f32` values row-major.
    pub fn to_fmap_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FMAP_HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(FMAP_MAGIC);
        out.extend_from_slice(&FMAP_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.bins as u32).to_le_bytes());
        out.extend_from_slice(&(self.frames as u32).to_le_bytes());
        out.push(self.descriptor.tag());
        for &v in &self.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    /// Parses the `FMAP` form. The format carries no timing, so frame
    /// times are rebuilt as `offset_s + t * hop_s`.
    pub fn from_fmap_bytes(bytes: &[u8], hop_s: f64, offset_s: f64) -> Result<Self, DspError> {
        let bad = |m: &str| DspError::MalformedFeatureFile(m.to_string());
        if bytes.len() < FMAP_HEADER_LEN {
            return Err(bad("shorter than header"));
        }
        if &bytes[0..4] != FMAP_MAGIC {
            return Err(bad("bad magic"));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        if word(4) != FMAP_VERSION {
            return Err(bad("unsupported version"));
        }
        let bins = word(8) as usize;
        let frames = word(12) as usize;
        let descriptor = Descriptor::from_tag(bytes[16]).ok_or_else(|| bad("unknown descriptor tag"))?;
        let payload = &bytes[FMAP_HEADER_LEN..];
        if payload.len() != 4 * bins * frames {
            return Err(bad("payload length does not match shape"));
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let times = (0..frames).map(|t| offset_s + t as f64 * hop_s).collect();
        Self::new(bins, frames, values, times, descriptor)
    }
}
