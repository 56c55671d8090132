//! Minimal RIFF/WAVE reader and PCM16 writer.

use std::path::Path;

use super::{AudioClip, AudioError, MAX_AMPLITUDE};

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_IEEE_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Format and size information gathered from the chunk headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavInfo {
    pub format_tag: u16,
    pub channels: u16,
    pub sample_rate: u32,
    pub bits_per_sample: u16,
    pub block_align: u16,
    /// Number of sample frames in the data chunk.
    pub frames: usize,
}

impl WavInfo {
    pub fn duration_s(&self) -> f64 {
        self.frames as f64 / self.sample_rate as f64
    }
}

fn malformed(msg: impl Into<String>) -> AudioError {
    AudioError::MalformedContainer(msg.into())
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Walks the chunk list and returns the format plus the byte range of the
/// sample data.
fn parse(bytes: &[u8]) -> Result<(WavInfo, std::ops::Range<usize>), AudioError> {
    if bytes.len() < 12 {
        return Err(malformed("file shorter than the RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(malformed(format!(
            "expected RIFF magic, found {:?}",
            String::from_utf8_lossy(&bytes[0..4])
        )));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing WAVE form type"));
    }

    let mut fmt: Option<(u16, u16, u32, u16, u16)> = None;
    let mut data: Option<std::ops::Range<usize>> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + 16 > bytes.len() {
                    return Err(malformed("fmt chunk too short"));
                }
                let mut tag = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let rate = u32_at(bytes, body + 4);
                let block_align = u16_at(bytes, body + 12);
                let bits = u16_at(bytes, body + 14);
                if tag == FORMAT_EXTENSIBLE {
                    // cbSize(2) validBits(2) channelMask(4) then the GUID,
                    // whose first two bytes are the real format tag.
                    if size < 40 || body + 26 > bytes.len() {
                        return Err(malformed("truncated WAVE_FORMAT_EXTENSIBLE header"));
                    }
                    tag = u16_at(bytes, body + 24);
                }
                fmt = Some((tag, channels, rate, block_align, bits));
            }
            b"data" => {
                // Streaming writers leave the size unset; take what is there.
                let end = body.saturating_add(size).min(bytes.len());
                data = Some(body..end);
            }
            _ => {}
        }
        if data.is_some() && fmt.is_some() {
            break;
        }
        pos = body.saturating_add(size).saturating_add(size & 1);
    }

    let (tag, channels, sample_rate, block_align, bits) =
        fmt.ok_or_else(|| malformed("no fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("no data chunk"))?;
    match (tag, bits) {
        (FORMAT_PCM, 8 | 16 | 24 | 32) | (FORMAT_IEEE_FLOAT, 32) => {}
        (FORMAT_PCM | FORMAT_IEEE_FLOAT, b) => {
            return Err(AudioError::UnsupportedEncoding(format!(
                "{b}-bit samples with format tag {tag:#06x}"
            )))
        }
        (t, _) => {
            return Err(AudioError::UnsupportedEncoding(format!(
                "compressed or unknown format tag {t:#06x}"
            )))
        }
    }
    if channels == 0 || sample_rate == 0 {
        return Err(malformed("zero channels or sample rate"));
    }
    let expected_align = channels as usize * (bits as usize / 8);
    if block_align as usize != expected_align {
        return Err(malformed(format!(
            "block align {block_align} does not match {channels} x {bits}-bit"
        )));
    }
    let frames = data.len() / expected_align;
    let data = data.start..data.start + frames * expected_align;
    Ok((
        WavInfo {
            format_tag: tag,
            channels,
            sample_rate,
            bits_per_sample: bits,
            block_align,
            frames,
        },
        data,
    ))
}

/// Reads format information without converting samples.
pub fn probe_wav(bytes: &[u8]) -> Result<WavInfo, AudioError> {
    parse(bytes).map(|(info, _)| info)
}

/// Decodes a PCM (8/16/24/32-bit) or 32-bit float WAVE file into `[-1, 1)`.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    let (info, range) = parse(bytes)?;
    let raw = &bytes[range];
    let samples: Vec<f32> = match (info.format_tag, info.bits_per_sample) {
        (FORMAT_PCM, 8) => raw.iter().map(|&b| (b as f32 - 128.0) / 128.0).collect(),
        (FORMAT_PCM, 16) => raw
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32_768.0)
            .collect(),
        (FORMAT_PCM, 24) => raw
            .chunks_exact(3)
            .map(|c| {
                let v = i32::from_le_bytes([0, c[0], c[1], c[2]]) >> 8;
                v as f32 / 8_388_608.0
            })
            .collect(),
        (FORMAT_PCM, 32) => raw
            .chunks_exact(4)
            .map(|c| {
                let v = i32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                // f32 rounding can land exactly on 1.0 for the top codes.
                ((v as f64) / 2_147_483_648.0).min(MAX_AMPLITUDE as f64) as f32
            })
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => {
            let mut out = Vec::with_capacity(raw.len() / 4);
            for c in raw.chunks_exact(4) {
                let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                if !v.is_finite() {
                    return Err(malformed("non-finite float sample"));
                }
                out.push(v.clamp(-1.0, MAX_AMPLITUDE));
            }
            out
        }
        _ => unreachable!("validated in parse"),
    };
    AudioClip::new(samples, info.sample_rate, info.channels, "")
}

/// Encodes a clip as 16-bit PCM with round-to-nearest quantisation.
pub fn encode_wav_pcm16(clip: &AudioClip) -> Vec<u8> {
    let channels = clip.channels();
    let data_len = clip.samples().len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate().to_le_bytes());
    let block_align = channels * 2;
    out.extend_from_slice(&(clip.sample_rate() * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in clip.samples() {
        let q = (s as f64 * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

/// Reads and decodes a WAVE file; the clip's source id is the path.
pub fn read_wav(path: &Path) -> crate::Result<AudioClip> {
    let bytes = std::fs::read(path)?;
    Ok(decode_wav(&bytes)?.with_source_id(path.display().to_string()))
}

pub fn write_wav_pcm16(path: &Path, clip: &AudioClip) -> std::io::Result<()> {
    std::fs::write(path, encode_wav_pcm16(clip))
}
