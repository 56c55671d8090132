//! Mel scale `m = 1127.01048 · ln(1 + f / 700)` and triangular filterbank.

use serde::{Deserialize, Serialize};

use super::DspError;

/// Chosen so that 1000 Hz maps to 1000 mel.
pub const MEL_SCALE: f64 = 1127.01048;
pub const MEL_BREAK_HZ: f64 = 700.0;

pub(crate) fn hz_to_mel_raw(f: f64) -> f64 {
    MEL_SCALE * (f / MEL_BREAK_HZ).ln_1p()
}

pub(crate) fn mel_to_hz_raw(m: f64) -> f64 {
    MEL_BREAK_HZ * (m / MEL_SCALE).exp_m1()
}

pub fn hz_to_mel(f: f64) -> Result<f64, DspError> {
    if f < 0.0 || f.is_nan() {
        return Err(DspError::NegativeFrequency(f));
    }
    Ok(hz_to_mel_raw(f))
}

pub fn mel_to_hz(m: f64) -> Result<f64, DspError> {
    if m < 0.0 || m.is_nan() {
        return Err(DspError::NegativeFrequency(m));
    }
    Ok(mel_to_hz_raw(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MelConfig {
    pub n_mels: usize,
    pub f_min: f64,
    /// Defaults to the Nyquist frequency when `None`.
    pub f_max: Option<f64>,
    /// Exponent applied to STFT magnitudes (2 = power).
    pub power: f64,
    pub db_floor: f64,
    /// Convert the Mel spectrogram to decibels. MFCCs always use decibels.
    pub to_db: bool,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_mels: 128,
            f_min: 0.0,
            f_max: None,
            power: 2.0,
            db_floor: -80.0,
            to_db: true,
        }
    }
}

impl MelConfig {
    pub fn f_max_for(&self, sample_rate: u32) -> f64 {
        self.f_max.unwrap_or(sample_rate as f64 / 2.0)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<(), DspError> {
        let nyquist = sample_rate as f64 / 2.0;
        let f_max = self.f_max_for(sample_rate);
        if self.n_mels < 2 {
            return Err(DspError::InvalidConfig("n_mels must be at least 2".into()));
        }
        if !(self.f_min >= 0.0 && self.f_min < f_max && f_max <= nyquist) {
            return Err(DspError::InvalidConfig(format!(
                "need 0 <= f_min ({}) < f_max ({f_max}) <= {nyquist}",
                self.f_min
            )));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(DspError::InvalidConfig("power must be positive".into()));
        }
        if !(self.db_floor.is_finite() && self.db_floor < 0.0) {
            return Err(DspError::InvalidConfig("db_floor must be negative".into()));
        }
        Ok(())
    }
}

/// `n_mels + 2` corner frequencies equally spaced in mel between `f_min` and
/// `f_max`.
pub fn mel_corner_frequencies(n_mels: usize, f_min: f64, f_max: f64) -> Vec<f64> {
    let lo = hz_to_mel_raw(f_min);
    let hi = hz_to_mel_raw(f_max);
    (0..n_mels + 2)
        .map(|i| mel_to_hz_raw(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect()
}

/// Triangles with corners at mel-spaced frequencies, sampled at the FFT
/// bin frequencies and rescaled so each row peaks at exactly 1. Stored
/// sparsely per row.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    n_bins: usize,
    /// First non-zero, peak and last non-zero bin per filter.
    corners: Vec<(usize, usize, usize)>,
    center_hz: Vec<f64>,
    /// Row `m` holds weights for bins `corners[m].0..=corners[m].2`.
    rows: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(cfg: &MelConfig, n_fft: usize, sample_rate: u32) -> Result<Self, DspError> {
        cfg.validate(sample_rate)?;
        let n_bins = n_fft / 2 + 1;
        let hz = mel_corner_frequencies(cfg.n_mels, cfg.f_min, cfg.f_max_for(sample_rate));
        let snap = |f: f64| -> usize {
            ((f * n_fft as f64 / sample_rate as f64).round() as usize).min(n_bins - 1)
        };
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let mut corners = Vec::with_capacity(cfg.n_mels);
        let mut rows = Vec::with_capacity(cfg.n_mels);
        for m in 0..cfg.n_mels {
            let (fl, fc, fr) = (hz[m], hz[m + 1], hz[m + 2]);
            let tri = |k: usize| {
                let f = k as f64 * bin_hz;
                ((f - fl) / (fc - fl)).min((fr - f) / (fr - fc)).max(0.0)
            };
            // Support: bins strictly inside (fl, fr).
            let lo = ((fl / bin_hz).floor() as usize + 1).min(n_bins - 1);
            let hi = ((fr / bin_hz).ceil() as usize).saturating_sub(1).min(n_bins - 1);
            let mut weights: Vec<f64> = if lo <= hi { (lo..=hi).map(tri).collect() } else { Vec::new() };
            let peak = weights.iter().cloned().fold(0.0, f64::max);
            let (l, row) = if peak > 0.0 {
                weights.iter_mut().for_each(|w| *w /= peak);
                (lo, weights)
            } else {
                // Filter narrower than one bin: a unit spike at the nearest bin.
                (snap(fc), vec![1.0])
            };
            let c = l + row.iter().position(|&w| w == 1.0).expect("unit peak");
            corners.push((l, c, l + row.len() - 1));
            rows.push(row);
        }
        Ok(Self {
            n_bins,
            corners,
            center_hz: hz[1..=cfg.n_mels].to_vec(),
            rows,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.rows.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Unsnapped centre frequency of each filter, in Hz.
    pub fn center_hz(&self) -> &[f64] {
        &self.center_hz
    }

    pub fn corners(&self) -> &[(usize, usize, usize)] {
        &self.corners
    }

    /// Dense `(n_mels, n_bins)` weight matrix.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .zip(&self.corners)
            .map(|(row, &(l, _, _))| {
                let mut dense = vec![0.0; self.n_bins];
                dense[l..l + row.len()].copy_from_slice(row);
                dense
            })
            .collect()
    }

    /// `out[m] = Σ_k weight[m][k] · spectrum[k]`.
    pub fn apply(&self, spectrum: &[f64], out: &mut [f64]) {
        for ((o, row), &(l, _, _)) in out.iter_mut().zip(&self.rows).zip(&self.corners) {
            *o = row.iter().zip(&spectrum[l..]).map(|(w, s)| w * s).sum();
        }
    }
}

/// Dense `(n_mels, n_fft/2 + 1)` filterbank matrix.
pub fn mel_filterbank(
    cfg: &MelConfig,
    n_fft: usize,
    sample_rate: u32,
) -> Result<Vec<Vec<f64>>, DspError> {
    Ok(MelFilterbank::new(cfg, n_fft, sample_rate)?.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_points() {
        assert_eq!(hz_to_mel(0.0).unwrap(), 0.0);
        let m1000 = hz_to_mel(1000.0).unwrap();
        assert!((m1000 - 1000.0).abs() < 0.01, "{m1000}");
        let m700 = hz_to_mel(700.0).unwrap();
        assert!((m700 - 1127.01048 * 2f64.ln()).abs() < 1e-9);
        assert!((m700 - 781.18).abs() < 0.01);
        assert!(matches!(hz_to_mel(-1.0), Err(DspError::NegativeFrequency(_))));
        assert!(mel_to_hz(-0.5).is_err());
    }

    #[test]
    fn filterbank_shape_and_peaks() {
        let cfg = MelConfig {
            n_mels: 10,
            ..Default::default()
        };
        let fb = mel_filterbank(&cfg, 2048, 22_050).unwrap();
        assert_eq!(fb.len(), 10);
        assert!(fb.iter().all(|r| r.len() == 1025));
        for row in &fb {
            let peak = row.iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(peak, 1.0);
            assert!(row.iter().all(|&w| w >= 0.0));
            let argmax = row.iter().position(|&w| w == 1.0).unwrap();
            assert!(row[..=argmax].windows(2).all(|w| w[0] <= w[1]));
            assert!(row[argmax..].windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn centres_strictly_increase() {
        let fb = MelFilterbank::new(&MelConfig::default(), 2048, 22_050).unwrap();
        assert!(fb.center_hz().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn default_bank_has_no_gaps() {
        let fb = MelFilterbank::new(&MelConfig::default(), 2048, 22_050).unwrap();
        let dense = fb.matrix();
        let first = fb.corners()[0].0;
        let last = fb.corners().last().unwrap().2;
        for k in first + 1..last {
            assert!(dense.iter().any(|r| r[k] > 0.0), "gap at bin {k}");
        }
        // Neighbouring filters overlap.
        for m in 0..dense.len() - 1 {
            assert!((0..1025).any(|k| dense[m][k] > 0.0 && dense[m + 1][k] > 0.0));
        }
    }

    #[test]
    fn coarse_fft_keeps_unit_peaks() {
        // With few bins several corners snap together; peaks must stay at 1.
        let cfg = MelConfig {
            n_mels: 40,
            ..Default::default()
        };
        let fb = mel_filterbank(&cfg, 128, 22_050).unwrap();
        for row in fb {
            assert_eq!(row.iter().cloned().fold(f64::MIN, f64::max), 1.0);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = MelConfig::default();
        cfg.f_max = Some(20_000.0);
        assert!(cfg.validate(22_050).is_err());
        cfg.f_max = None;
        cfg.n_mels = 1;
        assert!(cfg.validate(22_050).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(f in 1.0f64..11_025.0) {
            let back = mel_to_hz(hz_to_mel(f).unwrap()).unwrap();
            prop_assert!((back - f).abs() <= 1e-6 * f);
        }

        #[test]
        fn strictly_increasing(a in 0.0f64..20_000.0, d in 1e-6f64..100.0) {
            prop_assert!(hz_to_mel(a + d).unwrap() > hz_to_mel(a).unwrap());
        }
    }
}
