//! Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel.

use super::AudioClip;

/// Zero crossings of the sinc kept on each side of the kernel centre.
const ZERO_CROSSINGS: f64 = 16.0;
const KAISER_BETA: f64 = 8.6;
/// Pass-band edge as a fraction of the lower of the two sample rates.
const CUTOFF_FRACTION: f64 = 0.45;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Precomputed filter bank for one (source, target) rate pair.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: u64,
    down: u64,
    /// Taps on each side of the centre; phase `p` covers input offsets
    /// `-(reach - 1)..=reach` relative to `floor(position)`.
    reach: i64,
    phases: Vec<Vec<f64>>,
}

impl Resampler {
    pub fn new(source_rate: u32, target_rate: u32) -> Self {
        assert!(source_rate > 0 && target_rate > 0, "sample rates must be positive");
        let g = gcd(source_rate as u64, target_rate as u64);
        let up = target_rate as u64 / g;
        let down = source_rate as u64 / g;
        // Cutoff in cycles per input sample.
        let cutoff_hz = CUTOFF_FRACTION * source_rate.min(target_rate) as f64;
        let fc = cutoff_hz / source_rate as f64;
        let half_width = ZERO_CROSSINGS / (2.0 * fc);
        let reach = half_width.ceil() as i64;
        let i0_beta = bessel_i0(KAISER_BETA);

        let kernel = |t: f64| -> f64 {
            if t.abs() >= half_width {
                return 0.0;
            }
            let x = 2.0 * fc * t;
            let sinc = if x == 0.0 {
                1.0
            } else {
                (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
            };
            let r = t / half_width;
            let window = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            2.0 * fc * sinc * window
        };

        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut taps: Vec<f64> = (-(reach - 1)..=reach)
                    .map(|d| kernel(frac - d as f64))
                    .collect();
                // Unit DC gain per phase keeps constant signals exact.
                let sum: f64 = taps.iter().sum();
                taps.iter_mut().for_each(|t| *t /= sum);
                taps
            })
            .collect();
        Self {
            up,
            down,
            reach,
            phases,
        }
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        ((input_len as u64 * self.up + self.down / 2) / self.down) as usize
    }

    /// Resamples one mono channel. Samples beyond either end are taken as
    /// the nearest edge sample.
    pub fn process(&self, input: &[f32]) -> Vec<f32> {
        if input.is_empty() {
            return Vec::new();
        }
        if self.up == self.down {
            return input.to_vec();
        }
        let last = input.len() as i64 - 1;
        (0..self.output_len(input.len()) as u64)
            .map(|j| {
                let num = j * self.down;
                let base = (num / self.up) as i64;
                let taps = &self.phases[(num % self.up) as usize];
                let start = base - (self.reach - 1);
                let acc: f64 = taps
                    .iter()
                    .enumerate()
                    .map(|(i, &w)| {
                        let idx = (start + i as i64).clamp(0, last) as usize;
                        w * input[idx] as f64
                    })
                    .sum();
                acc as f32
            })
            .collect()
    }
}

/// Resamples a mono clip to `target_rate`. Same-rate calls return the
/// input unchanged.
///
/// Panics if the clip is not mono.
pub fn resample(clip: &AudioClip, target_rate: u32) -> AudioClip {
    assert!(clip.is_mono(), "resample expects a mono clip");
    if clip.sample_rate() == target_rate {
        return clip.clone();
    }
    let out = Resampler::new(clip.sample_rate(), target_rate).process(clip.samples());
    // Ringing near full-scale transients can overshoot; keep the clip invariant.
    let samples = out
        .into_iter()
        .map(|s| s.clamp(-1.0, super::MAX_AMPLITUDE))
        .collect();
    AudioClip {
        samples,
        sample_rate: target_rate,
        channels: 1,
        source_id: clip.source_id().to_string(),
    }
}
