//! Iterative radix-2 FFT.

use num_complex::Complex64;

use super::DspError;

/// Twiddles and bit-reversal table for one power-of-two length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    /// `e^{-2πik/n}` for `k < n/2`, each evaluated directly.
    twiddles: Vec<Complex64>,
    rev: Vec<usize>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self, DspError> {
        if n == 0 || !n.is_power_of_two() {
            return Err(DspError::LengthNotPowerOfTwo(n));
        }
        let bits = n.trailing_zeros();
        let rev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let ang = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Complex64::new(ang.cos(), ang.sin())
            })
            .collect();
        Ok(Self { n, twiddles, rev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place unnormalised forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n, "buffer length must match the plan");
        for i in 0..self.n {
            let j = self.rev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for block in data.chunks_exact_mut(len) {
                let (lo, hi) = block.split_at_mut(half);
                for (j, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let t = *b * self.twiddles[j * stride];
                    *b = *a - t;
                    *a += t;
                }
            }
            len <<= 1;
        }
    }

    /// In-place inverse transform, scaled by `1/n`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        data.iter_mut().for_each(|z| *z = z.conj());
        self.forward(data);
        let scale = 1.0 / self.n as f64;
        data.iter_mut().for_each(|z| *z = z.conj() * scale);
    }
}

/// Unnormalised DFT `X[k] = Σ x[n] e^{-2πikn/N}` of a power-of-two length
/// input.
pub fn fft(x: &[Complex64]) -> Result<Vec<Complex64>, DspError> {
    let plan = FftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.forward(&mut out);
    Ok(out)
}

/// Inverse of [`fft`], including the `1/N` factor.
pub fn ifft(x: &[Complex64]) -> Result<Vec<Complex64>, DspError> {
    let plan = FftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.inverse(&mut out);
    Ok(out)
}

/// Real-input FFT of length `n` computed with one complex FFT of `n/2`.
#[derive(Debug, Clone)]
pub struct RealFft {
    n: usize,
    half: FftPlan,
    /// `e^{-2πik/n}` for `k <= n/2`.
    twiddles: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl RealFft {
    /// `n` must be a power of two and at least 2.
    pub fn new(n: usize) -> Result<Self, DspError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(DspError::LengthNotPowerOfTwo(n));
        }
        let twiddles = (0..=n / 2)
            .map(|k| {
                let ang = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Complex64::new(ang.cos(), ang.sin())
            })
            .collect();
        Ok(Self {
            n,
            half: FftPlan::new(n / 2)?,
            twiddles,
            scratch: vec![Complex64::default(); n / 2],
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Writes the `n/2 + 1` non-negative-frequency bins of `input`.
    pub fn forward(&mut self, input: &[f64], out: &mut [Complex64]) {
        assert_eq!(input.len(), self.n);
        assert_eq!(out.len(), self.n / 2 + 1);
        let m = self.n / 2;
        for (z, pair) in self.scratch.iter_mut().zip(input.chunks_exact(2)) {
            *z = Complex64::new(pair[0], pair[1]);
        }
        self.half.forward(&mut self.scratch);
        let z = &self.scratch;
        for k in 0..=m {
            let zk = z[k % m];
            let zc = z[(m - k) % m].conj();
            let even = (zk + zc) * 0.5;
            let odd = (zk - zc) * Complex64::new(0.0, -0.5);
            out[k] = even + self.twiddles[k] * odd;
        }
    }
}
