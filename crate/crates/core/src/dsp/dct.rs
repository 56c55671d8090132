//! Orthonormal type-II DCT.

/// First `n_out` rows of the orthonormal `N`-point DCT-II matrix.
#[derive(Debug, Clone)]
pub struct DctMatrix {
    n: usize,
    n_out: usize,
    /// Row-major `(n_out, n)`.
    coeffs: Vec<f64>,
}

impl DctMatrix {
    pub fn new(n: usize, n_out: usize) -> Self {
        assert!(n >= 1 && n_out <= n, "need 1 <= n_out <= n");
        let mut coeffs = Vec::with_capacity(n_out * n);
        for k in 0..n_out {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            for i in 0..n {
                let ang = std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64;
                coeffs.push(scale * ang.cos());
            }
        }
        Self { n, n_out, coeffs }
    }

    pub fn input_len(&self) -> usize {
        self.n
    }

    pub fn output_len(&self) -> usize {
        self.n_out
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.coeffs[k * self.n..(k + 1) * self.n]
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.n);
        for (k, o) in out.iter_mut().enumerate().take(self.n_out) {
            *o = self.row(k).iter().zip(v).map(|(c, x)| c * x).sum();
        }
    }

    /// `Qᵀ y`; the exact inverse when `n_out == n`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (k, &yk) in y.iter().enumerate().take(self.n_out) {
            for (o, c) in out.iter_mut().zip(self.row(k)) {
                *o += c * yk;
            }
        }
        out
    }
}

/// Orthonormal DCT-II of `v`.
pub fn dct2_ortho(v: &[f64]) -> Vec<f64> {
    let m = DctMatrix::new(v.len(), v.len());
    let mut out = vec![0.0; v.len()];
    m.apply(v, &mut out);
    out
}

/// Inverse of [`dct2_ortho`] (orthonormal DCT-III).
pub fn idct2_ortho(x: &[f64]) -> Vec<f64> {
    DctMatrix::new(x.len(), x.len()).apply_transpose(x)
}
