use serde::{Deserialize, Serialize};

use super::{shape_err, NnError, Rng, Scalar, Tensor};

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::ZERO { v } else { T::ZERO })
}

/// Passes `upstream` where `x > 0`; the derivative at exactly 0 is 0.
pub fn relu_backward<T: Scalar>(upstream: &Tensor<T>, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    if upstream.shape() != x.shape() {
        return Err(shape_err("relu_backward: upstream and input shapes differ"));
    }
    let data = upstream
        .data()
        .iter()
        .zip(x.data())
        .map(|(&g, &v)| if v > T::ZERO { g } else { T::ZERO })
        .collect();
    Tensor::from_vec(x.shape(), data)
}

/// Inverted dropout. Returns the output and the per-element scale mask
/// (`0` or `1 / (1 - rate)`) needed for the backward pass. With
/// `training == false` it is the identity.
pub fn dropout<T: Scalar>(
    x: &Tensor<T>,
    rate: f64,
    rng: &mut Rng,
    training: bool,
) -> (Tensor<T>, Tensor<T>) {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if !training || rate == 0.0 {
        return (x.clone(), Tensor::full(x.shape(), T::ONE));
    }
    let keep = T::from_f64(1.0 / (1.0 - rate));
    let mask_data: Vec<T> = (0..x.len())
        .map(|_| if rng.uniform() < rate { T::ZERO } else { keep })
        .collect();
    let out = x.data().iter().zip(&mask_data).map(|(&v, &m)| v * m).collect();
    (
        Tensor::from_vec(x.shape(), out).expect("same shape"),
        Tensor::from_vec(x.shape(), mask_data).expect("same shape"),
    )
}

pub fn dropout_backward<T: Scalar>(upstream: &Tensor<T>, mask: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    if upstream.shape() != mask.shape() {
        return Err(shape_err("dropout_backward: upstream and mask shapes differ"));
    }
    let data = upstream.data().iter().zip(mask.data()).map(|(&g, &m)| g * m).collect();
    Tensor::from_vec(mask.shape(), data)
}

/// Valid `(height, width)` region of a zero-padded sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extent {
    pub h: usize,
    pub w: usize,
}

impl Extent {
    pub fn new(h: usize, w: usize) -> Self {
        Self { h, w }
    }
}

fn resolve_extents(
    n: usize,
    h: usize,
    w: usize,
    mask: Option<&[Extent]>,
) -> Result<Vec<Extent>, NnError> {
    match mask {
        None => {
            if h == 0 || w == 0 {
                return Err(NnError::EmptyValidRegion { sample: 0 });
            }
            Ok(vec![Extent::new(h, w); n])
        }
        Some(m) => {
            if m.len() != n {
                return Err(shape_err(format!("{} extents for a batch of {n}", m.len())));
            }
            for (i, e) in m.iter().enumerate() {
                if e.h == 0 || e.w == 0 || e.h > h || e.w > w {
                    return Err(NnError::EmptyValidRegion { sample: i });
                }
            }
            Ok(m.to_vec())
        }
    }
}

/// Mean over the (optionally masked) spatial region: `(N,H,W,C) → (N,C)`.
pub fn global_average_pool<T: Scalar>(x: &Tensor<T>, mask: Option<&[Extent]>) -> Result<Tensor<T>, NnError> {
    let (n, h, w, c) = x.dims4("pool input")?;
    let extents = resolve_extents(n, h, w, mask)?;
    let mut out = Vec::with_capacity(n * c);
    let mut acc = vec![0.0f64; c];
    for (b, e) in extents.iter().enumerate() {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for i in 0..e.h {
            for j in 0..e.w {
                let px = &x.data()[((b * h + i) * w + j) * c..][..c];
                for (a, &v) in acc.iter_mut().zip(px) {
                    *a += v.to_f64();
                }
            }
        }
        let count = (e.h * e.w) as f64;
        out.extend(acc.iter().map(|&a| T::from_f64(a / count)));
    }
    Tensor::from_vec(&[n, c], out)
}

/// Spreads `upstream[n,c] / (h_n·w_n)` over each valid region; padding gets 0.
pub fn global_average_pool_backward<T: Scalar>(
    upstream: &Tensor<T>,
    input_shape: &[usize],
    mask: Option<&[Extent]>,
) -> Result<Tensor<T>, NnError> {
    let [n, h, w, c] = input_shape[..] else {
        return Err(shape_err("pool input shape must be rank 4"));
    };
    if upstream.shape() != [n, c] {
        return Err(shape_err(format!(
            "pool upstream {:?}, expected [{n}, {c}]",
            upstream.shape()
        )));
    }
    let extents = resolve_extents(n, h, w, mask)?;
    let mut grad = Tensor::zeros(input_shape);
    for (b, e) in extents.iter().enumerate() {
        let scale = T::from_f64(1.0 / (e.h * e.w) as f64);
        let g: Vec<T> = upstream.data()[b * c..(b + 1) * c].iter().map(|&u| u * scale).collect();
        for i in 0..e.h {
            for j in 0..e.w {
                let at = ((b * h + i) * w + j) * c;
                grad.data_mut()[at..at + c].copy_from_slice(&g);
            }
        }
    }
    Ok(grad)
}

/// Row-wise softmax with max shift.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let (n, c) = logits.dims2("logits")?;
    let mut out = Vec::with_capacity(n * c);
    for row in logits.data().chunks_exact(c) {
        let max = row.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v.to_f64() - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| T::from_f64(e / sum)));
    }
    Tensor::from_vec(&[n, c], out)
}

#[derive(Debug, Clone)]
pub struct LossOutput<T> {
    /// Mean cross-entropy over the batch.
    pub loss: f64,
    pub probs: Tensor<T>,
    /// `(probs - onehot) / N`.
    pub grad_logits: Tensor<T>,
}

/// Softmax followed by categorical cross-entropy, fused for stability.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    onehot: &Tensor<T>,
) -> Result<LossOutput<T>, NnError> {
    let (n, c) = logits.dims2("logits")?;
    if onehot.shape() != logits.shape() {
        return Err(shape_err(format!(
            "targets {:?} vs logits {:?}",
            onehot.shape(),
            logits.shape()
        )));
    }
    let mut loss = 0.0;
    let mut probs = Vec::with_capacity(n * c);
    let mut grad = Vec::with_capacity(n * c);
    for (row, target) in logits.data().chunks_exact(c).zip(onehot.data().chunks_exact(c)) {
        let max = row.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
        let shifted: Vec<f64> = row.iter().map(|v| v.to_f64() - max).collect();
        let log_sum = shifted.iter().map(|s| s.exp()).sum::<f64>().ln();
        for (&s, &y) in shifted.iter().zip(target) {
            let log_p = s - log_sum;
            let p = log_p.exp();
            let y = y.to_f64();
            if y != 0.0 {
                loss -= y * log_p;
            }
            probs.push(T::from_f64(p));
            grad.push(T::from_f64((p - y) / n as f64));
        }
    }
    Ok(LossOutput {
        loss: loss / n as f64,
        probs: Tensor::from_vec(&[n, c], probs)?,
        grad_logits: Tensor::from_vec(&[n, c], grad)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: Vec<f64>) -> Tensor<f64> {
        Tensor::from_vec(shape, v).unwrap()
    }

    #[test]
    fn relu_cases() {
        assert_eq!(relu(&t(&[3], vec![-1.0, 0.0, 2.0])).data(), &[0.0, 0.0, 2.0]);
        let pos = t(&[2], vec![0.5, 3.0]);
        assert_eq!(relu(&pos), pos);
        let g = relu_backward(&t(&[2], vec![5.0, 7.0]), &t(&[2], vec![-1.0, 3.0])).unwrap();
        assert_eq!(g.data(), &[0.0, 7.0]);
        let g0 = relu_backward(&t(&[1], vec![5.0]), &t(&[1], vec![0.0])).unwrap();
        assert_eq!(g0.data(), &[0.0]);
    }

    #[test]
    fn dropout_modes() {
        let x = t(&[4], vec![1.0, 2.0, 3.0, 4.0]);
        let mut rng = Rng::new(0);
        let (y, _) = dropout(&x, 0.9, &mut rng, false);
        assert_eq!(y, x);
        let (y, m) = dropout(&x, 0.0, &mut rng, true);
        assert_eq!(y, x);
        assert!(m.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn dropout_expectation() {
        let x = Tensor::<f64>::full(&[1_000_000], 1.0);
        let (y, mask) = dropout(&x, 0.5, &mut Rng::new(9), true);
        let mean = y.data().iter().sum::<f64>() / y.len() as f64;
        assert!((0.99..=1.01).contains(&mean), "{mean}");
        assert!(mask.data().iter().all(|&m| m == 0.0 || m == 2.0));
        let g = dropout_backward(&Tensor::full(&[1_000_000], 1.0), &mask).unwrap();
        assert_eq!(g, mask);
    }

    #[test]
    fn pool_mean() {
        let x = t(&[1, 2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(global_average_pool(&x, None).unwrap().data(), &[2.5]);
        let c = Tensor::<f64>::full(&[2, 3, 4, 2], 1.5);
        let masked = global_average_pool(&c, Some(&[Extent::new(1, 2), Extent::new(3, 4)])).unwrap();
        assert!(masked.data().iter().all(|&v| v == 1.5));
    }

    #[test]
    fn masked_pool_ignores_padding() {
        // Sample 0 is 2x2 padded into 3x3 with garbage in the padding.
        let mut x = Tensor::<f64>::full(&[1, 3, 3, 1], 100.0);
        for (i, v) in [(0, 1.0), (1, 2.0), (3, 3.0), (4, 4.0)] {
            x.data_mut()[i] = v;
        }
        let out = global_average_pool(&x, Some(&[Extent::new(2, 2)])).unwrap();
        assert_eq!(out.data(), &[2.5]);
        let g = global_average_pool_backward(&t(&[1, 1], vec![1.0]), &[1, 3, 3, 1], Some(&[Extent::new(2, 2)])).unwrap();
        assert_eq!(g.data(), &[0.25, 0.25, 0.0, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            global_average_pool(&x, Some(&[Extent::new(0, 2)])),
            Err(NnError::EmptyValidRegion { sample: 0 })
        ));
        assert!(global_average_pool(&x, Some(&[Extent::new(4, 2)])).is_err());
    }

    #[test]
    fn uniform_logits() {
        let c = 7;
        let logits = Tensor::<f64>::zeros(&[2, c]);
        let mut y = Tensor::zeros(&[2, c]);
        y.data_mut()[3] = 1.0;
        y.data_mut()[c] = 1.0;
        let out = softmax_cross_entropy(&logits, &y).unwrap();
        assert!((out.loss - (c as f64).ln()).abs() < 1e-12);
        assert!(out.probs.data().iter().all(|&p| (p - 1.0 / c as f64).abs() < 1e-12));
    }

    #[test]
    fn saturated_logits() {
        let logits = t(&[1, 3], vec![0.0, 1000.0, 0.0]);
        let y = t(&[1, 3], vec![0.0, 1.0, 0.0]);
        let out = softmax_cross_entropy(&logits, &y).unwrap();
        assert!(out.loss < 1e-6);
        assert!(out.probs.all_finite() && out.grad_logits.all_finite());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = Rng::new(4);
        let logits = Tensor::from_vec(&[5, 9], (0..45).map(|_| rng.uniform_range(-50.0, 50.0)).collect()).unwrap();
        let p: Tensor<f64> = softmax(&logits).unwrap();
        for row in p.data().chunks(9) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}
