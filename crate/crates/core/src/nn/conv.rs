//! Valid-padding, stride-1 2-D convolution on NHWC tensors.
//!
//! No im2col buffer is built. For an image with row stride `ws` (elements
//! per row, in pixels), output pixel `(i, j)` and kernel row `a` read the
//! contiguous run `x[((i + a)·ws + j)·cin ..][.. kw·cin]`. Flattening
//! `r = i·ws + j` turns those runs into the rows of a matrix with row stride
//! `cin`, so each kernel row is a single GEMM against an overlapping view of
//! the input. Rows with `j >= wo` wrap into the next image row and are
//! discarded afterwards.

use super::{shape_err, NnError, Scalar, Tensor};

/// Kernel geometry shared by the per-image routines.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvShape {
    pub kh: usize,
    pub kw: usize,
    pub cin: usize,
    pub cout: usize,
}

impl ConvShape {
    pub fn of(weights: &Tensor<impl Scalar>) -> Result<Self, NnError> {
        let (kh, kw, cin, cout) = weights.dims4("conv weights")?;
        Ok(Self { kh, kw, cin, cout })
    }
}

/// `full[r·cout + o] = Σ_a Σ_t x[(a·ws)·cin + r·cin + t] · w[a][t][o]` for
/// `r < (ho-1)·ws + wo`.
fn conv_rows<T: Scalar>(x: &[T], h: usize, w: usize, ws: usize, weights: &[T], s: ConvShape, full: &mut [T]) {
    let ho = h - s.kh + 1;
    let wo = w - s.kw + 1;
    let m = (ho - 1) * ws + wo;
    let k = s.kw * s.cin;
    assert!(x.len() >= ((h - 1) * ws + w) * s.cin, "input view out of bounds");
    assert!(full.len() >= m * s.cout);
    assert_eq!(weights.len(), s.kh * k * s.cout);
    for a in 0..s.kh {
        let beta = if a == 0 { T::ZERO } else { T::ONE };
        // SAFETY: the largest A index is ((h-1)·ws + w)·cin - 1, checked
        // above; B and C extents are checked by the asserts.
        unsafe {
            T::gemm(
                m,
                k,
                s.cout,
                T::ONE,
                x.as_ptr().add(a * ws * s.cin),
                s.cin as isize,
                1,
                weights.as_ptr().add(a * k * s.cout),
                s.cout as isize,
                1,
                beta,
                full.as_mut_ptr(),
                s.cout as isize,
                1,
            );
        }
    }
}

/// Forward pass for one `(h, w, cin)` image; returns `(ho, wo, cout)`.
pub(crate) fn conv_image_forward<T: Scalar>(
    x: &[T],
    h: usize,
    w: usize,
    weights: &[T],
    bias: &[T],
    s: ConvShape,
) -> Vec<T> {
    let ho = h - s.kh + 1;
    let wo = w - s.kw + 1;
    let m = (ho - 1) * w + wo;
    let mut full = vec![T::ZERO; m * s.cout];
    conv_rows(x, h, w, w, weights, s, &mut full);
    let mut out = Vec::with_capacity(ho * wo * s.cout);
    for i in 0..ho {
        for j in 0..wo {
            let src = &full[(i * w + j) * s.cout..(i * w + j + 1) * s.cout];
            out.extend(src.iter().zip(bias).map(|(&v, &b)| v + b));
        }
    }
    out
}

/// Kernel rotated by 180° with input/output channels swapped, as used by
/// the input-gradient convolution.
pub(crate) fn flip_kernel<T: Scalar>(weights: &[T], s: ConvShape) -> Vec<T> {
    let mut out = vec![T::ZERO; weights.len()];
    for a in 0..s.kh {
        for b in 0..s.kw {
            for c in 0..s.cin {
                for o in 0..s.cout {
                    let src = ((a * s.kw + b) * s.cin + c) * s.cout + o;
                    let dst = (((s.kh - 1 - a) * s.kw + (s.kw - 1 - b)) * s.cout + o) * s.cin + c;
                    out[dst] = weights[src];
                }
            }
        }
    }
    out
}

/// Backward pass for one image. Accumulates into `grad_w` / `grad_b` and
/// returns the input gradient when `flipped` (from [`flip_kernel`]) is
/// given.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_image_backward<T: Scalar>(
    dout: &[T],
    x: &[T],
    h: usize,
    w: usize,
    s: ConvShape,
    flipped: Option<&[T]>,
    grad_w: &mut [T],
    grad_b: &mut [T],
) -> Option<Vec<T>> {
    let ho = h - s.kh + 1;
    let wo = w - s.kw + 1;
    let m = (ho - 1) * w + wo;
    let k = s.kw * s.cin;
    debug_assert_eq!(dout.len(), ho * wo * s.cout);

    for px in dout.chunks_exact(s.cout) {
        for (g, &d) in grad_b.iter_mut().zip(px) {
            *g += d;
        }
    }

    // Upstream gradient laid out on the wrapped row grid; wrap rows stay 0.
    let mut dfull = vec![T::ZERO; m * s.cout];
    for i in 0..ho {
        let dst = i * w * s.cout;
        dfull[dst..dst + wo * s.cout].copy_from_slice(&dout[i * wo * s.cout..(i + 1) * wo * s.cout]);
    }
    assert!(x.len() >= h * w * s.cin);
    assert_eq!(grad_w.len(), s.kh * k * s.cout);
    for a in 0..s.kh {
        // SAFETY: Aᵀ is the same view as in the forward pass read with
        // swapped strides, so its extent is ((h-1)·w + w)·cin.
        unsafe {
            T::gemm(
                k,
                m,
                s.cout,
                T::ONE,
                x.as_ptr().add(a * w * s.cin),
                1,
                s.cin as isize,
                dfull.as_ptr(),
                s.cout as isize,
                1,
                T::ONE,
                grad_w.as_mut_ptr().add(a * k * s.cout),
                s.cout as isize,
                1,
            );
        }
    }

    let flipped = flipped?;
    // Full correlation of the zero-padded upstream with the flipped kernel.
    let hp = ho + 2 * (s.kh - 1);
    let wp = wo + 2 * (s.kw - 1);
    let mut dpad = vec![T::ZERO; hp * wp * s.cout];
    for i in 0..ho {
        let dst = ((i + s.kh - 1) * wp + s.kw - 1) * s.cout;
        dpad[dst..dst + wo * s.cout].copy_from_slice(&dout[i * wo * s.cout..(i + 1) * wo * s.cout]);
    }
    let back = ConvShape {
        kh: s.kh,
        kw: s.kw,
        cin: s.cout,
        cout: s.cin,
    };
    let zero_bias = vec![T::ZERO; s.cin];
    Some(conv_image_forward(&dpad, hp, wp, flipped, &zero_bias, back))
}

fn check_forward_shapes<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
) -> Result<(usize, usize, usize, ConvShape), NnError> {
    let (n, h, w, cin) = input.dims4("conv input")?;
    let s = ConvShape::of(weights)?;
    if cin != s.cin {
        return Err(shape_err(format!(
            "input has {cin} channels, kernel expects {}",
            s.cin
        )));
    }
    if h < s.kh || w < s.kw || s.kh == 0 || s.kw == 0 {
        return Err(shape_err(format!(
            "input {h}x{w} smaller than kernel {}x{}",
            s.kh, s.kw
        )));
    }
    Ok((n, h, w, s))
}

/// `out[n,i,j,o] = bias[o] + Σ_{a,b,c} input[n,i+a,j+b,c] · weights[a,b,c,o]`.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>, NnError> {
    let (n, h, w, s) = check_forward_shapes(input, weights)?;
    if bias.shape() != [s.cout] {
        return Err(shape_err(format!("bias shape {:?}, expected [{}]", bias.shape(), s.cout)));
    }
    let (ho, wo) = (h - s.kh + 1, w - s.kw + 1);
    let per_in = h * w * s.cin;
    let mut out = Vec::with_capacity(n * ho * wo * s.cout);
    for x in input.data().chunks_exact(per_in) {
        out.extend(conv_image_forward(x, h, w, weights.data(), bias.data(), s));
    }
    Tensor::from_vec(&[n, ho, wo, s.cout], out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

fn backward_impl<T: Scalar>(
    upstream: &Tensor<T>,
    input: &Tensor<T>,
    weights: &Tensor<T>,
    want_input: bool,
) -> Result<ConvGrads<T>, NnError> {
    let (n, h, w, s) = check_forward_shapes(input, weights)?;
    let expected = [n, h - s.kh + 1, w - s.kw + 1, s.cout];
    if upstream.shape() != expected {
        return Err(shape_err(format!(
            "upstream shape {:?}, expected {expected:?}",
            upstream.shape()
        )));
    }
    let mut gw = vec![T::ZERO; weights.len()];
    let mut gb = vec![T::ZERO; s.cout];
    let flipped = want_input.then(|| flip_kernel(weights.data(), s));
    let mut gin = Vec::with_capacity(if want_input { input.len() } else { 0 });
    let per_out = expected[1] * expected[2] * s.cout;
    for (x, d) in input
        .data()
        .chunks_exact(h * w * s.cin)
        .zip(upstream.data().chunks_exact(per_out))
    {
        if let Some(g) = conv_image_backward(d, x, h, w, s, flipped.as_deref(), &mut gw, &mut gb) {
            gin.extend(g);
        }
    }
    Ok(ConvGrads {
        input: if want_input {
            Some(Tensor::from_vec(input.shape(), gin)?)
        } else {
            None
        },
        weights: Tensor::from_vec(weights.shape(), gw)?,
        bias: Tensor::from_vec(&[s.cout], gb)?,
    })
}

/// Gradients of [`conv2d_forward`] with respect to input, weights and bias.
pub fn conv2d_backward<T: Scalar>(
    upstream: &Tensor<T>,
    input: &Tensor<T>,
    weights: &Tensor<T>,
) -> Result<ConvGrads<T>, NnError> {
    backward_impl(upstream, input, weights, true)
}

/// Like [`conv2d_backward`] but skips the input gradient (first layer).
pub fn conv2d_backward_params<T: Scalar>(
    upstream: &Tensor<T>,
    input: &Tensor<T>,
    weights: &Tensor<T>,
) -> Result<ConvGrads<T>, NnError> {
    backward_impl(upstream, input, weights, false)
}
