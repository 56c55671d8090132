use super::{Rng, Scalar, Tensor};

/// Glorot/Xavier uniform: i.i.d. draws on `[-L, L]` with
/// `L = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform_init<T: Scalar>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut Rng,
) -> Tensor<T> {
    assert!(fan_in > 0 && fan_out > 0, "fans must be positive");
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| T::from_f64(rng.uniform_range(-limit, limit)))
        .collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}
