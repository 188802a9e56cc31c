use super::{math, uniform01, StreamRng, Tensor, TensorError};

/// Glorot/Xavier uniform initialization.
///
/// A 2-D shape `(fan_out, fan_in)` is filled from `U[-b, b]` with
/// `b = sqrt(6 / (fan_in + fan_out))`. A 1-D shape is a bias and is zero.
pub fn xavier_init(shape: &[usize], rng: &mut StreamRng) -> Result<Tensor, TensorError> {
    let mut t = Tensor::zeros(shape)?;
    if shape.len() == 2 {
        let bound = math::sqrt(6.0 / (shape[0] + shape[1]) as f64);
        for v in &mut t.data {
            *v = (2.0 * uniform01(rng) - 1.0) * bound;
        }
    }
    Ok(t.with_grad(true))
}
