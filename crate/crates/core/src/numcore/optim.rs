use alloc::vec;
use alloc::vec::Vec;

use super::{math, Gradients, ParamSet};

/// How gradients are bounded before the optimizer step.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ClipMode {
    /// Clamp every component into `[-bound, bound]`.
    Value(f64),
    /// Rescale so the global L2 norm is at most `max_norm`.
    GlobalNorm(f64),
    None,
}

impl Default for ClipMode {
    fn default() -> Self {
        ClipMode::Value(5.0)
    }
}

pub fn clip_gradients(grads: &mut Gradients, mode: ClipMode) {
    match mode {
        ClipMode::Value(bound) => {
            for g in grads.iter_mut() {
                g.iter_mut().for_each(|v| *v = v.clamp(-bound, bound));
            }
        }
        ClipMode::GlobalNorm(max_norm) => {
            let norm = math::sqrt(grads.iter().flatten().map(|v| v * v).sum());
            if norm > max_norm {
                grads.scale(max_norm / norm);
            }
        }
        ClipMode::None => {}
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum OptimError {
    #[error("gradient or optimizer state does not match the parameter layout")]
    ShapeMismatch,
}

/// Adam moments for one [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamState {
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub const DEFAULT_LEARNING_RATE: f64 = 0.01;

    pub fn new(params: &ParamSet, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        AdamState {
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    fn matches(&self, params: &ParamSet) -> bool {
        self.first_moment.len() == params.len()
            && self.second_moment.len() == params.len()
            && params.iter().zip(&self.first_moment).zip(&self.second_moment).all(
                |(((_, t), m), v)| m.len() == t.len() && v.len() == t.len(),
            )
    }
}

/// One bias-corrected Adam update of `params` along `-grads`.
pub fn adam_step(params: &mut ParamSet, grads: &Gradients, state: &mut AdamState) -> Result<(), OptimError> {
    if !state.matches(params) || !grads.matches(params) {
        return Err(OptimError::ShapeMismatch);
    }
    state.step += 1;
    let c1 = 1.0 - math::powi(state.beta1, state.step);
    let c2 = 1.0 - math::powi(state.beta2, state.step);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.learning_rate, state.epsilon);
    for (id, (m, v)) in params
        .ids()
        .collect::<Vec<_>>()
        .into_iter()
        .zip(state.first_moment.iter_mut().zip(state.second_moment.iter_mut()))
    {
        let g = grads.get(id);
        let p = &mut params.get_mut(id).data;
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (math::sqrt(v_hat) + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Tensor;

    fn scalar_params(x: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.add("x", Tensor::vector(vec![x]));
        p
    }

    #[test]
    fn clip_values() {
        let mut p = ParamSet::new();
        p.add("g", Tensor::vector(vec![0.0; 3]));
        let mut g = Gradients::zeros_like(&p);
        g.get_mut(crate::numcore::ParamId(0)).copy_from_slice(&[7.2, -6.0, 3.0]);
        clip_gradients(&mut g, ClipMode::Value(5.0));
        assert_eq!(g.get(crate::numcore::ParamId(0)), &[5.0, -5.0, 3.0]);
        let once = g.clone();
        clip_gradients(&mut g, ClipMode::Value(5.0));
        assert_eq!(g, once);
    }

    #[test]
    fn clip_global_norm() {
        let mut p = ParamSet::new();
        p.add("g", Tensor::vector(vec![0.0; 2]));
        let mut g = Gradients::zeros_like(&p);
        g.get_mut(crate::numcore::ParamId(0)).copy_from_slice(&[30.0, 40.0]);
        clip_gradients(&mut g, ClipMode::GlobalNorm(5.0));
        let v = g.get(crate::numcore::ParamId(0));
        assert!((v[0] - 3.0).abs() < 1e-12 && (v[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = scalar_params(1.5);
        let mut s = AdamState::new(&p, AdamState::DEFAULT_LEARNING_RATE);
        let g = Gradients::zeros_like(&p);
        adam_step(&mut p, &g, &mut s).unwrap();
        assert_eq!(p.get(crate::numcore::ParamId(0)).data, [1.5]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g0 in [0.3, -2.0, 1e-3] {
            let mut p = scalar_params(0.0);
            let mut s = AdamState::new(&p, AdamState::DEFAULT_LEARNING_RATE);
            assert_eq!(s.learning_rate, 0.01);
            let mut g = Gradients::zeros_like(&p);
            g.get_mut(crate::numcore::ParamId(0))[0] = g0;
            adam_step(&mut p, &g, &mut s).unwrap();
            // m̂ = g, v̂ = g², so the step is lr·g/(|g|+ε)
            let expect = -0.01 * g0 / (g0.abs() + 1e-8);
            let got = p.get(crate::numcore::ParamId(0)).data[0];
            assert!((got - expect).abs() < 1e-15, "{got} vs {expect}");
            assert!((got.abs() - 0.01).abs() < 1e-7);
        }
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let mut p = scalar_params(0.0);
        let mut s = AdamState::new(&scalar_params(0.0), 0.01);
        let mut other = ParamSet::new();
        other.add("y", Tensor::vector(vec![0.0, 0.0]));
        let g = Gradients::zeros_like(&other);
        assert_eq!(adam_step(&mut p, &g, &mut s), Err(OptimError::ShapeMismatch));
        assert_eq!(s.step, 0);
    }
}
