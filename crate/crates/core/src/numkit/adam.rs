use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

use super::{Matrix, ParamSet, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Matrix<T>,
    pub v: Matrix<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            step: 0,
        }
    }

    pub fn for_param(param: &Matrix<T>) -> Self {
        Self::new(param.rows(), param.cols())
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<T: Real>(
    param: &mut Matrix<T>,
    grad: &Matrix<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != state.m.shape() {
        return Err(invalid!(
            "adam_step: param {:?}, grad {:?}, state {:?}",
            param.shape(),
            grad.shape(),
            state.m.shape()
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let bc1 = T::of(1.0 - cfg.beta1.powi(t));
    let bc2 = T::of(1.0 - cfg.beta2.powi(t));
    let lr = T::of(cfg.lr);
    let eps = T::of(cfg.eps);
    let one = T::one();

    let p = param.as_mut_slice();
    let m = state.m.as_mut_slice();
    let v = state.v.as_mut_slice();
    for (i, &g) in grad.as_slice().iter().enumerate() {
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Adam over every tensor of a [`ParamSet`].
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub cfg: AdamConfig,
    states: Vec<AdamState<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new<P: ParamSet<T>>(cfg: AdamConfig, params: &P) -> Self {
        let states = params
            .tensors()
            .into_iter()
            .map(|(_, m)| AdamState::for_param(m))
            .collect();
        Self { cfg, states }
    }

    pub fn step<P: ParamSet<T>>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grads = grads.tensors();
        let mut params = params.tensors_mut();
        if params.len() != self.states.len() || grads.len() != self.states.len() {
            return Err(invalid!("Adam: parameter set does not match optimizer state"));
        }
        for ((state, (_, p)), (_, g)) in self.states.iter_mut().zip(params.iter_mut()).zip(grads) {
            adam_step(p, g, state, &self.cfg)?;
        }
        Ok(())
    }

    pub fn steps_taken(&self) -> u64 {
        self.states.first().map_or(0, |s| s.step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> Matrix<f64> {
        Matrix::row_vector(vec![x])
    }

    #[test]
    fn zero_gradient_leaves_param_unchanged() {
        let mut p = Matrix::row_vector(vec![0.5, -2.0, 3.0]);
        let before = p.clone();
        let g = Matrix::zeros(1, 3);
        let mut st = AdamState::for_param(&p);
        adam_step(&mut p, &g, &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        for g in [0.3, -7.0, 1e-3] {
            let mut p = scalar(1.0);
            let mut st = AdamState::for_param(&p);
            let cfg = AdamConfig::default();
            adam_step(&mut p, &scalar(g), &mut st, &cfg).unwrap();
            let delta = p.get(0, 0) - 1.0;
            assert!((delta + cfg.lr * g.signum()).abs() < 1e-8, "g={g} delta={delta}");
        }
    }

    #[test]
    fn zero_lr_is_bit_identical() {
        let mut p = Matrix::row_vector(vec![0.1f32, -0.25, 3.5]);
        let before = p.clone();
        let g = Matrix::row_vector(vec![1.0f32, -2.0, 0.5]);
        let mut st = AdamState::for_param(&p);
        let cfg = AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        };
        for _ in 0..3 {
            adam_step(&mut p, &g, &mut st, &cfg).unwrap();
        }
        assert_eq!(p, before);
    }

    // Straight-line Adam transcription on f(x) = (x - 3)^2.
    #[test]
    fn three_steps_match_reference_transcription() {
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let mut p = scalar(0.0);
        let mut st = AdamState::for_param(&p);

        let (mut x, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=3 {
            let g = 2.0 * (x - 3.0);
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 0.1 * mh / (vh.sqrt() + 1e-8);

            let grad = scalar(2.0 * (p.get(0, 0) - 3.0));
            adam_step(&mut p, &grad, &mut st, &cfg).unwrap();
        }
        assert!((p.get(0, 0) - x).abs() < 1e-12);
        assert_eq!(st.step, 3);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = Matrix::<f64>::zeros(2, 2);
        let mut st = AdamState::for_param(&p);
        assert!(adam_step(&mut p, &Matrix::zeros(1, 4), &mut st, &AdamConfig::default()).is_err());
    }
}
