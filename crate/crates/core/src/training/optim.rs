use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::layers::ParamStore;
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmsGrad {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Divide the moments by `1 − βᵗ` before the update.
    pub bias_correction: bool,
}

impl Default for AmsGrad {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            bias_correction: true,
        }
    }
}

/// First moment, second moment and its running maximum per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub v_hat: Vec<Vec<f64>>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros.clone(),
            v_hat: zeros,
            step: 0,
        }
    }
}

impl AmsGrad {
    /// One update of every parameter. Gradients are checked before anything
    /// changes, so a rejected step leaves parameters and state untouched.
    pub fn step(
        &self,
        params: &mut ParamStore,
        grads: &[Tensor],
        state: &mut OptimizerState,
        lr: f64,
    ) -> Result<()> {
        if grads.len() != params.len() || state.m.len() != params.len() {
            return Err(shape_err(
                "optimizer buffers",
                &[params.len()],
                &[grads.len()],
            ));
        }
        for (id, g) in params.ids().zip(grads) {
            if g.shape() != params.get(id).shape() {
                return Err(shape_err("gradient", params.get(id).shape(), g.shape()));
            }
            if !g.all_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient of parameter {}",
                    params.name(id)
                )));
            }
        }
        state.step += 1;
        let t = state.step as i32;
        let (c1, c2) = if self.bias_correction {
            (1.0 - self.beta1.powi(t), 1.0 - self.beta2.powi(t))
        } else {
            (1.0, 1.0)
        };
        let ids: Vec<_> = params.ids().collect();
        for (k, id) in ids.into_iter().enumerate() {
            let theta = params.get_mut(id).data_mut();
            let g = grads[k].data();
            let (m, v, vh) = (&mut state.m[k], &mut state.v[k], &mut state.v_hat[k]);
            for i in 0..theta.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                vh[i] = vh[i].max(v[i]);
                let m_hat = m[i] / c1;
                let v_bar = vh[i] / c2;
                theta[i] -= lr * m_hat / (v_bar.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Learning rate after `epoch` decays: `lr₀ · decayᵉ`.
pub fn lr_at_epoch(lr0: f64, decay: f64, epoch: usize) -> f64 {
    lr0 * decay.powi(epoch as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(v: f64) -> ParamStore {
        let mut p = ParamStore::new();
        p.add("theta", Tensor::vector(&[v]));
        p
    }

    #[test]
    fn schedule_values() {
        assert_eq!(lr_at_epoch(0.001, 0.95, 0), 0.001);
        assert!((lr_at_epoch(0.001, 0.95, 1) - 0.00095).abs() < 1e-18);
        assert!((lr_at_epoch(0.001, 0.95, 80) - 1.65e-5).abs() < 1e-7);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = store(0.7);
        let mut s = OptimizerState::new(&p);
        for _ in 0..50 {
            AmsGrad::default()
                .step(&mut p, &[Tensor::vector(&[0.0])], &mut s, 0.01)
                .unwrap();
        }
        assert_eq!(p.get(p.ids().next().unwrap()).data(), &[0.7]);
    }

    #[test]
    fn first_step_has_learning_rate_size() {
        let mut p = store(0.0);
        let mut s = OptimizerState::new(&p);
        AmsGrad::default()
            .step(&mut p, &[Tensor::vector(&[1.0])], &mut s, 0.001)
            .unwrap();
        let moved = -p.get(p.ids().next().unwrap()).data()[0];
        assert!((moved - 0.001 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn minimizes_a_parabola() {
        let mut p = store(1.0);
        let mut s = OptimizerState::new(&p);
        let id = p.ids().next().unwrap();
        for _ in 0..500 {
            let th = p.get(id).data()[0];
            AmsGrad::default()
                .step(&mut p, &[Tensor::vector(&[2.0 * th])], &mut s, 0.01)
                .unwrap();
        }
        assert!(p.get(id).data()[0].abs() < 0.01);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = store(1.0);
        let mut s = OptimizerState::new(&p);
        let err = AmsGrad::default()
            .step(&mut p, &[Tensor::vector(&[f64::NAN])], &mut s, 0.01)
            .unwrap_err();
        assert!(err.to_string().contains("theta"));
        assert_eq!(s.step, 0);
    }
}
