//! Optimizers for the training loop: bias-corrected Adam (default) and plain
//! gradient descent.

use super::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// First/second moment accumulators mirroring the parameter shapes.
#[derive(Debug, Clone)]
pub struct AdamState<S> {
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub kind: OptimizerKind,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(shapes: &[&Tensor<S>], lr: f64, kind: OptimizerKind) -> AdamState<S> {
        AdamState {
            m: shapes.iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect(),
            v: shapes.iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect(),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            kind,
        }
    }

    /// One update over all parameter tensors. `grads[i]` may be `None` when a
    /// parameter did not participate in the step's graph.
    pub fn update(&mut self, params: &mut [&mut Tensor<S>], grads: &[Option<&Tensor<S>>]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(params.len(), grads.len());
        self.step += 1;
        let lr = S::from_f64(self.lr);
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    let Some(g) = g else { continue };
                    for (pv, gv) in p.data.iter_mut().zip(&g.data) {
                        *pv = *pv - lr * *gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                let b1 = S::from_f64(self.beta1);
                let b2 = S::from_f64(self.beta2);
                let one = S::ONE;
                let eps = S::from_f64(self.eps);
                let bc1 = S::from_f64(1.0 - self.beta1.powi(self.step as i32));
                let bc2 = S::from_f64(1.0 - self.beta2.powi(self.step as i32));
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                {
                    let Some(g) = g else { continue };
                    for i in 0..p.data.len() {
                        let gv = g.data[i];
                        m.data[i] = b1 * m.data[i] + (one - b1) * gv;
                        v.data[i] = b2 * v.data[i] + (one - b2) * gv * gv;
                        let mhat = m.data[i] / bc1;
                        let vhat = v.data[i] / bc2;
                        p.data[i] = p.data[i] - lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grads_leave_params() {
        let mut p = Tensor::<f64>::from_f64_slice(2, 2, &[1.0, -2.0, 3.0, 0.5]);
        let before = p.clone();
        let g = Tensor::<f64>::zeros(2, 2);
        let mut state = AdamState::new(&[&p], 1e-2, OptimizerKind::Adam);
        state.update(&mut [&mut p], &[Some(&g)]);
        assert_eq!(p.data, before.data);
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        // With constant gradient and zero state, the bias-corrected first
        // Adam step is lr * g / (|g| + eps) = lr in magnitude.
        let mut p = Tensor::<f64>::from_f64_slice(1, 3, &[0.0, 0.0, 0.0]);
        let g = Tensor::<f64>::from_f64_slice(1, 3, &[0.4, -2.0, 9.0]);
        let mut state = AdamState::new(&[&p], 1e-2, OptimizerKind::Adam);
        state.update(&mut [&mut p], &[Some(&g)]);
        for (pv, gv) in p.data.iter().zip(&g.data) {
            assert!((pv.abs() - 1e-2).abs() < 1e-6);
            assert!(pv.signum() == -gv.signum());
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut p = Tensor::<f64>::from_f64_slice(1, 4, &[0.5, -0.35, 0.15, 0.25]);
        let mut state = AdamState::new(&[&p], 1e-2, OptimizerKind::Adam);
        for _ in 0..500 {
            let g = Tensor::<f64>::from_vec(1, 4, p.data.iter().map(|v| 2.0 * v).collect());
            state.update(&mut [&mut p], &[Some(&g)]);
        }
        let norm: f64 = p.data.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-3, "|p| = {norm}");
    }
}
