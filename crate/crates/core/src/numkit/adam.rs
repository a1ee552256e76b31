//! Adam optimizer with bias correction.

use crate::error::{CoreError, Result};

use super::matrix::Matrix;
use super::mlp::{DenseGrad, MlpGradients, MlpParams};

/// First/second-moment accumulators shaped like the parameters they track.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<DenseGrad>,
    v: Vec<DenseGrad>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> Self {
        let zeros = || -> Vec<DenseGrad> {
            params
                .layers()
                .iter()
                .map(|l| DenseGrad {
                    dw: Matrix::zeros(l.w.rows(), l.w.cols()),
                    db: vec![0.0; l.b.len()],
                })
                .collect()
        };
        AdamState {
            m: zeros(),
            v: zeros(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update in place. Non-finite gradients reject the whole update
    /// and leave parameters, moments, and the step counter untouched; the
    /// caller surfaces the event as a diagnostic.
    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpGradients, lr: f64) -> Result<()> {
        assert!(lr > 0.0, "learning rate must be positive");
        assert_eq!(grads.layers.len(), params.layers().len(), "gradient shape mismatch");
        if !grads.is_finite() {
            return Err(CoreError::NonFinite {
                what: "gradient".to_string(),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (li, layer) in params.layers_mut().iter_mut().enumerate() {
            let g = &grads.layers[li];
            assert_eq!(g.dw.rows(), layer.w.rows());
            assert_eq!(g.dw.cols(), layer.w.cols());
            let m = &mut self.m[li];
            let v = &mut self.v[li];
            update_slice(
                layer.w.data_mut(),
                g.dw.data(),
                m.dw.data_mut(),
                v.dw.data_mut(),
                self.beta1,
                self.beta2,
                self.eps,
                lr,
                bc1,
                bc2,
            );
            update_slice(
                &mut layer.b,
                &g.db,
                &mut m.db,
                &mut v.db,
                self.beta1,
                self.beta2,
                self.eps,
                lr,
                bc1,
                bc2,
            );
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn update_slice(
    w: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..w.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}
