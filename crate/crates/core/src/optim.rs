//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::param::{ParamModule, Parameter};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use std::collections::BTreeMap;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Optimizer state: per-parameter first/second moments keyed by name,
/// plus the shared step counter.
pub struct AdamState<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: u64,
    moments: BTreeMap<String, (Tensor<T>, Tensor<T>)>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(learning_rate: T) -> Self {
        AdamState {
            learning_rate,
            beta1: T::from_f64_lossy(ADAM_BETA1),
            beta2: T::from_f64_lossy(ADAM_BETA2),
            eps: T::from_f64_lossy(ADAM_EPS),
            step: 0,
        moments: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one Adam update to every parameter of `module`.
    ///
    /// Every parameter must carry a gradient; a parameter without one is
    /// rejected (it means backward never reached it).
    pub fn step<M: ParamModule<T>>(&mut self, module: &mut M) -> Result<()> {
        self.step += 1;
        let t = self.step;
        let lr = self.learning_rate;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        // Bias corrections in f64: beta^t underflows gracefully there.
        let corr1 = T::from_f64_lossy(1.0 - ADAM_BETA1.powi(t as i32));
        let corr2 = T::from_f64_lossy(1.0 - ADAM_BETA2.powi(t as i32));

        let moments = &mut self.moments;
        let mut result = Ok(());
        module.visit_params_mut(&mut |p: &mut Parameter<T>| {
            if result.is_err() {
                return;
            }
            result = update_param(p, moments, lr, b1, b2, eps, corr1, corr2);
        });
        result
    }
}

#[allow(clippy::too_many_arguments)]
fn update_param<T: Scalar>(
    p: &mut Parameter<T>,
    moments: &mut BTreeMap<String, (Tensor<T>, Tensor<T>)>,
    lr: T,
    b1: T,
    b2: T,
    eps: T,
    corr1: T,
    corr2: T,
) -> Result<()> {
    let grad = p
        .grad()
        .ok_or_else(|| Error::InvalidArg(format!("parameter {} has no gradient", p.name)))?
        .clone();
    let entry = moments.entry(p.name.clone()).or_insert_with(|| {
        (
            Tensor::zeros(p.value.shape()),
            Tensor::zeros(p.value.shape()),
        )
    });
    if entry.0.shape() != p.value.shape() {
        return Err(Error::shape(
            "adam moments",
            format!(
                "{}: moments {:?} vs value {:?}",
                p.name,
                entry.0.shape(),
                p.value.shape()
            ),
        ));
    }

    let one = T::one();
    let m = entry.0.data_mut();
    let v = entry.1.data_mut();
    let val = p.value.data_mut();
    for i in 0..val.len() {
        let g = grad.data()[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let m_hat = m[i] / corr1;
        let v_hat = v[i] / corr2;
        val[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
