//! Parameter-holding layers. Each layer records itself onto a [`Tape`]
//! when run, so the same structs serve training and inference.

use crate::autodiff::{NodeId, Tape};
use crate::error::Result;
use crate::param::{ParamModule, Parameter};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Batch-norm epsilon; keeps the variance denominator away from zero.
pub const BN_EPS: f64 = 1e-5;
/// Exponential moving average factor for batch-norm running statistics.
pub const BN_MOMENTUM: f64 = 0.1;

/// He-style uniform init: `U(-b, b)` with `b = sqrt(6 / fan_in)`.
/// Values are drawn in f64 so f32 and f64 models start identically.
fn he_uniform<T: Scalar>(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data: Vec<T> = (0..n)
        .map(|_| T::from_f64_lossy((rng.gen::<f64>() * 2.0 - 1.0) * bound))
        .collect();
    Tensor::from_vec(shape, data).expect("init shape")
}

pub struct Conv2d<T> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(
        prefix: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        Conv2d {
            weight: Parameter::new(
                format!("{prefix}.weight"),
                he_uniform(&[out_channels, in_channels, kernel, kernel], fan_in, rng),
            ),
            bias: Parameter::new(format!("{prefix}.bias"), Tensor::zeros(&[out_channels])),
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        }
    }

    pub fn forward(&self, tape: &mut Tape<T>, x: NodeId) -> Result<NodeId> {
        let w = tape.param(&self.weight.name, self.weight.value.clone())?;
        let b = tape.param(&self.bias.name, self.bias.value.clone())?;
        tape.conv2d(x, w, b, self.stride, self.padding)
    }
}

impl<T: Scalar> ParamModule<T> for Conv2d<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Parameter<T>)) {
        f(&self.weight);
        f(&self.bias);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

pub struct ConvTranspose2d<T> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl<T: Scalar> ConvTranspose2d<T> {
    pub fn new(
        prefix: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        ConvTranspose2d {
            weight: Parameter::new(
                format!("{prefix}.weight"),
                he_uniform(&[in_channels, out_channels, kernel, kernel], fan_in, rng),
            ),
            bias: Parameter::new(format!("{prefix}.bias"), Tensor::zeros(&[out_channels])),
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        }
    }

    pub fn forward(&self, tape: &mut Tape<T>, x: NodeId) -> Result<NodeId> {
        let w = tape.param(&self.weight.name, self.weight.value.clone())?;
        let b = tape.param(&self.bias.name, self.bias.value.clone())?;
        tape.conv_transpose2d(x, w, b, self.stride, self.padding)
    }
}

impl<T: Scalar> ParamModule<T> for ConvTranspose2d<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Parameter<T>)) {
        f(&self.weight);
        f(&self.bias);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

pub struct BatchNorm2d<T> {
    pub gamma: Parameter<T>,
    pub beta: Parameter<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub channels: usize,
    prefix: String,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(prefix: &str, channels: usize) -> Self {
        BatchNorm2d {
            gamma: Parameter::new(format!("{prefix}.gamma"), Tensor::full(&[channels], T::one())),
            beta: Parameter::new(format!("{prefix}.beta"), Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            channels,
            prefix: prefix.to_string(),
        }
    }

    /// Training forward: normalizes with batch statistics and folds them
    /// into the running statistics.
    pub fn forward_train(&mut self, tape: &mut Tape<T>, x: NodeId) -> Result<NodeId> {
        let g = tape.param(&self.gamma.name, self.gamma.value.clone())?;
        let b = tape.param(&self.beta.name, self.beta.value.clone())?;
        let (y, mean, var) = tape.batch_norm_train(x, g, b, T::from_f64_lossy(BN_EPS))?;
        let momentum = T::from_f64_lossy(BN_MOMENTUM);
        let keep = T::one() - momentum;
        for (r, m) in self.running_mean.data_mut().iter_mut().zip(mean.data()) {
            *r = keep * *r + momentum * *m;
        }
        for (r, v) in self.running_var.data_mut().iter_mut().zip(var.data()) {
            *r = keep * *r + momentum * *v;
        }
        Ok(y)
    }

    /// Inference forward: normalizes with the running statistics.
    pub fn forward_eval(&self, tape: &mut Tape<T>, x: NodeId) -> Result<NodeId> {
        let g = tape.param(&self.gamma.name, self.gamma.value.clone())?;
        let b = tape.param(&self.beta.name, self.beta.value.clone())?;
        tape.batch_norm_eval(
            x,
            g,
            b,
            &self.running_mean,
            &self.running_var,
            T::from_f64_lossy(BN_EPS),
        )
    }

    /// Running statistics as named buffers for checkpointing.
    pub fn visit_buffers(&self, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        f(&format!("{}.running_mean", self.prefix), &self.running_mean);
        f(&format!("{}.running_var", self.prefix), &self.running_var);
    }

    pub fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        f(&format!("{}.running_mean", self.prefix), &mut self.running_mean);
        f(&format!("{}.running_var", self.prefix), &mut self.running_var);
    }
}

impl<T: Scalar> ParamModule<T> for BatchNorm2d<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Parameter<T>)) {
        f(&self.gamma);
        f(&self.beta);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn init_is_seed_deterministic_and_bounded() {
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        let a = Conv2d::<f32>::new("c", 3, 16, 3, 2, 1, &mut r1);
        let b = Conv2d::<f32>::new("c", 3, 16, 3, 2, 1, &mut r2);
        assert_eq!(a.weight.value, b.weight.value);
        let bound = (6.0f32 / 27.0).sqrt();
        assert!(a.weight.value.data().iter().all(|v| v.abs() <= bound));
        assert!(a.bias.value.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bn_running_stats_move_toward_batch_stats() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut bn = BatchNorm2d::<f64>::new("bn", 2);
        let mut tape = Tape::new();
        let data: Vec<f64> = (0..2 * 2 * 3 * 3).map(|_| rng.gen::<f64>() * 4.0).collect();
        let x = tape.constant(Tensor::from_vec(&[2, 2, 3, 3], data).unwrap());
        bn.forward_train(&mut tape, x).unwrap();
        // mean moved off 0 toward ~2, var moved off 1.
        assert!(bn.running_mean.data().iter().all(|&m| m > 0.05));
        assert!(bn.running_var.data().iter().all(|&v| (v - 1.0).abs() > 1e-4));
    }
}
