//! Learnable parameters and the visitation trait used by the optimizer
//! and the checkpoint writer.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// A named learnable tensor with an accumulated gradient.
///
/// Names are full paths (e.g. `prep_embed.conv1.weight`) and must be
/// unique within a model.
#[derive(Clone, Debug)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    grad: Option<Tensor<T>>,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        Parameter {
            name: name.into(),
            value,
            grad: None,
        }
    }

    /// Accumulated gradient, if any backward pass has contributed one.
    pub fn grad(&self) -> Option<&Tensor<T>> {
        self.grad.as_ref()
    }

    /// Add `delta` into the accumulated gradient. Gradients keep
    /// accumulating until [`Parameter::zero_grad`].
    pub fn accumulate_grad(&mut self, delta: &Tensor<T>) -> Result<()> {
        if delta.shape() != self.value.shape() {
            return Err(Error::shape(
                "parameter gradient",
                format!(
                    "{}: value {:?} vs gradient {:?}",
                    self.name,
                    self.value.shape(),
                    delta.shape()
                ),
            ));
        }
        match &mut self.grad {
            Some(g) => g.add_assign(delta)?,
            None => self.grad = Some(delta.clone()),
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }
}

/// Anything holding named parameters: layers, models, the whole system.
pub trait ParamModule<T: Scalar> {
    fn visit_params(&self, f: &mut dyn FnMut(&Parameter<T>));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>));

    fn zero_grads(&mut self) {
        self.visit_params_mut(&mut |p| p.zero_grad());
    }

    /// Route gradients from a backward pass into the matching parameters.
    fn accumulate_grads<'a>(
        &mut self,
        grads: impl Iterator<Item = (&'a str, &'a Tensor<T>)>,
    ) -> Result<()>
    where
        T: 'a,
    {
        let mut by_name: std::collections::HashMap<&str, &Tensor<T>> = grads.collect();
        let mut result = Ok(());
        self.visit_params_mut(&mut |p| {
            if result.is_err() {
                return;
            }
            if let Some(g) = by_name.remove(p.name.as_str()) {
                result = p.accumulate_grad(g);
            }
        });
        result?;
        if let Some(name) = by_name.keys().next() {
            return Err(Error::InvalidArg(format!(
                "gradient for unknown parameter: {name}"
            )));
        }
        Ok(())
    }
}
