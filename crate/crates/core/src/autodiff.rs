//! Reverse-mode automatic differentiation over a per-step tape.
//!
//! Each training step records a fresh [`Tape`]: leaves are either
//! constants (images) or named parameters, interior nodes are the layer
//! operations. [`Tape::backward`] walks the tape in reverse and fills a
//! gradient per node; parameter gradients are then read back by name.
//!
//! Node ids are indices into the tape, so every operation's inputs have
//! strictly smaller ids than its output. The backward loop exploits this
//! to split the gradient buffer instead of cloning tensors.

use crate::conv;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op<T> {
    Leaf,
    Conv2d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        padding: usize,
    },
    ConvTranspose2d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        padding: usize,
    },
    /// Affine normalization `y = gamma * (x - mean) * inv_std + beta`.
    /// In training mode `mean`/`inv_std` are the batch statistics and the
    /// backward pass accounts for their dependence on `x`; in eval mode
    /// they are running statistics treated as constants.
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        mean: Tensor<T>,
        inv_std: Tensor<T>,
        batch_stats: bool,
    },
    Relu {
        x: NodeId,
    },
    LeakyRelu {
        x: NodeId,
        slope: T,
    },
    Sigmoid {
        x: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    ConcatChannels {
        a: NodeId,
        b: NodeId,
    },
    Scale {
        x: NodeId,
        factor: T,
    },
    Sum {
        x: NodeId,
    },
    Mse {
        a: NodeId,
        b: NodeId,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    param: Option<String>,
    needs_grad: bool,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
    param_ids: HashMap<String, NodeId>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
            param_ids: HashMap::new(),
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            param: None,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Leaf that never receives a gradient (input images, targets).
    pub fn constant(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// Named parameter leaf; gradients are collected per name after
    /// backward. Recording the same name again returns the existing
    /// node, so a parameter reused across passes (the embedding
    /// preprocess sees both secret and cover) accumulates one gradient.
    pub fn param(&mut self, name: &str, value: Tensor<T>) -> Result<NodeId> {
        if let Some(&id) = self.param_ids.get(name) {
            if self.nodes[id.0].value.shape() != value.shape() {
                return Err(Error::shape(
                    "param",
                    format!(
                        "{name} re-registered with shape {:?}, had {:?}",
                        value.shape(),
                        self.nodes[id.0].value.shape()
                    ),
                ));
            }
            return Ok(id);
        }
        let id = self.push(value, Op::Leaf, true);
        self.nodes[id.0].param = Some(name.to_string());
        self.param_ids.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` call, if the node participated.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// `(name, gradient)` for every named parameter that received one.
    pub fn param_grads(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.nodes.iter().enumerate().filter_map(move |(i, n)| {
            let name = n.param.as_deref()?;
            let g = self.grads.get(i)?.as_ref()?;
            Some((name, g))
        })
    }

    // ---- layer operations -------------------------------------------------

    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let value = conv::conv2d_forward(
            self.value(x),
            self.value(w),
            self.value(b),
            stride,
            padding,
        )?;
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(value, Op::Conv2d { x, w, b, stride, padding }, needs))
    }

    pub fn conv_transpose2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let value = conv::conv_transpose2d_forward(
            self.value(x),
            self.value(w),
            self.value(b),
            stride,
            padding,
        )?;
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(
            value,
            Op::ConvTranspose2d { x, w, b, stride, padding },
            needs,
        ))
    }

    /// Batch normalization over `(batch, height, width)` per channel using
    /// batch statistics. Returns the node plus the batch mean and biased
    /// batch variance so the caller can update running statistics.
    pub fn batch_norm_train(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: T,
    ) -> Result<(NodeId, Tensor<T>, Tensor<T>)> {
        let (b, c, h, w) = self.value(x).dims4("batch_norm input")?;
        if b * h * w < 2 {
            return Err(Error::InvalidArg(format!(
                "batch_norm training needs at least 2 values per channel, got {}",
                b * h * w
            )));
        }
        self.check_bn_params(c, gamma, beta)?;

        let n = (b * h * w) as f64;
        let xd = self.value(x).data();
        let mut mean = Tensor::zeros(&[c]);
        let mut var = Tensor::zeros(&[c]);
        for ci in 0..c {
            let mut acc = 0.0f64;
            for bi in 0..b {
                let plane = &xd[((bi * c + ci) * h * w)..((bi * c + ci + 1) * h * w)];
                for v in plane {
                    acc += v.to_f64_lossy();
                }
            }
            let m = acc / n;
            let mut acc2 = 0.0f64;
            for bi in 0..b {
                let plane = &xd[((bi * c + ci) * h * w)..((bi * c + ci + 1) * h * w)];
                for v in plane {
                    let d = v.to_f64_lossy() - m;
                    acc2 += d * d;
                }
            }
            mean.data_mut()[ci] = T::from_f64_lossy(m);
            var.data_mut()[ci] = T::from_f64_lossy(acc2 / n);
        }
        let inv_std = var.map(|v| T::one() / (v + eps).sqrt());

        let value = self.bn_value(x, gamma, beta, &mean, &inv_std);
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        let node = self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                mean: mean.clone(),
                inv_std,
                batch_stats: true,
            },
            needs,
        );
        Ok((node, mean, var))
    }

    /// Batch normalization using fixed (running) statistics.
    pub fn batch_norm_eval(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        running_mean: &Tensor<T>,
        running_var: &Tensor<T>,
        eps: T,
    ) -> Result<NodeId> {
        let (_, c, _, _) = self.value(x).dims4("batch_norm input")?;
        self.check_bn_params(c, gamma, beta)?;
        if running_mean.shape() != [c] || running_var.shape() != [c] {
            return Err(Error::shape(
                "batch_norm",
                format!(
                    "running stats {:?}/{:?} do not match {c} channels",
                    running_mean.shape(),
                    running_var.shape()
                ),
            ));
        }
        let inv_std = running_var.map(|v| T::one() / (v + eps).sqrt());
        let value = self.bn_value(x, gamma, beta, running_mean, &inv_std);
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                mean: running_mean.clone(),
                inv_std,
                batch_stats: false,
            },
            needs,
        ))
    }

    fn check_bn_params(&self, c: usize, gamma: NodeId, beta: NodeId) -> Result<()> {
        for (name, id) in [("gamma", gamma), ("beta", beta)] {
            if self.value(id).shape() != [c] {
                return Err(Error::shape(
                    "batch_norm",
                    format!(
                        "{name} shape {:?} does not match {c} channels",
                        self.value(id).shape()
                    ),
                ));
            }
        }
        Ok(())
    }

    fn bn_value(
        &self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        mean: &Tensor<T>,
        inv_std: &Tensor<T>,
    ) -> Tensor<T> {
        let (b, c, h, w) = self.value(x).dims4("batch_norm").expect("validated");
        let xd = self.value(x).data();
        let g = self.value(gamma).data();
        let be = self.value(beta).data();
        let mut out = Tensor::zeros(&[b, c, h, w]);
        let od = out.data_mut();
        for bi in 0..b {
            for ci in 0..c {
                let scale = g[ci] * inv_std.data()[ci];
                let shift = be[ci];
                let m = mean.data()[ci];
                let base = (bi * c + ci) * h * w;
                for i in 0..h * w {
                    od[base + i] = (xd[base + i] - m) * scale + shift;
                }
            }
        }
        out
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        let needs = self.needs(x);
        self.push(value, Op::Relu { x }, needs)
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: T) -> NodeId {
        let value = self
            .value(x)
            .map(|v| if v > T::zero() { v } else { v * slope });
        let needs = self.needs(x);
        self.push(value, Op::LeakyRelu { x, slope }, needs)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| T::one() / (T::one() + (-v).exp()));
        let needs = self.needs(x);
        self.push(value, Op::Sigmoid { x }, needs)
    }

    /// Elementwise addition of equal-shaped tensors (residual shortcut).
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::shape(
                "add",
                format!(
                    "{:?} vs {:?}",
                    self.value(a).shape(),
                    self.value(b).shape()
                ),
            ));
        }
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add { a, b }, needs))
    }

    /// Concatenate along the channel axis: `[b, c1, h, w] ++ [b, c2, h, w]`.
    pub fn concat_channels(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ba, ca, ha, wa) = self.value(a).dims4("concat lhs")?;
        let (bb, cb, hb, wb) = self.value(b).dims4("concat rhs")?;
        if (ba, ha, wa) != (bb, hb, wb) {
            return Err(Error::shape(
                "concat_channels",
                format!(
                    "{:?} vs {:?}",
                    self.value(a).shape(),
                    self.value(b).shape()
                ),
            ));
        }
        let mut out = Tensor::zeros(&[ba, ca + cb, ha, wa]);
        {
            let od = out.data_mut();
            let ad = self.value(a).data();
            let bd = self.value(b).data();
            let plane = ha * wa;
            for bi in 0..ba {
                let dst = &mut od[bi * (ca + cb) * plane..(bi + 1) * (ca + cb) * plane];
                dst[..ca * plane].copy_from_slice(&ad[bi * ca * plane..(bi + 1) * ca * plane]);
                dst[ca * plane..].copy_from_slice(&bd[bi * cb * plane..(bi + 1) * cb * plane]);
            }
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::ConcatChannels { a, b }, needs))
    }

    pub fn scale(&mut self, x: NodeId, factor: T) -> NodeId {
        let value = self.value(x).map(|v| v * factor);
        let needs = self.needs(x);
        self.push(value, Op::Scale { x, factor }, needs)
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let total: f64 = self.value(x).data().iter().map(|v| v.to_f64_lossy()).sum();
        let needs = self.needs(x);
        self.push(Tensor::scalar(T::from_f64_lossy(total)), Op::Sum { x }, needs)
    }

    /// Mean squared error between equal-shaped tensors, as a `[1]` tensor.
    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::shape(
                "mse",
                format!(
                    "{:?} vs {:?}",
                    self.value(a).shape(),
                    self.value(b).shape()
                ),
            ));
        }
        let acc: f64 = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| {
                let d = x.to_f64_lossy() - y.to_f64_lossy();
                d * d
            })
            .sum();
        let n = self.value(a).numel() as f64;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(
            Tensor::scalar(T::from_f64_lossy(acc / n)),
            Op::Mse { a, b },
            needs,
        ))
    }

    // ---- backward ---------------------------------------------------------

    /// Populate gradients of every node reachable from `loss`.
    /// Rejects non-scalar losses.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::shape(
                "backward",
                format!(
                    "loss must be scalar, got shape {:?}",
                    self.nodes[loss.0].value.shape()
                ),
            ));
        }

        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor<T>>> = (0..n).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(T::one()));

        for i in (0..=loss.0).rev() {
            if grads[i].is_none() || !self.nodes[i].needs_grad {
                continue;
            }
            // Inputs always have smaller ids, so split keeps borrows disjoint.
            let (earlier, rest) = grads.split_at_mut(i);
            let g = rest[0].as_ref().expect("checked above");
            self.backprop_node(i, g, earlier);
        }

        self.grads = grads;
        Ok(())
    }

    fn accumulate(&self, slot: &mut Option<Tensor<T>>, delta: Tensor<T>) {
        match slot {
            Some(g) => g.add_assign(&delta).expect("gradient shape stable"),
            None => *slot = Some(delta),
        }
    }

    fn backprop_node(&self, i: usize, g: &Tensor<T>, earlier: &mut [Option<Tensor<T>>]) {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, stride, padding } => {
                let (dx, dw, db) = conv::conv2d_backward(
                    self.value(*x),
                    self.value(*w),
                    g,
                    *stride,
                    *padding,
                    self.needs(*x),
                    self.needs(*w),
                );
                if let Some(dx) = dx {
                    self.accumulate(&mut earlier[x.0], dx);
                }
                if let Some(dw) = dw {
                    self.accumulate(&mut earlier[w.0], dw);
                }
                if self.needs(*b) {
                    self.accumulate(&mut earlier[b.0], db);
                }
            }
            Op::ConvTranspose2d { x, w, b, stride, padding } => {
                let (dx, dw, db) = conv::conv_transpose2d_backward(
                    self.value(*x),
                    self.value(*w),
                    g,
                    *stride,
                    *padding,
                    self.needs(*x),
                    self.needs(*w),
                );
                if let Some(dx) = dx {
                    self.accumulate(&mut earlier[x.0], dx);
                }
                if let Some(dw) = dw {
                    self.accumulate(&mut earlier[w.0], dw);
                }
                if self.needs(*b) {
                    self.accumulate(&mut earlier[b.0], db);
                }
            }
            Op::BatchNorm { x, gamma, beta, mean, inv_std, batch_stats } => {
                let (b, c, h, w) = self.value(*x).dims4("bn backward").expect("validated");
                let plane = h * w;
                let n = (b * plane) as f64;
                let xd = self.value(*x).data();
                let gd = g.data();
                let gam = self.value(*gamma).data();

                if self.needs(*beta) {
                    let mut dbeta = Tensor::zeros(&[c]);
                    for ci in 0..c {
                        let mut acc = 0.0f64;
                        for bi in 0..b {
                            let base = (bi * c + ci) * plane;
                            for v in &gd[base..base + plane] {
                                acc += v.to_f64_lossy();
                            }
                        }
                        dbeta.data_mut()[ci] = T::from_f64_lossy(acc);
                    }
                    self.accumulate(&mut earlier[beta.0], dbeta);
                }

                // dgamma and the batch-stat terms both need sum(dy * xhat).
                let mut sum_dy = vec![0.0f64; c];
                let mut sum_dy_xhat = vec![0.0f64; c];
                for ci in 0..c {
                    let m = mean.data()[ci].to_f64_lossy();
                    let is = inv_std.data()[ci].to_f64_lossy();
                    let mut s1 = 0.0f64;
                    let mut s2 = 0.0f64;
                    for bi in 0..b {
                        let base = (bi * c + ci) * plane;
                        for idx in base..base + plane {
                            let dy = gd[idx].to_f64_lossy();
                            let xhat = (xd[idx].to_f64_lossy() - m) * is;
                            s1 += dy;
                            s2 += dy * xhat;
                        }
                    }
                    sum_dy[ci] = s1;
                    sum_dy_xhat[ci] = s2;
                }

                if self.needs(*gamma) {
                    let mut dgamma = Tensor::zeros(&[c]);
                    for (d, &s) in dgamma.data_mut().iter_mut().zip(&sum_dy_xhat) {
                        *d = T::from_f64_lossy(s);
                    }
                    self.accumulate(&mut earlier[gamma.0], dgamma);
                }

                if self.needs(*x) {
                    let mut dx = Tensor::zeros(&[b, c, h, w]);
                    let dxd = dx.data_mut();
                    for ci in 0..c {
                        let m = mean.data()[ci].to_f64_lossy();
                        let is = inv_std.data()[ci].to_f64_lossy();
                        let scale = gam[ci].to_f64_lossy() * is;
                        let mean_dy = sum_dy[ci] / n;
                        let mean_dy_xhat = sum_dy_xhat[ci] / n;
                        for bi in 0..b {
                            let base = (bi * c + ci) * plane;
                            for idx in base..base + plane {
                                let dy = gd[idx].to_f64_lossy();
                                let v = if *batch_stats {
                                    let xhat = (xd[idx].to_f64_lossy() - m) * is;
                                    scale * (dy - mean_dy - xhat * mean_dy_xhat)
                                } else {
                                    scale * dy
                                };
                                dxd[idx] = T::from_f64_lossy(v);
                            }
                        }
                    }
                    self.accumulate(&mut earlier[x.0], dx);
                }
            }
            Op::Relu { x } => {
                if self.needs(*x) {
                    let xd = self.value(*x).data();
                    let mut dx = Tensor::zeros(self.value(*x).shape());
                    for (d, (&gv, &xv)) in
                        dx.data_mut().iter_mut().zip(g.data().iter().zip(xd))
                    {
                        *d = if xv > T::zero() { gv } else { T::zero() };
                    }
                    self.accumulate(&mut earlier[x.0], dx);
                }
            }
            Op::LeakyRelu { x, slope } => {
                if self.needs(*x) {
                    let xd = self.value(*x).data();
                    let mut dx = Tensor::zeros(self.value(*x).shape());
                    for (d, (&gv, &xv)) in
                        dx.data_mut().iter_mut().zip(g.data().iter().zip(xd))
                    {
                        *d = if xv > T::zero() { gv } else { gv * *slope };
                    }
                    self.accumulate(&mut earlier[x.0], dx);
                }
            }
            Op::Sigmoid { x } => {
                if self.needs(*x) {
                    let yd = self.nodes[i].value.data();
                    let mut dx = Tensor::zeros(self.value(*x).shape());
                    for (d, (&gv, &yv)) in
                        dx.data_mut().iter_mut().zip(g.data().iter().zip(yd))
                    {
                        *d = gv * yv * (T::one() - yv);
                    }
                    self.accumulate(&mut earlier[x.0], dx);
                }
            }
            Op::Add { a, b } => {
                if self.needs(*a) {
                    self.accumulate(&mut earlier[a.0], g.clone());
                }
                if self.needs(*b) {
                    self.accumulate(&mut earlier[b.0], g.clone());
                }
            }
            Op::ConcatChannels { a, b } => {
                let (ba, ca, h, w) = self.value(*a).dims4("concat backward").expect("validated");
                let cb = self.value(*b).shape()[1];
                let plane = h * w;
                let gd = g.data();
                if self.needs(*a) {
                    let mut da = Tensor::zeros(self.value(*a).shape());
                    for bi in 0..ba {
                        let src = &gd[bi * (ca + cb) * plane..][..ca * plane];
                        da.data_mut()[bi * ca * plane..(bi + 1) * ca * plane]
                            .copy_from_slice(src);
                    }
                    self.accumulate(&mut earlier[a.0], da);
                }
                if self.needs(*b) {
                    let mut db = Tensor::zeros(self.value(*b).shape());
                    for bi in 0..ba {
                        let src = &gd[bi * (ca + cb) * plane + ca * plane..][..cb * plane];
                        db.data_mut()[bi * cb * plane..(bi + 1) * cb * plane]
                            .copy_from_slice(src);
                    }
                    self.accumulate(&mut earlier[b.0], db);
                }
            }
            Op::Scale { x, factor } => {
                if self.needs(*x) {
                    let f = *factor;
                    self.accumulate(&mut earlier[x.0], g.map(|v| v * f));
                }
            }
            Op::Sum { x } => {
                if self.needs(*x) {
                    let gv = g.data()[0];
                    self.accumulate(&mut earlier[x.0], Tensor::full(self.value(*x).shape(), gv));
                }
            }
            Op::Mse { a, b } => {
                let gv = g.data()[0];
                let n = T::from_usize_lossy(self.value(*a).numel());
                let two = T::from_f64_lossy(2.0);
                let ad = self.value(*a).data();
                let bd = self.value(*b).data();
                if self.needs(*a) {
                    let mut da = Tensor::zeros(self.value(*a).shape());
                    for (d, (&x, &y)) in da.data_mut().iter_mut().zip(ad.iter().zip(bd)) {
                        *d = gv * two * (x - y) / n;
                    }
                    self.accumulate(&mut earlier[a.0], da);
                }
                if self.needs(*b) {
                    let mut db = Tensor::zeros(self.value(*b).shape());
                    for (d, (&x, &y)) in db.data_mut().iter_mut().zip(ad.iter().zip(bd)) {
                        *d = -(gv * two * (x - y) / n);
                    }
                    self.accumulate(&mut earlier[b.0], db);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_param_has_unit_gradients() {
        let mut tape = Tape::<f64>::new();
        let p = tape
            .param("p", Tensor::from_vec(&[3], vec![1.0, -2.0, 0.5]).unwrap())
            .unwrap();
        let loss = tape.sum(p);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(p).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn mse_gradient_matches_closed_form() {
        // loss = mean((p - t)^2)  =>  dloss/dp = 2 (p - t) / n
        let p_vals = vec![0.5, -1.0, 2.0, 0.0];
        let t_vals = vec![0.0, 1.0, 2.0, -4.0];
        let mut tape = Tape::<f64>::new();
        let p = tape
            .param("p", Tensor::from_vec(&[4], p_vals.clone()).unwrap())
            .unwrap();
        let t = tape.constant(Tensor::from_vec(&[4], t_vals.clone()).unwrap());
        let loss = tape.mse(p, t).unwrap();
        tape.backward(loss).unwrap();
        let g = tape.grad(p).unwrap();
        for ((gv, pv), tv) in g.data().iter().zip(&p_vals).zip(&t_vals) {
            let expect = 2.0 * (pv - tv) / 4.0;
            assert!((gv - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn mse_two_element_hand_value() {
        // [0.0, 0.5] vs [0.5, 0.5]: (0.25 + 0) / 2 = 0.125.
        let mut tape = Tape::<f64>::new();
        let a = tape.constant(Tensor::from_vec(&[2], vec![0.0, 0.5]).unwrap());
        let b = tape.constant(Tensor::from_vec(&[2], vec![0.5, 0.5]).unwrap());
        let m = tape.mse(a, b).unwrap();
        assert_eq!(tape.value(m).item().unwrap(), 0.125);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::<f64>::new();
        let p = tape.param("p", Tensor::zeros(&[2, 2])).unwrap();
        let y = tape.relu(p);
        assert!(matches!(tape.backward(y), Err(Error::Shape { .. })));
    }

    #[test]
    fn repeated_param_name_shares_one_leaf() {
        let mut tape = Tape::<f32>::new();
        let a = tape.param("w", Tensor::zeros(&[1])).unwrap();
        let b = tape.param("w", Tensor::zeros(&[1])).unwrap();
        assert_eq!(a, b);
        assert!(tape.param("w", Tensor::zeros(&[2])).is_err());
    }

    #[test]
    fn activation_values() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::from_vec(&[4], vec![-1.0, 2.0, -10.0, 0.0]).unwrap());
        let r = tape.relu(x);
        assert_eq!(tape.value(r).data(), &[0.0, 2.0, 0.0, 0.0]);
        let l = tape.leaky_relu(x, 0.2);
        assert_eq!(tape.value(l).data(), &[-0.2, 2.0, -2.0, 0.0]);
        let s = tape.sigmoid(x);
        assert!((tape.value(s).data()[3] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn concat_keeps_halves() {
        let mut tape = Tape::<f32>::new();
        let a = tape.constant(Tensor::full(&[1, 2, 2, 2], 1.0));
        let b = tape.constant(Tensor::full(&[1, 3, 2, 2], 2.0));
        let c = tape.concat_channels(a, b).unwrap();
        assert_eq!(tape.value(c).shape(), &[1, 5, 2, 2]);
        assert!(tape.value(c).data()[..8].iter().all(|&v| v == 1.0));
        assert!(tape.value(c).data()[8..].iter().all(|&v| v == 2.0));
    }

    #[test]
    fn batch_norm_normalizes_per_channel() {
        let mut tape = Tape::<f64>::new();
        let data: Vec<f64> = (0..2 * 2 * 3 * 3).map(|i| (i % 7) as f64 - 3.0).collect();
        let x = tape.constant(Tensor::from_vec(&[2, 2, 3, 3], data).unwrap());
        let gamma = tape.constant(Tensor::full(&[2], 1.0));
        let beta = tape.constant(Tensor::zeros(&[2]));
        let (y, _, _) = tape.batch_norm_train(x, gamma, beta, 1e-5).unwrap();
        let yv = tape.value(y);
        let (b, c, h, w) = yv.dims4("t").unwrap();
        for ci in 0..c {
            let mut acc = 0.0;
            let mut acc2 = 0.0;
            for bi in 0..b {
                for i in 0..h * w {
                    let v = yv.data()[(bi * c + ci) * h * w + i];
                    acc += v;
                    acc2 += v * v;
                }
            }
            let n = (b * h * w) as f64;
            let mean = acc / n;
            let var = acc2 / n - mean * mean;
            assert!(mean.abs() < 1e-9, "mean {mean}");
            assert!((var - 1.0).abs() < 1e-3, "var {var}");
        }
    }

    #[test]
    fn batch_norm_is_fixed_point_on_normalized_input() {
        // Zero-mean unit-variance channel with gamma=1, beta=0 maps to
        // itself (up to the epsilon in the denominator).
        let vals = [-1.5, -0.5, 0.5, 1.5, -1.5, -0.5, 0.5, 1.5];
        let mean: f64 = vals.iter().sum::<f64>() / 8.0;
        let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 8.0;
        let normed: Vec<f64> = vals.iter().map(|v| (v - mean) / var.sqrt()).collect();
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::from_vec(&[2, 1, 2, 2], normed.clone()).unwrap());
        let gamma = tape.constant(Tensor::full(&[1], 1.0));
        let beta = tape.constant(Tensor::zeros(&[1]));
        let (y, _, _) = tape.batch_norm_train(x, gamma, beta, 1e-5).unwrap();
        for (out, orig) in tape.value(y).data().iter().zip(&normed) {
            assert!((out - orig).abs() < 1e-4, "{out} vs {orig}");
        }
    }

    #[test]
    fn batch_norm_constant_channel_gives_beta() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::full(&[1, 1, 2, 2], 5.0));
        let gamma = tape.constant(Tensor::full(&[1], 1.0));
        let beta = tape.constant(Tensor::full(&[1], 0.75));
        let (y, _, _) = tape.batch_norm_train(x, gamma, beta, 1e-5).unwrap();
        for v in tape.value(y).data() {
            assert!((v - 0.75).abs() < 1e-9);
        }
    }

    #[test]
    fn gradients_accumulate_across_reuse() {
        // loss = sum(p) + sum(p) => dp = 2
        let mut tape = Tape::<f64>::new();
        let p = tape.param("p", Tensor::full(&[2], 1.0)).unwrap();
        let s1 = tape.sum(p);
        let s2 = tape.sum(p);
        let loss = tape.add(s1, s2).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(p).unwrap().data(), &[2.0, 2.0]);
    }
}
