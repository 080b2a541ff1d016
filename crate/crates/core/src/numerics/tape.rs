//! Reverse-mode automatic differentiation over a define-by-run tape.
//!
//! Forward values are computed eagerly as nodes are recorded, so inference
//! is just "build the tape, read the output". Training additionally calls
//! [`Tape::backward`], which sweeps the tape in reverse creation order
//! (a valid topological order, since ops only reference earlier nodes).

use crate::error::{CoreError, Result};

use super::kernels;
use super::scalar::Scalar;
use super::tensor::Tensor;

/// Clamp bound for cross-entropy: outputs are clipped to `[EPS, 1-EPS]`
/// before the logs so saturated sigmoids cannot produce infinities.
pub const BCE_EPSILON: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    None,
    Sigmoid,
    Tanh,
    Relu,
}

enum Op<S: Scalar> {
    Leaf,
    /// Linear convolution with zero padding; optional bias.
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Add(Var, Var),
    Mul(Var, Var),
    /// Elementwise product with a constant mask (dropout, channel drop).
    MaskMul {
        x: Var,
        mask: Tensor<S>,
    },
    /// Value was shifted by a constant tensor (noise); gradient passes through.
    Offset(Var),
    /// Per-pixel softmax over channels followed by winner-take-all. The
    /// backward pass routes gradient only through the surviving channel's
    /// softmax (straight-through on the mask).
    ChannelSoftmaxWta {
        x: Var,
        winners: Vec<u32>,
    },
    /// Channel-axis concatenation of two [c, h, w] tensors.
    ConcatChannels(Var, Var),
    /// Summed binary cross entropy against a constant target; scalar output.
    Bce {
        output: Var,
        target: Tensor<S>,
    },
}

struct Node<S: Scalar> {
    value: Tensor<S>,
    grad: Option<Vec<S>>,
    needs_grad: bool,
    op: Op<S>,
}

pub struct Tape<S: Scalar> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor<S>, needs_grad: bool, op: Op<S>) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            needs_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// Constant input: gradient is never computed for it.
    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        self.push(value, false, Op::Leaf)
    }

    /// Trainable leaf: gradient is accumulated during backward.
    pub fn param(&mut self, value: Tensor<S>) -> Var {
        self.push(value, true, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    /// Gradient of the last backward pass w.r.t. `v`, if one was computed.
    pub fn grad(&self, v: Var) -> Option<Tensor<S>> {
        let node = &self.nodes[v.0];
        node.grad.as_ref().map(|g| {
            Tensor::from_vec(node.value.dims(), g.clone()).expect("grad dims match value dims")
        })
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Convolution with zero padding and a fused activation. The output has
    /// the same spatial dims as the input; kernel spatial extents must be odd.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, act: Activation) -> Result<Var> {
        let (xd, wd) = (self.value(x).dims(), self.value(w).dims());
        if xd.len() != 3 || wd.len() != 4 {
            return Err(CoreError::shape("conv2d ranks", &[3, 4], &[xd.len(), wd.len()]));
        }
        let (ci, h, wid) = (xd[0], xd[1], xd[2]);
        let (co, kci, kh, kw) = (wd[0], wd[1], wd[2], wd[3]);
        if kci != ci {
            return Err(CoreError::shape(
                "conv2d input channels vs kernel",
                self.value(w).dims(),
                self.value(x).dims(),
            ));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(CoreError::InvalidArgument(format!(
                "conv2d kernel spatial extents must be odd, got {kh}x{kw}"
            )));
        }
        if let Some(b) = b {
            let bd = self.value(b).dims();
            if bd != [co] {
                return Err(CoreError::shape("conv2d bias", &[co], bd));
            }
        }
        let mut out = vec![S::zero(); co * h * wid];
        kernels::conv2d_forward(
            self.value(x).data(),
            (ci, h, wid),
            self.value(w).data(),
            (co, kci, kh, kw),
            b.map(|b| self.value(b).data()),
            &mut out,
        );
        let needs = self.needs(x) || self.needs(w) || b.is_some_and(|b| self.needs(b));
        let value = Tensor::from_vec(&[co, h, wid], out)?;
        let lin = self.push(value, needs, Op::Conv2d { x, w, b });
        Ok(self.activate(lin, act))
    }

    pub fn activate(&mut self, x: Var, act: Activation) -> Var {
        match act {
            Activation::None => x,
            Activation::Sigmoid => self.sigmoid(x),
            Activation::Tanh => self.tanh(x),
            Activation::Relu => self.relu(x),
        }
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let one = S::one();
        let value = self.value(x).map(|v| one / (one + (-v).exp()));
        let needs = self.needs(x);
        self.push(value, needs, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.tanh());
        let needs = self.needs(x);
        self.push(value, needs, Op::Tanh(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| if v > S::zero() { v } else { S::zero() });
        let needs = self.needs(x);
        self.push(value, needs, Op::Relu(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if !self.value(a).same_shape(self.value(b)) {
            return Err(CoreError::shape(
                "add",
                self.value(a).dims(),
                self.value(b).dims(),
            ));
        }
        let value = Tensor::from_vec(
            self.value(a).dims(),
            self.value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(&x, &y)| x + y)
                .collect(),
        )?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, needs, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if !self.value(a).same_shape(self.value(b)) {
            return Err(CoreError::shape(
                "mul",
                self.value(a).dims(),
                self.value(b).dims(),
            ));
        }
        let value = Tensor::from_vec(
            self.value(a).dims(),
            self.value(a)
                .data()
                .iter()
                .zip(self.value(b).data())
                .map(|(&x, &y)| x * y)
                .collect(),
        )?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, needs, Op::Mul(a, b)))
    }

    pub fn mask_mul(&mut self, x: Var, mask: Tensor<S>) -> Result<Var> {
        if !self.value(x).same_shape(&mask) {
            return Err(CoreError::shape("mask_mul", self.value(x).dims(), mask.dims()));
        }
        let value = Tensor::from_vec(
            mask.dims(),
            self.value(x)
                .data()
                .iter()
                .zip(mask.data())
                .map(|(&x, &m)| x * m)
                .collect(),
        )?;
        let needs = self.needs(x);
        Ok(self.push(value, needs, Op::MaskMul { x, mask }))
    }

    /// Adds a constant tensor to the value; the gradient is unaffected.
    pub fn offset(&mut self, x: Var, delta: &Tensor<S>) -> Result<Var> {
        if !self.value(x).same_shape(delta) {
            return Err(CoreError::shape("offset", self.value(x).dims(), delta.dims()));
        }
        let value = Tensor::from_vec(
            delta.dims(),
            self.value(x)
                .data()
                .iter()
                .zip(delta.data())
                .map(|(&x, &d)| x + d)
                .collect(),
        )?;
        let needs = self.needs(x);
        Ok(self.push(value, needs, Op::Offset(x)))
    }

    /// Per-pixel channel softmax + winner-take-all over a [n, h, w] tensor.
    /// Exactly one channel per pixel survives, holding its softmax
    /// probability; ties break to the lowest channel index.
    pub fn channel_softmax_wta(&mut self, x: Var) -> Result<Var> {
        let dims = self.value(x).dims().to_vec();
        if dims.len() != 3 {
            return Err(CoreError::shape("channel_softmax_wta", &[3], &[dims.len()]));
        }
        let (n, h, w) = (dims[0], dims[1], dims[2]);
        let hw = h * w;
        let data = self.value(x).data();
        let mut out = vec![S::zero(); n * hw];
        let mut winners = vec![0u32; hw];
        for p in 0..hw {
            let mut best = 0usize;
            let mut best_v = data[p];
            for c in 1..n {
                let v = data[c * hw + p];
                if v > best_v {
                    best_v = v;
                    best = c;
                }
            }
            let mut denom = S::zero();
            for c in 0..n {
                denom = denom + (data[c * hw + p] - best_v).exp();
            }
            out[best * hw + p] = S::one() / denom;
            winners[p] = best as u32;
        }
        let value = Tensor::from_vec(&dims, out)?;
        let needs = self.needs(x);
        Ok(self.push(value, needs, Op::ChannelSoftmaxWta { x, winners }))
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ad, bd) = (self.value(a).dims().to_vec(), self.value(b).dims().to_vec());
        if ad.len() != 3 || bd.len() != 3 || ad[1..] != bd[1..] {
            return Err(CoreError::shape("concat_channels", &ad, &bd));
        }
        let mut data = Vec::with_capacity((ad[0] + bd[0]) * ad[1] * ad[2]);
        data.extend_from_slice(self.value(a).data());
        data.extend_from_slice(self.value(b).data());
        let value = Tensor::from_vec(&[ad[0] + bd[0], ad[1], ad[2]], data)?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(value, needs, Op::ConcatChannels(a, b)))
    }

    /// Summed binary cross entropy `-Σ t·log o + (1-t)·log(1-o)` with the
    /// output clamped away from 0 and 1. Returns a scalar node.
    pub fn bce(&mut self, target: &Tensor<S>, output: Var) -> Result<Var> {
        if !self.value(output).same_shape(target) {
            return Err(CoreError::shape(
                "binary_cross_entropy",
                target.dims(),
                self.value(output).dims(),
            ));
        }
        let eps = BCE_EPSILON;
        let mut acc = 0f64;
        for (&t, &o) in target.data().iter().zip(self.value(output).data()) {
            let o = o.into_f64().clamp(eps, 1.0 - eps);
            let t = t.into_f64();
            acc -= t * o.ln() + (1.0 - t) * (1.0 - o).ln();
        }
        let needs = self.needs(output);
        Ok(self.push(
            Tensor::scalar(S::from_f64(acc)),
            needs,
            Op::Bce {
                output,
                target: target.clone(),
            },
        ))
    }

    /// Sums a list of scalar nodes into one scalar node.
    pub fn sum_scalars(&mut self, parts: &[Var]) -> Result<Var> {
        let mut iter = parts.iter();
        let first = *iter
            .next()
            .ok_or_else(|| CoreError::InvalidArgument("sum_scalars on empty list".into()))?;
        let mut acc = first;
        for &v in iter {
            acc = self.add(acc, v)?;
        }
        Ok(acc)
    }

    /// Reverse sweep from a scalar loss node. Gradients of every node that
    /// `needs_grad` become available through [`Tape::grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let loss_value = self.value(loss);
        if loss_value.len() != 1 {
            return Err(CoreError::shape("backward loss", &[1], loss_value.dims()));
        }
        if !loss_value.is_finite() {
            return Err(CoreError::NonFiniteLoss { iteration: 0 });
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[loss.0].grad = Some(vec![S::one()]);

        for i in (0..self.nodes.len()).rev() {
            let (earlier, rest) = self.nodes.split_at_mut(i);
            let node = &rest[0];
            let Some(g) = node.grad.as_ref() else { continue };
            match &node.op {
                Op::Leaf => {}
                Op::Conv2d { x, w, b } => {
                    let xd = earlier[x.0].value.dims();
                    let (ci, h, wid) = (xd[0], xd[1], xd[2]);
                    let wd = earlier[w.0].value.dims().to_vec();
                    let kdims = (wd[0], wd[1], wd[2], wd[3]);
                    if earlier[x.0].needs_grad {
                        let mut dx = vec![S::zero(); ci * h * wid];
                        kernels::conv2d_backward_input(
                            g,
                            (ci, h, wid),
                            earlier[w.0].value.data(),
                            kdims,
                            &mut dx,
                        );
                        accumulate(&mut earlier[x.0], &dx);
                    }
                    if earlier[w.0].needs_grad {
                        let mut dw = vec![S::zero(); earlier[w.0].value.len()];
                        kernels::conv2d_backward_kernel(
                            g,
                            earlier[x.0].value.data(),
                            (ci, h, wid),
                            kdims,
                            &mut dw,
                        );
                        accumulate(&mut earlier[w.0], &dw);
                    }
                    if let Some(b) = b {
                        if earlier[b.0].needs_grad {
                            let mut db = vec![S::zero(); kdims.0];
                            kernels::conv2d_backward_bias(g, (kdims.0, h, wid), &mut db);
                            accumulate(&mut earlier[b.0], &db);
                        }
                    }
                }
                Op::Sigmoid(x) => {
                    if earlier[x.0].needs_grad {
                        let y = node.value.data();
                        let dx: Vec<S> = g
                            .iter()
                            .zip(y)
                            .map(|(&gv, &yv)| gv * yv * (S::one() - yv))
                            .collect();
                        accumulate(&mut earlier[x.0], &dx);
                    }
                }
                Op::Tanh(x) => {
                    if earlier[x.0].needs_grad {
                        let y = node.value.data();
                        let dx: Vec<S> = g
                            .iter()
                            .zip(y)
                            .map(|(&gv, &yv)| gv * (S::one() - yv * yv))
                            .collect();
                        accumulate(&mut earlier[x.0], &dx);
                    }
                }
                Op::Relu(x) => {
                    if earlier[x.0].needs_grad {
                        let y = node.value.data();
                        let dx: Vec<S> = g
                            .iter()
                            .zip(y)
                            .map(|(&gv, &yv)| if yv > S::zero() { gv } else { S::zero() })
                            .collect();
                        accumulate(&mut earlier[x.0], &dx);
                    }
                }
                Op::Add(a, b) => {
                    let g = g.clone();
                    if earlier[a.0].needs_grad {
                        accumulate(&mut earlier[a.0], &g);
                    }
                    if earlier[b.0].needs_grad {
                        accumulate(&mut earlier[b.0], &g);
                    }
                }
                Op::Mul(a, b) => {
                    if earlier[a.0].needs_grad {
                        let da: Vec<S> = g
                            .iter()
                            .zip(earlier[b.0].value.data())
                            .map(|(&gv, &bv)| gv * bv)
                            .collect();
                        accumulate(&mut earlier[a.0], &da);
                    }
                    if earlier[b.0].needs_grad {
                        let db: Vec<S> = g
                            .iter()
                            .zip(earlier[a.0].value.data())
                            .map(|(&gv, &av)| gv * av)
                            .collect();
                        accumulate(&mut earlier[b.0], &db);
                    }
                }
                Op::MaskMul { x, mask } => {
                    if earlier[x.0].needs_grad {
                        let dx: Vec<S> = g
                            .iter()
                            .zip(mask.data())
                            .map(|(&gv, &m)| gv * m)
                            .collect();
                        accumulate(&mut earlier[x.0], &dx);
                    }
                }
                Op::Offset(x) => {
                    if earlier[x.0].needs_grad {
                        let g = g.clone();
                        accumulate(&mut earlier[x.0], &g);
                    }
                }
                Op::ChannelSoftmaxWta { x, winners } => {
                    if earlier[x.0].needs_grad {
                        let dims = earlier[x.0].value.dims();
                        let (n, h, w) = (dims[0], dims[1], dims[2]);
                        let hw = h * w;
                        let logits = earlier[x.0].value.data();
                        let mut dx = vec![S::zero(); n * hw];
                        for p in 0..hw {
                            let win = winners[p] as usize;
                            let gw = g[win * hw + p];
                            if gw == S::zero() {
                                continue;
                            }
                            // Recompute the pixel's softmax; gradient flows
                            // only through the surviving channel's output.
                            let mut m = logits[p];
                            for c in 1..n {
                                let v = logits[c * hw + p];
                                if v > m {
                                    m = v;
                                }
                            }
                            let mut denom = S::zero();
                            for c in 0..n {
                                denom = denom + (logits[c * hw + p] - m).exp();
                            }
                            let sw = (logits[win * hw + p] - m).exp() / denom;
                            for c in 0..n {
                                let sc = (logits[c * hw + p] - m).exp() / denom;
                                let delta = if c == win { S::one() } else { S::zero() };
                                dx[c * hw + p] = dx[c * hw + p] + gw * sw * (delta - sc);
                            }
                        }
                        accumulate(&mut earlier[x.0], &dx);
                    }
                }
                Op::ConcatChannels(a, b) => {
                    let an = earlier[a.0].value.len();
                    if earlier[a.0].needs_grad {
                        accumulate(&mut earlier[a.0], &g[..an]);
                    }
                    if earlier[b.0].needs_grad {
                        accumulate(&mut earlier[b.0], &g[an..]);
                    }
                }
                Op::Bce { output, target } => {
                    if earlier[output.0].needs_grad {
                        let gs = g[0];
                        let eps = S::from_f64(BCE_EPSILON);
                        let one = S::one();
                        let dx: Vec<S> = earlier[output.0]
                            .value
                            .data()
                            .iter()
                            .zip(target.data())
                            .map(|(&o, &t)| {
                                let o = o.max(eps).min(one - eps);
                                gs * (-(t / o) + (one - t) / (one - o))
                            })
                            .collect();
                        accumulate(&mut earlier[output.0], &dx);
                    }
                }
            }
        }
        Ok(())
    }
}

fn accumulate<S: Scalar>(node: &mut Node<S>, contrib: &[S]) {
    match node.grad.as_mut() {
        Some(g) => {
            for (gv, &c) in g.iter_mut().zip(contrib) {
                *gv += c;
            }
        }
        None => node.grad = Some(contrib.to_vec()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(dims: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(dims, data.to_vec()).unwrap()
    }

    #[test]
    fn conv2d_zero_input_gives_bias_everywhere() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::zeros(&[1, 3, 3]));
        let w = tape.param(t(&[1, 1, 3, 3], &[1.0, -2.0, 0.5, 3.0, 1.0, 1.0, 0.0, 0.0, 2.0]));
        let b = tape.param(t(&[1], &[0.75]));
        let y = tape.conv2d(x, w, Some(b), Activation::None).unwrap();
        assert!(tape.value(y).data().iter().all(|&v| v == 0.75));
    }

    #[test]
    fn conv2d_one_by_one_identity() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(t(&[1, 2, 2], &[0.1, 0.2, 0.3, 0.4]));
        let w = tape.param(t(&[1, 1, 1, 1], &[1.0]));
        let b = tape.param(Tensor::zeros(&[1]));
        let y = tape.conv2d(x, w, Some(b), Activation::None).unwrap();
        assert_eq!(tape.value(y).data(), tape.value(x).data());
    }

    #[test]
    fn conv2d_all_ones_kernel_center_sum() {
        // 3x3 input 1..9, all-ones 3x3 kernel: center output is the full sum.
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(t(
            &[1, 3, 3],
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
        ));
        let w = tape.param(Tensor::filled(&[1, 1, 3, 3], 1.0));
        let y = tape.conv2d(x, w, None, Activation::None).unwrap();
        assert_eq!(tape.value(y).data()[4], 45.0);
    }

    #[test]
    fn conv2d_rejects_channel_mismatch() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::zeros(&[2, 3, 3]));
        let w = tape.param(Tensor::zeros(&[1, 3, 3, 3]));
        let err = tape.conv2d(x, w, None, Activation::None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[1, 3, 3, 3]") && msg.contains("[2, 3, 3]"), "{msg}");
    }

    #[test]
    fn conv2d_rejects_even_kernel() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::zeros(&[1, 3, 3]));
        let w = tape.param(Tensor::zeros(&[1, 1, 2, 2]));
        assert!(tape.conv2d(x, w, None, Activation::None).is_err());
    }

    #[test]
    fn wta_keeps_single_channel_with_softmax_value() {
        // Scalar softmax oracle for logits (10, 0, 0, 0, 0, 0).
        let logits = [10.0f64, 0.0, 0.0, 0.0, 0.0, 0.0];
        let denom: f64 = logits.iter().map(|&z| (z - 10.0).exp()).sum();
        let expected = 1.0 / denom;

        let mut tape = Tape::<f64>::new();
        let x = tape.constant(t(&[6, 1, 1], &logits));
        let y = tape.channel_softmax_wta(x).unwrap();
        let out = tape.value(y).data();
        assert!((out[0] - expected).abs() < 1e-12);
        assert!(out[1..].iter().all(|&v| v == 0.0));
        assert!(out[0] > 0.999);
    }

    #[test]
    fn wta_ties_break_to_lowest_index() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::filled(&[4, 2, 2], 0.3));
        let y = tape.channel_softmax_wta(x).unwrap();
        let out = tape.value(y).data();
        for p in 0..4 {
            assert!((out[p] - 0.25).abs() < 1e-12);
            for c in 1..4 {
                assert_eq!(out[c * 4 + p], 0.0);
            }
        }
    }

    #[test]
    fn wta_pixel_sum_bounded() {
        let mut tape = Tape::<f64>::new();
        let data: Vec<f64> = (0..3 * 4 * 5).map(|i| ((i * 37 % 11) as f64) / 3.0 - 1.5).collect();
        let x = tape.constant(t(&[3, 4, 5], &data));
        let y = tape.channel_softmax_wta(x).unwrap();
        let out = tape.value(y).data();
        for p in 0..20 {
            let sum: f64 = (0..3).map(|c| out[c * 20 + p]).sum();
            assert!(sum > 0.0 && sum <= 1.0);
        }
    }

    #[test]
    fn bce_half_everywhere() {
        let mut tape = Tape::<f64>::new();
        let o = tape.constant(Tensor::filled(&[4], 0.5));
        let loss = tape.bce(&Tensor::filled(&[4], 0.5), o).unwrap();
        assert!((tape.value(loss).item() - 4.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_near_perfect_prediction() {
        let mut tape = Tape::<f64>::new();
        let o = tape.constant(Tensor::filled(&[1], 1.0 - 1e-7));
        let loss = tape.bce(&Tensor::filled(&[1], 1.0), o).unwrap();
        let v = tape.value(loss).item();
        assert!(v > 0.0 && (v - 1e-7).abs() < 1e-9);
    }

    #[test]
    fn bce_two_element_oracle() {
        // -(ln 0.9 + ln 0.8) computed independently.
        let expected = -(0.9f64.ln() + 0.8f64.ln());
        let mut tape = Tape::<f64>::new();
        let o = tape.constant(t(&[2], &[0.9, 0.2]));
        let loss = tape
            .bce(&t(&[2], &[1.0, 0.0]), o)
            .unwrap();
        assert!((tape.value(loss).item() - expected).abs() < 1e-12);
        assert!((expected - 0.3285).abs() < 5e-5);
    }

    #[test]
    fn bce_rejects_shape_mismatch() {
        let mut tape = Tape::<f64>::new();
        let o = tape.constant(Tensor::zeros(&[3]));
        assert!(tape.bce(&Tensor::zeros(&[4]), o).is_err());
    }

    #[test]
    fn backward_through_mul_matches_product_rule() {
        let mut tape = Tape::<f64>::new();
        let a = tape.param(t(&[2], &[2.0, -3.0]));
        let b = tape.param(t(&[2], &[5.0, 7.0]));
        let y = tape.mul(a, b).unwrap();
        let s = tape.sigmoid(y);
        let loss = tape.bce(&t(&[2], &[1.0, 0.0]), s).unwrap();
        tape.backward(loss).unwrap();
        // d/dy BCE(sigmoid(y)) = sigmoid(y) - t, so da = (sig - t) * b.
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let expect_a = [(sig(10.0) - 1.0) * 5.0, (sig(-21.0) - 0.0) * 7.0];
        let ga = tape.grad(a).unwrap();
        for (got, want) in ga.data().iter().zip(expect_a) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }
}
