//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation as a node in creation order, so the
//! node list is already topologically sorted. [`Graph::backward`] walks it in
//! reverse and emits gradient computations as new nodes on the same tape.
//! Gradients are therefore ordinary [`Var`]s and can be differentiated again,
//! which is how the gradient penalty obtains second-order terms.

use alloc::format;
use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::{self, ConvGeom};
use crate::math;
use crate::tensor::{numel, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    Offset(Var),
    Exp(Var),
    Log(Var),
    Powf(Var, f64),
    Sigmoid(Var),
    Softplus(Var),
    Sum(Var),
    BroadcastTo(Var),
    SumTo(Var),
    Reshape(Var),
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    Conv2d { x: Var, w: Var, geom: ConvGeom },
    ConvInputGrad { gy: Var, w: Var, geom: ConvGeom },
    ConvWeightGrad { x: Var, gy: Var, geom: ConvGeom },
    Gather { x: Var, idx: Rc<[usize]> },
    ScatterAdd { x: Var, idx: Rc<[usize]> },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Neg(..) => "neg",
            Op::Scale(..) => "scale",
            Op::Offset(..) => "offset",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Powf(..) => "powf",
            Op::Sigmoid(..) => "sigmoid",
            Op::Softplus(..) => "softplus",
            Op::Sum(..) => "sum",
            Op::BroadcastTo(..) => "broadcast_to",
            Op::SumTo(..) => "sum_to",
            Op::Reshape(..) => "reshape",
            Op::MatMul { .. } => "matmul",
            Op::Conv2d { .. } => "conv2d",
            Op::ConvInputGrad { .. } => "conv2d_input_grad",
            Op::ConvWeightGrad { .. } => "conv2d_weight_grad",
            Op::Gather { .. } => "gather",
            Op::ScatterAdd { .. } => "scatter_add",
        }
    }

    fn inputs(&self) -> [Option<Var>; 2] {
        match *self {
            Op::Leaf => [None, None],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => [Some(a), Some(b)],
            Op::Neg(a)
            | Op::Scale(a, _)
            | Op::Offset(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Powf(a, _)
            | Op::Sigmoid(a)
            | Op::Softplus(a)
            | Op::Sum(a)
            | Op::BroadcastTo(a)
            | Op::SumTo(a)
            | Op::Reshape(a) => [Some(a), None],
            Op::MatMul { a, b, .. } => [Some(a), Some(b)],
            Op::Conv2d { x, w, .. } => [Some(x), Some(w)],
            Op::ConvInputGrad { gy, w, .. } => [Some(gy), Some(w)],
            Op::ConvWeightGrad { x, gy, .. } => [Some(x), Some(gy)],
            Op::Gather { x, .. } | Op::ScatterAdd { x, .. } => [Some(x), None],
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recording of one forward (and optionally backward) computation.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A leaf node; gradients are tracked through it when `requires_grad`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Scalar value of a one-element node.
    pub fn item(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    /// A constant copy of `v`; gradients stop here.
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.value(v).clone();
        self.constant(t)
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let requires_grad = op
            .inputs()
            .iter()
            .flatten()
            .any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    // ---- elementwise -------------------------------------------------

    /// Broadcast both operands to a common shape.
    fn align(&mut self, a: Var, b: Var) -> Result<(Var, Var)> {
        if self.shape(a) == self.shape(b) {
            return Ok((a, b));
        }
        let shape = kernels::broadcast_shape(self.shape(a), self.shape(b))?;
        let a = self.broadcast_to(a, &shape)?;
        let b = self.broadcast_to(b, &shape)?;
        Ok((a, b))
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        Tensor::from_parts(
            ta.shape().to_vec(),
            ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect(),
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = self.align(a, b)?;
        let t = self.zip(a, b, |x, y| x + y);
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = self.align(a, b)?;
        let t = self.zip(a, b, |x, y| x - y);
        Ok(self.push(t, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = self.align(a, b)?;
        let t = self.zip(a, b, |x, y| x * y);
        Ok(self.push(t, Op::Mul(a, b)))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = self.align(a, b)?;
        let t = self.zip(a, b, |x, y| x / y);
        Ok(self.push(t, Op::Div(a, b)))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| -x);
        self.push(t, Op::Neg(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a).map(|x| c * x);
        self.push(t, Op::Scale(a, c))
    }

    /// `a + c` for a constant `c`.
    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a).map(|x| x + c);
        self.push(t, Op::Offset(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let t = self.value(a).map(math::exp);
        self.push(t, Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let t = self.value(a).map(math::ln);
        self.push(t, Op::Log(a))
    }

    pub fn powf(&mut self, a: Var, p: f64) -> Var {
        let t = self.value(a).map(|x| math::powf(x, p));
        self.push(t, Op::Powf(a, p))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.powf(a, 0.5)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| x * x);
        self.push(t, Op::Mul(a, a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.value(a).map(math::sigmoid);
        self.push(t, Op::Sigmoid(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let t = self.value(a).map(math::softplus);
        self.push(t, Op::Softplus(a))
    }

    /// Multiply by a constant tensor derived from the current value of `a`.
    fn mask_mul(&mut self, a: Var, f: impl Fn(f64) -> f64) -> Var {
        let mask = self.value(a).map(f);
        let m = self.constant(mask);
        let t = self.zip(a, m, |x, y| x * y);
        self.push(t, Op::Mul(a, m))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.lrelu(a, 0.0)
    }

    /// Leaky ReLU: `x` for `x >= 0`, `slope * x` otherwise.
    pub fn lrelu(&mut self, a: Var, slope: f64) -> Var {
        self.mask_mul(a, |x| if x >= 0.0 { 1.0 } else { slope })
    }

    /// Elementwise clamp to `[lo, hi]`; the gradient is zero where clamped.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        let inside = self.mask_mul(a, |x| if x >= lo && x <= hi { 1.0 } else { 0.0 });
        let fill = self.value(a).map(|x| {
            if x < lo {
                lo
            } else if x > hi {
                hi
            } else {
                0.0
            }
        });
        let c = self.constant(fill);
        self.add(inside, c)
    }

    // ---- reductions and shape ----------------------------------------

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let t = Tensor::scalar(self.value(a).sum());
        self.push(t, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).numel() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    pub fn broadcast_to(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if self.shape(a) == shape {
            return Ok(a);
        }
        let t = kernels::broadcast_to(self.value(a), shape)?;
        Ok(self.push(t, Op::BroadcastTo(a)))
    }

    pub fn sum_to(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if self.shape(a) == shape {
            return Ok(a);
        }
        let t = kernels::sum_to(self.value(a), shape)?;
        Ok(self.push(t, Op::SumTo(a)))
    }

    /// Sum over the last axis, keeping it with extent 1.
    pub fn sum_last(&mut self, a: Var) -> Result<Var> {
        let mut shape = self.shape(a).to_vec();
        match shape.last_mut() {
            Some(d) => *d = 1,
            None => return Ok(a),
        }
        self.sum_to(a, &shape)
    }

    pub fn mean_last(&mut self, a: Var) -> Result<Var> {
        let d = self.shape(a).last().copied().unwrap_or(1) as f64;
        let s = self.sum_last(a)?;
        Ok(self.scale(s, 1.0 / d))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if self.shape(a) == shape {
            return Ok(a);
        }
        let t = self.value(a).clone().reshape(shape)?;
        Ok(self.push(t, Op::Reshape(a)))
    }

    // ---- linear algebra ----------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, b, false, false)
    }

    /// `op(a)·op(b)` where `op` transposes the last two axes when flagged.
    /// Operands are `[M, K]` matrices or `[B, M, K]` batches.
    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let t = kernels::matmul(self.value(a), self.value(b), ta, tb)?;
        Ok(self.push(t, Op::MatMul { a, b, ta, tb }))
    }

    /// Dense layer `x·wᵀ + b` for `x: [N, in]`, `w: [out, in]`, `b: [out]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let y = self.matmul_t(x, w, false, true)?;
        match b {
            Some(b) => self.add(y, b),
            None => Ok(y),
        }
    }

    /// Cross-correlation of `x: [N, C, H, W]` with `w: [F, C, kh, kw]`,
    /// zero padding.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        stride: (usize, usize),
        pad: (usize, usize),
    ) -> Result<Var> {
        let geom = ConvGeom::new(self.shape(x), self.shape(w), stride, pad)?;
        let t = kernels::conv2d(self.value(x), self.value(w), &geom);
        Ok(self.push(t, Op::Conv2d { x, w, geom }))
    }

    /// Convolution followed by a per-channel bias `b: [F]`.
    pub fn conv2d_bias(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: (usize, usize),
        pad: (usize, usize),
    ) -> Result<Var> {
        let y = self.conv2d(x, w, stride, pad)?;
        match b {
            Some(b) => {
                let f = self.shape(b)[0];
                let b = self.reshape(b, &[1, f, 1, 1])?;
                self.add(y, b)
            }
            None => Ok(y),
        }
    }

    fn conv_input_grad(&mut self, gy: Var, w: Var, geom: ConvGeom) -> Var {
        let t = kernels::conv2d_input_grad(self.value(gy), self.value(w), &geom);
        self.push(t, Op::ConvInputGrad { gy, w, geom })
    }

    fn conv_weight_grad(&mut self, x: Var, gy: Var, geom: ConvGeom) -> Var {
        let t = kernels::conv2d_weight_grad(self.value(x), self.value(gy), &geom);
        self.push(t, Op::ConvWeightGrad { x, gy, geom })
    }

    fn conv_forward(&mut self, x: Var, w: Var, geom: ConvGeom) -> Var {
        let t = kernels::conv2d(self.value(x), self.value(w), &geom);
        self.push(t, Op::Conv2d { x, w, geom })
    }

    /// Max pooling over (channel, height, width) of `[N, C, H, W]`.
    pub fn max_pool3d(
        &mut self,
        x: Var,
        kernel: (usize, usize, usize),
        stride: (usize, usize, usize),
        pad: (usize, usize, usize),
    ) -> Result<Var> {
        let (shape, idx) = kernels::max_pool3d_argmax(self.value(x), kernel, stride, pad)?;
        Ok(self.gather(x, idx.into(), &shape))
    }

    fn gather(&mut self, x: Var, idx: Rc<[usize]>, shape: &[usize]) -> Var {
        let t = kernels::gather(self.value(x), &idx, shape);
        self.push(t, Op::Gather { x, idx })
    }

    fn scatter_add(&mut self, x: Var, idx: Rc<[usize]>, shape: &[usize]) -> Var {
        let t = kernels::scatter_add(self.value(x), &idx, shape);
        self.push(t, Op::ScatterAdd { x, idx })
    }

    // ---- composites --------------------------------------------------

    /// Softmax along the last axis with per-row max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let cols = *shape.last().ok_or_else(|| Error::Rank {
            op: "softmax_rows",
            expected: 1,
            found: shape.clone(),
        })?;
        let mut row_shape = shape.clone();
        *row_shape.last_mut().unwrap() = 1;
        let maxes: Vec<f64> = self
            .value(a)
            .data()
            .chunks(cols)
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let m = self.constant(Tensor::from_parts(row_shape, maxes));
        let z = self.sub(a, m)?;
        let e = self.exp(z);
        let s = self.sum_last(e)?;
        self.div(e, s)
    }

    /// Normalize over the last axis, then apply `gain ⊙ x + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let mu = self.mean_last(x)?;
        let xc = self.sub(x, mu)?;
        let sq = self.square(xc);
        let var = self.mean_last(sq)?;
        let var = self.offset(var, eps);
        let inv = self.powf(var, -0.5);
        let y = self.mul(xc, inv)?;
        let y = self.mul(y, gain)?;
        self.add(y, bias)
    }

    // ---- reverse mode ------------------------------------------------

    /// Gradients of the scalar `loss` with respect to each of `wrt`.
    ///
    /// The returned vars live on this graph and may themselves be
    /// differentiated. Vars that do not influence `loss` receive zeros.
    pub fn backward(&mut self, loss: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        let loss_shape = self.shape(loss).to_vec();
        if numel(&loss_shape) != 1 {
            return Err(Error::NonScalarLoss(loss_shape));
        }
        let n = loss.0 + 1;

        // Nodes that sit on a path from some `wrt` var towards the loss.
        let mut relevant = vec![false; n];
        for v in wrt {
            if v.0 < n {
                relevant[v.0] = true;
            }
        }
        for i in 0..n {
            if !relevant[i] && self.nodes[i].requires_grad {
                relevant[i] = self.nodes[i]
                    .op
                    .inputs()
                    .iter()
                    .flatten()
                    .any(|v| relevant[v.0]);
            }
        }

        let mut grads: Vec<Option<Var>> = vec![None; n];
        grads[loss.0] = Some(self.constant(Tensor::ones(&loss_shape)));
        for i in (0..n).rev() {
            let Some(g) = grads[i] else { continue };
            if !relevant[i] || matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let out = Var(i);
            let mut contribute = |graph: &mut Graph, input: Var, gv: Var| -> Result<()> {
                grads[input.0] = Some(match grads[input.0] {
                    Some(prev) => graph.add(prev, gv)?,
                    None => gv,
                });
                Ok(())
            };
            let want = |v: Var| relevant[v.0];
            match op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    if want(a) {
                        contribute(self, a, g)?;
                    }
                    if want(b) {
                        contribute(self, b, g)?;
                    }
                }
                Op::Sub(a, b) => {
                    if want(a) {
                        contribute(self, a, g)?;
                    }
                    if want(b) {
                        let gb = self.neg(g);
                        contribute(self, b, gb)?;
                    }
                }
                Op::Mul(a, b) => {
                    if want(a) {
                        let ga = self.mul(g, b)?;
                        contribute(self, a, ga)?;
                    }
                    if want(b) {
                        let gb = self.mul(g, a)?;
                        contribute(self, b, gb)?;
                    }
                }
                Op::Div(a, b) => {
                    if want(a) {
                        let ga = self.div(g, b)?;
                        contribute(self, a, ga)?;
                    }
                    if want(b) {
                        // d(a/b)/db = -out / b
                        let t = self.mul(g, out)?;
                        let t = self.div(t, b)?;
                        let gb = self.neg(t);
                        contribute(self, b, gb)?;
                    }
                }
                Op::Neg(a) => {
                    let ga = self.neg(g);
                    contribute(self, a, ga)?;
                }
                Op::Scale(a, c) => {
                    let ga = self.scale(g, c);
                    contribute(self, a, ga)?;
                }
                Op::Offset(a) => contribute(self, a, g)?,
                Op::Exp(a) => {
                    let ga = self.mul(g, out)?;
                    contribute(self, a, ga)?;
                }
                Op::Log(a) => {
                    let ga = self.div(g, a)?;
                    contribute(self, a, ga)?;
                }
                Op::Powf(a, p) => {
                    let d = self.powf(a, p - 1.0);
                    let d = self.scale(d, p);
                    let ga = self.mul(g, d)?;
                    contribute(self, a, ga)?;
                }
                Op::Sigmoid(a) => {
                    let one_minus = self.neg(out);
                    let one_minus = self.offset(one_minus, 1.0);
                    let d = self.mul(out, one_minus)?;
                    let ga = self.mul(g, d)?;
                    contribute(self, a, ga)?;
                }
                Op::Softplus(a) => {
                    let d = self.sigmoid(a);
                    let ga = self.mul(g, d)?;
                    contribute(self, a, ga)?;
                }
                Op::Sum(a) | Op::SumTo(a) => {
                    let shape = self.shape(a).to_vec();
                    let ga = self.broadcast_to(g, &shape)?;
                    contribute(self, a, ga)?;
                }
                Op::BroadcastTo(a) => {
                    let shape = self.shape(a).to_vec();
                    let ga = self.sum_to(g, &shape)?;
                    contribute(self, a, ga)?;
                }
                Op::Reshape(a) => {
                    let shape = self.shape(a).to_vec();
                    let ga = self.reshape(g, &shape)?;
                    contribute(self, a, ga)?;
                }
                Op::MatMul { a, b, ta, tb } => {
                    if want(a) {
                        let ga = if ta {
                            self.matmul_t(b, g, tb, true)?
                        } else {
                            self.matmul_t(g, b, false, !tb)?
                        };
                        contribute(self, a, ga)?;
                    }
                    if want(b) {
                        let gb = if tb {
                            self.matmul_t(g, a, true, ta)?
                        } else {
                            self.matmul_t(a, g, !ta, false)?
                        };
                        contribute(self, b, gb)?;
                    }
                }
                Op::Conv2d { x, w, geom } => {
                    if want(x) {
                        let gx = self.conv_input_grad(g, w, geom);
                        contribute(self, x, gx)?;
                    }
                    if want(w) {
                        let gw = self.conv_weight_grad(x, g, geom);
                        contribute(self, w, gw)?;
                    }
                }
                Op::ConvInputGrad { gy, w, geom } => {
                    if want(gy) {
                        let ggy = self.conv_forward(g, w, geom);
                        contribute(self, gy, ggy)?;
                    }
                    if want(w) {
                        let gw = self.conv_weight_grad(g, gy, geom);
                        contribute(self, w, gw)?;
                    }
                }
                Op::ConvWeightGrad { x, gy, geom } => {
                    if want(x) {
                        let gx = self.conv_input_grad(gy, g, geom);
                        contribute(self, x, gx)?;
                    }
                    if want(gy) {
                        let ggy = self.conv_forward(x, g, geom);
                        contribute(self, gy, ggy)?;
                    }
                }
                Op::Gather { x, idx } => {
                    let shape = self.shape(x).to_vec();
                    let gx = self.scatter_add(g, idx, &shape);
                    contribute(self, x, gx)?;
                }
                Op::ScatterAdd { x, idx } => {
                    let shape = self.shape(x).to_vec();
                    let gx = self.gather(g, idx, &shape);
                    contribute(self, x, gx)?;
                }
            }
        }

        wrt.iter()
            .map(|&v| match grads.get(v.0).copied().flatten() {
                Some(g) => Ok(g),
                None => {
                    let shape = self.shape(v).to_vec();
                    Ok(self.constant(Tensor::zeros(&shape)))
                }
            })
            .collect()
    }

    /// Gradient values of `loss` with respect to `wrt`, checked for finiteness.
    pub fn gradients(&mut self, loss: Var, wrt: &[Var]) -> Result<Vec<Tensor>> {
        let vars = self.backward(loss, wrt)?;
        vars.into_iter()
            .enumerate()
            .map(|(i, v)| {
                let t = self.value(v).clone();
                if t.is_finite() {
                    Ok(t)
                } else {
                    Err(Error::NonFinite(format!("gradient #{i}")))
                }
            })
            .collect()
    }

    /// Name of the operation that produced `v` (diagnostics).
    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }
}
