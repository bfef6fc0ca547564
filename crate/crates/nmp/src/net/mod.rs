//! Reverse-mode autodiff over dense NCHW tensors: exactly the operations
//! the backbone, headers, and losses need, nothing more.
//!
//! A [`Graph`] is a tape. Builder methods run the forward kernel eagerly
//! and push a node recording the operation; [`Graph::backward`] walks the
//! tape in reverse and accumulates gradients into every node that needs
//! them. Run gradient checks in f64; train in f32.

pub mod check;
pub mod ops;
pub mod store;

use crate::bev::BevTensor;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<S> {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<S>,
}

impl<S: Real> Tensor4<S> {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Tensor4 {
            n,
            c,
            h,
            w,
            data: vec![S::zero(); n * c * h * w],
        }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), n * c * h * w, "tensor data length mismatch");
        Tensor4 { n, c, h, w, data }
    }

    pub fn scalar(v: S) -> Self {
        Tensor4::from_vec(1, 1, 1, 1, vec![v])
    }

    pub fn full(n: usize, c: usize, h: usize, w: usize, v: S) -> Self {
        Tensor4 {
            n,
            c,
            h,
            w,
            data: vec![v; n * c * h * w],
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    #[inline]
    pub fn idx(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.c + c) * self.h + h) * self.w + w
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> S {
        self.data[self.idx(n, c, h, w)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, h: usize, w: usize, v: S) {
        let i = self.idx(n, c, h, w);
        self.data[i] = v;
    }

    pub fn item(&self) -> S {
        assert_eq!(self.numel(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    pub fn map<T: Real>(&self, f: impl Fn(S) -> T) -> Tensor4<T> {
        Tensor4 {
            n: self.n,
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// A BEV raster is already channel-major, so it becomes a unit-batch NCHW
/// tensor without copying.
impl<S: Real> From<BevTensor<S>> for Tensor4<S> {
    fn from(bev: BevTensor<S>) -> Self {
        Tensor4 {
            n: 1,
            c: bev.c,
            h: bev.h,
            w: bev.w,
            data: bev.data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

/// One cost-volume lookup point in continuous grid coordinates (integer
/// indices at cell centers). Out-of-bounds points read a constant and pass
/// no gradient.
#[derive(Debug, Clone, Copy)]
pub struct GatherPoint {
    pub channel: usize,
    pub row: f64,
    pub col: f64,
}

#[derive(Debug, Clone)]
enum Op<S> {
    Leaf,
    Conv2d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
    },
    Deconv2d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
    },
    MaxPool2d {
        x: NodeId,
        argmax: Vec<usize>,
    },
    Relu {
        x: NodeId,
    },
    Sigmoid {
        x: NodeId,
    },
    BilinearResize {
        x: NodeId,
    },
    ConcatChannels {
        xs: Vec<NodeId>,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Sub {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    Scale {
        x: NodeId,
        k: S,
    },
    Clip {
        x: NodeId,
        lo: S,
        hi: S,
    },
    SumAll {
        x: NodeId,
    },
    MeanAll {
        x: NodeId,
    },
    MaxAll {
        x: NodeId,
        argmax: usize,
    },
    GatherBilinear {
        x: NodeId,
        points: Vec<GatherPoint>,
    },
    BceWithLogits {
        z: NodeId,
        targets: Tensor4<S>,
    },
    SmoothL1 {
        x: NodeId,
    },
}

#[derive(Debug)]
struct Node<S> {
    value: Tensor4<S>,
    grad: Option<Tensor4<S>>,
    requires_grad: bool,
    op: Op<S>,
}

#[derive(Debug, Default)]
pub struct Graph<S> {
    nodes: Vec<Node<S>>,
}

impl<S: Real> Graph<S> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn value(&self, id: NodeId) -> &Tensor4<S> {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> Option<&Tensor4<S>> {
        self.nodes[id.0].grad.as_ref()
    }

    pub fn take_grad(&mut self, id: NodeId) -> Option<Tensor4<S>> {
        self.nodes[id.0].grad.take()
    }

    fn push(&mut self, value: Tensor4<S>, requires_grad: bool, op: Op<S>) -> NodeId {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn requires(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    pub fn leaf(&mut self, value: Tensor4<S>, requires_grad: bool) -> NodeId {
        self.push(value, requires_grad, Op::Leaf)
    }

    pub fn constant(&mut self, value: Tensor4<S>) -> NodeId {
        self.leaf(value, false)
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize, pad: usize) -> NodeId {
        let out = ops::conv2d_forward(self.value(x), self.value(w), self.value(b), stride, pad);
        let req = self.requires(x) || self.requires(w) || self.requires(b);
        self.push(out, req, Op::Conv2d { x, w, b, stride, pad })
    }

    pub fn deconv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
        out_pad: usize,
    ) -> NodeId {
        let out = ops::deconv2d_forward(
            self.value(x),
            self.value(w),
            self.value(b),
            stride,
            pad,
            out_pad,
        );
        let req = self.requires(x) || self.requires(w) || self.requires(b);
        self.push(out, req, Op::Deconv2d { x, w, b, stride, pad })
    }

    pub fn maxpool2d(&mut self, x: NodeId, k: usize, s: usize) -> NodeId {
        let (out, argmax) = ops::maxpool2d_forward(self.value(x), k, s);
        let req = self.requires(x);
        self.push(out, req, Op::MaxPool2d { x, argmax })
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(|v| v.max(S::zero()));
        let req = self.requires(x);
        self.push(out, req, Op::Relu { x })
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(ops::sigmoid_scalar);
        let req = self.requires(x);
        self.push(out, req, Op::Sigmoid { x })
    }

    pub fn bilinear_resize(&mut self, x: NodeId, out_h: usize, out_w: usize) -> NodeId {
        let out = ops::bilinear_resize_forward(self.value(x), out_h, out_w);
        let req = self.requires(x);
        self.push(out, req, Op::BilinearResize { x })
    }

    pub fn concat_channels(&mut self, xs: &[NodeId]) -> NodeId {
        assert!(!xs.is_empty(), "concat of zero tensors");
        let parts: Vec<&Tensor4<S>> = xs.iter().map(|&id| self.value(id)).collect();
        let out = ops::concat_channels_forward(&parts);
        let req = xs.iter().any(|&id| self.requires(id));
        self.push(out, req, Op::ConcatChannels { xs: xs.to_vec() })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = ops::zip(self.value(a), self.value(b), |x, y| x + y);
        let req = self.requires(a) || self.requires(b);
        self.push(out, req, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = ops::zip(self.value(a), self.value(b), |x, y| x - y);
        let req = self.requires(a) || self.requires(b);
        self.push(out, req, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = ops::zip(self.value(a), self.value(b), |x, y| x * y);
        let req = self.requires(a) || self.requires(b);
        self.push(out, req, Op::Mul { a, b })
    }

    pub fn scale(&mut self, x: NodeId, k: S) -> NodeId {
        let out = self.value(x).map(|v| v * k);
        let req = self.requires(x);
        self.push(out, req, Op::Scale { x, k })
    }

    pub fn clip(&mut self, x: NodeId, lo: S, hi: S) -> NodeId {
        let out = self.value(x).map(|v| v.max(lo).min(hi));
        let req = self.requires(x);
        self.push(out, req, Op::Clip { x, lo, hi })
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s: S = self.value(x).data.iter().copied().sum();
        let req = self.requires(x);
        self.push(Tensor4::scalar(s), req, Op::SumAll { x })
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let n = self.value(x).numel();
        assert!(n > 0, "mean of empty tensor");
        let s: S = self.value(x).data.iter().copied().sum();
        let req = self.requires(x);
        self.push(
            Tensor4::scalar(s / S::of(n as f64)),
            req,
            Op::MeanAll { x },
        )
    }

    /// Reduce-max over the whole tensor; ties resolve to the first element
    /// in memory order.
    pub fn max_all(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        assert!(v.numel() > 0, "max of empty tensor");
        let mut argmax = 0;
        let mut best = v.data[0];
        for (i, &d) in v.data.iter().enumerate() {
            if d > best {
                best = d;
                argmax = i;
            }
        }
        let req = self.requires(x);
        self.push(Tensor4::scalar(best), req, Op::MaxAll { x, argmax })
    }

    /// Bilinear lookup of `points` in a (1, C, H, W) tensor; output shape
    /// (1, 1, 1, len). Points outside [0, H-1] x [0, W-1] read `oob_value`.
    pub fn gather_bilinear(
        &mut self,
        x: NodeId,
        points: &[GatherPoint],
        oob_value: S,
    ) -> NodeId {
        let out = ops::gather_bilinear_forward(self.value(x), points, oob_value);
        let req = self.requires(x);
        self.push(
            out,
            req,
            Op::GatherBilinear {
                x,
                points: points.to_vec(),
            },
        )
    }

    /// Elementwise binary cross-entropy on logits (numerically stable).
    pub fn bce_with_logits(&mut self, z: NodeId, targets: Tensor4<S>) -> NodeId {
        assert_eq!(self.value(z).shape(), targets.shape(), "bce shape mismatch");
        let out = ops::zip(self.value(z), &targets, ops::bce_scalar);
        let req = self.requires(z);
        self.push(out, req, Op::BceWithLogits { z, targets })
    }

    /// Elementwise smooth-L1 (knee at 1) of a residual tensor.
    pub fn smooth_l1(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).map(ops::smooth_l1_scalar);
        let req = self.requires(x);
        self.push(out, req, Op::SmoothL1 { x })
    }

    /// Accumulate gradients of `loss` (a scalar node) into every node that
    /// requires them. Gradients add across calls; callers reset by building
    /// a fresh graph per step.
    pub fn backward(&mut self, loss: NodeId) {
        assert_eq!(self.nodes[loss.0].value.numel(), 1, "backward from non-scalar");
        self.accumulate(loss, Tensor4::scalar(S::one()));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad || self.nodes[i].grad.is_none() {
                continue;
            }
            let grad = self.nodes[i].grad.clone().unwrap();
            let op = self.nodes[i].op.clone();
            self.backprop_one(i, &grad, &op);
        }
    }

    fn backprop_one(&mut self, node: usize, gy: &Tensor4<S>, op: &Op<S>) {
        match op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, stride, pad } => {
                let (dx, dw, db) = ops::conv2d_backward(
                    self.value(*x),
                    self.value(*w),
                    gy,
                    *stride,
                    *pad,
                    self.requires(*x),
                );
                if self.requires(*x) {
                    self.accumulate(*x, dx);
                }
                if self.requires(*w) {
                    self.accumulate(*w, dw);
                }
                if self.requires(*b) {
                    self.accumulate(*b, db);
                }
            }
            Op::Deconv2d { x, w, b, stride, pad } => {
                let (dx, dw, db) = ops::deconv2d_backward(
                    self.value(*x),
                    self.value(*w),
                    gy,
                    *stride,
                    *pad,
                );
                if self.requires(*x) {
                    self.accumulate(*x, dx);
                }
                if self.requires(*w) {
                    self.accumulate(*w, dw);
                }
                if self.requires(*b) {
                    self.accumulate(*b, db);
                }
            }
            Op::MaxPool2d { x, argmax } => {
                let mut dx = Tensor4::zeros_like(self.value(*x));
                for (o, &src) in argmax.iter().enumerate() {
                    dx.data[src] += gy.data[o];
                }
                self.accumulate(*x, dx);
            }
            Op::Relu { x } => {
                let dx = ops::zip(self.value(*x), gy, |v, g| {
                    if v > S::zero() {
                        g
                    } else {
                        S::zero()
                    }
                });
                self.accumulate(*x, dx);
            }
            Op::Sigmoid { x } => {
                let y = self.nodes[node].value.clone();
                let dx = ops::zip(&y, gy, |s, g| s * (S::one() - s) * g);
                self.accumulate(*x, dx);
            }
            Op::BilinearResize { x } => {
                let dx = ops::bilinear_resize_backward(self.value(*x), gy);
                self.accumulate(*x, dx);
            }
            Op::ConcatChannels { xs } => {
                let mut c0 = 0;
                let parts: Vec<(NodeId, usize)> = xs
                    .iter()
                    .map(|&id| {
                        let c = self.value(id).c;
                        (id, c)
                    })
                    .collect();
                for (id, c) in parts {
                    if self.requires(id) {
                        let dx = ops::slice_channels(gy, c0, c);
                        self.accumulate(id, dx);
                    }
                    c0 += c;
                }
            }
            Op::Add { a, b } => {
                if self.requires(*a) {
                    self.accumulate(*a, gy.clone());
                }
                if self.requires(*b) {
                    self.accumulate(*b, gy.clone());
                }
            }
            Op::Sub { a, b } => {
                if self.requires(*a) {
                    self.accumulate(*a, gy.clone());
                }
                if self.requires(*b) {
                    self.accumulate(*b, gy.map(|g| -g));
                }
            }
            Op::Mul { a, b } => {
                if self.requires(*a) {
                    let da = ops::zip(self.value(*b), gy, |v, g| v * g);
                    self.accumulate(*a, da);
                }
                if self.requires(*b) {
                    let db = ops::zip(self.value(*a), gy, |v, g| v * g);
                    self.accumulate(*b, db);
                }
            }
            Op::Scale { x, k } => {
                let dx = gy.map(|g| g * *k);
                self.accumulate(*x, dx);
            }
            Op::Clip { x, lo, hi } => {
                let dx = ops::zip(self.value(*x), gy, |v, g| {
                    if v > *lo && v < *hi {
                        g
                    } else {
                        S::zero()
                    }
                });
                self.accumulate(*x, dx);
            }
            Op::SumAll { x } => {
                let g = gy.item();
                let v = self.value(*x);
                self.accumulate(*x, Tensor4::full(v.n, v.c, v.h, v.w, g));
            }
            Op::MeanAll { x } => {
                let v = self.value(*x);
                let g = gy.item() / S::of(v.numel() as f64);
                self.accumulate(*x, Tensor4::full(v.n, v.c, v.h, v.w, g));
            }
            Op::MaxAll { x, argmax } => {
                let mut dx = Tensor4::zeros_like(self.value(*x));
                dx.data[*argmax] = gy.item();
                self.accumulate(*x, dx);
            }
            Op::GatherBilinear { x, points } => {
                if self.requires(*x) {
                    if self.nodes[x.0].grad.is_none() {
                        self.nodes[x.0].grad = Some(Tensor4::zeros_like(&self.nodes[x.0].value));
                    }
                    let dst = self.nodes[x.0].grad.as_mut().unwrap();
                    ops::gather_bilinear_scatter(dst, points, gy);
                }
            }
            Op::BceWithLogits { z, targets } => {
                let mut dx = Tensor4::zeros_like(self.value(*z));
                for i in 0..dx.numel() {
                    let s = ops::sigmoid_scalar(self.value(*z).data[i]);
                    dx.data[i] = (s - targets.data[i]) * gy.data[i];
                }
                self.accumulate(*z, dx);
            }
            Op::SmoothL1 { x } => {
                let dx = ops::zip(self.value(*x), gy, |r, g| {
                    r.max(-S::one()).min(S::one()) * g
                });
                self.accumulate(*x, dx);
            }
        }
    }

    fn accumulate(&mut self, id: NodeId, delta: Tensor4<S>) {
        let node = &mut self.nodes[id.0];
        debug_assert_eq!(node.value.shape(), delta.shape(), "gradient shape mismatch");
        match &mut node.grad {
            Some(g) => {
                for (gi, di) in g.data.iter_mut().zip(delta.data) {
                    *gi += di;
                }
            }
            None => node.grad = Some(delta),
        }
    }
}

impl<S: Real> Tensor4<S> {
    pub fn zeros_like(other: &Tensor4<S>) -> Self {
        Tensor4::zeros(other.n, other.c, other.h, other.w)
    }
}
