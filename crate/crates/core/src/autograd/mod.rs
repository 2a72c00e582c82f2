//! A tape-based reverse-mode differentiation engine over [`Tensor`]s.
//!
//! Nodes are appended in evaluation order; [`Graph::backward`] walks the tape in
//! reverse. Parameters are borrowed rather than copied so a forward pass over a large
//! network does not duplicate its weights.

mod kernels;

use alloc::borrow::Cow;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub use kernels::ConvSpec;
use kernels::{bilinear_taps, col2im, im2col, xcorr_forward, ConvGeom};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
        cols: Option<Vec<T>>,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Relu(Var),
    ChannelAffine {
        x: Var,
        scale: Var,
        shift: Var,
    },
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    Xcorr {
        z: Var,
        x: Var,
    },
    Crop {
        x: Var,
        y0: usize,
        x0: usize,
    },
    Upsample {
        x: Var,
    },
    DeconvPoint {
        x: Var,
        kernel: Var,
        bias: Var,
    },
    Gather {
        x: Var,
        positions: Vec<(usize, usize)>,
    },
    Reshape(Var),
    SliceChannels {
        x: Var,
        start: usize,
    },
    WeightedSum(Vec<(Var, T)>),
    Dot {
        x: Var,
        weights: Vec<T>,
    },
    LogisticLoss {
        x: Var,
        labels: Vec<T>,
        weights: Vec<T>,
    },
    BceLoss {
        x: Var,
        targets: Vec<T>,
        weights: Vec<T>,
        eps: T,
    },
    SmoothL1Loss {
        x: Var,
        targets: Vec<T>,
        weights: Vec<T>,
        beta: T,
    },
}

struct Node<'a, T: Scalar> {
    value: Cow<'a, Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
pub struct Grads<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Grads<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

/// The computation tape.
pub struct Graph<'a, T: Scalar> {
    nodes: Vec<Node<'a, T>>,
    grad_enabled: bool,
}

impl<'a, T: Scalar> Default for Graph<'a, T> {
    fn default() -> Self {
        Self::new()
    }
}

fn softplus<T: Scalar>(v: T) -> T {
    // log(1 + e^v) without overflow
    if v > T::zero() {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

impl<'a, T: Scalar> Graph<'a, T> {
    /// A tape that records gradients.
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    /// A tape for inference only: nothing requires gradients and no backward state is kept.
    pub fn inference() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Moves a node's value out of the tape, leaving an empty tensor behind. Only
    /// meaningful once no further ops or backward passes will read the node.
    pub fn take(&mut self, v: Var) -> Tensor<T> {
        let slot = &mut self.nodes[v.0].value;
        core::mem::replace(slot, Cow::Owned(Tensor::zeros(&[0]))).into_owned()
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        let requires_grad = requires_grad && self.grad_enabled;
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A constant input.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// An owned leaf whose gradient is wanted.
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// A borrowed leaf whose gradient is wanted (network weights).
    pub fn param(&mut self, t: &'a Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(t),
            op: Op::Leaf,
            requires_grad: self.grad_enabled,
        });
        Var(self.nodes.len() - 1)
    }

    /// A borrowed leaf that never receives a gradient (frozen weights, cached features).
    pub fn constant(&mut self, t: &'a Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(t),
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, spec: ConvSpec) -> Result<Var> {
        let (c, h, wd) = self.value(x).chw()?;
        let ws = self.value(w).shape().to_vec();
        let &[o, wc, kh, kw] = ws.as_slice() else {
            return Err(shape_err("conv2d", alloc::format!("weight shape {:?}", ws)));
        };
        if wc != c {
            return Err(shape_err(
                "conv2d",
                alloc::format!("input has {c} channels, weight expects {wc}"),
            ));
        }
        if let Some(b) = b {
            if self.value(b).shape() != [o] {
                return Err(shape_err("conv2d", "bias shape"));
            }
        }
        let (Some(oh), Some(ow)) = (spec.output_side(h, kh), spec.output_side(wd, kw)) else {
            return Err(shape_err(
                "conv2d",
                alloc::format!("kernel {kh}x{kw} {:?} does not fit {h}x{wd}", spec),
            ));
        };
        let geom = ConvGeom {
            c,
            h,
            w: wd,
            kh,
            kw,
            oh,
            ow,
            spec,
        };
        let k = c * kh * kw;
        let p = oh * ow;
        let xv = self.value(x).data();
        let cols_owned = if geom.is_pointwise() {
            None
        } else {
            Some(im2col(xv, &geom))
        };
        let cols: &[T] = cols_owned.as_deref().unwrap_or(xv);
        let mut out = vec![T::zero(); o * p];
        T::gemm(
            o,
            k,
            p,
            T::one(),
            self.value(w).data(),
            (k as isize, 1),
            cols,
            (p as isize, 1),
            T::zero(),
            &mut out,
            (p as isize, 1),
        );
        if let Some(b) = b {
            let bv = self.value(b).data();
            for (oc, row) in out.chunks_mut(p).enumerate() {
                let bias = bv[oc];
                for v in row {
                    *v += bias;
                }
            }
        }
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        let keep_cols = rg && self.rg(w) && !geom.is_pointwise();
        let value = Tensor::from_vec(&[o, oh, ow], out)?;
        Ok(self.push(
            value,
            Op::Conv2d {
                x,
                w,
                b,
                geom,
                cols: if keep_cols { cols_owned } else { None },
            },
            rg,
        ))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(shape_err(
                op,
                alloc::format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let mut v = self.value(a).clone();
        for (x, &y) in v.data_mut().iter_mut().zip(self.value(b).data()) {
            *x -= y;
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Sub(a, b), rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|e| if e > T::zero() { e } else { T::zero() });
        let rg = self.rg(x);
        self.push(v, Op::Relu(x), rg)
    }

    /// `y[c] = x[c] * scale[c] + shift[c]` (a normalisation layer with frozen statistics).
    pub fn channel_affine(&mut self, x: Var, scale: Var, shift: Var) -> Result<Var> {
        let (c, h, w) = self.value(x).chw()?;
        if self.value(scale).shape() != [c] || self.value(shift).shape() != [c] {
            return Err(shape_err(
                "channel_affine",
                "scale/shift must have one entry per channel",
            ));
        }
        let mut v = self.value(x).clone();
        let (s, t) = (self.value(scale).data(), self.value(shift).data());
        for (ch, plane) in v.data_mut().chunks_mut(h * w).enumerate() {
            for e in plane {
                *e = *e * s[ch] + t[ch];
            }
        }
        let rg = self.rg(x) || self.rg(scale) || self.rg(shift);
        Ok(self.push(v, Op::ChannelAffine { x, scale, shift }, rg))
    }

    pub fn max_pool(&mut self, x: Var, kernel: usize, stride: usize, padding: usize) -> Result<Var> {
        let (c, h, w) = self.value(x).chw()?;
        let spec = ConvSpec::new(stride, padding, 1);
        let (Some(oh), Some(ow)) = (spec.output_side(h, kernel), spec.output_side(w, kernel)) else {
            return Err(shape_err("max_pool", "window does not fit"));
        };
        let xv = self.value(x).data();
        let mut out = vec![T::neg_infinity(); c * oh * ow];
        let mut argmax = vec![usize::MAX; c * oh * ow];
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let oi = (ch * oh + oy) * ow + ox;
                    for ki in 0..kernel {
                        let iy = (oy * stride + ki) as isize - padding as isize;
                        if iy < 0 || iy as usize >= h {
                            continue;
                        }
                        for kj in 0..kernel {
                            let ix = (ox * stride + kj) as isize - padding as isize;
                            if ix < 0 || ix as usize >= w {
                                continue;
                            }
                            let ii = (ch * h + iy as usize) * w + ix as usize;
                            if xv[ii] > out[oi] {
                                out[oi] = xv[ii];
                                argmax[oi] = ii;
                            }
                        }
                    }
                }
            }
        }
        let rg = self.rg(x);
        let value = Tensor::from_vec(&[c, oh, ow], out)?;
        Ok(self.push(value, Op::MaxPool { x, argmax }, rg))
    }

    /// Depth-wise cross-correlation: each channel of `x` is correlated with the same
    /// channel of `z` (valid positions only).
    pub fn xcorr(&mut self, z: Var, x: Var) -> Result<Var> {
        let (zc, zh, zw) = self.value(z).chw()?;
        let (c, h, w) = self.value(x).chw()?;
        if zc != c {
            return Err(shape_err("xcorr", alloc::format!("channel mismatch {zc} vs {c}")));
        }
        if zh > h || zw > w {
            return Err(shape_err("xcorr", "exemplar larger than search features"));
        }
        let out = xcorr_forward(self.value(z).data(), self.value(x).data(), (c, zh, zw), (h, w));
        let value = Tensor::from_vec(&[c, h - zh + 1, w - zw + 1], out)?;
        let rg = self.rg(z) || self.rg(x);
        Ok(self.push(value, Op::Xcorr { z, x }, rg))
    }

    /// Spatial window `[y0, y0 + h) x [x0, x0 + w)`.
    pub fn crop(&mut self, x: Var, y0: usize, x0: usize, h: usize, w: usize) -> Result<Var> {
        let (c, ih, iw) = self.value(x).chw()?;
        if y0 + h > ih || x0 + w > iw {
            return Err(shape_err(
                "crop",
                alloc::format!("window {h}x{w} at ({y0},{x0}) exceeds {ih}x{iw}"),
            ));
        }
        let xv = self.value(x).data();
        let mut out = Vec::with_capacity(c * h * w);
        for ch in 0..c {
            for y in 0..h {
                let base = (ch * ih + y0 + y) * iw + x0;
                out.extend_from_slice(&xv[base..base + w]);
            }
        }
        let value = Tensor::from_vec(&[c, h, w], out)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Crop { x, y0, x0 }, rg))
    }

    /// Bilinear resize with half-pixel centres.
    pub fn upsample(&mut self, x: Var, oh: usize, ow: usize) -> Result<Var> {
        let (c, h, w) = self.value(x).chw()?;
        if oh == 0 || ow == 0 {
            return Err(shape_err("upsample", "empty output"));
        }
        let ty = bilinear_taps::<T>(h, oh);
        let tx = bilinear_taps::<T>(w, ow);
        let xv = self.value(x).data();
        let mut out = vec![T::zero(); c * oh * ow];
        for ch in 0..c {
            let plane = &xv[ch * h * w..(ch + 1) * h * w];
            for (oy, &(y0, y1, wy0, wy1)) in ty.iter().enumerate() {
                for (ox, &(x0, x1, wx0, wx1)) in tx.iter().enumerate() {
                    out[(ch * oh + oy) * ow + ox] = wy0 * (wx0 * plane[y0 * w + x0] + wx1 * plane[y0 * w + x1])
                        + wy1 * (wx0 * plane[y1 * w + x0] + wx1 * plane[y1 * w + x1]);
                }
            }
        }
        let value = Tensor::from_vec(&[c, oh, ow], out)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Upsample { x }, rg))
    }

    /// Transposed convolution of a single feature vector (`[c]` or `[c, 1, 1]`) with a
    /// `[c, o, kh, kw]` kernel: the result is an `[o, kh, kw]` map.
    pub fn deconv_point(&mut self, x: Var, kernel: Var, bias: Var) -> Result<Var> {
        let c = self.value(x).len();
        let ks = self.value(kernel).shape().to_vec();
        let &[kc, o, kh, kw] = ks.as_slice() else {
            return Err(shape_err("deconv_point", "kernel must be rank 4"));
        };
        if kc != c || self.value(bias).shape() != [o] {
            return Err(shape_err(
                "deconv_point",
                alloc::format!("vector of {c} vs kernel {:?}", ks),
            ));
        }
        let n = o * kh * kw;
        let mut out = vec![T::zero(); n];
        T::gemm(
            1,
            c,
            n,
            T::one(),
            self.value(x).data(),
            (c as isize, 1),
            self.value(kernel).data(),
            (n as isize, 1),
            T::zero(),
            &mut out,
            (n as isize, 1),
        );
        let bv = self.value(bias).data();
        for (oc, plane) in out.chunks_mut(kh * kw).enumerate() {
            for v in plane {
                *v += bv[oc];
            }
        }
        let value = Tensor::from_vec(&[o, kh, kw], out)?;
        let rg = self.rg(x) || self.rg(kernel) || self.rg(bias);
        Ok(self.push(value, Op::DeconvPoint { x, kernel, bias }, rg))
    }

    /// Collects the feature vectors at `positions` into a `[c, n, 1]` map so point-wise
    /// convolutions can run on a subset of the grid.
    pub fn gather(&mut self, x: Var, positions: &[(usize, usize)]) -> Result<Var> {
        let (c, h, w) = self.value(x).chw()?;
        if let Some(p) = positions.iter().find(|&&(r, cc)| r >= h || cc >= w) {
            return Err(shape_err("gather", alloc::format!("position {:?} outside {h}x{w}", p)));
        }
        let xv = self.value(x).data();
        let n = positions.len();
        let mut out = vec![T::zero(); c * n];
        for ch in 0..c {
            for (i, &(r, cc)) in positions.iter().enumerate() {
                out[ch * n + i] = xv[(ch * h + r) * w + cc];
            }
        }
        let value = Tensor::from_vec(&[c, n, 1], out)?;
        let rg = self.rg(x);
        Ok(self.push(
            value,
            Op::Gather {
                x,
                positions: positions.to_vec(),
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(x).clone().reshaped(shape)?;
        let rg = self.rg(x);
        Ok(self.push(v, Op::Reshape(x), rg))
    }

    pub fn slice_channels(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (c, h, w) = self.value(x).chw()?;
        if start + len > c {
            return Err(shape_err(
                "slice_channels",
                alloc::format!("[{start}, {}) of {c}", start + len),
            ));
        }
        let data = self.value(x).data()[start * h * w..(start + len) * h * w].to_vec();
        let value = Tensor::from_vec(&[len, h, w], data)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::SliceChannels { x, start }, rg))
    }

    /// `sum_i coeff_i * x_i` over same-shaped inputs.
    pub fn weighted_sum(&mut self, terms: &[(Var, T)]) -> Result<Var> {
        let Some(&(first, _)) = terms.first() else {
            return Err(shape_err("weighted_sum", "no terms"));
        };
        let mut v = Tensor::zeros(self.value(first).shape());
        for &(t, c) in terms {
            self.same_shape("weighted_sum", first, t)?;
            for (a, &b) in v.data_mut().iter_mut().zip(self.value(t).data()) {
                *a += c * b;
            }
        }
        let rg = terms.iter().any(|&(t, _)| self.rg(t));
        Ok(self.push(v, Op::WeightedSum(terms.to_vec()), rg))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Result<Var> {
        self.weighted_sum(&[(x, s)])
    }

    /// Scalar `sum_i weights_i * x_i`.
    pub fn dot(&mut self, x: Var, weights: Vec<T>) -> Result<Var> {
        self.check_len("dot", x, weights.len())?;
        let s = self.value(x).data().iter().zip(&weights).map(|(&a, &b)| a * b).sum();
        let rg = self.rg(x);
        Ok(self.push(Tensor::scalar(s), Op::Dot { x, weights }, rg))
    }

    fn check_len(&self, op: &'static str, x: Var, n: usize) -> Result<()> {
        if self.value(x).len() != n {
            return Err(shape_err(
                op,
                alloc::format!("{} elements vs {} labels", self.value(x).len(), n),
            ));
        }
        Ok(())
    }

    /// Scalar `sum_i w_i * log(1 + exp(-y_i * x_i))` with labels `y_i` in {-1, +1}.
    pub fn logistic_loss(&mut self, x: Var, labels: Vec<T>, weights: Vec<T>) -> Result<Var> {
        self.check_len("logistic_loss", x, labels.len())?;
        self.check_len("logistic_loss", x, weights.len())?;
        let s = self
            .value(x)
            .data()
            .iter()
            .zip(labels.iter().zip(&weights))
            .map(|(&v, (&y, &w))| {
                if w == T::zero() {
                    T::zero()
                } else {
                    w * softplus(-y * v)
                }
            })
            .sum();
        let rg = self.rg(x);
        Ok(self.push(Tensor::scalar(s), Op::LogisticLoss { x, labels, weights }, rg))
    }

    /// Scalar binary cross-entropy on `p = sigmoid(x)` clamped to `[eps, 1 - eps]`,
    /// targets in {0, 1}. Clamped entries contribute no gradient.
    pub fn bce_loss(&mut self, x: Var, targets: Vec<T>, weights: Vec<T>, eps: T) -> Result<Var> {
        self.check_len("bce_loss", x, targets.len())?;
        self.check_len("bce_loss", x, weights.len())?;
        let hi = T::one() - eps;
        let s = self
            .value(x)
            .data()
            .iter()
            .zip(targets.iter().zip(&weights))
            .map(|(&v, (&y, &w))| {
                let p = sigmoid(v).max(eps).min(hi);
                -w * (y * p.ln() + (T::one() - y) * (T::one() - p).ln())
            })
            .sum();
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::scalar(s),
            Op::BceLoss {
                x,
                targets,
                weights,
                eps,
            },
            rg,
        ))
    }

    /// Scalar `sum_i w_i * smooth_l1(t_i - x_i, beta)`.
    pub fn smooth_l1_loss(&mut self, x: Var, targets: Vec<T>, weights: Vec<T>, beta: T) -> Result<Var> {
        self.check_len("smooth_l1_loss", x, targets.len())?;
        self.check_len("smooth_l1_loss", x, weights.len())?;
        let s = self
            .value(x)
            .data()
            .iter()
            .zip(targets.iter().zip(&weights))
            .map(|(&v, (&t, &w))| {
                if w == T::zero() {
                    T::zero()
                } else {
                    w * smooth_l1(t - v, beta)
                }
            })
            .sum();
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::scalar(s),
            Op::SmoothL1Loss {
                x,
                targets,
                weights,
                beta,
            },
            rg,
        ))
    }

    /// Hash of every piecewise choice made in the forward pass (ReLU gates, pooling
    /// winners, loss branches). Two evaluations with equal signatures lie on the same
    /// smooth piece of the function, which is what finite-difference checks need.
    pub fn branch_signature(&self) -> u64 {
        const PRIME: u64 = 0x100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(PRIME);
        };
        for node in &self.nodes {
            match &node.op {
                Op::Relu(_) => node.value.data().iter().for_each(|&v| mix((v > T::zero()) as u64)),
                Op::MaxPool { argmax, .. } => argmax.iter().for_each(|&i| mix(i as u64)),
                Op::BceLoss { x, eps, .. } => self.value(*x).data().iter().for_each(|&v| {
                    let p = sigmoid(v);
                    mix((p < *eps) as u64 | (((p > T::one() - *eps) as u64) << 1));
                }),
                Op::SmoothL1Loss { x, targets, beta, .. } => {
                    let knee = T::one() / (*beta * *beta);
                    self.value(*x).data().iter().zip(targets).for_each(|(&v, &t)| {
                        let inside = (t - v).abs() < knee;
                        mix(inside as u64 | ((!inside && t > v) as u64) << 1);
                    });
                }
                _ => {}
            }
        }
        h
    }

    /// Reverse pass from a single-element output.
    pub fn backward(&self, out: Var) -> Result<Grads<T>> {
        if self.value(out).len() != 1 {
            return Err(shape_err("backward", "output must be a scalar"));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if !self.rg(out) {
            return Ok(Grads { grads });
        }
        grads[out.0] = Some(Tensor::full(self.value(out).shape(), T::one()));
        for i in (0..=out.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let (before, rest) = grads.split_at_mut(i);
            let Some(gy) = rest[0].as_ref() else { continue };
            let mut acc = Acc {
                nodes: &self.nodes,
                grads: before,
            };
            self.backward_node(node, gy, &mut acc);
            // interior gradients are no longer needed
            rest[0] = None;
        }
        Ok(Grads { grads })
    }

    fn backward_node(&self, node: &Node<'a, T>, gy: &Tensor<T>, acc: &mut Acc<'_, 'a, T>) {
        let g = gy.data();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, geom, cols } => {
                let o = self.value(*w).shape()[0];
                let k = geom.c * geom.kh * geom.kw;
                let p = geom.oh * geom.ow;
                if acc.wants(*w) {
                    let xv = self.value(*x).data();
                    let recomputed;
                    let cols: &[T] = if geom.is_pointwise() {
                        xv
                    } else if let Some(c) = cols {
                        c
                    } else {
                        recomputed = im2col(xv, geom);
                        &recomputed
                    };
                    let mut dw = vec![T::zero(); o * k];
                    T::gemm(
                        o,
                        p,
                        k,
                        T::one(),
                        g,
                        (p as isize, 1),
                        cols,
                        (1, p as isize),
                        T::zero(),
                        &mut dw,
                        (k as isize, 1),
                    );
                    acc.add_vec(*w, dw);
                }
                if let Some(b) = b {
                    if acc.wants(*b) {
                        let db = g.chunks(p).map(|row| row.iter().copied().sum()).collect();
                        acc.add_vec(*b, db);
                    }
                }
                if acc.wants(*x) {
                    let mut dcols = vec![T::zero(); k * p];
                    T::gemm(
                        k,
                        o,
                        p,
                        T::one(),
                        self.value(*w).data(),
                        (1, k as isize),
                        g,
                        (p as isize, 1),
                        T::zero(),
                        &mut dcols,
                        (p as isize, 1),
                    );
                    if geom.is_pointwise() {
                        acc.add_vec(*x, dcols);
                    } else {
                        let mut dx = vec![T::zero(); geom.c * geom.h * geom.w];
                        col2im(&dcols, geom, &mut dx);
                        acc.add_vec(*x, dx);
                    }
                }
            }
            Op::Add(a, b) => {
                acc.add_slice(*a, g);
                acc.add_slice(*b, g);
            }
            Op::Sub(a, b) => {
                acc.add_slice(*a, g);
                if acc.wants(*b) {
                    acc.add_vec(*b, g.iter().map(|&v| -v).collect());
                }
            }
            Op::Relu(x) => {
                if acc.wants(*x) {
                    let d = node
                        .value
                        .data()
                        .iter()
                        .zip(g)
                        .map(|(&y, &gv)| if y > T::zero() { gv } else { T::zero() })
                        .collect();
                    acc.add_vec(*x, d);
                }
            }
            Op::ChannelAffine { x, scale, shift } => {
                let (c, h, w) = self.value(*x).chw().expect("rank 3");
                let xv = self.value(*x).data();
                let s = self.value(*scale).data();
                if acc.wants(*x) {
                    let d = g.iter().enumerate().map(|(i, &gv)| gv * s[i / (h * w)]).collect();
                    acc.add_vec(*x, d);
                }
                if acc.wants(*scale) {
                    let d = (0..c)
                        .map(|ch| (ch * h * w..(ch + 1) * h * w).map(|i| g[i] * xv[i]).sum())
                        .collect();
                    acc.add_vec(*scale, d);
                }
                if acc.wants(*shift) {
                    let d = g.chunks(h * w).map(|pl| pl.iter().copied().sum()).collect();
                    acc.add_vec(*shift, d);
                }
            }
            Op::MaxPool { x, argmax } => {
                if acc.wants(*x) {
                    let mut d = vec![T::zero(); self.value(*x).len()];
                    for (&ai, &gv) in argmax.iter().zip(g) {
                        if ai != usize::MAX {
                            d[ai] += gv;
                        }
                    }
                    acc.add_vec(*x, d);
                }
            }
            Op::Xcorr { z, x } => {
                let (c, zh, zw) = self.value(*z).chw().expect("rank 3");
                let (_, h, w) = self.value(*x).chw().expect("rank 3");
                let (oh, ow) = (h - zh + 1, w - zw + 1);
                let zv = self.value(*z).data();
                let xv = self.value(*x).data();
                let (wz, wx) = (acc.wants(*z), acc.wants(*x));
                let mut dz = vec![T::zero(); if wz { zv.len() } else { 0 }];
                let mut dx = vec![T::zero(); if wx { xv.len() } else { 0 }];
                for ch in 0..c {
                    for i in 0..oh {
                        for u in 0..zh {
                            let xrow = (ch * h + i + u) * w;
                            let zrow = (ch * zh + u) * zw;
                            for j in 0..ow {
                                let gv = g[(ch * oh + i) * ow + j];
                                if gv == T::zero() {
                                    continue;
                                }
                                for v in 0..zw {
                                    if wz {
                                        dz[zrow + v] += gv * xv[xrow + j + v];
                                    }
                                    if wx {
                                        dx[xrow + j + v] += gv * zv[zrow + v];
                                    }
                                }
                            }
                        }
                    }
                }
                if wz {
                    acc.add_vec(*z, dz);
                }
                if wx {
                    acc.add_vec(*x, dx);
                }
            }
            Op::Crop { x, y0, x0 } => {
                if acc.wants(*x) {
                    let (c, ih, iw) = self.value(*x).chw().expect("rank 3");
                    let (_, h, w) = gy.chw().expect("rank 3");
                    let mut d = vec![T::zero(); c * ih * iw];
                    for ch in 0..c {
                        for y in 0..h {
                            let base = (ch * ih + y0 + y) * iw + x0;
                            let src = &g[(ch * h + y) * w..(ch * h + y + 1) * w];
                            for (dd, &s) in d[base..base + w].iter_mut().zip(src) {
                                *dd += s;
                            }
                        }
                    }
                    acc.add_vec(*x, d);
                }
            }
            Op::Upsample { x } => {
                if acc.wants(*x) {
                    let (c, h, w) = self.value(*x).chw().expect("rank 3");
                    let (_, oh, ow) = gy.chw().expect("rank 3");
                    let ty = bilinear_taps::<T>(h, oh);
                    let tx = bilinear_taps::<T>(w, ow);
                    let mut d = vec![T::zero(); c * h * w];
                    for ch in 0..c {
                        let plane = &mut d[ch * h * w..(ch + 1) * h * w];
                        for (oy, &(y0, y1, wy0, wy1)) in ty.iter().enumerate() {
                            for (ox, &(x0, x1, wx0, wx1)) in tx.iter().enumerate() {
                                let gv = g[(ch * oh + oy) * ow + ox];
                                plane[y0 * w + x0] += gv * wy0 * wx0;
                                plane[y0 * w + x1] += gv * wy0 * wx1;
                                plane[y1 * w + x0] += gv * wy1 * wx0;
                                plane[y1 * w + x1] += gv * wy1 * wx1;
                            }
                        }
                    }
                    acc.add_vec(*x, d);
                }
            }
            Op::DeconvPoint { x, kernel, bias } => {
                let ks = self.value(*kernel).shape();
                let (c, o, sp) = (ks[0], ks[1], ks[2] * ks[3]);
                let n = o * sp;
                if acc.wants(*kernel) {
                    let mut dk = vec![T::zero(); c * n];
                    T::gemm(
                        c,
                        1,
                        n,
                        T::one(),
                        self.value(*x).data(),
                        (1, 1),
                        g,
                        (n as isize, 1),
                        T::zero(),
                        &mut dk,
                        (n as isize, 1),
                    );
                    acc.add_vec(*kernel, dk);
                }
                if acc.wants(*x) {
                    let mut dx = vec![T::zero(); c];
                    T::gemm(
                        c,
                        n,
                        1,
                        T::one(),
                        self.value(*kernel).data(),
                        (n as isize, 1),
                        g,
                        (1, 1),
                        T::zero(),
                        &mut dx,
                        (1, 1),
                    );
                    acc.add_vec(*x, dx);
                }
                if acc.wants(*bias) {
                    let d = g.chunks(sp).map(|pl| pl.iter().copied().sum()).collect();
                    acc.add_vec(*bias, d);
                }
            }
            Op::Gather { x, positions } => {
                if acc.wants(*x) {
                    let (c, h, w) = self.value(*x).chw().expect("rank 3");
                    let n = positions.len();
                    let mut d = vec![T::zero(); c * h * w];
                    for ch in 0..c {
                        for (i, &(r, cc)) in positions.iter().enumerate() {
                            d[(ch * h + r) * w + cc] += g[ch * n + i];
                        }
                    }
                    acc.add_vec(*x, d);
                }
            }
            Op::Reshape(x) => acc.add_slice(*x, g),
            Op::SliceChannels { x, start } => {
                if acc.wants(*x) {
                    let (_, h, w) = gy.chw().expect("rank 3");
                    let mut d = vec![T::zero(); self.value(*x).len()];
                    d[start * h * w..start * h * w + g.len()].copy_from_slice(g);
                    acc.add_vec(*x, d);
                }
            }
            Op::WeightedSum(terms) => {
                for &(t, c) in terms {
                    if acc.wants(t) {
                        acc.add_vec(t, g.iter().map(|&v| v * c).collect());
                    }
                }
            }
            Op::Dot { x, weights } => {
                if acc.wants(*x) {
                    acc.add_vec(*x, weights.iter().map(|&w| w * g[0]).collect());
                }
            }
            Op::LogisticLoss { x, labels, weights } => {
                if acc.wants(*x) {
                    let d = self
                        .value(*x)
                        .data()
                        .iter()
                        .zip(labels.iter().zip(weights))
                        .map(|(&v, (&y, &w))| g[0] * w * (-y) * sigmoid(-y * v))
                        .collect();
                    acc.add_vec(*x, d);
                }
            }
            Op::BceLoss {
                x,
                targets,
                weights,
                eps,
            } => {
                if acc.wants(*x) {
                    let hi = T::one() - *eps;
                    let d = self
                        .value(*x)
                        .data()
                        .iter()
                        .zip(targets.iter().zip(weights))
                        .map(|(&v, (&y, &w))| {
                            let p = sigmoid(v);
                            if p < *eps || p > hi {
                                T::zero()
                            } else {
                                g[0] * w * (p - y)
                            }
                        })
                        .collect();
                    acc.add_vec(*x, d);
                }
            }
            Op::SmoothL1Loss {
                x,
                targets,
                weights,
                beta,
            } => {
                if acc.wants(*x) {
                    let d = self
                        .value(*x)
                        .data()
                        .iter()
                        .zip(targets.iter().zip(weights))
                        .map(|(&v, (&t, &w))| -g[0] * w * smooth_l1_slope(t - v, *beta))
                        .collect();
                    acc.add_vec(*x, d);
                }
            }
        }
    }
}

/// `0.5 * beta^2 * x^2` inside `|x| < 1 / beta^2`, `|x| - 1 / (2 beta^2)` outside.
pub fn smooth_l1<T: Scalar>(x: T, beta: T) -> T {
    let b2 = beta * beta;
    let ax = x.abs();
    if ax < T::one() / b2 {
        T::of(0.5) * b2 * x * x
    } else {
        ax - T::one() / (T::of(2.0) * b2)
    }
}

fn smooth_l1_slope<T: Scalar>(x: T, beta: T) -> T {
    let b2 = beta * beta;
    if x.abs() < T::one() / b2 {
        b2 * x
    } else {
        x.signum()
    }
}

struct Acc<'g, 'a, T: Scalar> {
    nodes: &'g [Node<'a, T>],
    grads: &'g mut [Option<Tensor<T>>],
}

impl<T: Scalar> Acc<'_, '_, T> {
    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn add_vec(&mut self, v: Var, d: Vec<T>) {
        if !self.wants(v) {
            return;
        }
        match &mut self.grads[v.0] {
            Some(t) => {
                for (a, b) in t.data_mut().iter_mut().zip(d) {
                    *a += b;
                }
            }
            slot @ None => {
                let shape = self.nodes[v.0].value.shape();
                *slot = Some(Tensor::from_vec(shape, d).expect("gradient shape"));
            }
        }
    }

    fn add_slice(&mut self, v: Var, d: &[T]) {
        if !self.wants(v) {
            return;
        }
        match &mut self.grads[v.0] {
            Some(t) => {
                for (a, &b) in t.data_mut().iter_mut().zip(d) {
                    *a += b;
                }
            }
            slot @ None => {
                let shape = self.nodes[v.0].value.shape();
                *slot = Some(Tensor::from_vec(shape, d.to_vec()).expect("gradient shape"));
            }
        }
    }
}
