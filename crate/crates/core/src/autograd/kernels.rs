//! Raw array kernels shared by the forward and backward passes.

use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::Scalar;

/// Stride, zero padding and dilation of a 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl ConvSpec {
    pub const UNIT: Self = Self {
        stride: 1,
        padding: 0,
        dilation: 1,
    };

    pub fn new(stride: usize, padding: usize, dilation: usize) -> Self {
        Self {
            stride,
            padding,
            dilation,
        }
    }

    /// Output side for an input side and kernel side; `None` if the kernel does not fit.
    pub fn output_side(&self, input: usize, kernel: usize) -> Option<usize> {
        let span = self.dilation * (kernel - 1) + 1;
        let padded = input + 2 * self.padding;
        (padded >= span && self.stride > 0).then(|| (padded - span) / self.stride + 1)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub oh: usize,
    pub ow: usize,
    pub spec: ConvSpec,
}

impl ConvGeom {
    pub fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.spec.stride == 1 && self.spec.padding == 0
    }

    /// Input coordinate for output `o` and kernel tap `k` along one axis.
    #[inline]
    fn src(&self, o: usize, k: usize) -> isize {
        (o * self.spec.stride + k * self.spec.dilation) as isize - self.spec.padding as isize
    }
}

/// Unfolds `x` (`c x h x w`) into a `(c*kh*kw) x (oh*ow)` matrix.
pub(crate) fn im2col<T: Scalar>(x: &[T], g: &ConvGeom) -> Vec<T> {
    let p = g.oh * g.ow;
    let mut cols = vec![T::zero(); g.c * g.kh * g.kw * p];
    for c in 0..g.c {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let out = &mut cols[row * p..(row + 1) * p];
                for oy in 0..g.oh {
                    let iy = g.src(oy, ki);
                    if iy < 0 || iy as usize >= g.h {
                        continue;
                    }
                    let src_row = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let dst = &mut out[oy * g.ow..(oy + 1) * g.ow];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = g.src(ox, kj);
                        if ix >= 0 && (ix as usize) < g.w {
                            *d = src_row[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input grid.
pub(crate) fn col2im<T: Scalar>(cols: &[T], g: &ConvGeom, dx: &mut [T]) {
    let p = g.oh * g.ow;
    for c in 0..g.c {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..g.oh {
                    let iy = g.src(oy, ki);
                    if iy < 0 || iy as usize >= g.h {
                        continue;
                    }
                    let base = iy as usize * g.w;
                    for ox in 0..g.ow {
                        let ix = g.src(ox, kj);
                        if ix >= 0 && (ix as usize) < g.w {
                            plane[base + ix as usize] += src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Per-output-index bilinear taps `(i0, i1, w0, w1)` for resizing `input -> output`
/// with half-pixel centres.
pub(crate) fn bilinear_taps<T: Scalar>(input: usize, output: usize) -> Vec<(usize, usize, T, T)> {
    let ratio = input as f64 / output as f64;
    (0..output)
        .map(|o| {
            let src = ((o as f64 + 0.5) * ratio - 0.5).max(0.0);
            let i0 = (src as usize).min(input - 1);
            let i1 = (i0 + 1).min(input - 1);
            let l1 = src - i0 as f64;
            let l1 = if i1 == i0 { 0.0 } else { l1 };
            (i0, i1, T::of(1.0 - l1), T::of(l1))
        })
        .collect()
}

/// Valid per-channel cross-correlation of `x` (`c x h x w`) with `z` (`c x zh x zw`).
pub(crate) fn xcorr_forward<T: Scalar>(
    z: &[T],
    x: &[T],
    (c, zh, zw): (usize, usize, usize),
    (h, w): (usize, usize),
) -> Vec<T> {
    let (oh, ow) = (h - zh + 1, w - zw + 1);
    let mut out = vec![T::zero(); c * oh * ow];
    for ch in 0..c {
        let zp = &z[ch * zh * zw..(ch + 1) * zh * zw];
        let xp = &x[ch * h * w..(ch + 1) * h * w];
        let op = &mut out[ch * oh * ow..(ch + 1) * oh * ow];
        for i in 0..oh {
            let orow = &mut op[i * ow..(i + 1) * ow];
            for u in 0..zh {
                let zrow = &zp[u * zw..(u + 1) * zw];
                let xrow = &xp[(i + u) * w..(i + u + 1) * w];
                for (j, o) in orow.iter_mut().enumerate() {
                    let mut acc = T::zero();
                    for (v, &zv) in zrow.iter().enumerate() {
                        acc += zv * xrow[j + v];
                    }
                    *o += acc;
                }
            }
        }
    }
    out
}
