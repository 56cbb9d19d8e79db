//! Forward kernels on raw row-major buffers.
//!
//! Convolution is cross-correlation lowered to GEMM via im2col. The two
//! adjoint kernels (`conv2d_input_grad`, `conv2d_weight_grad`) are linear in
//! each argument, which lets the autodiff graph differentiate them again.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{numel, strides, Tensor};

/// `c = alpha * a·b + beta * c` on strided views.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    rsc: usize,
    csc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!((m - 1) * rsc + (n - 1) * csc < c.len());
    assert!(k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    assert!(k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Geometry of a 2-d convolution, fixed at graph-construction time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub in_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub pad: (usize, usize),
}

impl ConvGeom {
    pub fn new(
        input: &[usize],
        weight: &[usize],
        stride: (usize, usize),
        pad: (usize, usize),
    ) -> Result<Self> {
        if input.len() != 4 {
            return Err(Error::Rank {
                op: "conv2d",
                expected: 4,
                found: input.to_vec(),
            });
        }
        if weight.len() != 4 {
            return Err(Error::Rank {
                op: "conv2d",
                expected: 4,
                found: weight.to_vec(),
            });
        }
        if input[1] != weight[1] {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                axis: 1,
                expected: weight[1],
                found: input[1],
            });
        }
        if stride.0 == 0 || stride.1 == 0 {
            return Err(Error::invalid("conv2d", "stride must be positive"));
        }
        let g = ConvGeom {
            batch: input[0],
            in_channels: input[1],
            in_h: input[2],
            in_w: input[3],
            out_channels: weight[0],
            kernel: (weight[2], weight[3]),
            stride,
            pad,
        };
        if g.in_h + 2 * pad.0 < g.kernel.0 {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                axis: 2,
                expected: g.kernel.0,
                found: g.in_h + 2 * pad.0,
            });
        }
        if g.in_w + 2 * pad.1 < g.kernel.1 {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                axis: 3,
                expected: g.kernel.1,
                found: g.in_w + 2 * pad.1,
            });
        }
        Ok(g)
    }

    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.pad.0 - self.kernel.0) / self.stride.0 + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.pad.1 - self.kernel.1) / self.stride.1 + 1
    }

    pub fn input_shape(&self) -> [usize; 4] {
        [self.batch, self.in_channels, self.in_h, self.in_w]
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [
            self.out_channels,
            self.in_channels,
            self.kernel.0,
            self.kernel.1,
        ]
    }

    pub fn output_shape(&self) -> [usize; 4] {
        [self.batch, self.out_channels, self.out_h(), self.out_w()]
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel.0 * self.kernel.1
    }

    fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }

    /// Output columns `xo` whose input column `xo·stride + kj − pad` lies
    /// inside the image.
    fn valid_cols(&self, kj: usize) -> (usize, usize) {
        let (s, pad, ow) = (self.stride.1, self.pad.1, self.out_w());
        let lo = if pad > kj { (pad - kj).div_ceil(s) } else { 0 };
        let hi = if self.in_w + pad > kj {
            ((self.in_w + pad - kj - 1) / s + 1).min(ow)
        } else {
            0
        };
        (lo.min(hi), hi)
    }

    /// Unfold one sample into `cols[patch_len, positions]`.
    fn im2col(&self, x: &[f64], cols: &mut [f64]) {
        let (oh, ow) = (self.out_h(), self.out_w());
        let (kh, kw) = self.kernel;
        let s = self.stride.1;
        let p = oh * ow;
        let mut row = 0;
        for c in 0..self.in_channels {
            let plane = &x[c * self.in_h * self.in_w..(c + 1) * self.in_h * self.in_w];
            for ki in 0..kh {
                for kj in 0..kw {
                    let (lo, hi) = self.valid_cols(kj);
                    let dst = &mut cols[row * p..(row + 1) * p];
                    for y in 0..oh {
                        let iy = (y * self.stride.0 + ki) as isize - self.pad.0 as isize;
                        let line = &mut dst[y * ow..(y + 1) * ow];
                        if iy < 0 || iy >= self.in_h as isize || lo == hi {
                            line.fill(0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * self.in_w..(iy as usize + 1) * self.in_w];
                        line[..lo].fill(0.0);
                        line[hi..].fill(0.0);
                        let first = lo * s + kj - self.pad.1;
                        if s == 1 {
                            line[lo..hi].copy_from_slice(&src[first..first + hi - lo]);
                        } else {
                            for (v, &x) in line[lo..hi].iter_mut().zip(src[first..].iter().step_by(s)) {
                                *v = x;
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    /// Fold `cols` back onto one sample, accumulating overlaps.
    fn col2im(&self, cols: &[f64], x: &mut [f64]) {
        let (oh, ow) = (self.out_h(), self.out_w());
        let (kh, kw) = self.kernel;
        let s = self.stride.1;
        let p = oh * ow;
        let mut row = 0;
        for c in 0..self.in_channels {
            let plane = &mut x[c * self.in_h * self.in_w..(c + 1) * self.in_h * self.in_w];
            for ki in 0..kh {
                for kj in 0..kw {
                    let (lo, hi) = self.valid_cols(kj);
                    let src = &cols[row * p..(row + 1) * p];
                    row += 1;
                    if lo == hi {
                        continue;
                    }
                    let first = lo * s + kj - self.pad.1;
                    for y in 0..oh {
                        let iy = (y * self.stride.0 + ki) as isize - self.pad.0 as isize;
                        if iy < 0 || iy >= self.in_h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * self.in_w..(iy as usize + 1) * self.in_w];
                        let line = &src[y * ow + lo..y * ow + hi];
                        for (d, &v) in dst[first..].iter_mut().step_by(s).zip(line) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation of `x [N, C, H, W]` with `w [F, C, kh, kw]`.
pub fn conv2d(x: &Tensor, w: &Tensor, g: &ConvGeom) -> Tensor {
    let (k, p, f) = (g.patch_len(), g.positions(), g.out_channels);
    let in_len = g.in_channels * g.in_h * g.in_w;
    let mut out = vec![0.0; g.batch * f * p];
    let mut cols = vec![0.0; k * p];
    for n in 0..g.batch {
        g.im2col(&x.data()[n * in_len..(n + 1) * in_len], &mut cols);
        gemm(
            f,
            k,
            p,
            w.data(),
            k,
            1,
            &cols,
            p,
            1,
            0.0,
            &mut out[n * f * p..(n + 1) * f * p],
            p,
            1,
        );
    }
    Tensor::from_parts(g.output_shape().to_vec(), out)
}

/// Adjoint of `conv2d` with respect to its input.
pub fn conv2d_input_grad(gy: &Tensor, w: &Tensor, g: &ConvGeom) -> Tensor {
    let (k, p, f) = (g.patch_len(), g.positions(), g.out_channels);
    let in_len = g.in_channels * g.in_h * g.in_w;
    let mut gx = vec![0.0; g.batch * in_len];
    let mut cols = vec![0.0; k * p];
    for n in 0..g.batch {
        // cols[k, p] = wᵀ[k, f] · gy_n[f, p]
        gemm(
            k,
            f,
            p,
            w.data(),
            1,
            k,
            &gy.data()[n * f * p..(n + 1) * f * p],
            p,
            1,
            0.0,
            &mut cols,
            p,
            1,
        );
        g.col2im(&cols, &mut gx[n * in_len..(n + 1) * in_len]);
    }
    Tensor::from_parts(g.input_shape().to_vec(), gx)
}

/// Adjoint of `conv2d` with respect to its weight.
pub fn conv2d_weight_grad(x: &Tensor, gy: &Tensor, g: &ConvGeom) -> Tensor {
    let (k, p, f) = (g.patch_len(), g.positions(), g.out_channels);
    let in_len = g.in_channels * g.in_h * g.in_w;
    let mut gw = vec![0.0; f * k];
    let mut cols = vec![0.0; k * p];
    for n in 0..g.batch {
        g.im2col(&x.data()[n * in_len..(n + 1) * in_len], &mut cols);
        // gw[f, k] += gy_n[f, p] · colsᵀ[p, k]
        gemm(
            f,
            p,
            k,
            &gy.data()[n * f * p..(n + 1) * f * p],
            p,
            1,
            &cols,
            1,
            p,
            1.0,
            &mut gw,
            k,
            1,
        );
    }
    Tensor::from_parts(g.weight_shape().to_vec(), gw)
}

/// Shape bookkeeping for a (batched) matrix product `op(a)·op(b)`.
#[derive(Clone, Copy, Debug)]
pub struct MatMulDims {
    pub batch: usize,
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub batched: bool,
}

pub fn matmul_dims(a: &[usize], b: &[usize], ta: bool, tb: bool) -> Result<MatMulDims> {
    let rank = a.len();
    if !(rank == 2 || rank == 3) {
        return Err(Error::Rank {
            op: "matmul",
            expected: 2,
            found: a.to_vec(),
        });
    }
    if b.len() != rank {
        return Err(Error::Rank {
            op: "matmul",
            expected: rank,
            found: b.to_vec(),
        });
    }
    let batched = rank == 3;
    let batch = if batched { a[0] } else { 1 };
    if batched && b[0] != batch {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            axis: 0,
            expected: batch,
            found: b[0],
        });
    }
    let (ar, ac) = (a[rank - 2], a[rank - 1]);
    let (br, bc) = (b[rank - 2], b[rank - 1]);
    let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
    let (kb, n) = if tb { (bc, br) } else { (br, bc) };
    if k != kb {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            axis: if tb { rank - 1 } else { rank - 2 },
            expected: k,
            found: kb,
        });
    }
    Ok(MatMulDims {
        batch,
        m,
        k,
        n,
        batched,
    })
}

pub fn matmul(a: &Tensor, b: &Tensor, ta: bool, tb: bool) -> Result<Tensor> {
    let d = matmul_dims(a.shape(), b.shape(), ta, tb)?;
    let mut out = vec![0.0; d.batch * d.m * d.n];
    let (a_len, b_len) = (d.m * d.k, d.k * d.n);
    // Storage strides of op(a) and op(b).
    let (rsa, csa) = if ta { (1, d.m) } else { (d.k, 1) };
    let (rsb, csb) = if tb { (1, d.k) } else { (d.n, 1) };
    for bi in 0..d.batch {
        gemm(
            d.m,
            d.k,
            d.n,
            &a.data()[bi * a_len..(bi + 1) * a_len],
            rsa,
            csa,
            &b.data()[bi * b_len..(bi + 1) * b_len],
            rsb,
            csb,
            0.0,
            &mut out[bi * d.m * d.n..(bi + 1) * d.m * d.n],
            d.n,
            1,
        );
    }
    let shape = if d.batched {
        vec![d.batch, d.m, d.n]
    } else {
        vec![d.m, d.n]
    };
    Ok(Tensor::from_parts(shape, out))
}

/// Output shape and per-output argmax (flat input index) of a 3-d max pool
/// over the (channel, height, width) axes of an `[N, C, H, W]` tensor.
/// Padding cells behave as −∞.
pub fn max_pool3d_argmax(
    x: &Tensor,
    kernel: (usize, usize, usize),
    stride: (usize, usize, usize),
    pad: (usize, usize, usize),
) -> Result<(Vec<usize>, Vec<usize>)> {
    let s = x.shape();
    if s.len() != 4 {
        return Err(Error::Rank {
            op: "max_pool3d",
            expected: 4,
            found: s.to_vec(),
        });
    }
    let dims = [s[1], s[2], s[3]];
    let ks = [kernel.0, kernel.1, kernel.2];
    let ss = [stride.0, stride.1, stride.2];
    let ps = [pad.0, pad.1, pad.2];
    let mut out_dims = [0usize; 3];
    for a in 0..3 {
        if ks[a] == 0 || ss[a] == 0 {
            return Err(Error::invalid("max_pool3d", "kernel and stride must be positive"));
        }
        if ps[a] >= ks[a] {
            return Err(Error::ShapeMismatch {
                op: "max_pool3d",
                axis: a + 1,
                expected: ks[a] - 1,
                found: ps[a],
            });
        }
        if dims[a] + 2 * ps[a] < ks[a] {
            return Err(Error::ShapeMismatch {
                op: "max_pool3d",
                axis: a + 1,
                expected: ks[a],
                found: dims[a] + 2 * ps[a],
            });
        }
        out_dims[a] = (dims[a] + 2 * ps[a] - ks[a]) / ss[a] + 1;
    }
    let n = s[0];
    let (c, h, w) = (dims[0], dims[1], dims[2]);
    let (oc, oh, ow) = (out_dims[0], out_dims[1], out_dims[2]);
    let data = x.data();
    let mut idx = Vec::with_capacity(n * oc * oh * ow);
    let range = |o: usize, a: usize| {
        let start = (o * ss[a]) as isize - ps[a] as isize;
        let lo = start.max(0) as usize;
        let hi = ((start + ks[a] as isize) as usize).min(dims[a]);
        (lo, hi)
    };
    for b in 0..n {
        let base = b * c * h * w;
        for zc in 0..oc {
            let (c0, c1) = range(zc, 0);
            for zy in 0..oh {
                let (y0, y1) = range(zy, 1);
                for zx in 0..ow {
                    let (x0, x1) = range(zx, 2);
                    if c0 >= c1 || y0 >= y1 || x0 >= x1 {
                        return Err(Error::invalid(
                            "max_pool3d",
                            "pooling window lies entirely in padding",
                        ));
                    }
                    let mut best = usize::MAX;
                    let mut best_v = f64::NEG_INFINITY;
                    for ci in c0..c1 {
                        for yi in y0..y1 {
                            let row = base + (ci * h + yi) * w;
                            for xi in x0..x1 {
                                let v = data[row + xi];
                                if best == usize::MAX || v > best_v {
                                    best = row + xi;
                                    best_v = v;
                                }
                            }
                        }
                    }
                    idx.push(best);
                }
            }
        }
    }
    Ok((vec![n, oc, oh, ow], idx))
}

/// Broadcast shape of `a` and `b`, aligning trailing axes.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let r = a.len().max(b.len());
    let mut out = vec![0; r];
    for i in 0..r {
        let da = if i + a.len() >= r { a[i + a.len() - r] } else { 1 };
        let db = if i + b.len() >= r { b[i + b.len() - r] } else { 1 };
        out[i] = if da == db || db == 1 {
            da
        } else if da == 1 {
            db
        } else {
            return Err(Error::ShapeMismatch {
                op: "broadcast",
                axis: i,
                expected: da,
                found: db,
            });
        };
    }
    Ok(out)
}

/// For each element of `big`, the flat index of the `small` element it
/// broadcasts from. `small` must be broadcast-compatible with `big`.
fn broadcast_map(small: &[usize], big: &[usize]) -> Result<Vec<usize>> {
    if small.len() > big.len() {
        return Err(Error::Rank {
            op: "broadcast_to",
            expected: big.len(),
            found: small.to_vec(),
        });
    }
    let off = big.len() - small.len();
    let sstr = strides(small);
    // Effective stride of each big axis in the small tensor (0 when broadcast).
    let mut eff = vec![0usize; big.len()];
    for (i, &d) in small.iter().enumerate() {
        if d == big[off + i] {
            eff[off + i] = sstr[i];
        } else if d != 1 {
            return Err(Error::ShapeMismatch {
                op: "broadcast_to",
                axis: off + i,
                expected: big[off + i],
                found: d,
            });
        }
    }
    let n = numel(big);
    let mut map = Vec::with_capacity(n);
    let mut counter = vec![0usize; big.len()];
    let mut cur = 0usize;
    for _ in 0..n {
        map.push(cur);
        for ax in (0..big.len()).rev() {
            counter[ax] += 1;
            cur += eff[ax];
            if counter[ax] < big[ax] {
                break;
            }
            cur -= eff[ax] * counter[ax];
            counter[ax] = 0;
        }
    }
    Ok(map)
}

pub fn broadcast_to(x: &Tensor, shape: &[usize]) -> Result<Tensor> {
    if x.shape() == shape {
        return Ok(x.clone());
    }
    let map = broadcast_map(x.shape(), shape)?;
    let d = x.data();
    Ok(Tensor::from_parts(
        shape.to_vec(),
        map.iter().map(|&i| d[i]).collect(),
    ))
}

/// Sum `x` down to `shape`, the reverse of `broadcast_to`.
pub fn sum_to(x: &Tensor, shape: &[usize]) -> Result<Tensor> {
    if x.shape() == shape {
        return Ok(x.clone());
    }
    let map = broadcast_map(shape, x.shape())?;
    let mut out = vec![0.0; numel(shape)];
    for (v, &i) in x.data().iter().zip(&map) {
        out[i] += v;
    }
    Ok(Tensor::from_parts(shape.to_vec(), out))
}

pub fn gather(x: &Tensor, idx: &[usize], shape: &[usize]) -> Tensor {
    let d = x.data();
    Tensor::from_parts(shape.to_vec(), idx.iter().map(|&i| d[i]).collect())
}

pub fn scatter_add(x: &Tensor, idx: &[usize], shape: &[usize]) -> Tensor {
    let mut out = vec![0.0; numel(shape)];
    for (v, &i) in x.data().iter().zip(idx) {
        out[i] += v;
    }
    Tensor::from_parts(shape.to_vec(), out)
}
