//! 2-D convolution: the direct reference loop and im2col + GEMM lowering.

use super::gemm::{matmul_into, GemmAlgo, Matrix};
use super::parallel::par_units;
use super::relu_scalar;
use crate::error::{Error, Result};
use crate::graph::ConvParams;
use crate::tensor::Tensor;

/// Validated extents of one convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub n: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    /// Input channels per group.
    pub cg: usize,
    /// Output channels per group.
    pub mg: usize,
    pub h_out: usize,
    pub w_out: usize,
}

impl ConvGeometry {
    pub fn new(x: &Tensor, w: &Tensor, b: Option<&Tensor>, p: &ConvParams) -> Result<Self> {
        let (n, c_in, h, wd) = x.shape().nchw()?;
        let (c_out, cg, kh, kw) = w.shape().nchw()?;
        if p.groups == 0 || c_in % p.groups != 0 || c_out % p.groups != 0 {
            return Err(Error::shape(format!(
                "groups={} must divide C_in={c_in} and C_out={c_out}",
                p.groups
            )));
        }
        if cg != c_in / p.groups || kh != p.kernel_h || kw != p.kernel_w {
            return Err(Error::shape(format!(
                "weight {} does not match input {} with kernel {}x{} and groups={}",
                w.shape(),
                x.shape(),
                p.kernel_h,
                p.kernel_w,
                p.groups
            )));
        }
        if let Some(b) = b {
            if b.dims() != [c_out] {
                return Err(Error::shape(format!("bias {} should be [{c_out}]", b.shape())));
            }
        }
        let (h_out, w_out) = p.output_hw(h, wd).ok_or_else(|| {
            Error::shape(format!(
                "kernel {}x{} does not fit padded input {}",
                kh,
                kw,
                x.shape()
            ))
        })?;
        Ok(ConvGeometry {
            n,
            c_in,
            h,
            w: wd,
            c_out,
            cg,
            mg: c_out / p.groups,
            h_out,
            w_out,
        })
    }

    pub fn out_dims(&self) -> [usize; 4] {
        [self.n, self.c_out, self.h_out, self.w_out]
    }

    /// Multiply-accumulate count, ignoring padding.
    pub fn macs(&self, p: &ConvParams) -> usize {
        self.n * self.c_out * self.h_out * self.w_out * self.cg * p.kernel_h * p.kernel_w
    }
}

/// Input coordinate for output position `o` and tap `k`, or `None` in the padding.
#[inline]
pub(crate) fn src_index(o: usize, k: usize, stride: usize, pad: usize, len: usize) -> Option<usize> {
    (o * stride + k).checked_sub(pad).filter(|&i| i < len)
}

/// Kernel taps `k` whose input coordinate `o·stride + k − pad` lies in `0..len`.
#[inline]
fn tap_range(o: usize, k: usize, stride: usize, pad: usize, len: usize) -> std::ops::Range<usize> {
    let start = o * stride;
    let lo = pad.saturating_sub(start).min(k);
    let hi = (len + pad).saturating_sub(start).min(k).max(lo);
    lo..hi
}

/// Reference convolution. Each output is accumulated over input channel,
/// then kernel row, then kernel column, and the bias is added last.
pub fn conv2d_direct(
    x: &Tensor,
    w: &Tensor,
    b: Option<&Tensor>,
    p: &ConvParams,
    threads: usize,
) -> Result<Tensor> {
    let g = ConvGeometry::new(x, w, b, p)?;
    let plane = g.h_out * g.w_out;
    let mut y = vec![0.0f32; g.n * g.c_out * plane];
    let (xd, wdata) = (x.data(), w.data());
    let (kh, kw) = (p.kernel_h, p.kernel_w);

    par_units(&mut y, plane, threads, |first, run| {
        for (u, out) in run.chunks_exact_mut(plane).enumerate() {
            let (ni, co) = ((first + u) / g.c_out, (first + u) % g.c_out);
            let ci0 = (co / g.mg) * g.cg;
            let bias = b.map_or(0.0, |b| b.data()[co]);
            let xn = &xd[(ni * g.c_in + ci0) * g.h * g.w..][..g.cg * g.h * g.w];
            let wn = &wdata[co * g.cg * kh * kw..][..g.cg * kh * kw];
            for oh in 0..g.h_out {
                let rows = tap_range(oh, kh, p.stride_h, p.pads.top, g.h);
                // first input row read by tap `rows.start`
                let ih0 = (oh * p.stride_h + rows.start).saturating_sub(p.pads.top);
                for ow in 0..g.w_out {
                    let cols = tap_range(ow, kw, p.stride_w, p.pads.left, g.w);
                    let iw0 = (ow * p.stride_w + cols.start).saturating_sub(p.pads.left);
                    let mut acc = 0.0f32;
                    let taps = if cols.is_empty() { 0 } else { g.cg };
                    for ci in 0..taps {
                        let xc = &xn[ci * g.h * g.w..][..g.h * g.w];
                        let wc = &wn[ci * kh * kw..][..kh * kw];
                        for (i, r) in rows.clone().enumerate() {
                            let xr = &xc[(ih0 + i) * g.w + iw0..][..cols.len()];
                            let wr = &wc[r * kw + cols.start..][..cols.len()];
                            for (a, b) in xr.iter().zip(wr) {
                                acc += a * b;
                            }
                        }
                    }
                    let v = acc + bias;
                    out[oh * g.w_out + ow] = if p.fused_relu { relu_scalar(v) } else { v };
                }
            }
        }
    });
    Tensor::from_vec(&g.out_dims(), y)
}

/// Lowers the receptive fields of batch item `batch`, group `group` into a
/// `(C_in/groups · kh · kw) × (H_out · W_out)` matrix. Padding reads as zero.
pub fn im2col(x: &Tensor, p: &ConvParams, batch: usize, group: usize) -> Result<Matrix> {
    let (n, c_in, h, w) = x.shape().nchw()?;
    if p.groups == 0 || c_in % p.groups != 0 || batch >= n || group >= p.groups {
        return Err(Error::shape(format!(
            "im2col: batch {batch}/group {group} out of range for {} with groups={}",
            x.shape(),
            p.groups
        )));
    }
    let cg = c_in / p.groups;
    let (h_out, w_out) = p
        .output_hw(h, w)
        .ok_or_else(|| Error::shape(format!("kernel does not fit {}", x.shape())))?;
    let src = &x.data()[(batch * c_in + group * cg) * h * w..][..cg * h * w];
    let mut cols = vec![0.0; cg * p.kernel_h * p.kernel_w * h_out * w_out];
    im2col_into(src, cg, h, w, p, h_out, w_out, &mut cols);
    Matrix::new(cg * p.kernel_h * p.kernel_w, h_out * w_out, cols)
}

#[allow(clippy::too_many_arguments)]
fn im2col_into(
    src: &[f32],
    channels: usize,
    h: usize,
    w: usize,
    p: &ConvParams,
    h_out: usize,
    w_out: usize,
    cols: &mut [f32],
) {
    let row_len = h_out * w_out;
    let mut rows = cols.chunks_exact_mut(row_len);
    for c in 0..channels {
        let plane = &src[c * h * w..(c + 1) * h * w];
        for r in 0..p.kernel_h {
            for s in 0..p.kernel_w {
                let row = rows.next().expect("row count matches");
                for oh in 0..h_out {
                    let dst = &mut row[oh * w_out..(oh + 1) * w_out];
                    let Some(ih) = src_index(oh, r, p.stride_h, p.pads.top, h) else {
                        dst.fill(0.0);
                        continue;
                    };
                    let line = &plane[ih * w..(ih + 1) * w];
                    for (ow, d) in dst.iter_mut().enumerate() {
                        *d = src_index(ow, s, p.stride_w, p.pads.left, w).map_or(0.0, |iw| line[iw]);
                    }
                }
            }
        }
    }
}

/// Convolution as one GEMM per (batch item, group):
/// `Y_g = W_g · im2col(X_g)`. A 1×1, stride-1, unpadded convolution uses the
/// input plane directly as the right-hand matrix.
pub fn conv2d_gemm(
    x: &Tensor,
    w: &Tensor,
    b: Option<&Tensor>,
    p: &ConvParams,
    algo: GemmAlgo,
    threads: usize,
) -> Result<Tensor> {
    let g = ConvGeometry::new(x, w, b, p)?;
    let plane = g.h_out * g.w_out;
    let k = g.cg * p.kernel_h * p.kernel_w;
    let pointwise =
        p.kernel_h == 1 && p.kernel_w == 1 && p.stride_h == 1 && p.stride_w == 1 && p.pads.is_zero();
    let mut y = vec![0.0f32; g.n * g.c_out * plane];
    let mut cols = if pointwise { Vec::new() } else { vec![0.0; k * plane] };

    for ni in 0..g.n {
        for grp in 0..p.groups {
            let src = &x.data()[(ni * g.c_in + grp * g.cg) * g.h * g.w..][..g.cg * g.h * g.w];
            let rhs: &[f32] = if pointwise {
                src
            } else {
                im2col_into(src, g.cg, g.h, g.w, p, g.h_out, g.w_out, &mut cols);
                &cols
            };
            let lhs = &w.data()[grp * g.mg * k..(grp + 1) * g.mg * k];
            let out = &mut y[(ni * g.c_out + grp * g.mg) * plane..][..g.mg * plane];
            matmul_into(algo, lhs, rhs, out, g.mg, k, plane, threads);
        }
    }

    if b.is_some() || p.fused_relu {
        par_units(&mut y, plane, threads, |first, run| {
            for (u, out) in run.chunks_exact_mut(plane).enumerate() {
                let bias = b.map_or(0.0, |b| b.data()[(first + u) % g.c_out]);
                for v in out {
                    let s = *v + bias;
                    *v = if p.fused_relu { relu_scalar(s) } else { s };
                }
            }
        });
    }
    Tensor::from_vec(&g.out_dims(), y)
}
