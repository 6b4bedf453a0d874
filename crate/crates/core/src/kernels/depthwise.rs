//! Depthwise convolution (`groups == C_in == C_out`).
//!
//! Each channel plane is convolved with its own kernel. The loop runs over
//! kernel taps outermost and sweeps a whole output row per tap, which keeps
//! the innermost loop contiguous when the stride is 1. Every output still
//! sees its taps in (row, column) order, so results match `conv2d_direct`
//! bit for bit.

use super::conv::{src_index, ConvGeometry};
use super::parallel::par_units;
use super::relu_scalar;
use crate::error::{Error, Result};
use crate::graph::{ConvParams, Op};
use crate::tensor::{Shape, Tensor};

/// True for a grouped convolution with one input and one output channel per
/// group. `shapes` are the input and weight shapes.
pub fn is_depthwise(op: &Op, shapes: &[&Shape]) -> bool {
    match (op, shapes) {
        (Op::Conv(p), [x, w, ..]) if x.rank() == 4 && w.rank() == 4 => {
            p.groups > 1 && p.groups == x.dim(1) && p.groups == w.dim(0)
        }
        _ => false,
    }
}

pub fn depthwise_conv2d(
    x: &Tensor,
    w: &Tensor,
    b: Option<&Tensor>,
    p: &ConvParams,
    threads: usize,
) -> Result<Tensor> {
    let g = ConvGeometry::new(x, w, b, p)?;
    if g.cg != 1 || g.mg != 1 {
        return Err(Error::shape(format!(
            "depthwise kernel needs groups == C_in == C_out, got groups={} for {} and {}",
            p.groups,
            x.shape(),
            w.shape()
        )));
    }
    let (kh, kw) = (p.kernel_h, p.kernel_w);
    let (plane_in, plane_out) = (g.h * g.w, g.h_out * g.w_out);
    let mut y = vec![0.0f32; g.n * g.c_out * plane_out];

    par_units(&mut y, plane_out, threads, |first, run| {
        for (u, out) in run.chunks_exact_mut(plane_out).enumerate() {
            let idx = first + u;
            let c = idx % g.c_out;
            let src = &x.data()[idx * plane_in..(idx + 1) * plane_in];
            let taps = &w.data()[c * kh * kw..(c + 1) * kh * kw];
            for r in 0..kh {
                for s in 0..kw {
                    let wv = taps[r * kw + s];
                    // output columns whose tap lands inside the image
                    let ow_lo = (p.pads.left.saturating_sub(s)).div_ceil(p.stride_w);
                    let ow_hi = (g.w + p.pads.left)
                        .checked_sub(s + 1)
                        .map_or(0, |last| (last / p.stride_w + 1).min(g.w_out));
                    if ow_lo >= ow_hi {
                        continue;
                    }
                    for oh in 0..g.h_out {
                        let Some(ih) = src_index(oh, r, p.stride_h, p.pads.top, g.h) else {
                            continue;
                        };
                        let line = &src[ih * g.w..(ih + 1) * g.w];
                        let dst = &mut out[oh * g.w_out..(oh + 1) * g.w_out];
                        let base = ow_lo * p.stride_w + s - p.pads.left;
                        if p.stride_w == 1 {
                            let n = ow_hi - ow_lo;
                            for (d, &xv) in dst[ow_lo..ow_hi].iter_mut().zip(&line[base..base + n]) {
                                *d += xv * wv;
                            }
                        } else {
                            for (i, d) in dst[ow_lo..ow_hi].iter_mut().enumerate() {
                                *d += line[base + i * p.stride_w] * wv;
                            }
                        }
                    }
                }
            }
            let bias = b.map_or(0.0, |b| b.data()[c]);
            for v in out {
                let s = *v + bias;
                *v = if p.fused_relu { relu_scalar(s) } else { s };
            }
        }
    });
    Tensor::from_vec(&g.out_dims(), y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Pads;
    use crate::kernels::conv::{conv2d_direct, conv2d_gemm};
    use crate::kernels::gemm::GemmAlgo;
    use crate::rng::Lcg64;

    fn rand(dims: &[usize], seed: u64) -> Tensor {
        Tensor::random(Shape::new(dims.to_vec()).unwrap(), seed)
    }

    #[test]
    fn classification() {
        let x = Shape::new(vec![1, 8, 4, 4]).unwrap();
        let w = Shape::new(vec![8, 1, 3, 3]).unwrap();
        let dw = Op::Conv(ConvParams::new(3, 1, 1).with_groups(8));
        assert!(is_depthwise(&dw, &[&x, &w]));
        assert!(!is_depthwise(&Op::Conv(ConvParams::new(3, 1, 1)), &[&x, &w]));
        let w16 = Shape::new(vec![16, 1, 3, 3]).unwrap();
        assert!(!is_depthwise(&dw, &[&x, &w16]));
        assert!(!is_depthwise(&Op::Relu, &[&x]));
    }

    #[test]
    fn matches_direct_bitwise() {
        let mut rng = Lcg64::new(77);
        for _ in 0..150 {
            let c = rng.range(1, 6);
            let k = rng.range(1, 5);
            let s = rng.range(1, 3);
            let h = rng.range(k, 10);
            let wd = rng.range(k, 10);
            let mut p = ConvParams::new(k, s, 0).with_groups(c);
            p.pads = Pads {
                top: rng.range(0, k - 1),
                left: rng.range(0, k - 1),
                bottom: rng.range(0, k - 1),
                right: rng.range(0, k - 1),
            };
            p.fused_relu = rng.next_unit() < 0.5;
            let x = rand(&[rng.range(1, 2), c, h, wd], rng.next_u64());
            let w = rand(&[c, 1, k, k], rng.next_u64());
            let b = rand(&[c], rng.next_u64());
            let direct = conv2d_direct(&x, &w, Some(&b), &p, 1).unwrap();
            let dw = depthwise_conv2d(&x, &w, Some(&b), &p, 1 + rng.range(0, 3)).unwrap();
            assert!(dw.bitwise_eq(&direct), "{p:?} x={}", x.shape());
            let gemm = conv2d_gemm(&x, &w, Some(&b), &p, GemmAlgo::Naive, 1).unwrap();
            assert!(gemm.compare(&dw, 1e-6).unwrap().max_abs_diff < 1e-5);
        }
    }

    #[test]
    fn rejects_non_depthwise() {
        let x = rand(&[1, 4, 5, 5], 1);
        let w = rand(&[8, 1, 3, 3], 2);
        let p = ConvParams::new(3, 1, 1).with_groups(4);
        assert!(depthwise_conv2d(&x, &w, None, &p, 1).is_err());
    }
}
