use super::conv::src_index;
use super::parallel::par_units;
use crate::error::{Error, Result};
use crate::graph::PoolParams;
use crate::tensor::Tensor;

fn pool_dims(x: &Tensor, p: &PoolParams) -> Result<(usize, usize, usize, usize, usize, usize)> {
    let (n, c, h, w) = x.shape().nchw()?;
    let (ho, wo) = p
        .output_hw(h, w)
        .ok_or_else(|| Error::shape(format!("pool window does not fit {}", x.shape())))?;
    Ok((n, c, h, w, ho, wo))
}

fn pool_with(
    x: &Tensor,
    p: &PoolParams,
    threads: usize,
    reduce: impl Fn(&mut dyn Iterator<Item = f32>) -> f32 + Sync,
) -> Result<Tensor> {
    let (n, c, h, w, ho, wo) = pool_dims(x, p)?;
    let mut y = vec![0.0f32; n * c * ho * wo];
    par_units(&mut y, ho * wo, threads, |first, run| {
        for (u, out) in run.chunks_exact_mut(ho * wo).enumerate() {
            let src = &x.data()[(first + u) * h * w..][..h * w];
            for oh in 0..ho {
                for ow in 0..wo {
                    let mut taps = (0..p.kernel_h)
                        .filter_map(|r| src_index(oh, r, p.stride_h, p.pads.top, h))
                        .flat_map(|ih| {
                            (0..p.kernel_w)
                                .filter_map(move |s| src_index(ow, s, p.stride_w, p.pads.left, w))
                                .map(move |iw| src[ih * w + iw])
                        });
                    out[oh * wo + ow] = reduce(&mut taps);
                }
            }
        }
    });
    Tensor::from_vec(&[n, c, ho, wo], y)
}

/// Max over the in-image part of each window. A NaN anywhere in the window
/// yields NaN.
pub fn maxpool2d(x: &Tensor, p: &PoolParams, threads: usize) -> Result<Tensor> {
    pool_with(x, p, threads, |taps| {
        let mut m = f32::NEG_INFINITY;
        for v in taps {
            if v > m || v.is_nan() {
                m = v;
                if v.is_nan() {
                    break;
                }
            }
        }
        m
    })
}

/// Mean over each window; padded positions count as zeros in the divisor.
pub fn avgpool2d(x: &Tensor, p: &PoolParams, threads: usize) -> Result<Tensor> {
    let area = (p.kernel_h * p.kernel_w) as f32;
    pool_with(x, p, threads, |taps| {
        let mut sum = 0.0f32;
        for v in taps {
            sum += v;
        }
        sum / area
    })
}

/// Mean over each channel plane, giving `N×C×1×1`.
pub fn global_avg_pool(x: &Tensor, threads: usize) -> Result<Tensor> {
    let (_, _, h, w) = x.shape().nchw()?;
    avgpool2d(x, &PoolParams::new(1, 1, 0).with_kernel(h, w), threads)
}

impl PoolParams {
    fn with_kernel(mut self, kh: usize, kw: usize) -> PoolParams {
        self.kernel_h = kh;
        self.kernel_w = kw;
        self
    }
}
