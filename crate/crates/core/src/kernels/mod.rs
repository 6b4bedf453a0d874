//! Numeric kernels and the backend registry.

pub mod conv;
pub mod depthwise;
pub mod elementwise;
pub mod gemm;
mod parallel;
pub mod pool;
pub mod registry;

pub use conv::{conv2d_direct, conv2d_gemm, im2col, ConvGeometry};
pub use depthwise::{depthwise_conv2d, is_depthwise};
pub use elementwise::{add, batch_norm_inference, concat, relu, softmax};
pub use gemm::{gemm, gemm_blocked, gemm_fc, gemm_naive, BlockSize, GemmAlgo, Matrix};
pub use pool::{avgpool2d, global_avg_pool, maxpool2d};
pub use registry::{BackendId, Kernel, KernelRegistry};

/// Execution settings passed to every kernel call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelContext {
    pub threads: usize,
    pub block: BlockSize,
}

impl Default for KernelContext {
    fn default() -> Self {
        KernelContext {
            threads: 1,
            block: BlockSize::default(),
        }
    }
}

/// `max(x, 0)` that lets NaN through.
#[inline]
pub(crate) fn relu_scalar(x: f32) -> f32 {
    if x < 0.0 {
        0.0
    } else {
        x
    }
}
