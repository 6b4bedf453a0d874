//! Inference runtime for small convolutional networks.
//!
//! Models come in as ONNX protobuf or a JSON description, go through a few
//! graph simplifications, and are lowered to a plan of kernel calls. Each
//! layer runs on one of several interchangeable backends, chosen by default
//! policy, by explicit override, or by timing them (autotune).
//!
//! ```no_run
//! use orpheus::{Session, SessionOptions};
//!
//! let session = Session::load("model.onnx".as_ref(), SessionOptions::default())?;
//! let inputs = session.random_inputs(0);
//! let outputs = session.run(&inputs)?;
//! println!("{:?}", outputs.keys().collect::<Vec<_>>());
//! # Ok::<(), orpheus::Error>(())
//! ```

mod attrs;
pub mod cli;
pub mod error;
pub mod ffi;
pub mod graph;
pub mod json_model;
pub mod kernels;
pub mod onnx;
pub mod rng;
pub mod runtime;
pub mod selftest;
mod session;
pub mod simplify;
pub mod tensor;

use std::path::Path;

pub use error::{Error, Result};
pub use graph::{Graph, Node, Op, OpKind};
pub use kernels::{BackendId, Kernel, KernelContext, KernelRegistry};
pub use runtime::{ExecutionPlan, RunConfig, TensorMap};
pub use session::{Session, SessionOptions};
pub use simplify::{PassPipeline, PassReport};
pub use tensor::{Shape, Tensor};

/// Loads a model file: `.json` as the JSON model format, anything else as
/// ONNX with default limits.
pub fn load_model(path: &Path) -> Result<Graph> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => json_model::load_json_model(path),
        _ => onnx::load_onnx(path, &onnx::OnnxLimits::default()),
    }
}
