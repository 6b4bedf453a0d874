//! Plug a third-party style backend into the registry, force it on one
//! layer, and let `compare_backends` vouch for it.
//!
//!     cargo run --example custom_backend

use std::sync::Arc;

use orpheus::graph::{Op, PoolParams};
use orpheus::kernels::maxpool2d;
use orpheus::runtime::compare_backends;
use orpheus::{Kernel, KernelContext, KernelRegistry, OpKind, PassPipeline, RunConfig, Session, SessionOptions, Tensor};

/// Relu written as `(x + |x|) / 2`. Same values as the reference except
/// for the sign of zero, which the comparison does not see.
struct HalfSumRelu;

impl Kernel for HalfSumRelu {
    fn op_kind(&self) -> OpKind {
        OpKind::Relu
    }

    fn run(&self, _op: &Op, inputs: &[&Tensor], _cx: &KernelContext) -> orpheus::Result<Tensor> {
        Ok(inputs[0].map(|x| (x + x.abs()) * 0.5))
    }
}

/// Max pooling that only handles the 2x2 stride-2 unpadded case and says so.
struct Pool2x2;

impl Kernel for Pool2x2 {
    fn op_kind(&self) -> OpKind {
        OpKind::MaxPool
    }

    fn supports(&self, op: &Op, _shapes: &[&orpheus::Shape]) -> bool {
        matches!(op, Op::MaxPool(p) if *p == PoolParams::new(2, 2, 0))
    }

    fn run(&self, op: &Op, inputs: &[&Tensor], cx: &KernelContext) -> orpheus::Result<Tensor> {
        let Op::MaxPool(p) = op else { unreachable!("supports() filters ops") };
        maxpool2d(inputs[0], p, cx.threads)
    }
}

fn main() -> orpheus::Result<()> {
    let mut registry = KernelRegistry::with_builtins();
    registry.register("relu/halfsum".parse()?, Arc::new(HalfSumRelu))?;
    registry.register("maxpool/2x2".parse()?, Arc::new(Pool2x2))?;
    println!("relu backends: {:?}", registry.list_backends("relu"));

    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/torch_convnet.onnx");
    let g = orpheus::load_model(&path)?;
    // no passes, so the Relu node is not fused away into the conv
    let opts = SessionOptions {
        pipeline: PassPipeline::empty(),
        config: RunConfig::default().with_override("Relu", "relu/halfsum"),
        ..SessionOptions::default()
    };
    let session = Session::from_graph(g, opts, Arc::new(registry))?;
    for (layer, backend) in session.plan().backends() {
        println!("{layer:<24} {backend}");
    }

    let report = compare_backends(session.plan(), &session.random_inputs(3), 1e-6)?;
    for row in &report.rows {
        println!("{:<24} {:<14} ok={}", row.layer, row.backend, row.ok);
    }
    Ok(())
}
