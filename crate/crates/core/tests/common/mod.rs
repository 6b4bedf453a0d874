#![allow(dead_code)]

use std::path::PathBuf;

use orpheus::{Tensor, TensorMap};
use serde::Deserialize;

/// Every fixture model; each has `.onnx`, `.json` and `.io.json` files.
pub const FIXTURES: &[&str] = &[
    "conv_bn_relu",
    "residual_block",
    "depthwise_separable",
    "inception_block",
    "classifier",
    "pool_reshape_head",
    "tiny_conv",
    "identity",
    "relu_only",
    "torch_convnet",
];

/// The five structurally distinct models used by the preservation and
/// ingest checks.
pub const CORE_FIXTURES: &[&str] = &[
    "conv_bn_relu",
    "residual_block",
    "depthwise_separable",
    "inception_block",
    "classifier",
];

pub fn fixture(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(file)
}

#[derive(Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f32>,
}

pub struct IoPair {
    pub inputs: TensorMap,
    pub output_name: String,
    pub expected: Tensor,
}

/// Reads `<name>.io.json`: one input and the output computed by the ONNX
/// reference evaluator.
pub fn io_pair(name: &str) -> IoPair {
    #[derive(Deserialize)]
    struct Io {
        input: NamedTensor,
        output: NamedTensor,
    }
    let text = std::fs::read_to_string(fixture(&format!("{name}.io.json"))).unwrap();
    let io: Io = serde_json::from_str(&text).unwrap();
    let x = Tensor::from_vec(&io.input.shape, io.input.data).unwrap();
    IoPair {
        inputs: TensorMap::from([(io.input.name, x)]),
        output_name: io.output.name,
        expected: Tensor::from_vec(&io.output.shape, io.output.data).unwrap(),
    }
}
