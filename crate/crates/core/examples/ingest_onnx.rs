//! Parse an ONNX file, validate it, infer shapes and print the node table.
//!
//!     cargo run --example ingest_onnx -- [model.onnx]

use std::path::PathBuf;

use orpheus::graph::{infer_shapes, inspect, validate};
use orpheus::onnx::{load_onnx, OnnxLimits};

fn main() -> orpheus::Result<()> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/torch_convnet.onnx"));

    // tighter limits than the defaults, as a service loading untrusted files might use
    let limits = OnnxLimits {
        max_message_bytes: 64 << 20,
        ..OnnxLimits::default()
    };
    let g = load_onnx(&path, &limits)?;

    for d in validate(&g) {
        println!("{}: {d}", if d.is_error() { "error" } else { "warning" });
    }
    print!("{}", inspect(&g)?);

    let shapes = g.declared_input_shapes().expect("fixture declares its input shape");
    let info = infer_shapes(&g, &shapes)?;
    for out in &g.outputs {
        println!("output {out}: {}", info[out].shape);
    }
    let params: usize = g.initializers.values().map(|t| t.numel()).sum();
    println!("{} parameters in {} initializers", params, g.initializers.len());
    Ok(())
}
