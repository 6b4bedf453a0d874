//! Load a model through a session and run it on seeded random input.
//!
//!     cargo run --example run_inference -- [model] [threads]

use std::path::PathBuf;

use orpheus::{RunConfig, Session, SessionOptions};

fn main() -> orpheus::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/classifier.onnx"));
    let threads = args.next().map_or(1, |t| t.parse().expect("threads must be a number"));

    let opts = SessionOptions {
        config: RunConfig::default().with_threads(threads),
        ..SessionOptions::default()
    };
    let session = Session::load(&path, opts)?;
    for (layer, backend) in session.plan().backends() {
        println!("{layer:<12} {backend}");
    }

    let inputs = session.random_inputs(7);
    let outputs = session.run(&inputs)?;
    for (name, y) in &outputs {
        let preview: Vec<String> = y.data().iter().take(6).map(|v| format!("{v:.4}")).collect();
        println!("{name} {}: [{} ...] argmax {:?}", y.shape(), preview.join(", "), y.argmax_last_axis());
    }

    // same input, same output, whatever the thread count
    let again = Session::load(&path, SessionOptions {
        config: RunConfig::default().with_threads(4),
        ..SessionOptions::default()
    })?
    .run(&inputs)?;
    assert!(outputs.iter().all(|(k, v)| v.bitwise_eq(&again[k])));
    Ok(())
}
