//! Let the runtime time every candidate backend per layer and keep the fastest.
//!
//!     cargo run --release --example autotune -- [model]

use std::path::PathBuf;

use orpheus::{RunConfig, Session, SessionOptions};

fn main() -> orpheus::Result<()> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/inception_block.onnx"));
    let opts = SessionOptions {
        config: RunConfig {
            autotune: true,
            autotune_reps: 7,
            ..RunConfig::default()
        },
        ..SessionOptions::default()
    };
    let session = Session::load(&path, opts)?;
    let log = session.tuning_log().expect("autotune was requested");
    for entry in &log.entries {
        println!("{} ({}): picked {}", entry.layer, entry.op, entry.selected);
        for c in &entry.candidates {
            match (c.median_ns, &c.error) {
                (Some(ns), _) => println!("    {:<24} {ns:>10.0} ns", c.backend),
                (None, Some(e)) => println!("    {:<24} failed: {e}", c.backend),
                (None, None) => {}
            }
        }
    }
    // layers with a single candidate are not tuned and keep their default
    println!("{} of {} layers tuned", log.entries.len(), session.plan().steps.len());
    Ok(())
}
