//! Check every alternative backend against the reference backend on the
//! real activations of a model.
//!
//!     cargo run --example compare_backends -- [model] [tolerance]

use std::path::PathBuf;

use orpheus::runtime::compare_backends;
use orpheus::{Session, SessionOptions};

fn main() -> orpheus::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/depthwise_separable.onnx"));
    let tolerance = args.next().map_or(1e-4, |t| t.parse().expect("tolerance must be a number"));

    let session = Session::load(&path, SessionOptions::default())?;
    let report = compare_backends(session.plan(), &session.random_inputs(0), tolerance)?;
    for row in &report.rows {
        let diff = row.max_abs_diff.map_or_else(|| row.error.clone().unwrap_or_default(), |d| format!("{d:.2e}"));
        println!(
            "{} {:<10} {:<22} vs {:<14} {}",
            if row.ok { "ok  " } else { "FAIL" },
            row.layer,
            row.backend,
            row.reference,
            diff
        );
    }
    if !report.passed() {
        std::process::exit(4);
    }
    Ok(())
}
