//! Time a model end to end and per layer, then print the CSV report.
//!
//!     cargo run --release --example bench_layers -- [model] [reps]

use std::path::PathBuf;

use orpheus::runtime::BenchOptions;
use orpheus::{RunConfig, Session, SessionOptions};

fn main() -> orpheus::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/residual_block.onnx"));
    let reps = args.next().map_or(20, |r| r.parse().expect("reps must be a number"));

    let opts = SessionOptions {
        config: RunConfig {
            reps,
            warmup: 2,
            ..RunConfig::default()
        },
        ..SessionOptions::default()
    };
    let session = Session::load(&path, opts)?;
    let inputs = session.random_inputs(0);

    // inline: each layer timed inside full-network runs
    let inline = session.bench(&inputs, BenchOptions { per_layer: true, isolate_layers: false })?;
    print!("{}", inline.to_csv());

    // isolated: each layer replayed alone on captured inputs
    let isolated = session.bench(&inputs, BenchOptions { per_layer: true, isolate_layers: true })?;
    let layer_sum: f64 = isolated.per_layer.iter().map(|r| r.stats().median_ns).sum();
    println!(
        "\nnetwork median {:.0} ns, sum of isolated layer medians {:.0} ns",
        inline.end_to_end.stats().median_ns,
        layer_sum
    );
    Ok(())
}
