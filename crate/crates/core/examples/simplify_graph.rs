//! Run the graph passes one at a time and print what each one rewrote, then
//! write the result as a JSON model.
//!
//!     cargo run --example simplify_graph -- [model] [out.json]

use std::path::PathBuf;

use orpheus::json_model::to_json_string;
use orpheus::simplify::{run_pipeline, PassId, PassPipeline};

fn main() -> orpheus::Result<()> {
    let mut args = std::env::args_os().skip(1).map(PathBuf::from);
    let path = args
        .next()
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/residual_block.onnx"));
    let g = orpheus::load_model(&path)?;
    println!("{}: {} nodes", g.name, g.nodes.len());

    let (simple, reports) = run_pipeline(&g, &PassPipeline::default())?;
    for r in &reports {
        println!("{:<16} {:>2} -> {:>2} nodes", r.pass_name, r.nodes_before, r.nodes_after);
        for w in &r.rewrites {
            println!("    {:<20} {}", w.rule, w.nodes.join(", "));
        }
    }

    // a custom order: fusing first leaves BN between conv and relu, so nothing fuses
    let custom = PassPipeline::new(vec![PassId::FuseActivation, PassId::FoldBatchNorm])?;
    let (other, _) = run_pipeline(&g, &custom)?;
    println!("fuse then fold: {} nodes; default order: {}", other.nodes.len(), simple.nodes.len());

    if let Some(out) = args.next() {
        std::fs::write(&out, to_json_string(&simple)).map_err(|e| orpheus::Error::Io { path: out.clone(), source: e })?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
