mod common;

use std::sync::Arc;

use common::{fixture, FIXTURES};
use orpheus::simplify::run_pipeline;
use orpheus::{load_model, KernelRegistry, OpKind, PassPipeline, Session, SessionOptions};

#[test]
fn default_pipeline_preserves_outputs() {
    let reg = Arc::new(KernelRegistry::with_builtins());
    for name in FIXTURES {
        let g = load_model(&fixture(&format!("{name}.onnx"))).unwrap();
        let raw = Session::from_graph(
            g.clone(),
            SessionOptions {
                pipeline: PassPipeline::empty(),
                ..SessionOptions::default()
            },
            reg.clone(),
        )
        .unwrap();
        let simple = Session::from_graph(g.clone(), SessionOptions::default(), reg.clone()).unwrap();
        for seed in 0..10 {
            let x = raw.random_inputs(seed);
            let a = raw.run(&x).unwrap();
            let b = simple.run(&x).unwrap();
            for (k, t) in &a {
                let r = t.compare(&b[k], 1e-3).unwrap();
                assert!(r.max_abs_diff <= 1e-4, "{name} seed {seed}: {r:?}");
            }
        }
        let has_bn = g.nodes.iter().any(|n| n.kind() == OpKind::BatchNorm);
        let (before, after) = (g.nodes.len(), simple.graph().nodes.len());
        assert!(after <= before, "{name}");
        if has_bn {
            assert!(after < before, "{name}: {before} -> {after}");
            assert!(simple.graph().nodes.iter().all(|n| n.kind() != OpKind::BatchNorm), "{name}");
        }
    }
}

#[test]
fn pipeline_is_idempotent_on_fixtures() {
    for name in FIXTURES {
        let g = load_model(&fixture(&format!("{name}.json"))).unwrap();
        let (once, _) = run_pipeline(&g, &PassPipeline::default()).unwrap();
        let (twice, reports) = run_pipeline(&once, &PassPipeline::default()).unwrap();
        assert_eq!(once, twice, "{name}");
        assert!(reports.iter().all(|r| r.rewrites.is_empty()), "{name}");
    }
}

#[test]
fn reports_describe_each_pass() {
    let g = load_model(&fixture("residual_block.onnx")).unwrap();
    let (out, reports) = run_pipeline(&g, &PassPipeline::default()).unwrap();
    let names: Vec<_> = reports.iter().map(|r| r.pass_name.as_str()).collect();
    assert_eq!(names, ["fold_batch_norm", "fuse_activation", "drop_identity", "eliminate_dead"]);
    assert_eq!(reports[0].nodes_before, g.nodes.len());
    assert_eq!(reports.last().unwrap().nodes_after, out.nodes.len());
    for w in reports.windows(2) {
        assert_eq!(w[0].nodes_after, w[1].nodes_before);
    }
    // two BNs folded, relu1 fused into conv1; relu2 follows Add and stays
    assert_eq!(reports[0].rewrites.len(), 2);
    assert_eq!(reports[1].rewrites.len(), 1);
    assert_eq!(out.nodes.len(), 4);
}
