use serde::Serialize;

use super::exec::TensorMap;
use super::plan::ExecutionPlan;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub layer: String,
    pub op: String,
    pub reference: String,
    pub backend: String,
    /// `None` when the backend failed to run.
    pub max_abs_diff: Option<f64>,
    pub error: Option<String>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub model: String,
    pub tolerance: f64,
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CompareRow> {
        self.rows.iter().filter(|r| !r.ok)
    }
}

/// Runs every alternative backend of every multi-backend layer on the
/// layer's captured inputs and compares it against the reference backend.
pub fn compare_backends(
    plan: &ExecutionPlan,
    inputs: &TensorMap,
    tolerance: f64,
) -> crate::Result<CompareReport> {
    let slots = plan.capture(inputs)?;
    let mut rows = Vec::new();
    for step in &plan.steps {
        let candidates = plan.registry.candidates(&step.node.op, &plan.step_shapes(step));
        if candidates.len() < 2 {
            continue;
        }
        let reference = plan
            .registry
            .reference(step.node.kind())
            .filter(|r| candidates.contains(r))
            .unwrap_or(candidates[0]);
        let expected = plan.run_step_with(step, reference, &slots)?;
        for id in candidates.iter().filter(|id| *id != &reference) {
            let (diff, error) = match plan.run_step_with(step, id, &slots) {
                Ok(out) => match expected.compare(&out, 1e-6) {
                    Ok(r) => (Some(r.max_abs_diff), None),
                    Err(e) => (None, Some(e.to_string())),
                },
                Err(e) => (None, Some(e.to_string())),
            };
            rows.push(CompareRow {
                layer: step.node.name.clone(),
                op: step.node.kind().onnx_name().to_string(),
                reference: reference.to_string(),
                backend: id.to_string(),
                ok: diff.is_some_and(|d| d <= tolerance),
                max_abs_diff: diff,
                error,
            });
        }
    }
    Ok(CompareReport {
        model: plan.model_name.clone(),
        tolerance,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::testutil::{conv_graph, relu_graph};
    use crate::graph::{Op, OpKind};
    use crate::kernels::{conv2d_direct, Kernel, KernelContext, KernelRegistry};
    use crate::runtime::{plan, RunConfig};
    use crate::tensor::Tensor;

    fn make(g: &crate::graph::Graph, r: KernelRegistry) -> ExecutionPlan {
        plan(g, &g.declared_input_shapes().unwrap(), &RunConfig::default(), Arc::new(r)).unwrap()
    }

    #[test]
    fn shipped_backends_agree() {
        let p = make(&conv_graph(true, true), KernelRegistry::with_builtins());
        let report = compare_backends(&p, &p.random_inputs(2), 1e-4).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.passed());
    }

    #[test]
    fn single_backend_model_is_empty() {
        let p = make(&relu_graph(), KernelRegistry::with_builtins());
        let report = compare_backends(&p, &p.random_inputs(2), 1e-4).unwrap();
        assert!(report.rows.is_empty() && report.passed());
    }

    /// Shifts the padding by one row: wrong, but shape-preserving.
    struct OffByOnePad;

    impl Kernel for OffByOnePad {
        fn op_kind(&self) -> OpKind {
            OpKind::Conv
        }

        fn run(&self, op: &Op, inputs: &[&Tensor], cx: &KernelContext) -> crate::Result<Tensor> {
            let Op::Conv(p) = op else { unreachable!() };
            let mut p = *p;
            if p.pads.top > 0 {
                p.pads.top -= 1;
                p.pads.bottom += 1;
            }
            conv2d_direct(inputs[0], inputs[1], inputs.get(2).copied(), &p, cx.threads)
        }
    }

    #[test]
    fn broken_backend_is_flagged() {
        let mut r = KernelRegistry::with_builtins();
        r.register("conv/broken".parse().unwrap(), Arc::new(OffByOnePad)).unwrap();
        let p = make(&conv_graph(false, false), r);
        let report = compare_backends(&p, &p.random_inputs(2), 1e-4).unwrap();
        let bad: Vec<_> = report.failures().collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].backend, "conv/broken");
        assert_eq!(bad[0].layer, "conv");
    }
}
