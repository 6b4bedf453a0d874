use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::RunConfig;
use crate::error::{Error, Result};
use crate::graph::{infer_shapes, topo_sort, validate, Graph, Node, OpKind};
use crate::kernels::{is_depthwise, BackendId, KernelContext, KernelRegistry};
use crate::tensor::{Shape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BufferRole {
    Input,
    Weight,
    Intermediate,
    Output,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BufferInfo {
    pub name: String,
    pub shape: Shape,
    pub role: BufferRole,
}

#[derive(Debug, Clone)]
pub struct PlanStep {
    pub node: Node,
    pub backend: BackendId,
    pub inputs: Vec<usize>,
    pub output: usize,
    /// Intermediate buffers whose last reader is this step.
    pub frees: Vec<usize>,
}

/// A graph lowered to an ordered list of kernel calls over numbered buffers.
#[derive(Clone)]
pub struct ExecutionPlan {
    pub model_name: String,
    pub steps: Vec<PlanStep>,
    pub buffers: Vec<BufferInfo>,
    pub graph_inputs: Vec<(String, usize)>,
    pub graph_outputs: Vec<(String, usize)>,
    pub(crate) constants: HashMap<usize, Tensor>,
    pub(crate) registry: Arc<KernelRegistry>,
    pub(crate) cx: KernelContext,
    pub(crate) check_finite: bool,
}

impl fmt::Debug for ExecutionPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExecutionPlan")
            .field("model_name", &self.model_name)
            .field("steps", &self.steps)
            .field("buffers", &self.buffers)
            .finish_non_exhaustive()
    }
}

impl ExecutionPlan {
    pub fn backends(&self) -> Vec<(&str, &BackendId)> {
        self.steps
            .iter()
            .map(|s| (s.node.name.as_str(), &s.backend))
            .collect()
    }

    pub fn step(&self, layer: &str) -> Option<&PlanStep> {
        self.steps.iter().find(|s| s.node.name == layer)
    }

    pub fn registry(&self) -> &KernelRegistry {
        &self.registry
    }

    pub fn input_shape(&self, name: &str) -> Option<&Shape> {
        self.graph_inputs
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, b)| &self.buffers[b].shape)
    }

    pub(crate) fn step_shapes(&self, step: &PlanStep) -> Vec<&Shape> {
        step.inputs.iter().map(|&b| &self.buffers[b].shape).collect()
    }

    /// Replaces the backend of `layer`, checking that it can run the step.
    pub fn set_backend(&mut self, layer: &str, id: &str) -> Result<()> {
        let (id, kernel) = self.registry.lookup(id)?;
        let id = id.clone();
        let idx = self
            .steps
            .iter()
            .position(|s| s.node.name == layer)
            .ok_or_else(|| Error::Config(format!("no layer named `{layer}`")))?;
        let step = &self.steps[idx];
        if kernel.op_kind() != step.node.kind() || !kernel.supports(&step.node.op, &self.step_shapes(step)) {
            return Err(Error::IncompatibleBackend {
                backend: id.to_string(),
                node: layer.to_string(),
            });
        }
        self.steps[idx].backend = id;
        Ok(())
    }
}

/// Default backend for a node when no override applies.
fn default_backend<'r>(
    registry: &'r KernelRegistry,
    node: &Node,
    shapes: &[&Shape],
) -> Result<&'r BackendId> {
    let preferred = match node.kind() {
        OpKind::Conv if is_depthwise(&node.op, shapes) => Some("depthwise/specialized"),
        OpKind::Conv => Some("conv/gemm"),
        _ => None,
    };
    let candidates = registry.candidates(&node.op, shapes);
    if let Some(p) = preferred {
        if let Some(id) = candidates.iter().find(|id| id.as_str() == p) {
            return Ok(id);
        }
    }
    registry
        .reference(node.kind())
        .filter(|r| candidates.contains(r))
        .or_else(|| candidates.first().copied())
        .ok_or_else(|| Error::UnsupportedOp {
            op: node.kind().onnx_name().to_string(),
            node: node.name.clone(),
        })
}

fn override_for<'c>(node: &Node, depthwise: bool, overrides: &'c BTreeMap<String, String>) -> Option<&'c str> {
    if let Some(id) = overrides.get(&node.name) {
        return Some(id);
    }
    let kind_matches = |key: &str| {
        OpKind::from_key(key).or_else(|| OpKind::from_onnx_name(key)) == Some(node.kind())
    };
    if depthwise {
        if let Some(id) = overrides.get("depthwise") {
            return Some(id);
        }
    }
    overrides
        .iter()
        .find(|(k, _)| kind_matches(k))
        .map(|(_, v)| v.as_str())
}

/// Lowers `g` into an execution plan for the given input shapes.
pub fn plan(
    g: &Graph,
    input_shapes: &HashMap<String, Shape>,
    cfg: &RunConfig,
    registry: Arc<KernelRegistry>,
) -> Result<ExecutionPlan> {
    cfg.check()?;
    let errors: Vec<_> = validate(g).into_iter().filter(|d| d.is_error()).collect();
    if !errors.is_empty() {
        return Err(Error::Invalid(errors));
    }
    let order = topo_sort(g)?;
    let shapes = infer_shapes(g, input_shapes)?;

    let mut buffers = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut constants = HashMap::new();
    let alloc = |name: &str, role: BufferRole, buffers: &mut Vec<BufferInfo>| -> Result<usize> {
        let shape = shapes
            .get(name)
            .map(|t| t.shape.clone())
            .ok_or_else(|| Error::ShapeInference {
                node: name.to_string(),
                msg: "no shape for value".into(),
            })?;
        buffers.push(BufferInfo {
            name: name.to_string(),
            shape,
            role,
        });
        Ok(buffers.len() - 1)
    };

    let mut graph_inputs = Vec::new();
    for vi in &g.inputs {
        let id = alloc(&vi.name, BufferRole::Input, &mut buffers)?;
        ids.insert(vi.name.clone(), id);
        graph_inputs.push((vi.name.clone(), id));
    }

    let mut steps = Vec::with_capacity(order.len());
    for node in order {
        let mut inputs = Vec::with_capacity(node.inputs.len());
        for v in &node.inputs {
            let id = match ids.get(v) {
                Some(&id) => id,
                None => {
                    let t = g.initializers.get(v).ok_or_else(|| Error::ShapeInference {
                        node: node.name.clone(),
                        msg: format!("input `{v}` is not available"),
                    })?;
                    let id = alloc(v, BufferRole::Weight, &mut buffers)?;
                    constants.insert(id, t.clone());
                    ids.insert(v.clone(), id);
                    id
                }
            };
            inputs.push(id);
        }
        let role = if g.is_graph_output(node.output()) {
            BufferRole::Output
        } else {
            BufferRole::Intermediate
        };
        let output = alloc(node.output(), role, &mut buffers)?;
        ids.insert(node.output().to_string(), output);

        let in_shapes: Vec<&Shape> = inputs.iter().map(|&b| &buffers[b].shape).collect();
        let depthwise = is_depthwise(&node.op, &in_shapes);
        let backend = match override_for(node, depthwise, &cfg.backend_overrides) {
            Some(id) => {
                let (id, kernel) = registry.lookup(id)?;
                if kernel.op_kind() != node.kind() || !kernel.supports(&node.op, &in_shapes) {
                    return Err(Error::IncompatibleBackend {
                        backend: id.to_string(),
                        node: node.name.clone(),
                    });
                }
                id.clone()
            }
            None => default_backend(&registry, node, &in_shapes)?.clone(),
        };
        steps.push(PlanStep {
            node: node.clone(),
            backend,
            inputs,
            output,
            frees: Vec::new(),
        });
    }

    let mut graph_outputs = Vec::new();
    for o in &g.outputs {
        let id = *ids.get(o).ok_or_else(|| Error::ShapeInference {
            node: o.clone(),
            msg: "graph output is never produced".into(),
        })?;
        graph_outputs.push((o.clone(), id));
    }

    // linear-scan lifetimes: free each intermediate after its last reader
    let mut last_use: HashMap<usize, usize> = HashMap::new();
    for (i, s) in steps.iter().enumerate() {
        for &b in &s.inputs {
            last_use.insert(b, i);
        }
    }
    for (b, i) in last_use {
        if buffers[b].role == BufferRole::Intermediate {
            steps[i].frees.push(b);
        }
    }
    for s in &mut steps {
        s.frees.sort_unstable();
    }

    Ok(ExecutionPlan {
        model_name: g.name.clone(),
        steps,
        buffers,
        graph_inputs,
        graph_outputs,
        constants,
        registry,
        cx: KernelContext {
            threads: cfg.threads,
            block: cfg.block,
        },
        check_finite: cfg.check_finite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::testutil::{conv_graph, relu_graph};
    use crate::graph::{ConvParams, Op};

    fn shapes(g: &Graph) -> HashMap<String, Shape> {
        g.declared_input_shapes().unwrap()
    }

    fn registry() -> Arc<KernelRegistry> {
        Arc::new(KernelRegistry::with_builtins())
    }

    #[test]
    fn single_relu() {
        let g = relu_graph();
        let p = plan(&g, &shapes(&g), &RunConfig::default(), registry()).unwrap();
        assert_eq!(p.steps.len(), 1);
        assert_eq!(p.steps[0].backend.as_str(), "relu/reference");
        assert_eq!(p.buffers.len(), 2);
    }

    #[test]
    fn precedence() {
        let g = conv_graph(true, true);
        let p = plan(&g, &shapes(&g), &RunConfig::default(), registry()).unwrap();
        assert_eq!(p.step("conv").unwrap().backend.as_str(), "conv/gemm");
        assert_eq!(p.step("bn").unwrap().backend.as_str(), "batchnorm/reference");

        let cfg = RunConfig::default().with_override("conv", "conv/direct");
        let p = plan(&g, &shapes(&g), &cfg, registry()).unwrap();
        assert_eq!(p.step("conv").unwrap().backend.as_str(), "conv/direct");

        // "conv" is both a layer name and an op kind here; try an op-kind key
        // against a layer name with a different backend
        let cfg = RunConfig::default()
            .with_override("Conv", "conv/direct")
            .with_override("conv", "conv/gemm");
        let p = plan(&g, &shapes(&g), &cfg, registry()).unwrap();
        assert_eq!(p.step("conv").unwrap().backend.as_str(), "conv/gemm");
    }

    #[test]
    fn bad_overrides() {
        let g = conv_graph(false, false);
        let cfg = RunConfig::default().with_override("conv", "conv/nonexistent");
        assert!(matches!(
            plan(&g, &shapes(&g), &cfg, registry()),
            Err(Error::UnknownBackend(_))
        ));
        let cfg = RunConfig::default().with_override("conv", "relu/reference");
        assert!(matches!(
            plan(&g, &shapes(&g), &cfg, registry()),
            Err(Error::IncompatibleBackend { .. })
        ));
        let cfg = RunConfig::default().with_override("conv", "depthwise/specialized");
        assert!(matches!(
            plan(&g, &shapes(&g), &cfg, registry()),
            Err(Error::IncompatibleBackend { .. })
        ));
    }

    #[test]
    fn depthwise_default_and_override() {
        let g = Graph::new("dw")
            .with_input("x", &[1, 4, 6, 6])
            .with_initializer("w", Tensor::random(Shape::new(vec![4, 1, 3, 3]).unwrap(), 1))
            .with_node(Node::new(
                "dw",
                Op::Conv(ConvParams::new(3, 1, 1).with_groups(4)),
                &["x", "w"],
                &["y"],
            ))
            .with_output("y");
        let p = plan(&g, &shapes(&g), &RunConfig::default(), registry()).unwrap();
        assert_eq!(p.steps[0].backend.as_str(), "depthwise/specialized");
        let cfg = RunConfig::default()
            .with_override("conv", "conv/direct")
            .with_override("depthwise", "conv/gemm");
        let p = plan(&g, &shapes(&g), &cfg, registry()).unwrap();
        assert_eq!(p.steps[0].backend.as_str(), "conv/gemm");
    }

    #[test]
    fn steps_follow_topo_order_and_free_buffers() {
        let g = conv_graph(true, true);
        let p = plan(&g, &shapes(&g), &RunConfig::default(), registry()).unwrap();
        let mut available: Vec<bool> = p.buffers.iter().map(|b| b.role != BufferRole::Intermediate && b.role != BufferRole::Output).collect();
        for s in &p.steps {
            assert!(s.inputs.iter().all(|&b| available[b]));
            available[s.output] = true;
        }
        let freed: Vec<usize> = p.steps.iter().flat_map(|s| s.frees.clone()).collect();
        assert_eq!(freed.len(), 2);
        assert!(freed.iter().all(|&b| p.buffers[b].role == BufferRole::Intermediate));
    }
}
