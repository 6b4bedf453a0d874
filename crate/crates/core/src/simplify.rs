//! Graph-to-graph simplification passes.
//!
//! Every pass takes a graph by reference and returns a new graph together
//! with a [`PassReport`] listing what it rewrote. Patterns are matched
//! conservatively: anything with fan-out, or whose intermediate value is a
//! graph output, is left alone.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{fresh_name, infer_shapes, validate, Graph, Op};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rewrite {
    pub rule: String,
    pub nodes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PassReport {
    pub pass_name: String,
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub rewrites: Vec<Rewrite>,
}

impl PassReport {
    fn new(pass: PassId, before: &Graph) -> PassReport {
        PassReport {
            pass_name: pass.to_string(),
            nodes_before: before.nodes.len(),
            nodes_after: before.nodes.len(),
            rewrites: Vec::new(),
        }
    }

    fn record(&mut self, rule: &str, nodes: &[&str]) {
        self.rewrites.push(Rewrite {
            rule: rule.to_string(),
            nodes: nodes.iter().map(|s| s.to_string()).collect(),
        });
    }

    fn finish(mut self, after: Graph) -> (Graph, PassReport) {
        self.nodes_after = after.nodes.len();
        (after, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PassId {
    FoldBatchNorm,
    FuseActivation,
    DropIdentity,
    EliminateDead,
}

impl PassId {
    pub const ALL: [PassId; 4] = [
        PassId::FoldBatchNorm,
        PassId::FuseActivation,
        PassId::DropIdentity,
        PassId::EliminateDead,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PassId::FoldBatchNorm => "fold_batch_norm",
            PassId::FuseActivation => "fuse_activation",
            PassId::DropIdentity => "drop_identity",
            PassId::EliminateDead => "eliminate_dead",
        }
    }

    pub fn apply(self, g: &Graph) -> (Graph, PassReport) {
        match self {
            PassId::FoldBatchNorm => fold_batch_norm(g),
            PassId::FuseActivation => fuse_activation(g),
            PassId::DropIdentity => drop_identity(g),
            PassId::EliminateDead => eliminate_dead(g),
        }
    }
}

impl fmt::Display for PassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PassId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PassId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown pass `{s}` (expected one of: {})",
                    PassId::ALL.map(PassId::name).join(", ")
                ))
            })
    }
}

/// Ordered pass list; each pass appears at most once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassPipeline(Vec<PassId>);

impl PassPipeline {
    pub fn new(passes: Vec<PassId>) -> Result<PassPipeline> {
        let mut seen = HashSet::new();
        for p in &passes {
            if !seen.insert(*p) {
                return Err(Error::Config(format!("pass `{p}` listed twice")));
            }
        }
        Ok(PassPipeline(passes))
    }

    pub fn empty() -> PassPipeline {
        PassPipeline(Vec::new())
    }

    /// Parses a comma-separated list such as `fold_batch_norm,eliminate_dead`.
    pub fn parse(list: &str) -> Result<PassPipeline> {
        let passes = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        PassPipeline::new(passes)
    }

    pub fn passes(&self) -> &[PassId] {
        &self.0
    }
}

impl Default for PassPipeline {
    fn default() -> Self {
        PassPipeline(PassId::ALL.to_vec())
    }
}

/// Runs `pipeline` in order. After each pass the graph is validated and,
/// when input shapes are declared, shape-inferred; a failure there is a bug
/// in the pass and is reported as [`Error::InternalPass`].
pub fn run_pipeline(g: &Graph, pipeline: &PassPipeline) -> Result<(Graph, Vec<PassReport>)> {
    let mut current = g.clone();
    let mut reports = Vec::new();
    for &pass in pipeline.passes() {
        let (next, report) = pass.apply(&current);
        let errors: Vec<_> = validate(&next).into_iter().filter(|d| d.is_error()).collect();
        if !errors.is_empty() {
            return Err(Error::InternalPass {
                pass: pass.to_string(),
                msg: Error::Invalid(errors).to_string(),
            });
        }
        if let Some(shapes) = next.declared_input_shapes() {
            infer_shapes(&next, &shapes).map_err(|e| Error::InternalPass {
                pass: pass.to_string(),
                msg: e.to_string(),
            })?;
        }
        current = next;
        reports.push(report);
    }
    Ok((current, reports))
}

/// Number of node inputs reading `value`, plus one if it is a graph output.
fn uses(g: &Graph, value: &str) -> usize {
    let reads = g
        .nodes
        .iter()
        .flat_map(|n| &n.inputs)
        .filter(|i| *i == value)
        .count();
    reads + g.is_graph_output(value) as usize
}

fn producer_index(g: &Graph, value: &str) -> Option<usize> {
    g.nodes.iter().position(|n| n.outputs.iter().any(|o| o == value))
}

fn rename_value(g: &mut Graph, from: &str, to: &str) {
    for n in &mut g.nodes {
        for v in n.inputs.iter_mut().chain(n.outputs.iter_mut()) {
            if v == from {
                *v = to.to_string();
            }
        }
    }
}

/// Folds `Conv → BatchNorm` into the convolution's weights and bias:
/// `s = γ/√(σ²+ε)`, `W' = W·s`, `b' = (b − μ)·s + β`.
pub fn fold_batch_norm(g: &Graph) -> (Graph, PassReport) {
    let mut report = PassReport::new(PassId::FoldBatchNorm, g);
    let mut out = g.clone();
    let mut bn_index = 0;
    while bn_index < out.nodes.len() {
        if try_fold(&mut out, bn_index, &mut report) {
            continue;
        }
        bn_index += 1;
    }
    report.finish(out)
}

fn try_fold(g: &mut Graph, bn_index: usize, report: &mut PassReport) -> bool {
    let bn = &g.nodes[bn_index];
    let Op::BatchNorm { epsilon } = bn.op else {
        return false;
    };
    let conv_out = &bn.inputs[0];
    let Some(ci) = producer_index(g, conv_out) else {
        return false;
    };
    let conv = &g.nodes[ci];
    let Op::Conv(params) = &conv.op else {
        return false;
    };
    if params.fused_relu || uses(g, conv_out) != 1 {
        return false;
    }
    let stats: Option<Vec<&Tensor>> = bn.inputs[1..5].iter().map(|n| g.initializers.get(n)).collect();
    let Some(w) = g.initializers.get(&conv.inputs[1]) else {
        return false;
    };
    let Some(stats) = stats else {
        return false;
    };
    let c_out = w.dims()[0];
    if stats.iter().any(|t| t.numel() != c_out) {
        return false;
    }
    let bias = match conv.inputs.get(2) {
        Some(b) => match g.initializers.get(b) {
            Some(t) if t.numel() == c_out => Some(t),
            _ => return false,
        },
        None => None,
    };

    let (gamma, beta, mean, var) = (stats[0].data(), stats[1].data(), stats[2].data(), stats[3].data());
    let scale: Vec<f32> = (0..c_out).map(|c| gamma[c] / (var[c] + epsilon).sqrt()).collect();
    let per_out = w.numel() / c_out;
    let mut new_w = w.data().to_vec();
    for (c, chunk) in new_w.chunks_exact_mut(per_out).enumerate() {
        for v in chunk {
            *v *= scale[c];
        }
    }
    let new_b: Vec<f32> = (0..c_out)
        .map(|c| {
            let b = bias.map_or(0.0, |t| t.data()[c]);
            (b - mean[c]) * scale[c] + beta[c]
        })
        .collect();
    let new_w = Tensor::new(w.shape().clone(), new_w).expect("same shape");
    let new_b = Tensor::from_vec(&[c_out], new_b).expect("c_out >= 1");

    let conv_name = conv.name.clone();
    let conv_inputs = conv.inputs.clone();
    let bn_name = bn.name.clone();
    let bn_out = bn.outputs[0].clone();
    let w_name = store(g, &conv_inputs[1], &format!("{conv_name}_w_folded"), new_w);
    let b_name = match conv_inputs.get(2) {
        Some(b) => store(g, b, &format!("{conv_name}_b_folded"), new_b),
        None => {
            let name = fresh_name(g, &format!("{conv_name}_b_folded"));
            g.initializers.insert(name.clone(), new_b);
            name
        }
    };
    let conv = &mut g.nodes[ci];
    conv.inputs.truncate(1);
    conv.inputs.push(w_name);
    conv.inputs.push(b_name);
    conv.outputs[0] = bn_out;
    g.nodes.remove(bn_index);
    report.record("fold_batch_norm", &[&conv_name, &bn_name]);
    true
}

/// Overwrites initializer `name` if this is its only reader, else stores
/// under a fresh name. Returns the name to read.
fn store(g: &mut Graph, name: &str, fresh_base: &str, t: Tensor) -> String {
    if uses(g, name) == 1 {
        g.initializers.insert(name.to_string(), t);
        name.to_string()
    } else {
        let fresh = fresh_name(g, fresh_base);
        g.initializers.insert(fresh.clone(), t);
        fresh
    }
}

/// Folds `Relu` into a preceding `Conv` or `Gemm` that feeds nothing else.
pub fn fuse_activation(g: &Graph) -> (Graph, PassReport) {
    let mut report = PassReport::new(PassId::FuseActivation, g);
    let mut out = g.clone();
    let mut i = 0;
    while i < out.nodes.len() {
        if !matches!(out.nodes[i].op, Op::Relu) {
            i += 1;
            continue;
        }
        let input = out.nodes[i].inputs[0].clone();
        let fusable = producer_index(&out, &input).filter(|&p| {
            uses(&out, &input) == 1
                && match &out.nodes[p].op {
                    Op::Conv(c) => !c.fused_relu,
                    Op::Gemm(gp) => !gp.fused_relu,
                    _ => false,
                }
        });
        let Some(p) = fusable else {
            i += 1;
            continue;
        };
        let relu = out.nodes.remove(i);
        let producer = &mut out.nodes[if p > i { p - 1 } else { p }];
        match &mut producer.op {
            Op::Conv(c) => c.fused_relu = true,
            Op::Gemm(gp) => gp.fused_relu = true,
            _ => unreachable!("checked above"),
        }
        producer.outputs[0] = relu.outputs[0].clone();
        let name = producer.name.clone();
        report.record("fuse_relu", &[&name, &relu.name]);
    }
    report.finish(out)
}

/// Removes no-op nodes: `Identity`, `Reshape`/`Flatten` whose output shape
/// equals the input shape, and a `Flatten` that only feeds a `Reshape`
/// (the reshape alone gives the same result). Names of graph outputs are
/// kept.
pub fn drop_identity(g: &Graph) -> (Graph, PassReport) {
    let mut report = PassReport::new(PassId::DropIdentity, g);
    let mut out = g.clone();
    let shapes: HashMap<String, Vec<usize>> = g
        .declared_input_shapes()
        .and_then(|s| infer_shapes(g, &s).ok())
        .map(|m| m.into_iter().map(|(k, v)| (k, v.shape.dims().to_vec())).collect())
        .unwrap_or_default();
    let same_shape = |a: &str, b: &str| match (shapes.get(a), shapes.get(b)) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    };

    let mut i = 0;
    while i < out.nodes.len() {
        let node = &out.nodes[i];
        let (input, output) = (node.inputs[0].clone(), node.outputs[0].clone());
        let rule = match &node.op {
            Op::Identity => Some("identity"),
            Op::Reshape { .. } | Op::Flatten { .. } if same_shape(&input, &output) => Some("noop_reshape"),
            _ => None,
        };
        if let Some(rule) = rule {
            let name = node.name.clone();
            if bypass(&mut out, i) {
                report.record(rule, &[&name]);
                continue;
            }
        }
        let node = &out.nodes[i];
        if matches!(node.op, Op::Flatten { .. }) && uses(&out, &output) == 1 {
            let consumer = out
                .nodes
                .iter()
                .position(|n| n.inputs.first() == Some(&output));
            if let Some(ci) = consumer {
                if let Op::Reshape { shape } = &out.nodes[ci].op {
                    if !shape.contains(&0) {
                        let names = [node.name.clone(), out.nodes[ci].name.clone()];
                        out.nodes[ci].inputs[0] = input;
                        out.nodes.remove(i);
                        report.record("flatten_into_reshape", &[&names[0], &names[1]]);
                        continue;
                    }
                }
            }
        }
        i += 1;
    }
    report.finish(out)
}

/// Removes single-input node `i`, connecting its input straight to its
/// consumers. Returns false when that would rename a graph input or output.
fn bypass(g: &mut Graph, i: usize) -> bool {
    let (input, output) = (g.nodes[i].inputs[0].clone(), g.nodes[i].outputs[0].clone());
    if g.is_graph_output(&output) {
        // keep the output name: rename the upstream value instead
        let renamable = producer_index(g, &input).is_some() && !g.is_graph_output(&input);
        if !renamable {
            return false;
        }
        g.nodes.remove(i);
        rename_value(g, &input, &output);
    } else {
        g.nodes.remove(i);
        rename_value(g, &output, &input);
    }
    true
}

/// Removes nodes and initializers that no graph output depends on.
pub fn eliminate_dead(g: &Graph) -> (Graph, PassReport) {
    let mut report = PassReport::new(PassId::EliminateDead, g);
    let producers = g.producers();
    let mut live_values: HashSet<&str> = HashSet::new();
    let mut live_nodes = vec![false; g.nodes.len()];
    let mut stack: Vec<&str> = g.outputs.iter().map(String::as_str).collect();
    while let Some(v) = stack.pop() {
        if !live_values.insert(v) {
            continue;
        }
        if let Some(&p) = producers.get(v) {
            if !live_nodes[p] {
                live_nodes[p] = true;
                stack.extend(g.nodes[p].inputs.iter().map(String::as_str));
            }
        }
    }

    let mut out = g.clone();
    out.nodes.clear();
    for (node, live) in g.nodes.iter().zip(&live_nodes) {
        if *live {
            out.nodes.push(node.clone());
        } else {
            report.record("dead_node", &[&node.name]);
        }
    }
    let dead_inits: Vec<String> = g
        .initializers
        .keys()
        .filter(|k| !live_values.contains(k.as_str()))
        .cloned()
        .collect();
    for name in dead_inits {
        out.initializers.remove(&name);
        report.record("dead_initializer", &[&name]);
    }
    report.finish(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::testutil::conv_graph;
    use crate::graph::{ConvParams, GemmParams, Node};
    use crate::tensor::Shape;

    fn ones(n: usize, v: f32) -> Tensor {
        Tensor::from_vec(&[n], vec![v; n]).unwrap()
    }

    fn bn_graph(gamma: f32, beta: f32, mean: f32, var: f32, eps: f32, bias: bool) -> Graph {
        let w = Tensor::random(Shape::new(vec![2, 1, 3, 3]).unwrap(), 1);
        let mut g = Graph::new("bn")
            .with_input("x", &[1, 1, 4, 4])
            .with_output("y")
            .with_initializer("w", w)
            .with_initializer("g", ones(2, gamma))
            .with_initializer("be", ones(2, beta))
            .with_initializer("m", ones(2, mean))
            .with_initializer("v", ones(2, var));
        let mut conv_in = vec!["x", "w"];
        if bias {
            g = g.with_initializer("b", Tensor::from_vec(&[2], vec![0.25, -0.5]).unwrap());
            conv_in.push("b");
        }
        g.with_node(Node::new("conv", Op::Conv(ConvParams::new(3, 1, 1)), &conv_in, &["c"]))
            .with_node(Node::new(
                "bn",
                Op::BatchNorm { epsilon: eps },
                &["c", "g", "be", "m", "v"],
                &["y"],
            ))
    }

    #[test]
    fn identity_normalization_is_bit_exact() {
        let g = bn_graph(1.0, 0.0, 0.0, 1.0, 0.0, true);
        let (out, report) = fold_batch_norm(&g);
        assert_eq!(out.nodes.len(), 1);
        assert_eq!(report.rewrites.len(), 1);
        assert_eq!(out.nodes[0].outputs[0], "y");
        let w = &out.initializers[&out.nodes[0].inputs[1]];
        assert!(w.bitwise_eq(&g.initializers["w"]));
        let b = &out.initializers[&out.nodes[0].inputs[2]];
        assert!(b.bitwise_eq(&g.initializers["b"]));
    }

    #[test]
    fn folding_formula() {
        let g = bn_graph(2.0, 1.0, 0.5, 0.25, 0.0, false);
        let (out, _) = fold_batch_norm(&g);
        let conv = &out.nodes[0];
        let w = &out.initializers[&conv.inputs[1]];
        assert!(w.bitwise_eq(&g.initializers["w"].map(|v| 4.0 * v)));
        assert_eq!(out.initializers[&conv.inputs[2]].data(), &[-1.0, -1.0]);
    }

    #[test]
    fn fan_out_blocks_fold() {
        let mut g = bn_graph(2.0, 1.0, 0.5, 0.25, 0.0, false);
        g.outputs.push("c".into());
        let (out, report) = fold_batch_norm(&g);
        assert_eq!(out, g);
        assert!(report.rewrites.is_empty());
    }

    #[test]
    fn shared_weights_are_not_overwritten() {
        let g = bn_graph(2.0, 1.0, 0.5, 0.25, 0.0, false)
            .with_node(Node::new("conv2", Op::Conv(ConvParams::new(3, 1, 1)), &["x", "w"], &["z"]))
            .with_output("z");
        let (out, _) = fold_batch_norm(&g);
        assert!(out.initializers["w"].bitwise_eq(&g.initializers["w"]));
        assert_ne!(out.nodes[0].inputs[1], "w");
    }

    #[test]
    fn relu_fusion() {
        let g = conv_graph(false, true);
        let (out, report) = fuse_activation(&g);
        assert_eq!(out.nodes.len(), 1);
        assert_eq!(report.rewrites[0].rule, "fuse_relu");
        assert!(matches!(&out.nodes[0].op, Op::Conv(p) if p.fused_relu));
        assert_eq!(out.nodes[0].outputs[0], "r");
    }

    #[test]
    fn residual_fan_out_blocks_fusion() {
        let g = Graph::new("res")
            .with_input("x", &[1, 2, 4, 4])
            .with_initializer("w", Tensor::random(Shape::new(vec![2, 2, 1, 1]).unwrap(), 3))
            .with_node(Node::new("conv", Op::Conv(ConvParams::new(1, 1, 0)), &["x", "w"], &["c"]))
            .with_node(Node::new("relu", Op::Relu, &["c"], &["r"]))
            .with_node(Node::new("add", Op::Add, &["r", "c"], &["y"]))
            .with_output("y");
        let (out, report) = fuse_activation(&g);
        assert_eq!(out, g);
        assert!(report.rewrites.is_empty());
    }

    #[test]
    fn relu_chain_and_gemm() {
        let g = Graph::new("rr")
            .with_input("x", &[1, 4])
            .with_node(Node::new("r1", Op::Relu, &["x"], &["a"]))
            .with_node(Node::new("r2", Op::Relu, &["a"], &["y"]))
            .with_output("y");
        let (out, _) = fuse_activation(&g);
        assert_eq!(out, g);

        let g = Graph::new("fc")
            .with_input("x", &[1, 4])
            .with_initializer("w", Tensor::random(Shape::new(vec![4, 3]).unwrap(), 1))
            .with_node(Node::new(
                "fc",
                Op::Gemm(GemmParams { trans_b: false, fused_relu: false }),
                &["x", "w"],
                &["h"],
            ))
            .with_node(Node::new("relu", Op::Relu, &["h"], &["y"]))
            .with_output("y");
        let (out, _) = fuse_activation(&g);
        assert!(matches!(&out.nodes[..], [n] if matches!(n.op, Op::Gemm(p) if p.fused_relu)));
    }

    #[test]
    fn dead_code() {
        let g = conv_graph(false, false)
            .with_node(Node::new("unused", Op::Relu, &["x"], &["u"]))
            .with_initializer("orphan", ones(3, 1.0));
        let (out, report) = eliminate_dead(&g);
        assert_eq!(out.nodes.len(), 1);
        assert!(!out.initializers.contains_key("orphan"));
        assert_eq!(report.rewrites.len(), 2);

        let (again, report) = eliminate_dead(&out);
        assert_eq!(again, out);
        assert!(report.rewrites.is_empty());
    }

    #[test]
    fn orphaned_bn_stats_are_removed() {
        let (folded, _) = fold_batch_norm(&conv_graph(true, false));
        let (out, _) = eliminate_dead(&folded);
        for name in ["gamma", "beta", "mean", "var"] {
            assert!(folded.initializers.contains_key(name));
            assert!(!out.initializers.contains_key(name));
        }
    }

    #[test]
    fn identity_removal_keeps_output_names() {
        let g = Graph::new("id")
            .with_input("x", &[1, 4])
            .with_node(Node::new("r", Op::Relu, &["x"], &["a"]))
            .with_node(Node::new("i1", Op::Identity, &["a"], &["b"]))
            .with_node(Node::new("r2", Op::Relu, &["b"], &["c"]))
            .with_node(Node::new("i2", Op::Identity, &["c"], &["y"]))
            .with_output("y");
        let (out, report) = drop_identity(&g);
        assert_eq!(out.nodes.len(), 2);
        assert_eq!(report.rewrites.len(), 2);
        assert_eq!(out.nodes[1].outputs[0], "y");
        assert_eq!(out.nodes[1].inputs[0], "a");

        // input straight to output cannot be removed without renaming either
        let g = Graph::new("pass")
            .with_input("x", &[1, 4])
            .with_node(Node::new("i", Op::Identity, &["x"], &["y"]))
            .with_output("y");
        assert_eq!(drop_identity(&g).0, g);
    }

    #[test]
    fn flatten_into_reshape() {
        let g = Graph::new("fr")
            .with_input("x", &[1, 2, 3, 3])
            .with_node(Node::new("f", Op::Flatten { axis: 1 }, &["x"], &["f"]))
            .with_node(Node::new("r", Op::Reshape { shape: vec![2, 9] }, &["f"], &["y"]))
            .with_output("y");
        let (out, report) = drop_identity(&g);
        assert_eq!(report.rewrites[0].rule, "flatten_into_reshape");
        assert_eq!(out.nodes.len(), 1);
        assert_eq!(out.nodes[0].inputs[0], "x");

        // noop reshape
        let g = Graph::new("nr")
            .with_input("x", &[1, 8])
            .with_node(Node::new("r", Op::Reshape { shape: vec![1, -1] }, &["x"], &["a"]))
            .with_node(Node::new("s", Op::Relu, &["a"], &["y"]))
            .with_output("y");
        let (out, report) = drop_identity(&g);
        assert_eq!(report.rewrites[0].rule, "noop_reshape");
        assert_eq!(out.nodes.len(), 1);
    }

    #[test]
    fn default_pipeline_on_conv_bn_relu() {
        let g = conv_graph(true, true);
        let (out, reports) = run_pipeline(&g, &PassPipeline::default()).unwrap();
        assert_eq!(out.nodes.len(), 1);
        assert!(matches!(&out.nodes[0].op, Op::Conv(p) if p.fused_relu));
        assert_eq!(reports.len(), 4);
        for r in &reports {
            assert!(r.nodes_after <= r.nodes_before);
        }
        let (again, reports) = run_pipeline(&out, &PassPipeline::default()).unwrap();
        assert_eq!(again, out);
        assert!(reports.iter().all(|r| r.rewrites.is_empty()));
    }

    #[test]
    fn empty_pipeline() {
        let g = conv_graph(true, true);
        let (out, reports) = run_pipeline(&g, &PassPipeline::empty()).unwrap();
        assert_eq!(out, g);
        assert!(reports.is_empty());
    }

    #[test]
    fn pipeline_parsing() {
        let p = PassPipeline::parse("fold_batch_norm, eliminate_dead").unwrap();
        assert_eq!(p.passes(), &[PassId::FoldBatchNorm, PassId::EliminateDead]);
        assert!(PassPipeline::parse("fold_batch_norm,fold_batch_norm").is_err());
        assert!(PassPipeline::parse("constant_fold").is_err());
    }
}
