use std::collections::{HashMap, HashSet};
use std::fmt;

use super::{topo, Graph, Op};

/// One structural problem found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    DuplicateNodeName(String),
    /// A value is defined more than once (two producers, or a node output
    /// shadowing a graph input or initializer).
    DuplicateValue(String),
    DanglingInput { node: String, value: String },
    UndefinedGraphOutput(String),
    UnusedInitializer(String),
    Cycle(Vec<String>),
    Arity { node: String, msg: String },
    BadAttribute { node: String, msg: String },
}

impl Diagnostic {
    /// Unused initializers are reported but do not prevent execution.
    pub fn is_error(&self) -> bool {
        !matches!(self, Diagnostic::UnusedInitializer(_))
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DuplicateNodeName(n) => write!(f, "duplicate node name `{n}`"),
            Diagnostic::DuplicateValue(v) => write!(f, "value `{v}` is defined more than once"),
            Diagnostic::DanglingInput { node, value } => {
                write!(f, "node `{node}` reads undefined value `{value}`")
            }
            Diagnostic::UndefinedGraphOutput(v) => {
                write!(f, "graph output `{v}` is not produced by any node or initializer")
            }
            Diagnostic::UnusedInitializer(v) => write!(f, "initializer `{v}` is never used"),
            Diagnostic::Cycle(nodes) => write!(f, "cycle among nodes {}", nodes.join(", ")),
            Diagnostic::Arity { node, msg } | Diagnostic::BadAttribute { node, msg } => {
                write!(f, "node `{node}`: {msg}")
            }
        }
    }
}

/// Checks every structural invariant and returns one diagnostic per violation.
pub fn validate(g: &Graph) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut names = HashSet::new();
    for n in &g.nodes {
        if !names.insert(n.name.as_str()) {
            diags.push(Diagnostic::DuplicateNodeName(n.name.clone()));
        }
    }

    let mut defined: HashMap<&str, usize> = HashMap::new();
    for i in &g.inputs {
        *defined.entry(i.name.as_str()).or_default() += 1;
    }
    for name in g.initializers.keys() {
        // an initializer may double as a declared graph input (old ONNX style)
        if !g.is_graph_input(name) {
            *defined.entry(name.as_str()).or_default() += 1;
        }
    }
    for n in &g.nodes {
        for o in &n.outputs {
            *defined.entry(o.as_str()).or_default() += 1;
        }
    }
    let mut dup: Vec<&str> = defined
        .iter()
        .filter(|(_, &c)| c > 1)
        .map(|(&v, _)| v)
        .collect();
    dup.sort_unstable();
    diags.extend(dup.into_iter().map(|v| Diagnostic::DuplicateValue(v.to_string())));

    for n in &g.nodes {
        for inp in &n.inputs {
            if !defined.contains_key(inp.as_str()) {
                diags.push(Diagnostic::DanglingInput {
                    node: n.name.clone(),
                    value: inp.clone(),
                });
            }
        }
        check_node(n, &mut diags);
    }

    for o in &g.outputs {
        let produced = g.nodes.iter().any(|n| n.outputs.contains(o))
            || g.initializers.contains_key(o)
            || g.is_graph_input(o);
        if !produced {
            diags.push(Diagnostic::UndefinedGraphOutput(o.clone()));
        }
    }

    let used: HashSet<&str> = g
        .nodes
        .iter()
        .flat_map(|n| n.inputs.iter().map(String::as_str))
        .chain(g.outputs.iter().map(String::as_str))
        .collect();
    for name in g.initializers.keys() {
        if !used.contains(name.as_str()) {
            diags.push(Diagnostic::UnusedInitializer(name.clone()));
        }
    }

    if let Err(stuck) = topo::kahn(g) {
        diags.push(Diagnostic::Cycle(
            stuck.into_iter().map(|i| g.nodes[i].name.clone()).collect(),
        ));
    }

    diags
}

fn check_node(n: &super::Node, diags: &mut Vec<Diagnostic>) {
    let (lo, hi) = n.kind().arity();
    if n.inputs.len() < lo || n.inputs.len() > hi {
        diags.push(Diagnostic::Arity {
            node: n.name.clone(),
            msg: format!("{} takes {lo}..={hi} inputs, got {}", n.kind(), n.inputs.len()),
        });
    }
    if n.outputs.len() != 1 {
        diags.push(Diagnostic::Arity {
            node: n.name.clone(),
            msg: format!("expected exactly one output, got {}", n.outputs.len()),
        });
    }
    let mut bad = |msg: String| {
        diags.push(Diagnostic::BadAttribute {
            node: n.name.clone(),
            msg,
        })
    };
    match &n.op {
        Op::Conv(p) => {
            if p.stride_h == 0 || p.stride_w == 0 {
                bad("strides must be >= 1".into());
            }
            if p.kernel_h == 0 || p.kernel_w == 0 {
                bad("kernel extents must be >= 1".into());
            }
            if p.groups == 0 {
                bad("groups must be >= 1".into());
            }
        }
        Op::MaxPool(p) | Op::AvgPool(p) => {
            if p.stride_h == 0 || p.stride_w == 0 {
                bad("strides must be >= 1".into());
            }
            if p.kernel_h == 0 || p.kernel_w == 0 {
                bad("kernel extents must be >= 1".into());
            }
            let pads = p.pads;
            if pads.top >= p.kernel_h
                || pads.bottom >= p.kernel_h
                || pads.left >= p.kernel_w
                || pads.right >= p.kernel_w
            {
                bad("pool padding must be smaller than the kernel".into());
            }
        }
        // written so that NaN is rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        Op::BatchNorm { epsilon } if !(*epsilon >= 0.0) => {
            bad(format!("epsilon must be >= 0, got {epsilon}"));
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::testutil::*;
    use crate::graph::Node;

    #[test]
    fn single_relu_is_valid() {
        assert_eq!(validate(&relu_graph()), vec![]);
    }

    #[test]
    fn dangling_input() {
        let g = Graph::new("g")
            .with_input("a", &[1])
            .with_output("y")
            .with_node(Node::new("r", Op::Relu, &["x"], &["y"]));
        let d = validate(&g);
        assert_eq!(
            d,
            vec![Diagnostic::DanglingInput {
                node: "r".into(),
                value: "x".into()
            }]
        );
    }

    #[test]
    fn two_node_cycle() {
        let g = Graph::new("g")
            .with_input("x", &[1])
            .with_output("b")
            .with_node(Node::new("A", Op::Add, &["x", "b"], &["a"]))
            .with_node(Node::new("B", Op::Relu, &["a"], &["b"]));
        let d = validate(&g);
        assert!(d.iter().any(|d| matches!(d, Diagnostic::Cycle(_))), "{d:?}");
    }

    #[test]
    fn duplicates_and_unused() {
        let g = relu_graph()
            .with_node(Node::new("r", Op::Relu, &["x"], &["y"]))
            .with_initializer("orphan", crate::tensor::Tensor::scalar1(1.0));
        let d = validate(&g);
        assert!(d.contains(&Diagnostic::DuplicateNodeName("r".into())));
        assert!(d.contains(&Diagnostic::DuplicateValue("y".into())));
        let unused = Diagnostic::UnusedInitializer("orphan".into());
        assert!(d.contains(&unused));
        assert!(!unused.is_error());
    }

    #[test]
    fn missing_output_and_bad_attrs() {
        let mut p = crate::graph::ConvParams::new(3, 0, 0);
        p.groups = 0;
        let g = Graph::new("g")
            .with_input("x", &[1, 1, 4, 4])
            .with_output("nowhere")
            .with_node(Node::new("c", Op::Conv(p), &["x"], &["y"]));
        let d = validate(&g);
        assert!(d.contains(&Diagnostic::UndefinedGraphOutput("nowhere".into())));
        assert!(d.iter().any(|d| matches!(d, Diagnostic::Arity { .. })));
        assert_eq!(
            d.iter()
                .filter(|d| matches!(d, Diagnostic::BadAttribute { .. }))
                .count(),
            2
        );
    }
}
