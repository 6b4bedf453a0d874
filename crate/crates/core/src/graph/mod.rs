//! Computation graph: operator nodes connected by named values.

mod inspect;
mod shape;
mod topo;
mod validate;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

pub use inspect::inspect;
pub use shape::{infer_shapes, normalize_axis, resolve_reshape, TensorInfo};
pub use topo::topo_sort;
pub use validate::{validate, Diagnostic};

use crate::tensor::{Shape, Tensor};

/// The closed operator set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Conv,
    BatchNorm,
    Relu,
    MaxPool,
    AvgPool,
    GlobalAvgPool,
    Gemm,
    Add,
    Concat,
    Flatten,
    Reshape,
    Softmax,
    Identity,
}

impl OpKind {
    pub const ALL: [OpKind; 13] = [
        OpKind::Conv,
        OpKind::BatchNorm,
        OpKind::Relu,
        OpKind::MaxPool,
        OpKind::AvgPool,
        OpKind::GlobalAvgPool,
        OpKind::Gemm,
        OpKind::Add,
        OpKind::Concat,
        OpKind::Flatten,
        OpKind::Reshape,
        OpKind::Softmax,
        OpKind::Identity,
    ];

    /// ONNX `op_type` string.
    pub fn onnx_name(self) -> &'static str {
        match self {
            OpKind::Conv => "Conv",
            OpKind::BatchNorm => "BatchNormalization",
            OpKind::Relu => "Relu",
            OpKind::MaxPool => "MaxPool",
            OpKind::AvgPool => "AveragePool",
            OpKind::GlobalAvgPool => "GlobalAveragePool",
            OpKind::Gemm => "Gemm",
            OpKind::Add => "Add",
            OpKind::Concat => "Concat",
            OpKind::Flatten => "Flatten",
            OpKind::Reshape => "Reshape",
            OpKind::Softmax => "Softmax",
            OpKind::Identity => "Identity",
        }
    }

    pub fn from_onnx_name(s: &str) -> Option<OpKind> {
        OpKind::ALL.into_iter().find(|k| k.onnx_name() == s)
    }

    /// Lower-case key used in backend ids and `--backend` overrides.
    pub fn key(self) -> &'static str {
        match self {
            OpKind::Conv => "conv",
            OpKind::BatchNorm => "batchnorm",
            OpKind::Relu => "relu",
            OpKind::MaxPool => "maxpool",
            OpKind::AvgPool => "avgpool",
            OpKind::GlobalAvgPool => "globalavgpool",
            OpKind::Gemm => "gemm",
            OpKind::Add => "add",
            OpKind::Concat => "concat",
            OpKind::Flatten => "flatten",
            OpKind::Reshape => "reshape",
            OpKind::Softmax => "softmax",
            OpKind::Identity => "identity",
        }
    }

    pub fn from_key(s: &str) -> Option<OpKind> {
        let s = s.to_ascii_lowercase();
        OpKind::ALL
            .into_iter()
            .find(|k| k.key() == s || k.onnx_name().eq_ignore_ascii_case(&s))
    }

    /// Allowed number of inputs.
    pub fn arity(self) -> (usize, usize) {
        match self {
            OpKind::Conv | OpKind::Gemm => (2, 3),
            OpKind::BatchNorm => (5, 5),
            OpKind::Add => (2, 2),
            OpKind::Concat => (1, usize::MAX),
            _ => (1, 1),
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.onnx_name())
    }
}

/// Padding in ONNX order: begin of H, begin of W, end of H, end of W.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pads {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl Pads {
    pub fn uniform(p: usize) -> Pads {
        Pads {
            top: p,
            left: p,
            bottom: p,
            right: p,
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == Pads::default()
    }

    pub fn to_onnx(self) -> [usize; 4] {
        [self.top, self.left, self.bottom, self.right]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvParams {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub pads: Pads,
    pub groups: usize,
    pub fused_relu: bool,
}

impl ConvParams {
    pub fn new(kernel: usize, stride: usize, pad: usize) -> ConvParams {
        ConvParams {
            kernel_h: kernel,
            kernel_w: kernel,
            stride_h: stride,
            stride_w: stride,
            pads: Pads::uniform(pad),
            groups: 1,
            fused_relu: false,
        }
    }

    pub fn with_groups(mut self, groups: usize) -> ConvParams {
        self.groups = groups;
        self
    }

    pub fn with_relu(mut self, on: bool) -> ConvParams {
        self.fused_relu = on;
        self
    }

    /// `(H_out, W_out)` by the floor rule, or `None` if the kernel does not fit.
    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        window_output(h, self.kernel_h, self.stride_h, self.pads.top, self.pads.bottom)
            .zip(window_output(w, self.kernel_w, self.stride_w, self.pads.left, self.pads.right))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolParams {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub pads: Pads,
}

impl PoolParams {
    pub fn new(kernel: usize, stride: usize, pad: usize) -> PoolParams {
        PoolParams {
            kernel_h: kernel,
            kernel_w: kernel,
            stride_h: stride,
            stride_w: stride,
            pads: Pads::uniform(pad),
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        window_output(h, self.kernel_h, self.stride_h, self.pads.top, self.pads.bottom)
            .zip(window_output(w, self.kernel_w, self.stride_w, self.pads.left, self.pads.right))
    }
}

/// `floor((len + pad_begin + pad_end - kernel) / stride) + 1`.
pub fn window_output(
    len: usize,
    kernel: usize,
    stride: usize,
    pad_begin: usize,
    pad_end: usize,
) -> Option<usize> {
    let padded = len + pad_begin + pad_end;
    if stride == 0 || kernel == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GemmParams {
    pub trans_b: bool,
    pub fused_relu: bool,
}

/// An operator together with its attributes.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Conv(ConvParams),
    BatchNorm { epsilon: f32 },
    Relu,
    MaxPool(PoolParams),
    AvgPool(PoolParams),
    GlobalAvgPool,
    Gemm(GemmParams),
    Add,
    Concat { axis: i64 },
    Flatten { axis: i64 },
    /// Target shape with ONNX semantics: `0` copies the input extent, `-1` is inferred.
    Reshape { shape: Vec<i64> },
    Softmax { axis: i64 },
    Identity,
}

pub const DEFAULT_BN_EPSILON: f32 = 1e-5;

impl Op {
    pub fn kind(&self) -> OpKind {
        match self {
            Op::Conv(_) => OpKind::Conv,
            Op::BatchNorm { .. } => OpKind::BatchNorm,
            Op::Relu => OpKind::Relu,
            Op::MaxPool(_) => OpKind::MaxPool,
            Op::AvgPool(_) => OpKind::AvgPool,
            Op::GlobalAvgPool => OpKind::GlobalAvgPool,
            Op::Gemm(_) => OpKind::Gemm,
            Op::Add => OpKind::Add,
            Op::Concat { .. } => OpKind::Concat,
            Op::Flatten { .. } => OpKind::Flatten,
            Op::Reshape { .. } => OpKind::Reshape,
            Op::Softmax { .. } => OpKind::Softmax,
            Op::Identity => OpKind::Identity,
        }
    }

    /// Short human-readable attribute list for `inspect`.
    pub fn attr_summary(&self) -> String {
        fn pads(p: &Pads) -> String {
            format!("{},{},{},{}", p.top, p.left, p.bottom, p.right)
        }
        match self {
            Op::Conv(c) => format!(
                "k={}x{} s={}x{} pads={} groups={}{}",
                c.kernel_h,
                c.kernel_w,
                c.stride_h,
                c.stride_w,
                pads(&c.pads),
                c.groups,
                if c.fused_relu { " +relu" } else { "" }
            ),
            Op::MaxPool(p) | Op::AvgPool(p) => format!(
                "k={}x{} s={}x{} pads={}",
                p.kernel_h,
                p.kernel_w,
                p.stride_h,
                p.stride_w,
                pads(&p.pads)
            ),
            Op::BatchNorm { epsilon } => format!("eps={epsilon:e}"),
            Op::Gemm(g) => format!(
                "trans_b={}{}",
                g.trans_b as u8,
                if g.fused_relu { " +relu" } else { "" }
            ),
            Op::Concat { axis } | Op::Flatten { axis } | Op::Softmax { axis } => {
                format!("axis={axis}")
            }
            Op::Reshape { shape } => format!("shape={shape:?}"),
            Op::Relu | Op::GlobalAvgPool | Op::Add | Op::Identity => String::new(),
        }
    }
}

/// One layer of the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub op: Op,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl Node {
    pub fn new(
        name: impl Into<String>,
        op: Op,
        inputs: &[&str],
        outputs: &[&str],
    ) -> Node {
        Node {
            name: name.into(),
            op,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn kind(&self) -> OpKind {
        self.op.kind()
    }

    pub fn output(&self) -> &str {
        &self.outputs[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueInfo {
    pub name: String,
    /// `None` when the model leaves an extent symbolic.
    pub shape: Option<Shape>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Graph {
    pub name: String,
    pub inputs: Vec<ValueInfo>,
    pub outputs: Vec<String>,
    pub nodes: Vec<Node>,
    pub initializers: BTreeMap<String, Tensor>,
}

impl Graph {
    pub fn new(name: impl Into<String>) -> Graph {
        Graph {
            name: name.into(),
            ..Graph::default()
        }
    }

    pub fn with_input(mut self, name: &str, dims: &[usize]) -> Graph {
        self.inputs.push(ValueInfo {
            name: name.to_string(),
            shape: Some(Shape::new(dims.to_vec()).expect("valid input shape")),
        });
        self
    }

    pub fn with_output(mut self, name: &str) -> Graph {
        self.outputs.push(name.to_string());
        self
    }

    pub fn with_node(mut self, node: Node) -> Graph {
        self.nodes.push(node);
        self
    }

    pub fn with_initializer(mut self, name: &str, t: Tensor) -> Graph {
        self.initializers.insert(name.to_string(), t);
        self
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn is_graph_input(&self, value: &str) -> bool {
        self.inputs.iter().any(|i| i.name == value)
    }

    pub fn is_graph_output(&self, value: &str) -> bool {
        self.outputs.iter().any(|o| o == value)
    }

    /// Value name to index of the node producing it.
    pub fn producers(&self) -> HashMap<&str, usize> {
        let mut map = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            for o in &n.outputs {
                map.entry(o.as_str()).or_insert(i);
            }
        }
        map
    }

    /// Value name to indices of the nodes reading it, in declaration order.
    pub fn consumers(&self) -> HashMap<&str, Vec<usize>> {
        let mut map: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            for inp in &n.inputs {
                let list = map.entry(inp.as_str()).or_default();
                if list.last() != Some(&i) {
                    list.push(i);
                }
            }
        }
        map
    }

    /// Declared shapes of graph inputs, if all are known.
    pub fn declared_input_shapes(&self) -> Option<HashMap<String, Shape>> {
        self.inputs
            .iter()
            .map(|i| i.shape.clone().map(|s| (i.name.clone(), s)))
            .collect()
    }

    pub fn is_depthwise(&self, node: &Node, input_channels: usize) -> bool {
        match &node.op {
            Op::Conv(p) => {
                let out_channels = self
                    .initializers
                    .get(&node.inputs[1])
                    .map(|w| w.dims()[0]);
                p.groups > 1 && p.groups == input_channels && out_channels == Some(input_channels)
            }
            _ => false,
        }
    }
}

/// Returns `base` if unused by any value, node, or initializer; otherwise `base_1`, `base_2`, ...
pub(crate) fn fresh_name(g: &Graph, base: &str) -> String {
    let taken = |s: &str| {
        g.initializers.contains_key(s)
            || g.is_graph_input(s)
            || g.nodes
                .iter()
                .any(|n| n.name == s || n.outputs.iter().any(|o| o == s))
    };
    if !taken(base) {
        return base.to_string();
    }
    (1..)
        .map(|i| format!("{base}_{i}"))
        .find(|c| !taken(c))
        .unwrap()
}
