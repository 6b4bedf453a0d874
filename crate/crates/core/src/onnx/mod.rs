//! Reader for the subset of the ONNX `ModelProto` schema that describes a
//! CNN inference graph.
//!
//! Only the fields listed in [`fields`] are interpreted; every other field is
//! skipped by wire type, so newer producers that add fields still load.

pub mod wire;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::attrs::{build_op, AttrError, AttrMap, AttrValue, OpContext, DEFAULT_OPSET};
use crate::error::{Error, Result};
use crate::graph::{Graph, Node, OpKind, ValueInfo};
use crate::tensor::{Shape, Tensor};
use wire::{Fields, WireRecord, WireType};

/// Field numbers from `onnx/onnx.proto`. Checked against the fixtures written
/// by the reference `onnx` package and the PyTorch exporter.
mod fields {
    pub mod model {
        pub const OPSET_IMPORT: u32 = 8; // repeated OperatorSetIdProto
        pub const GRAPH: u32 = 7; // GraphProto
    }
    pub mod opset {
        pub const DOMAIN: u32 = 1; // string
        pub const VERSION: u32 = 2; // int64
    }
    pub mod graph {
        pub const NODE: u32 = 1; // repeated NodeProto
        pub const NAME: u32 = 2; // string
        pub const INITIALIZER: u32 = 5; // repeated TensorProto
        pub const INPUT: u32 = 11; // repeated ValueInfoProto
        pub const OUTPUT: u32 = 12; // repeated ValueInfoProto
    }
    pub mod node {
        pub const INPUT: u32 = 1; // repeated string
        pub const OUTPUT: u32 = 2; // repeated string
        pub const NAME: u32 = 3; // string
        pub const OP_TYPE: u32 = 4; // string
        pub const ATTRIBUTE: u32 = 5; // repeated AttributeProto
        pub const DOMAIN: u32 = 7; // string
    }
    pub mod attribute {
        pub const NAME: u32 = 1; // string
        pub const F: u32 = 2; // float
        pub const I: u32 = 3; // int64
        pub const S: u32 = 4; // bytes
        pub const T: u32 = 5; // TensorProto
        pub const FLOATS: u32 = 7; // repeated float
        pub const INTS: u32 = 8; // repeated int64
        pub const TYPE: u32 = 20; // AttributeType enum
    }
    pub mod attribute_type {
        pub const FLOAT: i64 = 1;
        pub const INT: i64 = 2;
        pub const STRING: i64 = 3;
        pub const TENSOR: i64 = 4;
        pub const FLOATS: i64 = 6;
        pub const INTS: i64 = 7;
    }
    pub mod tensor {
        pub const DIMS: u32 = 1; // repeated int64
        pub const DATA_TYPE: u32 = 2; // int32 (DataType enum)
        pub const FLOAT_DATA: u32 = 4; // repeated float, packed
        pub const INT64_DATA: u32 = 7; // repeated int64, packed
        pub const NAME: u32 = 8; // string
        pub const RAW_DATA: u32 = 9; // bytes, little-endian
        pub const DATA_LOCATION: u32 = 14; // enum, 1 = EXTERNAL
    }
    pub mod data_type {
        pub const FLOAT: i64 = 1;
        pub const INT64: i64 = 7;
    }
    pub mod value_info {
        pub const NAME: u32 = 1; // string
        pub const TYPE: u32 = 2; // TypeProto
    }
    pub mod type_proto {
        pub const TENSOR_TYPE: u32 = 1; // TypeProto.Tensor
    }
    pub mod tensor_type {
        pub const ELEM_TYPE: u32 = 1; // int32
        pub const SHAPE: u32 = 2; // TensorShapeProto
    }
    pub mod shape {
        pub const DIM: u32 = 1; // repeated Dimension
    }
    pub mod dim {
        pub const DIM_VALUE: u32 = 1; // int64
        pub const DIM_PARAM: u32 = 2; // string
    }
}

/// Resource bounds applied while decoding.
#[derive(Debug, Clone)]
pub struct OnnxLimits {
    pub max_message_bytes: usize,
    /// Model is depth 1, graph 2, node 3, attribute 4.
    pub max_nesting_depth: usize,
    pub supported_op_types: BTreeSet<String>,
}

impl Default for OnnxLimits {
    fn default() -> Self {
        OnnxLimits {
            max_message_bytes: 1 << 30,
            max_nesting_depth: 16,
            supported_op_types: OpKind::ALL
                .iter()
                .map(|k| k.onnx_name().to_string())
                .collect(),
        }
    }
}

struct Decoder<'l> {
    limits: &'l OnnxLimits,
}

impl Decoder<'_> {
    fn enter(&self, depth: usize, what: &str) -> Result<()> {
        if depth > self.limits.max_nesting_depth {
            return Err(Error::Limit(format!(
                "{what} nested {depth} levels deep (limit {})",
                self.limits.max_nesting_depth
            )));
        }
        Ok(())
    }
}

fn expect_bytes<'a>(rec: &WireRecord<'a>, what: &str) -> Result<&'a [u8]> {
    rec.as_bytes().ok_or_else(|| {
        Error::Malformed(format!(
            "{what} (field {}) must be length-delimited",
            rec.field_number
        ))
    })
}

fn expect_int(rec: &WireRecord<'_>, what: &str) -> Result<u64> {
    match rec.wire_type {
        WireType::Varint => Ok(rec.as_int().unwrap()),
        _ => Err(Error::Malformed(format!(
            "{what} (field {}) must be a varint",
            rec.field_number
        ))),
    }
}

fn expect_str<'a>(rec: &WireRecord<'a>, what: &str) -> Result<&'a str> {
    std::str::from_utf8(expect_bytes(rec, what)?)
        .map_err(|_| Error::Malformed(format!("{what} is not valid UTF-8")))
}

/// Repeated int64, either one varint per record or packed.
fn push_ints(rec: &WireRecord<'_>, out: &mut Vec<i64>, what: &str) -> Result<()> {
    match rec.wire_type {
        WireType::Varint => out.push(rec.as_int().unwrap() as i64),
        WireType::LengthDelimited => {
            let bytes = rec.as_bytes().unwrap();
            let mut pos = 0;
            while pos < bytes.len() {
                let (v, next) = wire::decode_varint(bytes, pos)?;
                out.push(v as i64);
                pos = next;
            }
        }
        _ => {
            return Err(Error::Malformed(format!(
                "{what} must be varint or packed varints"
            )))
        }
    }
    Ok(())
}

/// Repeated float, either one fixed32 per record or packed.
fn push_floats(rec: &WireRecord<'_>, out: &mut Vec<f32>, what: &str) -> Result<()> {
    match rec.wire_type {
        WireType::Fixed32 => out.push(f32::from_bits(rec.as_int().unwrap() as u32)),
        WireType::LengthDelimited => {
            let bytes = rec.as_bytes().unwrap();
            if !bytes.len().is_multiple_of(4) {
                return Err(Error::Malformed(format!(
                    "packed {what} has {} bytes, not a multiple of 4",
                    bytes.len()
                )));
            }
            out.extend(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])),
            );
        }
        _ => {
            return Err(Error::Malformed(format!(
                "{what} must be fixed32 or packed fixed32"
            )))
        }
    }
    Ok(())
}

#[derive(Default)]
struct RawTensor<'a> {
    name: String,
    dims: Vec<i64>,
    data_type: i64,
    float_data: Vec<f32>,
    int64_data: Vec<i64>,
    raw_data: Option<&'a [u8]>,
    external: bool,
}

impl RawTensor<'_> {
    fn dims_or_scalar(&self) -> Vec<i64> {
        if self.dims.is_empty() {
            vec![1]
        } else {
            self.dims.clone()
        }
    }

    fn numel(&self) -> Result<usize> {
        self.dims
            .iter()
            .try_fold(1usize, |acc, &d| {
                usize::try_from(d).ok().and_then(|d| acc.checked_mul(d))
            })
            .ok_or_else(|| Error::Malformed(format!("tensor `{}` has invalid dims {:?}", self.name, self.dims)))
    }

    fn to_f32(&self) -> Result<Tensor> {
        if self.data_type != fields::data_type::FLOAT {
            return Err(Error::UnsupportedDtype {
                dtype: self.data_type,
                tensor: self.name.clone(),
            });
        }
        if self.external {
            return Err(Error::Malformed(format!(
                "tensor `{}` uses external data, which is not supported",
                self.name
            )));
        }
        let numel = self.numel()?;
        let data = match self.raw_data {
            Some(raw) => {
                if raw.len() != numel * 4 {
                    return Err(Error::Malformed(format!(
                        "tensor `{}` raw_data has {} bytes, expected {}",
                        self.name,
                        raw.len(),
                        numel * 4
                    )));
                }
                crate::tensor::f32_from_le_bytes(raw)?
            }
            None => {
                if self.float_data.len() != numel {
                    return Err(Error::Malformed(format!(
                        "tensor `{}` has {} float_data values, expected {numel}",
                        self.name,
                        self.float_data.len()
                    )));
                }
                self.float_data.clone()
            }
        };
        let shape = Shape::from_i64(&self.dims_or_scalar())
            .map_err(|e| Error::Malformed(format!("tensor `{}`: {e}", self.name)))?;
        Tensor::new(shape, data)
    }

    fn to_i64(&self) -> Result<Vec<i64>> {
        match (self.data_type, self.raw_data) {
            (fields::data_type::INT64, Some(raw)) => {
                if raw.len() % 8 != 0 {
                    return Err(Error::Malformed(format!(
                        "int64 tensor `{}` raw_data has {} bytes",
                        self.name,
                        raw.len()
                    )));
                }
                Ok(raw
                    .chunks_exact(8)
                    .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                    .collect())
            }
            (fields::data_type::INT64, None) => Ok(self.int64_data.clone()),
            (dtype, _) => Err(Error::UnsupportedDtype {
                dtype,
                tensor: self.name.clone(),
            }),
        }
    }
}

struct RawNode {
    name: String,
    op_type: String,
    domain: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    attributes: Vec<(String, AttrValue)>,
}

struct RawValueInfo {
    name: String,
    elem_type: Option<i64>,
    shape: Option<Vec<i64>>,
}

#[derive(Default)]
struct RawGraph<'a> {
    name: String,
    nodes: Vec<RawNode>,
    initializers: Vec<RawTensor<'a>>,
    inputs: Vec<RawValueInfo>,
    outputs: Vec<RawValueInfo>,
}

impl<'l> Decoder<'l> {
    fn model<'a>(&self, bytes: &'a [u8]) -> Result<(Option<RawGraph<'a>>, i64)> {
        self.enter(1, "ModelProto")?;
        let mut graph = None;
        let mut opset = None;
        for rec in Fields::new(bytes) {
            let rec = rec?;
            match rec.field_number {
                fields::model::GRAPH => {
                    graph = Some(self.graph(expect_bytes(&rec, "ModelProto.graph")?, 2)?)
                }
                fields::model::OPSET_IMPORT => {
                    let (domain, version) =
                        self.opset(expect_bytes(&rec, "ModelProto.opset_import")?, 2)?;
                    if domain.is_empty() || domain == "ai.onnx" {
                        opset = Some(version);
                    }
                }
                _ => {}
            }
        }
        Ok((graph, opset.unwrap_or(DEFAULT_OPSET)))
    }

    fn opset(&self, bytes: &[u8], depth: usize) -> Result<(String, i64)> {
        self.enter(depth, "OperatorSetIdProto")?;
        let (mut domain, mut version) = (String::new(), 0);
        for rec in Fields::new(bytes) {
            let rec = rec?;
            match rec.field_number {
                fields::opset::DOMAIN => domain = expect_str(&rec, "opset domain")?.to_string(),
                fields::opset::VERSION => version = expect_int(&rec, "opset version")? as i64,
                _ => {}
            }
        }
        Ok((domain, version))
    }

    fn graph<'a>(&self, bytes: &'a [u8], depth: usize) -> Result<RawGraph<'a>> {
        self.enter(depth, "GraphProto")?;
        let mut g = RawGraph::default();
        for rec in Fields::new(bytes) {
            let rec = rec?;
            match rec.field_number {
                fields::graph::NODE => g
                    .nodes
                    .push(self.node(expect_bytes(&rec, "GraphProto.node")?, depth + 1)?),
                fields::graph::NAME => g.name = expect_str(&rec, "GraphProto.name")?.to_string(),
                fields::graph::INITIALIZER => g.initializers.push(
                    self.tensor(expect_bytes(&rec, "GraphProto.initializer")?, depth + 1)?,
                ),
                fields::graph::INPUT => g
                    .inputs
                    .push(self.value_info(expect_bytes(&rec, "GraphProto.input")?, depth + 1)?),
                fields::graph::OUTPUT => g
                    .outputs
                    .push(self.value_info(expect_bytes(&rec, "GraphProto.output")?, depth + 1)?),
                _ => {}
            }
        }
        Ok(g)
    }

    fn node(&self, bytes: &[u8], depth: usize) -> Result<RawNode> {
        self.enter(depth, "NodeProto")?;
        let mut n = RawNode {
            name: String::new(),
            op_type: String::new(),
            domain: String::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            attributes: Vec::new(),
        };
        for rec in Fields::new(bytes) {
            let rec = rec?;
            match rec.field_number {
                fields::node::INPUT => n.inputs.push(expect_str(&rec, "NodeProto.input")?.into()),
                fields::node::OUTPUT => {
                    n.outputs.push(expect_str(&rec, "NodeProto.output")?.into())
                }
                fields::node::NAME => n.name = expect_str(&rec, "NodeProto.name")?.into(),
                fields::node::OP_TYPE => n.op_type = expect_str(&rec, "NodeProto.op_type")?.into(),
                fields::node::DOMAIN => n.domain = expect_str(&rec, "NodeProto.domain")?.into(),
                fields::node::ATTRIBUTE => n.attributes.push(
                    self.attribute(expect_bytes(&rec, "NodeProto.attribute")?, depth + 1)?,
                ),
                _ => {}
            }
        }
        Ok(n)
    }

    fn attribute(&self, bytes: &[u8], depth: usize) -> Result<(String, AttrValue)> {
        use fields::attribute as f;
        use fields::attribute_type as ty;
        self.enter(depth, "AttributeProto")?;
        let mut name = String::new();
        let mut kind = None;
        let (mut fv, mut iv, mut sv) = (None, None, None);
        let (mut ints, mut floats) = (Vec::new(), Vec::new());
        let mut has_tensor = false;
        for rec in Fields::new(bytes) {
            let rec = rec?;
            match rec.field_number {
                f::NAME => name = expect_str(&rec, "AttributeProto.name")?.into(),
                f::TYPE => kind = Some(expect_int(&rec, "AttributeProto.type")? as i64),
                f::F => match rec.wire_type {
                    WireType::Fixed32 => fv = Some(f32::from_bits(rec.as_int().unwrap() as u32)),
                    _ => return Err(Error::Malformed("AttributeProto.f must be fixed32".into())),
                },
                f::I => iv = Some(expect_int(&rec, "AttributeProto.i")? as i64),
                f::S => sv = Some(expect_str(&rec, "AttributeProto.s")?.to_string()),
                f::T => {
                    // nested tensors are decoded for validity and depth, then ignored
                    self.tensor(expect_bytes(&rec, "AttributeProto.t")?, depth + 1)?;
                    has_tensor = true;
                }
                f::INTS => push_ints(&rec, &mut ints, "AttributeProto.ints")?,
                f::FLOATS => push_floats(&rec, &mut floats, "AttributeProto.floats")?,
                _ => {}
            }
        }
        let value = match kind {
            Some(ty::FLOAT) => fv.map(AttrValue::Float),
            Some(ty::INT) => iv.map(AttrValue::Int),
            Some(ty::STRING) => sv.map(AttrValue::Str),
            Some(ty::FLOATS) => Some(AttrValue::Floats(floats)),
            Some(ty::INTS) => Some(AttrValue::Ints(ints)),
            Some(ty::TENSOR) => has_tensor.then_some(AttrValue::Other),
            Some(_) => Some(AttrValue::Other),
            // very old producers omit `type`; infer from whichever field is set
            None => fv
                .map(AttrValue::Float)
                .or(iv.map(AttrValue::Int))
                .or(sv.map(AttrValue::Str))
                .or((!ints.is_empty()).then(|| AttrValue::Ints(ints.clone())))
                .or((!floats.is_empty()).then(|| AttrValue::Floats(floats.clone())))
                .or(Some(AttrValue::Other)),
        };
        let value = value.ok_or_else(|| {
            Error::Malformed(format!("attribute `{name}` declares a type but carries no value"))
        })?;
        Ok((name, value))
    }

    fn tensor<'a>(&self, bytes: &'a [u8], depth: usize) -> Result<RawTensor<'a>> {
        use fields::tensor as f;
        self.enter(depth, "TensorProto")?;
        let mut t = RawTensor::default();
        for rec in Fields::new(bytes) {
            let rec = rec?;
            match rec.field_number {
                f::DIMS => push_ints(&rec, &mut t.dims, "TensorProto.dims")?,
                f::DATA_TYPE => t.data_type = expect_int(&rec, "TensorProto.data_type")? as i64,
                f::FLOAT_DATA => push_floats(&rec, &mut t.float_data, "TensorProto.float_data")?,
                f::INT64_DATA => push_ints(&rec, &mut t.int64_data, "TensorProto.int64_data")?,
                f::NAME => t.name = expect_str(&rec, "TensorProto.name")?.into(),
                f::RAW_DATA => t.raw_data = Some(expect_bytes(&rec, "TensorProto.raw_data")?),
                f::DATA_LOCATION => {
                    t.external = expect_int(&rec, "TensorProto.data_location")? == 1
                }
                _ => {}
            }
        }
        Ok(t)
    }

    fn value_info(&self, bytes: &[u8], depth: usize) -> Result<RawValueInfo> {
        self.enter(depth, "ValueInfoProto")?;
        let mut v = RawValueInfo {
            name: String::new(),
            elem_type: None,
            shape: None,
        };
        for rec in Fields::new(bytes) {
            let rec = rec?;
            match rec.field_number {
                fields::value_info::NAME => v.name = expect_str(&rec, "ValueInfoProto.name")?.into(),
                fields::value_info::TYPE => {
                    self.type_proto(expect_bytes(&rec, "ValueInfoProto.type")?, depth + 1, &mut v)?
                }
                _ => {}
            }
        }
        Ok(v)
    }

    fn type_proto(&self, bytes: &[u8], depth: usize, v: &mut RawValueInfo) -> Result<()> {
        self.enter(depth, "TypeProto")?;
        for rec in Fields::new(bytes) {
            let rec = rec?;
            if rec.field_number == fields::type_proto::TENSOR_TYPE {
                self.enter(depth + 1, "TypeProto.Tensor")?;
                for inner in Fields::new(expect_bytes(&rec, "TypeProto.tensor_type")?) {
                    let inner = inner?;
                    match inner.field_number {
                        fields::tensor_type::ELEM_TYPE => {
                            v.elem_type = Some(expect_int(&inner, "elem_type")? as i64)
                        }
                        fields::tensor_type::SHAPE => {
                            v.shape = self.shape(expect_bytes(&inner, "shape")?, depth + 2)?
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    /// `None` when any extent is symbolic or missing.
    fn shape(&self, bytes: &[u8], depth: usize) -> Result<Option<Vec<i64>>> {
        self.enter(depth, "TensorShapeProto")?;
        let mut dims = Vec::new();
        let mut all_known = true;
        for rec in Fields::new(bytes) {
            let rec = rec?;
            if rec.field_number == fields::shape::DIM {
                self.enter(depth + 1, "Dimension")?;
                let mut value = None;
                for inner in Fields::new(expect_bytes(&rec, "TensorShapeProto.dim")?) {
                    let inner = inner?;
                    match inner.field_number {
                        fields::dim::DIM_VALUE => value = Some(expect_int(&inner, "dim_value")? as i64),
                        fields::dim::DIM_PARAM => value = None,
                        _ => {}
                    }
                }
                match value {
                    Some(d) if d > 0 => dims.push(d),
                    _ => all_known = false,
                }
            }
        }
        Ok(all_known.then_some(dims))
    }
}

/// Parses a serialized ONNX `ModelProto` into a [`Graph`].
pub fn parse_onnx(bytes: &[u8], limits: &OnnxLimits) -> Result<Graph> {
    if bytes.len() > limits.max_message_bytes {
        return Err(Error::Limit(format!(
            "model is {} bytes (limit {})",
            bytes.len(),
            limits.max_message_bytes
        )));
    }
    let decoder = Decoder { limits };
    let (raw, opset) = decoder.model(bytes)?;
    let raw = raw.ok_or_else(|| Error::Malformed("ModelProto has no graph".into()))?;
    build_graph(raw, opset, limits)
}

fn build_graph(raw: RawGraph<'_>, opset: i64, limits: &OnnxLimits) -> Result<Graph> {
    let raw_inits: HashMap<&str, &RawTensor<'_>> = raw
        .initializers
        .iter()
        .map(|t| (t.name.as_str(), t))
        .collect();

    let mut nodes = Vec::with_capacity(raw.nodes.len());
    let mut shape_constants: HashSet<&str> = HashSet::new();
    for (index, rn) in raw.nodes.iter().enumerate() {
        let name = if rn.name.is_empty() {
            format!("{}_{index}", rn.op_type)
        } else {
            rn.name.clone()
        };
        let supported_domain = rn.domain.is_empty() || rn.domain == "ai.onnx";
        let kind = OpKind::from_onnx_name(&rn.op_type)
            .filter(|_| supported_domain && limits.supported_op_types.contains(&rn.op_type))
            .ok_or_else(|| Error::UnsupportedOp {
                op: rn.op_type.clone(),
                node: name.clone(),
            })?;

        // optional inputs/outputs may be given as empty names
        let mut inputs: Vec<String> = rn.inputs.clone();
        while inputs.last().is_some_and(|s| s.is_empty()) {
            inputs.pop();
        }
        let outputs: Vec<String> = rn.outputs.iter().filter(|s| !s.is_empty()).cloned().collect();
        if outputs.len() > 1 {
            return Err(Error::UnsupportedAttribute {
                node: name,
                msg: format!("{} optional outputs are not supported", rn.op_type),
            });
        }

        let mut cx = OpContext {
            opset,
            ..OpContext::default()
        };
        if kind == OpKind::Conv {
            if let Some(w) = inputs.get(1).and_then(|w| raw_inits.get(w.as_str())) {
                if w.dims.len() == 4 {
                    cx.conv_kernel_from_weight = Some([w.dims[2] as usize, w.dims[3] as usize]);
                }
            }
        }
        if kind == OpKind::Reshape && inputs.len() == 2 {
            let target = raw_inits.get(inputs[1].as_str()).ok_or_else(|| {
                Error::UnsupportedAttribute {
                    node: name.clone(),
                    msg: "Reshape target must be a constant initializer".into(),
                }
            })?;
            cx.reshape_target = Some(target.to_i64()?);
            shape_constants.insert(target.name.as_str());
            inputs.truncate(1);
        }

        let attrs: AttrMap = rn.attributes.iter().cloned().collect();
        let op = build_op(kind, &attrs, &cx).map_err(|e| match e {
            AttrError::Unsupported(msg) => Error::UnsupportedAttribute {
                node: name.clone(),
                msg,
            },
            AttrError::Invalid(msg) => Error::Parse {
                path: format!("graph.node[{index}] `{name}`"),
                msg,
            },
        })?;
        nodes.push(Node {
            name,
            op,
            inputs,
            outputs,
        });
    }

    let still_used: HashSet<&str> = nodes
        .iter()
        .flat_map(|n| n.inputs.iter().map(String::as_str))
        .collect();
    let mut initializers = BTreeMap::new();
    for t in &raw.initializers {
        if shape_constants.contains(t.name.as_str()) && !still_used.contains(t.name.as_str()) {
            continue;
        }
        initializers.insert(t.name.clone(), t.to_f32()?);
    }

    let mut inputs = Vec::new();
    for vi in &raw.inputs {
        if initializers.contains_key(&vi.name) || shape_constants.contains(vi.name.as_str()) {
            continue;
        }
        if let Some(et) = vi.elem_type {
            if et != fields::data_type::FLOAT {
                return Err(Error::UnsupportedDtype {
                    dtype: et,
                    tensor: vi.name.clone(),
                });
            }
        }
        let shape = match &vi.shape {
            Some(d) if !d.is_empty() => Some(Shape::from_i64(d).map_err(|e| {
                Error::Malformed(format!("graph input `{}`: {e}", vi.name))
            })?),
            _ => None,
        };
        inputs.push(ValueInfo {
            name: vi.name.clone(),
            shape,
        });
    }

    Ok(Graph {
        name: raw.name,
        inputs,
        outputs: raw.outputs.iter().map(|o| o.name.clone()).collect(),
        nodes,
        initializers,
    })
}

/// Reads and parses an `.onnx` file.
pub fn load_onnx(path: &std::path::Path, limits: &OnnxLimits) -> Result<Graph> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_onnx(&bytes, limits)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Minimal protobuf writer for building test messages by hand.
    fn varint(mut v: u64, out: &mut Vec<u8>) {
        loop {
            let byte = (v & 0x7f) as u8;
            v >>= 7;
            if v == 0 {
                out.push(byte);
                return;
            }
            out.push(byte | 0x80);
        }
    }
    fn field_bytes(field: u32, payload: &[u8], out: &mut Vec<u8>) {
        varint(((field as u64) << 3) | 2, out);
        varint(payload.len() as u64, out);
        out.extend_from_slice(payload);
    }
    fn field_int(field: u32, v: u64, out: &mut Vec<u8>) {
        varint((field as u64) << 3, out);
        varint(v, out);
    }

    fn relu_model(op_type: &str) -> Vec<u8> {
        let mut node = Vec::new();
        field_bytes(1, b"x", &mut node);
        field_bytes(2, b"y", &mut node);
        field_bytes(3, b"r", &mut node);
        field_bytes(4, op_type.as_bytes(), &mut node);
        let mut vi = Vec::new();
        field_bytes(1, b"x", &mut vi);
        let mut out_vi = Vec::new();
        field_bytes(1, b"y", &mut out_vi);
        let mut graph = Vec::new();
        field_bytes(1, &node, &mut graph);
        field_bytes(2, b"g", &mut graph);
        field_bytes(11, &vi, &mut graph);
        field_bytes(12, &out_vi, &mut graph);
        let mut model = Vec::new();
        field_int(1, 8, &mut model);
        field_bytes(7, &graph, &mut model);
        model
    }

    #[test]
    fn hand_encoded_relu() {
        let g = parse_onnx(&relu_model("Relu"), &OnnxLimits::default()).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.nodes[0].kind(), OpKind::Relu);
        assert_eq!(g.inputs[0].name, "x");
        assert_eq!(g.inputs[0].shape, None);
        assert_eq!(g.outputs, vec!["y"]);
    }

    #[test]
    fn unknown_op() {
        match parse_onnx(&relu_model("Gelu"), &OnnxLimits::default()) {
            Err(Error::UnsupportedOp { op, .. }) => assert_eq!(op, "Gelu"),
            other => panic!("{other:?}"),
        }
        let mut limits = OnnxLimits::default();
        limits.supported_op_types.remove("Relu");
        assert!(matches!(
            parse_onnx(&relu_model("Relu"), &limits),
            Err(Error::UnsupportedOp { .. })
        ));
    }

    #[test]
    fn limits() {
        let model = relu_model("Relu");
        let small = OnnxLimits {
            max_message_bytes: 4,
            ..OnnxLimits::default()
        };
        assert!(matches!(parse_onnx(&model, &small), Err(Error::Limit(_))));
        let shallow = OnnxLimits {
            max_nesting_depth: 2,
            ..OnnxLimits::default()
        };
        assert!(matches!(parse_onnx(&model, &shallow), Err(Error::Limit(_))));
    }

    #[test]
    fn int64_initializer_outside_reshape_is_rejected() {
        let mut tensor = Vec::new();
        field_int(1, 2, &mut tensor);
        field_int(2, fields::data_type::INT64 as u64, &mut tensor);
        field_bytes(8, b"k", &mut tensor);
        field_bytes(9, &[0u8; 16], &mut tensor);
        let mut node = Vec::new();
        field_bytes(1, b"x", &mut node);
        field_bytes(1, b"k", &mut node);
        field_bytes(2, b"y", &mut node);
        field_bytes(4, b"Add", &mut node);
        let mut graph = Vec::new();
        field_bytes(1, &node, &mut graph);
        field_bytes(5, &tensor, &mut graph);
        let mut model = Vec::new();
        field_bytes(7, &graph, &mut model);
        assert!(matches!(
            parse_onnx(&model, &OnnxLimits::default()),
            Err(Error::UnsupportedDtype { dtype: 7, .. })
        ));
    }
}
