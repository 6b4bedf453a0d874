//! Human-writable JSON model format. The schema is described in
//! `docs/model-format.md`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::attrs::{build_op, op_to_attrs, AttrError, AttrMap, AttrValue, OpContext, DEFAULT_OPSET};
use crate::error::{Error, Result};
use crate::graph::{Graph, Node, OpKind, ValueInfo};
use crate::tensor::{Shape, Tensor};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonModel {
    #[serde(default)]
    name: String,
    inputs: Vec<JsonInput>,
    outputs: Vec<String>,
    nodes: Vec<JsonNode>,
    #[serde(default)]
    initializers: Vec<JsonInitializer>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonInput {
    name: String,
    #[serde(default)]
    shape: Option<Vec<i64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonNode {
    name: String,
    op: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    #[serde(default)]
    attrs: Map<String, Value>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonInitializer {
    name: String,
    shape: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data: Option<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data_file: Option<String>,
}

fn parse_err(path: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        msg: msg.into(),
    }
}

fn json_to_attr(v: &Value) -> Option<AttrValue> {
    match v {
        Value::Bool(b) => Some(AttrValue::Int(*b as i64)),
        Value::Number(n) => n
            .as_i64()
            .map(AttrValue::Int)
            .or_else(|| n.as_f64().map(|f| AttrValue::Float(f as f32))),
        Value::String(s) => Some(AttrValue::Str(s.clone())),
        Value::Array(items) => {
            if items.iter().all(|i| i.as_i64().is_some()) {
                Some(AttrValue::Ints(items.iter().map(|i| i.as_i64().unwrap()).collect()))
            } else if items.iter().all(Value::is_number) {
                Some(AttrValue::Floats(
                    items.iter().map(|i| i.as_f64().unwrap() as f32).collect(),
                ))
            } else {
                None
            }
        }
        _ => None,
    }
}

fn attr_to_json(v: &AttrValue) -> Value {
    match v {
        AttrValue::Int(i) => Value::from(*i),
        AttrValue::Float(f) => Number::from_f64(*f as f64).map_or(Value::Null, Value::Number),
        AttrValue::Ints(v) => Value::from(v.clone()),
        AttrValue::Floats(v) => Value::from(v.iter().map(|&f| f as f64).collect::<Vec<_>>()),
        AttrValue::Str(s) => Value::from(s.clone()),
        AttrValue::Other => Value::Null,
    }
}

/// Parses a JSON model. `data_file` references resolve against `base_dir`
/// (the current directory when `None`).
pub fn parse_json_model(text: &str, base_dir: Option<&Path>) -> Result<Graph> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let model: JsonModel = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        parse_err(if path == "." { "$".into() } else { path }, e.into_inner().to_string())
    })?;

    let mut initializers = BTreeMap::new();
    for (i, init) in model.initializers.iter().enumerate() {
        let at = format!("initializers[{i}]");
        let shape = Shape::from_i64(&init.shape)
            .map_err(|e| parse_err(format!("{at}.shape"), e.to_string()))?;
        let data = match (&init.data, &init.data_file) {
            (Some(d), None) => d.clone(),
            (None, Some(file)) => {
                let path = base_dir.unwrap_or(Path::new(".")).join(file);
                let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                crate::tensor::f32_from_le_bytes(&bytes)
                    .map_err(|e| parse_err(format!("{at}.data_file"), e.to_string()))?
            }
            _ => {
                return Err(parse_err(
                    at,
                    "exactly one of `data` and `data_file` is required",
                ))
            }
        };
        if data.len() != shape.numel() {
            return Err(parse_err(
                at,
                format!(
                    "numel mismatch: shape {shape} needs {} values, got {}",
                    shape.numel(),
                    data.len()
                ),
            ));
        }
        if initializers
            .insert(init.name.clone(), Tensor::new(shape, data)?)
            .is_some()
        {
            return Err(parse_err(at, format!("duplicate initializer `{}`", init.name)));
        }
    }

    let mut nodes = Vec::with_capacity(model.nodes.len());
    for (i, jn) in model.nodes.iter().enumerate() {
        let kind = OpKind::from_onnx_name(&jn.op).ok_or_else(|| Error::UnsupportedOp {
            op: jn.op.clone(),
            node: jn.name.clone(),
        })?;
        let mut attrs = AttrMap::new();
        for (key, value) in &jn.attrs {
            let v = json_to_attr(value).ok_or_else(|| {
                parse_err(
                    format!("nodes[{i}].attrs.{key}"),
                    format!("unsupported attribute value {value}"),
                )
            })?;
            attrs.insert(key.clone(), v);
        }
        let cx = OpContext {
            opset: DEFAULT_OPSET,
            ..OpContext::default()
        };
        let op = build_op(kind, &attrs, &cx).map_err(|e| match e {
            AttrError::Invalid(msg) => parse_err(format!("nodes[{i}].attrs"), msg),
            AttrError::Unsupported(msg) => Error::UnsupportedAttribute {
                node: jn.name.clone(),
                msg,
            },
        })?;
        nodes.push(Node {
            name: jn.name.clone(),
            op,
            inputs: jn.inputs.clone(),
            outputs: jn.outputs.clone(),
        });
    }

    let mut inputs = Vec::new();
    for (i, ji) in model.inputs.iter().enumerate() {
        let shape = ji
            .shape
            .as_ref()
            .map(|d| Shape::from_i64(d))
            .transpose()
            .map_err(|e| parse_err(format!("inputs[{i}].shape"), e.to_string()))?;
        inputs.push(ValueInfo {
            name: ji.name.clone(),
            shape,
        });
    }

    Ok(Graph {
        name: model.name,
        inputs,
        outputs: model.outputs,
        nodes,
        initializers,
    })
}

pub fn load_json_model(path: &Path) -> Result<Graph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_json_model(&text, path.parent())
}

/// Serializes a graph to the JSON model format with weights inline.
pub fn to_json_value(g: &Graph) -> Value {
    let model = JsonModel {
        name: g.name.clone(),
        inputs: g
            .inputs
            .iter()
            .map(|i| JsonInput {
                name: i.name.clone(),
                shape: i
                    .shape
                    .as_ref()
                    .map(|s| s.dims().iter().map(|&d| d as i64).collect()),
            })
            .collect(),
        outputs: g.outputs.clone(),
        nodes: g
            .nodes
            .iter()
            .map(|n| JsonNode {
                name: n.name.clone(),
                op: n.kind().onnx_name().to_string(),
                inputs: n.inputs.clone(),
                outputs: n.outputs.clone(),
                attrs: op_to_attrs(&n.op)
                    .iter()
                    .map(|(k, v)| (k.clone(), attr_to_json(v)))
                    .collect(),
            })
            .collect(),
        initializers: g
            .initializers
            .iter()
            .map(|(name, t)| JsonInitializer {
                name: name.clone(),
                shape: t.dims().iter().map(|&d| d as i64).collect(),
                data: Some(t.data().to_vec()),
                data_file: None,
            })
            .collect(),
    };
    serde_json::to_value(model).expect("model serializes")
}

pub fn to_json_string(g: &Graph) -> String {
    serde_json::to_string_pretty(&to_json_value(g)).expect("model serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Op;

    #[test]
    fn single_relu() {
        let text = r#"{"inputs":[{"name":"x","shape":[1,4]}],"outputs":["y"],
            "nodes":[{"name":"r","op":"Relu","inputs":["x"],"outputs":["y"]}]}"#;
        let g = parse_json_model(text, None).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.nodes[0].op, Op::Relu);
    }

    #[test]
    fn conv_without_kernel() {
        let text = r#"{"inputs":[{"name":"x"}],"outputs":["y"],
            "nodes":[{"name":"c","op":"Conv","inputs":["x","w"],"outputs":["y"],"attrs":{}}],
            "initializers":[{"name":"w","shape":[1,1,3,3],"data":[0,0,0,0,0,0,0,0,0]}]}"#;
        match parse_json_model(text, None) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "nodes[0].attrs"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn numel_mismatch() {
        let text = r#"{"inputs":[],"outputs":["w"],"nodes":[],
            "initializers":[{"name":"w","shape":[2,2],"data":[1,2,3]}]}"#;
        match parse_json_model(text, None) {
            Err(Error::Parse { path, msg }) => {
                assert_eq!(path, "initializers[0]");
                assert!(msg.contains("numel"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_errors_carry_a_path() {
        let text = r#"{"inputs":[],"outputs":["y"],"nodes":[{"name":"r","op":"Relu","inputs":"x","outputs":["y"]}]}"#;
        match parse_json_model(text, None) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "nodes[0].inputs"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_op_and_missing_file() {
        let text = r#"{"inputs":[],"outputs":["y"],"nodes":[{"name":"g","op":"Gelu","inputs":["x"],"outputs":["y"]}]}"#;
        assert!(matches!(
            parse_json_model(text, None),
            Err(Error::UnsupportedOp { .. })
        ));
        let text = r#"{"inputs":[],"outputs":["w"],"nodes":[],
            "initializers":[{"name":"w","shape":[2],"data_file":"does-not-exist.bin"}]}"#;
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            parse_json_model(text, Some(dir.path())),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn data_file_resolves_relative_to_base() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("w.bin"),
            crate::tensor::f32_to_le_bytes(&[1.0, 2.0]),
        )
        .unwrap();
        let text = r#"{"inputs":[],"outputs":["w"],"nodes":[],
            "initializers":[{"name":"w","shape":[2],"data_file":"w.bin"}]}"#;
        let g = parse_json_model(text, Some(dir.path())).unwrap();
        assert_eq!(g.initializers["w"].data(), &[1.0, 2.0]);
    }

    #[test]
    fn writer_round_trips() {
        let mut g = crate::graph::testutil::conv_graph(true, true);
        if let Op::Conv(p) = &mut g.nodes[0].op {
            p.fused_relu = true;
        }
        let text = to_json_string(&g);
        let back = parse_json_model(&text, None).unwrap();
        assert_eq!(back, g);
    }
}
