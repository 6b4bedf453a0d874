use std::collections::{BTreeMap, HashMap};

use super::{topo, Graph, Node, Op};
use crate::error::{Error, Result};
use crate::tensor::Shape;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Shape,
}

/// Computes the shape of every value in the graph.
///
/// Shapes in `input_shapes` take precedence over the shapes declared on the
/// graph inputs. The result also contains graph inputs and initializers.
pub fn infer_shapes(
    g: &Graph,
    input_shapes: &HashMap<String, Shape>,
) -> Result<BTreeMap<String, TensorInfo>> {
    let mut shapes: HashMap<String, Shape> = HashMap::new();
    for (name, t) in &g.initializers {
        shapes.insert(name.clone(), t.shape().clone());
    }
    for input in &g.inputs {
        let shape = input_shapes
            .get(&input.name)
            .cloned()
            .or_else(|| input.shape.clone())
            .ok_or_else(|| {
                Error::Input(format!("no shape given for graph input `{}`", input.name))
            })?;
        shapes.insert(input.name.clone(), shape);
    }

    for i in topo::topo_indices(g)? {
        let node = &g.nodes[i];
        let ins = node
            .inputs
            .iter()
            .map(|v| {
                shapes.get(v).ok_or_else(|| Error::ShapeInference {
                    node: node.name.clone(),
                    msg: format!("input `{v}` has no known shape"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let out = node_output_shape(node, &ins).map_err(|msg| Error::ShapeInference {
            node: node.name.clone(),
            msg,
        })?;
        shapes.insert(node.outputs[0].clone(), out);
    }

    Ok(shapes
        .into_iter()
        .map(|(name, shape)| (name.clone(), TensorInfo { name, shape }))
        .collect())
}

/// Maps a possibly negative axis into `0..rank` (or `0..=rank` when `inclusive`).
pub fn normalize_axis(axis: i64, rank: usize, inclusive: bool) -> Option<usize> {
    let limit = rank as i64 + inclusive as i64;
    let a = if axis < 0 { axis + rank as i64 } else { axis };
    (0..limit).contains(&a).then_some(a as usize)
}

/// Resolves an ONNX-style reshape target against the input shape.
pub fn resolve_reshape(input: &Shape, target: &[i64]) -> Result<Shape> {
    let mut dims = Vec::with_capacity(target.len());
    let mut infer_at = None;
    for (i, &t) in target.iter().enumerate() {
        match t {
            -1 if infer_at.is_none() => {
                infer_at = Some(i);
                dims.push(1);
            }
            0 => dims.push(*input.dims().get(i).ok_or_else(|| {
                Error::shape(format!("reshape target {target:?} copies missing axis {i}"))
            })?),
            t if t > 0 => dims.push(t as usize),
            _ => return Err(Error::shape(format!("invalid reshape target {target:?}"))),
        }
    }
    if let Some(i) = infer_at {
        let known: usize = dims.iter().product();
        if known == 0 || !input.numel().is_multiple_of(known) {
            return Err(Error::shape(format!(
                "cannot infer -1 in {target:?} for input {input}"
            )));
        }
        dims[i] = input.numel() / known;
    }
    let out = Shape::new(dims)?;
    if out.numel() != input.numel() {
        return Err(Error::shape(format!(
            "reshape target {target:?} does not match input {input}"
        )));
    }
    Ok(out)
}

fn node_output_shape(node: &Node, ins: &[&Shape]) -> std::result::Result<Shape, String> {
    let shape = |dims: Vec<usize>| Shape::new(dims).map_err(|e| e.to_string());
    match &node.op {
        Op::Conv(p) => {
            let (n, c, h, w) = ins[0].nchw().map_err(|e| e.to_string())?;
            let wd = ins[1].dims();
            if wd.len() != 4 {
                return Err(format!("weight must be rank 4, got {}", ins[1]));
            }
            let (m, cg, kh, kw) = (wd[0], wd[1], wd[2], wd[3]);
            if p.groups == 0 || c % p.groups != 0 || m % p.groups != 0 {
                return Err(format!(
                    "groups={} must divide input channels {c} and output channels {m}",
                    p.groups
                ));
            }
            if cg * p.groups != c {
                return Err(format!(
                    "weight {} expects {} input channels, input has {c}",
                    ins[1],
                    cg * p.groups
                ));
            }
            if (kh, kw) != (p.kernel_h, p.kernel_w) {
                return Err(format!(
                    "kernel_shape {}x{} disagrees with weight {}",
                    p.kernel_h, p.kernel_w, ins[1]
                ));
            }
            if let Some(b) = ins.get(2) {
                if b.numel() != m {
                    return Err(format!("bias {b} does not match {m} output channels"));
                }
            }
            let (ho, wo) = p
                .output_hw(h, w)
                .ok_or_else(|| format!("kernel {kh}x{kw} larger than padded input {h}x{w}"))?;
            shape(vec![n, m, ho, wo])
        }
        Op::MaxPool(p) | Op::AvgPool(p) => {
            let (n, c, h, w) = ins[0].nchw().map_err(|e| e.to_string())?;
            let (ho, wo) = p.output_hw(h, w).ok_or_else(|| {
                format!(
                    "pool window {}x{} larger than padded input {h}x{w}",
                    p.kernel_h, p.kernel_w
                )
            })?;
            shape(vec![n, c, ho, wo])
        }
        Op::GlobalAvgPool => {
            let (n, c, _, _) = ins[0].nchw().map_err(|e| e.to_string())?;
            shape(vec![n, c, 1, 1])
        }
        Op::BatchNorm { .. } => {
            let x = ins[0];
            if x.rank() < 2 {
                return Err(format!("input {x} has no channel axis"));
            }
            let c = x.dim(1);
            for (i, p) in ins[1..].iter().enumerate() {
                if p.numel() != c {
                    return Err(format!(
                        "parameter {} has shape {p}, expected {c} channels",
                        i + 1
                    ));
                }
            }
            Ok(x.clone())
        }
        Op::Relu | Op::Identity => Ok(ins[0].clone()),
        Op::Softmax { axis } => {
            normalize_axis(*axis, ins[0].rank(), false)
                .ok_or_else(|| format!("axis {axis} out of range for {}", ins[0]))?;
            Ok(ins[0].clone())
        }
        Op::Add => {
            if ins[0] != ins[1] {
                return Err(format!("Add needs identical shapes, got {} and {}", ins[0], ins[1]));
            }
            Ok(ins[0].clone())
        }
        Op::Concat { axis } => {
            let first = ins[0];
            let ax = normalize_axis(*axis, first.rank(), false)
                .ok_or_else(|| format!("axis {axis} out of range for {first}"))?;
            let mut dims = first.dims().to_vec();
            for s in &ins[1..] {
                let compatible = s.rank() == first.rank()
                    && s.dims()
                        .iter()
                        .zip(first.dims())
                        .enumerate()
                        .all(|(i, (a, b))| i == ax || a == b);
                if !compatible {
                    return Err(format!("cannot concat {s} with {first} on axis {ax}"));
                }
                dims[ax] += s.dim(ax);
            }
            shape(dims)
        }
        Op::Flatten { axis } => {
            let x = ins[0];
            let ax = normalize_axis(*axis, x.rank(), true)
                .ok_or_else(|| format!("axis {axis} out of range for {x}"))?;
            let outer: usize = x.dims()[..ax].iter().product();
            let inner: usize = x.dims()[ax..].iter().product();
            shape(vec![outer, inner])
        }
        Op::Reshape { shape: target } => {
            resolve_reshape(ins[0], target).map_err(|e| e.to_string())
        }
        Op::Gemm(p) => {
            let (x, w) = (ins[0], ins[1]);
            if x.rank() != 2 || w.rank() != 2 {
                return Err(format!("Gemm needs rank-2 operands, got {x} and {w}"));
            }
            let (wk, m) = if p.trans_b {
                (w.dim(1), w.dim(0))
            } else {
                (w.dim(0), w.dim(1))
            };
            if x.dim(1) != wk {
                return Err(format!(
                    "inner dimensions differ: {x} vs weight {w} (trans_b={})",
                    p.trans_b
                ));
            }
            if let Some(b) = ins.get(2) {
                if b.numel() != m {
                    return Err(format!("bias {b} does not broadcast to {m} columns"));
                }
            }
            shape(vec![x.dim(0), m])
        }
    }
}
