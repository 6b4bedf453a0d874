//! Attribute records shared by the ONNX and JSON model readers, and the
//! mapping from `(op_type, attributes)` to [`Op`] with ONNX defaults.

use std::collections::BTreeMap;

use crate::graph::{ConvParams, GemmParams, Op, OpKind, Pads, PoolParams, DEFAULT_BN_EPSILON};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum AttrValue {
    Int(i64),
    Float(f32),
    Ints(Vec<i64>),
    Floats(Vec<f32>),
    Str(String),
    /// A kind we read past without interpreting (tensors, graphs, ...).
    Other,
}

pub(crate) type AttrMap = BTreeMap<String, AttrValue>;

#[derive(Debug)]
pub(crate) enum AttrError {
    /// Structurally wrong: missing required attribute or wrong value type.
    Invalid(String),
    /// Well-formed but outside what the runtime implements.
    Unsupported(String),
}

type AttrResult<T> = Result<T, AttrError>;

struct Attrs<'a>(&'a AttrMap);

impl Attrs<'_> {
    fn int(&self, name: &str) -> AttrResult<Option<i64>> {
        match self.0.get(name) {
            None => Ok(None),
            Some(AttrValue::Int(v)) => Ok(Some(*v)),
            Some(other) => Err(AttrError::Invalid(format!(
                "attribute `{name}` must be an integer, got {other:?}"
            ))),
        }
    }

    fn float(&self, name: &str) -> AttrResult<Option<f32>> {
        match self.0.get(name) {
            None => Ok(None),
            Some(AttrValue::Float(v)) => Ok(Some(*v)),
            Some(AttrValue::Int(v)) => Ok(Some(*v as f32)),
            Some(other) => Err(AttrError::Invalid(format!(
                "attribute `{name}` must be a float, got {other:?}"
            ))),
        }
    }

    fn ints(&self, name: &str) -> AttrResult<Option<Vec<i64>>> {
        match self.0.get(name) {
            None => Ok(None),
            Some(AttrValue::Ints(v)) => Ok(Some(v.clone())),
            Some(other) => Err(AttrError::Invalid(format!(
                "attribute `{name}` must be a list of integers, got {other:?}"
            ))),
        }
    }

    fn string(&self, name: &str) -> AttrResult<Option<&str>> {
        match self.0.get(name) {
            None => Ok(None),
            Some(AttrValue::Str(v)) => Ok(Some(v)),
            Some(other) => Err(AttrError::Invalid(format!(
                "attribute `{name}` must be a string, got {other:?}"
            ))),
        }
    }

    fn flag(&self, name: &str) -> AttrResult<bool> {
        Ok(self.int(name)?.unwrap_or(0) != 0)
    }

    fn require_absent_or(&self, name: &str, allowed: i64) -> AttrResult<()> {
        match self.int(name)? {
            Some(v) if v != allowed => Err(AttrError::Unsupported(format!(
                "{name}={v} (only {allowed} is supported)"
            ))),
            _ => Ok(()),
        }
    }

    fn no_auto_pad(&self) -> AttrResult<()> {
        match self.string("auto_pad")? {
            None | Some("NOTSET") | Some("") => Ok(()),
            Some(other) => Err(AttrError::Unsupported(format!(
                "auto_pad={other} (only NOTSET is supported)"
            ))),
        }
    }

    fn no_dilation(&self) -> AttrResult<()> {
        if let Some(d) = self.ints("dilations")? {
            if d.iter().any(|&v| v != 1) {
                return Err(AttrError::Unsupported(format!(
                    "dilations={d:?} (only 1 is supported)"
                )));
            }
        }
        Ok(())
    }

    fn pair(&self, name: &str, default: Option<usize>) -> AttrResult<[usize; 2]> {
        match self.ints(name)? {
            Some(v) => {
                if v.len() != 2 {
                    return Err(AttrError::Unsupported(format!(
                        "{name}={v:?} (only 2-D windows are supported)"
                    )));
                }
                if v.iter().any(|&e| e < 1) {
                    return Err(AttrError::Invalid(format!("{name}={v:?} must be positive")));
                }
                Ok([v[0] as usize, v[1] as usize])
            }
            None => match default {
                Some(d) => Ok([d, d]),
                None => Err(AttrError::Invalid(format!("missing required attribute `{name}`"))),
            },
        }
    }

    fn pads(&self) -> AttrResult<Pads> {
        match self.ints("pads")? {
            None => Ok(Pads::default()),
            Some(v) => {
                if v.len() != 4 {
                    return Err(AttrError::Unsupported(format!(
                        "pads={v:?} (expected 4 values for a 2-D window)"
                    )));
                }
                if v.iter().any(|&e| e < 0) {
                    return Err(AttrError::Invalid(format!("pads={v:?} must be >= 0")));
                }
                Ok(Pads {
                    top: v[0] as usize,
                    left: v[1] as usize,
                    bottom: v[2] as usize,
                    right: v[3] as usize,
                })
            }
        }
    }

    fn pool(&self) -> AttrResult<PoolParams> {
        self.no_auto_pad()?;
        self.no_dilation()?;
        self.require_absent_or("ceil_mode", 0)?;
        self.require_absent_or("storage_order", 0)?;
        let [kernel_h, kernel_w] = self.pair("kernel_shape", None)?;
        let [stride_h, stride_w] = self.pair("strides", Some(1))?;
        Ok(PoolParams {
            kernel_h,
            kernel_w,
            stride_h,
            stride_w,
            pads: self.pads()?,
        })
    }
}

/// Context the attribute mapping may need from the surrounding model.
#[derive(Debug, Clone, Default)]
pub(crate) struct OpContext {
    /// Kernel extents read from the weight initializer, used when `kernel_shape` is absent.
    pub conv_kernel_from_weight: Option<[usize; 2]>,
    /// Reshape target taken from a constant second input.
    pub reshape_target: Option<Vec<i64>>,
    /// Default-domain opset version, for defaults that changed across opsets.
    pub opset: i64,
}

pub(crate) const DEFAULT_OPSET: i64 = 13;

pub(crate) fn build_op(kind: OpKind, attrs: &AttrMap, cx: &OpContext) -> AttrResult<Op> {
    let a = Attrs(attrs);
    Ok(match kind {
        OpKind::Conv => {
            a.no_auto_pad()?;
            a.no_dilation()?;
            let [kernel_h, kernel_w] = match (a.ints("kernel_shape")?, cx.conv_kernel_from_weight) {
                (None, Some(k)) => k,
                _ => a.pair("kernel_shape", None)?,
            };
            let [stride_h, stride_w] = a.pair("strides", Some(1))?;
            let groups = a.int("group")?.unwrap_or(1);
            if groups < 1 {
                return Err(AttrError::Invalid(format!("group={groups} must be >= 1")));
            }
            Op::Conv(ConvParams {
                kernel_h,
                kernel_w,
                stride_h,
                stride_w,
                pads: a.pads()?,
                groups: groups as usize,
                fused_relu: a.flag("fused_relu")?,
            })
        }
        OpKind::BatchNorm => {
            a.require_absent_or("training_mode", 0)?;
            Op::BatchNorm {
                epsilon: a.float("epsilon")?.unwrap_or(DEFAULT_BN_EPSILON),
            }
        }
        OpKind::MaxPool => Op::MaxPool(a.pool()?),
        OpKind::AvgPool => {
            let p = a.pool()?;
            // the kernel always divides by the full window; that only matches
            // count_include_pad=0 when no padding is involved
            if !a.flag("count_include_pad")? && !p.pads.is_zero() {
                return Err(AttrError::Unsupported(
                    "count_include_pad=0 with non-zero pads".into(),
                ));
            }
            Op::AvgPool(p)
        }
        OpKind::Gemm => {
            for name in ["alpha", "beta"] {
                if let Some(v) = a.float(name)? {
                    if v != 1.0 {
                        return Err(AttrError::Unsupported(format!(
                            "{name}={v} (only 1.0 is supported)"
                        )));
                    }
                }
            }
            a.require_absent_or("transA", 0)?;
            Op::Gemm(GemmParams {
                trans_b: a.flag("transB")?,
                fused_relu: a.flag("fused_relu")?,
            })
        }
        OpKind::Concat => Op::Concat {
            axis: a
                .int("axis")?
                .ok_or_else(|| AttrError::Invalid("missing required attribute `axis`".into()))?,
        },
        OpKind::Flatten => Op::Flatten {
            axis: a.int("axis")?.unwrap_or(1),
        },
        OpKind::Reshape => {
            a.require_absent_or("allowzero", 0)?;
            let shape = match (&cx.reshape_target, a.ints("shape")?) {
                (Some(t), _) => t.clone(),
                (None, Some(t)) => t,
                (None, None) => {
                    return Err(AttrError::Invalid(
                        "Reshape needs a constant target shape".into(),
                    ))
                }
            };
            Op::Reshape { shape }
        }
        OpKind::Softmax => Op::Softmax {
            axis: a
                .int("axis")?
                .unwrap_or(if cx.opset >= 13 { -1 } else { 1 }),
        },
        OpKind::Relu => Op::Relu,
        OpKind::GlobalAvgPool => Op::GlobalAvgPool,
        OpKind::Add => Op::Add,
        OpKind::Identity => Op::Identity,
    })
}

/// Attribute map that rebuilds `op` through [`build_op`]; used by the JSON writer.
pub(crate) fn op_to_attrs(op: &Op) -> AttrMap {
    let mut m = AttrMap::new();
    let mut ints = |name: &str, v: Vec<usize>| {
        m.insert(
            name.to_string(),
            AttrValue::Ints(v.into_iter().map(|e| e as i64).collect()),
        );
    };
    match op {
        Op::Conv(p) => {
            ints("kernel_shape", vec![p.kernel_h, p.kernel_w]);
            ints("strides", vec![p.stride_h, p.stride_w]);
            ints("pads", p.pads.to_onnx().to_vec());
            m.insert("group".into(), AttrValue::Int(p.groups as i64));
            if p.fused_relu {
                m.insert("fused_relu".into(), AttrValue::Int(1));
            }
        }
        Op::MaxPool(p) | Op::AvgPool(p) => {
            ints("kernel_shape", vec![p.kernel_h, p.kernel_w]);
            ints("strides", vec![p.stride_h, p.stride_w]);
            ints("pads", p.pads.to_onnx().to_vec());
            if matches!(op, Op::AvgPool(_)) && !p.pads.is_zero() {
                m.insert("count_include_pad".into(), AttrValue::Int(1));
            }
        }
        Op::BatchNorm { epsilon } => {
            m.insert("epsilon".into(), AttrValue::Float(*epsilon));
        }
        Op::Gemm(p) => {
            m.insert("transB".into(), AttrValue::Int(p.trans_b as i64));
            if p.fused_relu {
                m.insert("fused_relu".into(), AttrValue::Int(1));
            }
        }
        Op::Concat { axis } | Op::Flatten { axis } | Op::Softmax { axis } => {
            m.insert("axis".into(), AttrValue::Int(*axis));
        }
        Op::Reshape { shape } => {
            m.insert("shape".into(), AttrValue::Ints(shape.clone()));
        }
        Op::Relu | Op::GlobalAvgPool | Op::Add | Op::Identity => {}
    }
    m
}
