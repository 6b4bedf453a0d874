//! Named kernel backends and the registry the planner chooses from.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::conv::{conv2d_direct, conv2d_gemm};
use super::depthwise::{depthwise_conv2d, is_depthwise};
use super::elementwise::{add, batch_norm_inference, concat, relu, softmax};
use super::gemm::{gemm_fc, GemmAlgo};
use super::pool::{avgpool2d, global_avg_pool, maxpool2d};
use super::KernelContext;
use crate::error::{Error, Result};
use crate::graph::{resolve_reshape, Op, OpKind};
use crate::tensor::{Shape, Tensor};

/// Backend identifier of the form `family/name`, e.g. `conv/gemm`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BackendId(String);

impl BackendId {
    pub fn new(id: impl Into<String>) -> Result<BackendId> {
        let id = id.into();
        let valid = matches!(id.split_once('/'), Some((f, n)) if !f.is_empty() && !n.is_empty() && !n.contains('/'));
        if !valid {
            return Err(Error::Registration(format!(
                "backend id `{id}` must look like `family/name`"
            )));
        }
        Ok(BackendId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn family(&self) -> &str {
        self.0.split_once('/').map_or("", |(f, _)| f)
    }

    pub fn name(&self) -> &str {
        self.0.split_once('/').map_or("", |(_, n)| n)
    }

    fn builtin(id: &str) -> BackendId {
        BackendId::new(id).expect("builtin id is well formed")
    }
}

impl fmt::Display for BackendId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for BackendId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BackendId::new(s)
    }
}

/// One implementation of one operator kind.
pub trait Kernel: Send + Sync {
    fn op_kind(&self) -> OpKind;

    /// Whether this kernel can run `op` on inputs of these shapes.
    fn supports(&self, _op: &Op, _shapes: &[&Shape]) -> bool {
        true
    }

    fn run(&self, op: &Op, inputs: &[&Tensor], cx: &KernelContext) -> Result<Tensor>;
}

/// Ordered collection of backends. Registration order is preserved in
/// listings and used as the autotuner's tie-break.
#[derive(Clone)]
pub struct KernelRegistry {
    entries: Vec<(BackendId, Arc<dyn Kernel>)>,
    reference: HashMap<OpKind, BackendId>,
}

impl fmt::Debug for KernelRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.iter().map(|(id, _)| id)).finish()
    }
}

impl Default for KernelRegistry {
    fn default() -> Self {
        KernelRegistry::with_builtins()
    }
}

impl KernelRegistry {
    pub fn empty() -> KernelRegistry {
        KernelRegistry {
            entries: Vec::new(),
            reference: HashMap::new(),
        }
    }

    /// All built-in backends. The first backend registered for each op kind
    /// is its reference.
    pub fn with_builtins() -> KernelRegistry {
        let mut r = KernelRegistry::empty();
        let builtins: Vec<(&str, Arc<dyn Kernel>)> = vec![
            ("conv/direct", Arc::new(ConvDirect)),
            ("conv/gemm", Arc::new(ConvGemm)),
            ("depthwise/specialized", Arc::new(Depthwise)),
            ("gemm/naive", Arc::new(Fc(FcAlgo::Naive))),
            ("gemm/blocked", Arc::new(Fc(FcAlgo::Blocked))),
            ("batchnorm/reference", Arc::new(Simple(OpKind::BatchNorm))),
            ("relu/reference", Arc::new(Simple(OpKind::Relu))),
            ("maxpool/reference", Arc::new(Simple(OpKind::MaxPool))),
            ("avgpool/reference", Arc::new(Simple(OpKind::AvgPool))),
            ("globalavgpool/reference", Arc::new(Simple(OpKind::GlobalAvgPool))),
            ("add/reference", Arc::new(Simple(OpKind::Add))),
            ("concat/reference", Arc::new(Simple(OpKind::Concat))),
            ("flatten/reference", Arc::new(Simple(OpKind::Flatten))),
            ("reshape/reference", Arc::new(Simple(OpKind::Reshape))),
            ("softmax/reference", Arc::new(Simple(OpKind::Softmax))),
            ("identity/reference", Arc::new(Simple(OpKind::Identity))),
        ];
        for (id, k) in builtins {
            r.register(BackendId::builtin(id), k).expect("builtin ids are unique");
        }
        r
    }

    /// Adds a backend. Fails if the id is already taken.
    pub fn register(&mut self, id: BackendId, kernel: Arc<dyn Kernel>) -> Result<()> {
        if self.get(&id).is_some() {
            return Err(Error::Registration(format!("backend `{id}` is already registered")));
        }
        self.reference.entry(kernel.op_kind()).or_insert_with(|| id.clone());
        self.entries.push((id, kernel));
        Ok(())
    }

    pub fn get(&self, id: &BackendId) -> Option<&Arc<dyn Kernel>> {
        self.entries.iter().find(|(i, _)| i == id).map(|(_, k)| k)
    }

    pub fn lookup(&self, id: &str) -> Result<(&BackendId, &Arc<dyn Kernel>)> {
        self.entries
            .iter()
            .find(|(i, _)| i.as_str() == id)
            .map(|(i, k)| (i, k))
            .ok_or_else(|| Error::UnknownBackend(id.to_string()))
    }

    /// Backend ids whose family is `family`, in registration order.
    pub fn list_backends(&self, family: &str) -> Vec<&BackendId> {
        self.entries
            .iter()
            .filter(|(id, _)| id.family() == family)
            .map(|(id, _)| id)
            .collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &BackendId> {
        self.entries.iter().map(|(id, _)| id)
    }

    pub fn families(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for (id, _) in &self.entries {
            if !out.contains(&id.family()) {
                out.push(id.family());
            }
        }
        out
    }

    /// Every backend able to run `op` on `shapes`, in registration order.
    pub fn candidates(&self, op: &Op, shapes: &[&Shape]) -> Vec<&BackendId> {
        self.entries
            .iter()
            .filter(|(_, k)| k.op_kind() == op.kind() && k.supports(op, shapes))
            .map(|(id, _)| id)
            .collect()
    }

    pub fn reference(&self, kind: OpKind) -> Option<&BackendId> {
        self.reference.get(&kind)
    }

    /// Makes `id` the reference backend for its op kind.
    pub fn set_reference(&mut self, id: &BackendId) -> Result<()> {
        let kind = self
            .get(id)
            .ok_or_else(|| Error::UnknownBackend(id.to_string()))?
            .op_kind();
        self.reference.insert(kind, id.clone());
        Ok(())
    }
}

fn input<'a>(inputs: &[&'a Tensor], i: usize) -> Result<&'a Tensor> {
    inputs
        .get(i)
        .copied()
        .ok_or_else(|| Error::shape(format!("missing input {i}")))
}

fn expect_conv(op: &Op) -> Result<&crate::graph::ConvParams> {
    match op {
        Op::Conv(p) => Ok(p),
        other => Err(Error::shape(format!("conv kernel given {:?}", other.kind()))),
    }
}

struct ConvDirect;

impl Kernel for ConvDirect {
    fn op_kind(&self) -> OpKind {
        OpKind::Conv
    }

    fn run(&self, op: &Op, inputs: &[&Tensor], cx: &KernelContext) -> Result<Tensor> {
        let p = expect_conv(op)?;
        conv2d_direct(input(inputs, 0)?, input(inputs, 1)?, inputs.get(2).copied(), p, cx.threads)
    }
}

struct ConvGemm;

impl Kernel for ConvGemm {
    fn op_kind(&self) -> OpKind {
        OpKind::Conv
    }

    fn run(&self, op: &Op, inputs: &[&Tensor], cx: &KernelContext) -> Result<Tensor> {
        let p = expect_conv(op)?;
        conv2d_gemm(
            input(inputs, 0)?,
            input(inputs, 1)?,
            inputs.get(2).copied(),
            p,
            GemmAlgo::Blocked(cx.block),
            cx.threads,
        )
    }
}

struct Depthwise;

impl Kernel for Depthwise {
    fn op_kind(&self) -> OpKind {
        OpKind::Conv
    }

    fn supports(&self, op: &Op, shapes: &[&Shape]) -> bool {
        is_depthwise(op, shapes)
    }

    fn run(&self, op: &Op, inputs: &[&Tensor], cx: &KernelContext) -> Result<Tensor> {
        let p = expect_conv(op)?;
        depthwise_conv2d(input(inputs, 0)?, input(inputs, 1)?, inputs.get(2).copied(), p, cx.threads)
    }
}

#[derive(Clone, Copy)]
enum FcAlgo {
    Naive,
    Blocked,
}

struct Fc(FcAlgo);

impl Kernel for Fc {
    fn op_kind(&self) -> OpKind {
        OpKind::Gemm
    }

    fn run(&self, op: &Op, inputs: &[&Tensor], cx: &KernelContext) -> Result<Tensor> {
        let Op::Gemm(p) = op else {
            return Err(Error::shape(format!("gemm kernel given {:?}", op.kind())));
        };
        let algo = match self.0 {
            FcAlgo::Naive => GemmAlgo::Naive,
            FcAlgo::Blocked => GemmAlgo::Blocked(cx.block),
        };
        gemm_fc(
            input(inputs, 0)?,
            input(inputs, 1)?,
            inputs.get(2).copied(),
            p.trans_b,
            p.fused_relu,
            algo,
            cx.threads,
        )
    }
}

/// Reference kernels for the operators with a single implementation.
struct Simple(OpKind);

impl Kernel for Simple {
    fn op_kind(&self) -> OpKind {
        self.0
    }

    fn run(&self, op: &Op, inputs: &[&Tensor], cx: &KernelContext) -> Result<Tensor> {
        let x = input(inputs, 0)?;
        match op {
            Op::BatchNorm { epsilon } => batch_norm_inference(
                x,
                input(inputs, 1)?,
                input(inputs, 2)?,
                input(inputs, 3)?,
                input(inputs, 4)?,
                *epsilon,
            ),
            Op::Relu => Ok(relu(x)),
            Op::MaxPool(p) => maxpool2d(x, p, cx.threads),
            Op::AvgPool(p) => avgpool2d(x, p, cx.threads),
            Op::GlobalAvgPool => global_avg_pool(x, cx.threads),
            Op::Add => add(x, input(inputs, 1)?),
            Op::Concat { axis } => concat(inputs, *axis),
            Op::Flatten { axis } => {
                let d = x.dims();
                let axis = crate::graph::normalize_axis(*axis, d.len(), true)
                    .ok_or_else(|| Error::shape(format!("flatten axis {axis} out of range")))?;
                let outer: usize = d[..axis].iter().product();
                let inner: usize = d[axis..].iter().product();
                x.reshape(Shape::new(vec![outer, inner])?)
            }
            Op::Reshape { shape } => x.reshape(resolve_reshape(x.shape(), shape)?),
            Op::Softmax { axis } => softmax(x, *axis),
            Op::Identity => Ok(x.clone()),
            Op::Conv(_) | Op::Gemm(_) => Err(Error::shape(format!(
                "no reference kernel wired for {:?}",
                op.kind()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ConvParams;

    struct Doubler;

    impl Kernel for Doubler {
        fn op_kind(&self) -> OpKind {
            OpKind::Relu
        }

        fn run(&self, _op: &Op, inputs: &[&Tensor], _cx: &KernelContext) -> Result<Tensor> {
            Ok(inputs[0].map(|v| 2.0 * v))
        }
    }

    fn ids(v: Vec<&BackendId>) -> Vec<&str> {
        v.into_iter().map(BackendId::as_str).collect()
    }

    #[test]
    fn fresh_registry() {
        let r = KernelRegistry::with_builtins();
        assert_eq!(ids(r.list_backends("conv")), ["conv/direct", "conv/gemm"]);
        assert_eq!(ids(r.list_backends("gemm")), ["gemm/naive", "gemm/blocked"]);
        for kind in OpKind::ALL {
            assert!(r.reference(kind).is_some(), "{kind:?} has no reference");
        }
        assert_eq!(r.reference(OpKind::Conv).unwrap().as_str(), "conv/direct");
        assert_eq!(r.reference(OpKind::Gemm).unwrap().as_str(), "gemm/naive");
    }

    #[test]
    fn registration() {
        let mut r = KernelRegistry::with_builtins();
        let id: BackendId = "relu/doubler".parse().unwrap();
        r.register(id.clone(), Arc::new(Doubler)).unwrap();
        assert_eq!(ids(r.list_backends("relu")), ["relu/reference", "relu/doubler"]);
        assert!(matches!(
            r.register(id, Arc::new(Doubler)),
            Err(Error::Registration(_))
        ));
        assert!(BackendId::new("nofamily").is_err());
        assert!(BackendId::new("a/b/c").is_err());
        assert!(matches!(r.lookup("conv/fft"), Err(Error::UnknownBackend(_))));
    }

    #[test]
    fn depthwise_candidates() {
        let r = KernelRegistry::with_builtins();
        let x = Shape::new(vec![1, 8, 6, 6]).unwrap();
        let w = Shape::new(vec![8, 1, 3, 3]).unwrap();
        let dw = Op::Conv(ConvParams::new(3, 1, 1).with_groups(8));
        assert_eq!(
            ids(r.candidates(&dw, &[&x, &w])),
            ["conv/direct", "conv/gemm", "depthwise/specialized"]
        );
        let dense_w = Shape::new(vec![4, 8, 3, 3]).unwrap();
        let dense = Op::Conv(ConvParams::new(3, 1, 1));
        assert_eq!(ids(r.candidates(&dense, &[&x, &dense_w])), ["conv/direct", "conv/gemm"]);
    }

    #[test]
    fn conv_backends_agree() {
        let r = KernelRegistry::with_builtins();
        let x = Tensor::random(Shape::new(vec![1, 4, 6, 6]).unwrap(), 1);
        let w = Tensor::random(Shape::new(vec![4, 1, 3, 3]).unwrap(), 2);
        let op = Op::Conv(ConvParams::new(3, 1, 1).with_groups(4));
        let cx = KernelContext::default();
        let outs: Vec<Tensor> = r
            .candidates(&op, &[x.shape(), w.shape()])
            .into_iter()
            .map(|id| r.get(id).unwrap().run(&op, &[&x, &w], &cx).unwrap())
            .collect();
        assert_eq!(outs.len(), 3);
        for o in &outs[1..] {
            assert!(o.compare(&outs[0], 1e-6).unwrap().max_abs_diff < 1e-5);
        }
    }

    #[test]
    fn simple_kernels() {
        let r = KernelRegistry::with_builtins();
        let cx = KernelContext::default();
        let x = Tensor::from_vec(&[1, 2, 2, 2], (0..8).map(|v| v as f32).collect()).unwrap();
        let run = |id: &str, op: Op| r.lookup(id).unwrap().1.run(&op, &[&x], &cx).unwrap();
        assert_eq!(run("flatten/reference", Op::Flatten { axis: 1 }).dims(), &[1, 8]);
        assert_eq!(run("reshape/reference", Op::Reshape { shape: vec![0, -1] }).dims(), &[1, 8]);
        assert!(run("identity/reference", Op::Identity).bitwise_eq(&x));
        assert_eq!(run("globalavgpool/reference", Op::GlobalAvgPool).data(), &[1.5, 5.5]);
    }
}
