use std::collections::BTreeMap;
use std::time::{Duration, Instant};

#[cfg(test)]
use super::plan::BufferRole;
use super::plan::{ExecutionPlan, PlanStep};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub type TensorMap = BTreeMap<String, Tensor>;

impl ExecutionPlan {
    /// Runs the plan on named inputs and returns every graph output.
    pub fn execute(&self, inputs: &TensorMap) -> Result<TensorMap> {
        let slots = self.run_steps(inputs, false, |_, _| {})?;
        Ok(self.collect_outputs(&slots))
    }

    /// Like [`execute`](Self::execute), calling `on_step(step_index, elapsed)`
    /// after each kernel.
    pub fn execute_timed(
        &self,
        inputs: &TensorMap,
        on_step: impl FnMut(usize, Duration),
    ) -> Result<TensorMap> {
        let slots = self.run_steps(inputs, false, on_step)?;
        Ok(self.collect_outputs(&slots))
    }

    /// Runs the plan keeping every buffer alive; index by buffer id.
    pub(crate) fn capture(&self, inputs: &TensorMap) -> Result<Vec<Option<Tensor>>> {
        self.run_steps(inputs, true, |_, _| {})
    }

    pub(crate) fn buffer<'a>(&'a self, slots: &'a [Option<Tensor>], id: usize) -> Option<&'a Tensor> {
        self.constants.get(&id).or(slots[id].as_ref())
    }

    /// Runs one step on tensors looked up in `slots`.
    pub(crate) fn run_step_with(
        &self,
        step: &PlanStep,
        backend: &crate::kernels::BackendId,
        slots: &[Option<Tensor>],
    ) -> Result<Tensor> {
        let args: Vec<&Tensor> = step
            .inputs
            .iter()
            .map(|&b| {
                self.buffer(slots, b).ok_or_else(|| {
                    Error::Input(format!("buffer `{}` is not available", self.buffers[b].name))
                })
            })
            .collect::<Result<_>>()?;
        let kernel = self
            .registry
            .get(backend)
            .ok_or_else(|| Error::UnknownBackend(backend.to_string()))?;
        kernel.run(&step.node.op, &args, &self.cx)
    }

    fn bind_inputs(&self, inputs: &TensorMap) -> Result<Vec<Option<Tensor>>> {
        let mut slots: Vec<Option<Tensor>> = vec![None; self.buffers.len()];
        for (name, id) in &self.graph_inputs {
            let t = inputs
                .get(name)
                .ok_or_else(|| Error::Input(format!("missing input `{name}`")))?;
            let expected = &self.buffers[*id].shape;
            if t.shape() != expected {
                return Err(Error::Input(format!(
                    "input `{name}` has shape {}, plan expects {expected}",
                    t.shape()
                )));
            }
            slots[*id] = Some(t.clone());
        }
        if let Some(extra) = inputs
            .keys()
            .find(|k| !self.graph_inputs.iter().any(|(n, _)| n == *k))
        {
            return Err(Error::Input(format!("unknown input `{extra}`")));
        }
        Ok(slots)
    }

    fn run_steps(
        &self,
        inputs: &TensorMap,
        keep_all: bool,
        mut on_step: impl FnMut(usize, Duration),
    ) -> Result<Vec<Option<Tensor>>> {
        let mut slots = self.bind_inputs(inputs)?;
        for (i, step) in self.steps.iter().enumerate() {
            let start = Instant::now();
            let out = self.run_step_with(step, &step.backend, &slots)?;
            let elapsed = start.elapsed();
            let expected = &self.buffers[step.output].shape;
            if out.shape() != expected {
                return Err(Error::shape(format!(
                    "layer `{}` ({}) produced {}, planned {expected}",
                    step.node.name,
                    step.backend,
                    out.shape()
                )));
            }
            if self.check_finite && !out.all_finite() {
                return Err(Error::NonFinite {
                    layer: step.node.name.clone(),
                });
            }
            slots[step.output] = Some(out);
            if !keep_all {
                for &b in &step.frees {
                    slots[b] = None;
                }
            }
            on_step(i, elapsed);
        }
        Ok(slots)
    }

    fn collect_outputs(&self, slots: &[Option<Tensor>]) -> TensorMap {
        self.graph_outputs
            .iter()
            .map(|(name, id)| {
                let t = self.buffer(slots, *id).expect("outputs are never freed");
                (name.clone(), t.clone())
            })
            .collect()
    }

    /// Seeded random tensors for every graph input, in `[-1, 1)`.
    pub fn random_inputs(&self, seed: u64) -> TensorMap {
        self.graph_inputs
            .iter()
            .enumerate()
            .map(|(i, (name, id))| {
                (
                    name.clone(),
                    Tensor::random(self.buffers[*id].shape.clone(), seed.wrapping_add(i as u64)),
                )
            })
            .collect()
    }

    #[cfg(test)]
    pub(crate) fn intermediate_count(&self) -> usize {
        self.buffers
            .iter()
            .filter(|b| b.role == BufferRole::Intermediate)
            .count()
    }
}

/// Peak number of intermediate buffers alive at once, for tests.
#[cfg(test)]
pub(crate) fn peak_live(plan: &ExecutionPlan) -> usize {
    let mut live = std::collections::HashMap::new();
    let mut peak = 0;
    for s in &plan.steps {
        if plan.buffers[s.output].role == BufferRole::Intermediate {
            live.insert(s.output, ());
        }
        peak = peak.max(live.len());
        for b in &s.frees {
            live.remove(b);
        }
    }
    peak
}
