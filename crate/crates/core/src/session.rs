//! A loaded model ready to run: graph, simplification, plan and config.
//! The CLI and the C interface both go through this type.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernels::KernelRegistry;
use crate::runtime::{
    autotune, bench, plan, BenchOptions, BenchReport, ExecutionPlan, RunConfig, TensorMap, TuningLog,
};
use crate::simplify::{run_pipeline, PassPipeline, PassReport};
use crate::tensor::Shape;

#[derive(Debug, Clone, Default)]
pub struct SessionOptions {
    pub pipeline: PassPipeline,
    pub config: RunConfig,
    /// Overrides declared input shapes, e.g. for models with symbolic dims.
    pub input_shapes: HashMap<String, Shape>,
    /// Seed for the sample input used by autotuning.
    pub seed: u64,
}

pub struct Session {
    original: Graph,
    graph: Graph,
    reports: Vec<PassReport>,
    plan: ExecutionPlan,
    config: RunConfig,
    tuning: Option<TuningLog>,
}

impl Session {
    pub fn load(path: &Path, opts: SessionOptions) -> Result<Session> {
        Session::from_graph(crate::load_model(path)?, opts, Arc::new(KernelRegistry::with_builtins()))
    }

    pub fn from_graph(g: Graph, opts: SessionOptions, registry: Arc<KernelRegistry>) -> Result<Session> {
        let mut shapes: HashMap<String, Shape> = HashMap::new();
        for vi in &g.inputs {
            let shape = opts
                .input_shapes
                .get(&vi.name)
                .or(vi.shape.as_ref())
                .ok_or_else(|| Error::Input(format!("shape of input `{}` is unknown; pass it explicitly", vi.name)))?;
            shapes.insert(vi.name.clone(), shape.clone());
        }
        if let Some(unknown) = opts.input_shapes.keys().find(|k| !shapes.contains_key(*k)) {
            return Err(Error::Input(format!("model has no input named `{unknown}`")));
        }
        let errors: Vec<_> = crate::graph::validate(&g)
            .into_iter()
            .filter(|d| d.is_error())
            .collect();
        if !errors.is_empty() {
            return Err(Error::Invalid(errors));
        }
        let (graph, reports) = run_pipeline(&g, &opts.pipeline)?;
        let mut p = plan(&graph, &shapes, &opts.config, registry)?;
        let mut tuning = None;
        if opts.config.autotune {
            let sample = p.random_inputs(opts.seed);
            let (tuned, log) = autotune(&p, &sample, &opts.config)?;
            p = tuned;
            tuning = Some(log);
        }
        Ok(Session {
            original: g,
            graph,
            reports,
            plan: p,
            config: opts.config,
            tuning,
        })
    }

    /// Graph as loaded, before simplification.
    pub fn original(&self) -> &Graph {
        &self.original
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn pass_reports(&self) -> &[PassReport] {
        &self.reports
    }

    pub fn plan(&self) -> &ExecutionPlan {
        &self.plan
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn tuning_log(&self) -> Option<&TuningLog> {
        self.tuning.as_ref()
    }

    pub fn run(&self, inputs: &TensorMap) -> Result<TensorMap> {
        self.plan.execute(inputs)
    }

    pub fn bench(&self, inputs: &TensorMap, opts: BenchOptions) -> Result<BenchReport> {
        bench(&self.plan, inputs, &self.config, opts)
    }

    pub fn random_inputs(&self, seed: u64) -> TensorMap {
        self.plan.random_inputs(seed)
    }
}
