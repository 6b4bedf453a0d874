//! Planning, execution, autotuning and timing.

mod autotune;
mod bench;
mod compare;
mod exec;
mod plan;

use std::collections::BTreeMap;

pub use autotune::{autotune, CandidateTiming, TuningEntry, TuningLog};
pub use bench::{
    bench, time_layers, time_network, BenchOptions, BenchReport, ConfigEcho, Stats, TimingRecord,
    CSV_HEADER, NETWORK_ROW,
};
pub use compare::{compare_backends, CompareReport, CompareRow};
pub use exec::TensorMap;
pub use plan::{plan, BufferInfo, BufferRole, ExecutionPlan, PlanStep};

use crate::error::{Error, Result};
use crate::kernels::BlockSize;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub threads: usize,
    /// Layer name, op kind (`conv`, `Gemm`, ...) or `depthwise` → backend id.
    pub backend_overrides: BTreeMap<String, String>,
    pub autotune: bool,
    pub autotune_reps: usize,
    pub warmup: usize,
    pub reps: usize,
    /// Fail with [`Error::NonFinite`] when a layer produces NaN or infinity.
    pub check_finite: bool,
    pub block: BlockSize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            threads: 1,
            backend_overrides: BTreeMap::new(),
            autotune: false,
            autotune_reps: 5,
            warmup: 1,
            reps: 10,
            check_finite: false,
            block: BlockSize::default(),
        }
    }
}

impl RunConfig {
    pub fn with_threads(mut self, threads: usize) -> RunConfig {
        self.threads = threads;
        self
    }

    pub fn with_override(mut self, key: &str, backend: &str) -> RunConfig {
        self.backend_overrides.insert(key.into(), backend.into());
        self
    }

    /// Adds an override from `key=family/name` syntax.
    pub fn parse_override(&mut self, spec: &str) -> Result<()> {
        let (k, v) = spec
            .split_once('=')
            .filter(|(k, v)| !k.is_empty() && !v.is_empty())
            .ok_or_else(|| Error::Usage(format!("backend override `{spec}` must be <op-or-layer>=<backend-id>")))?;
        self.backend_overrides.insert(k.trim().into(), v.trim().into());
        Ok(())
    }

    pub fn check(&self) -> Result<()> {
        if self.threads < 1 {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        if self.reps < 1 {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        if self.autotune && self.autotune_reps < 3 {
            return Err(Error::Config("autotune_reps must be >= 3".into()));
        }
        Ok(())
    }
}
