use std::time::{Duration, Instant};

use serde::Serialize;

use super::bench::Stats;
use super::exec::TensorMap;
use super::plan::ExecutionPlan;
use super::RunConfig;
use crate::error::{Error, Result};
use crate::kernels::BackendId;

/// Each timing sample repeats the kernel until roughly this much time has
/// passed, so that sub-microsecond layers are still measurable.
const MIN_SAMPLE: Duration = Duration::from_micros(50);
const MAX_INNER: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateTiming {
    pub backend: String,
    /// Median time per call, or `None` when the candidate failed.
    pub median_ns: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningEntry {
    pub layer: String,
    pub op: String,
    pub selected: String,
    pub candidates: Vec<CandidateTiming>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TuningLog {
    pub entries: Vec<TuningEntry>,
}

impl TuningLog {
    pub fn entry(&self, layer: &str) -> Option<&TuningEntry> {
        self.entries.iter().find(|e| e.layer == layer)
    }
}

/// Times every candidate backend of every multi-backend step on the step's
/// real inputs and picks the one with the lowest median. Ties go to the
/// earlier-registered backend. Only backend ids change in the returned plan.
pub fn autotune(
    plan: &ExecutionPlan,
    sample: &TensorMap,
    cfg: &RunConfig,
) -> Result<(ExecutionPlan, TuningLog)> {
    if cfg.autotune_reps < 3 {
        return Err(Error::Config("autotune_reps must be >= 3".into()));
    }
    let slots = plan.capture(sample)?;
    let mut tuned = plan.clone();
    let mut log = TuningLog::default();

    for (i, step) in plan.steps.iter().enumerate() {
        let candidates: Vec<BackendId> = plan
            .registry
            .candidates(&step.node.op, &plan.step_shapes(step))
            .into_iter()
            .cloned()
            .collect();
        if candidates.len() < 2 {
            continue;
        }
        let expected = &plan.buffers[step.output].shape;
        let mut timings = Vec::new();
        let mut best: Option<(f64, &BackendId)> = None;
        for id in &candidates {
            let measured = (|| -> Result<f64> {
                // warmup, which also checks the output shape
                let out = plan.run_step_with(step, id, &slots)?;
                if out.shape() != expected {
                    return Err(Error::shape(format!("produced {}, expected {expected}", out.shape())));
                }
                let start = Instant::now();
                plan.run_step_with(step, id, &slots)?;
                let once = start.elapsed().max(Duration::from_nanos(1));
                let inner = (MIN_SAMPLE.as_nanos() / once.as_nanos()).clamp(1, MAX_INNER as u128) as u32;
                let mut samples = Vec::with_capacity(cfg.autotune_reps);
                for _ in 0..cfg.autotune_reps {
                    let start = Instant::now();
                    for _ in 0..inner {
                        std::hint::black_box(plan.run_step_with(step, id, &slots)?);
                    }
                    samples.push((start.elapsed().as_nanos() / inner as u128) as u64);
                }
                Ok(Stats::of(&samples).expect("reps >= 3").median_ns)
            })();
            match measured {
                Ok(median) => {
                    if best.is_none_or(|(b, _)| median < b) {
                        best = Some((median, id));
                    }
                    timings.push(CandidateTiming {
                        backend: id.to_string(),
                        median_ns: Some(median),
                        error: None,
                    });
                }
                Err(e) => timings.push(CandidateTiming {
                    backend: id.to_string(),
                    median_ns: None,
                    error: Some(e.to_string()),
                }),
            }
        }
        let selected = match best {
            Some((_, id)) => id.clone(),
            None => step.backend.clone(),
        };
        tuned.steps[i].backend = selected.clone();
        log.entries.push(TuningEntry {
            layer: step.node.name.clone(),
            op: step.node.kind().onnx_name().to_string(),
            selected: selected.to_string(),
            candidates: timings,
        });
    }
    Ok((tuned, log))
}
