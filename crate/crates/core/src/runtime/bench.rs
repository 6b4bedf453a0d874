use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use super::exec::TensorMap;
use super::plan::ExecutionPlan;
use super::RunConfig;
use crate::error::{Error, Result};

/// Exact header of the bench CSV.
pub const CSV_HEADER: &str = "layer,op,backend,reps,min_ns,median_ns,mean_ns,std_ns";

/// Layer name used for the end-to-end row.
pub const NETWORK_ROW: &str = "__network__";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub min_ns: u64,
    pub max_ns: u64,
    pub median_ns: f64,
    pub mean_ns: f64,
    /// Population standard deviation.
    pub std_ns: f64,
}

impl Stats {
    pub fn of(samples: &[u64]) -> Option<Stats> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2] as f64
        } else {
            (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
        };
        let mean = sorted.iter().map(|&s| s as f64).sum::<f64>() / n as f64;
        let var = sorted.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        Some(Stats {
            min_ns: sorted[0],
            max_ns: sorted[n - 1],
            median_ns: median,
            mean_ns: mean,
            std_ns: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRecord {
    pub layer: String,
    pub op: String,
    pub backend: String,
    pub samples: Vec<u64>,
}

impl TimingRecord {
    pub fn new(layer: &str, op: &str, backend: &str) -> TimingRecord {
        TimingRecord {
            layer: layer.into(),
            op: op.into(),
            backend: backend.into(),
            samples: Vec::new(),
        }
    }

    pub fn stats(&self) -> Stats {
        Stats::of(&self.samples).unwrap_or(Stats {
            min_ns: 0,
            max_ns: 0,
            median_ns: 0.0,
            mean_ns: 0.0,
            std_ns: 0.0,
        })
    }

    pub fn csv_row(&self) -> String {
        let s = self.stats();
        format!(
            "{},{},{},{},{},{:.1},{:.1},{:.1}",
            self.layer,
            self.op,
            self.backend,
            self.samples.len(),
            s.min_ns,
            s.median_ns,
            s.mean_ns,
            s.std_ns
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct BenchOptions {
    pub per_layer: bool,
    /// Replay each step on captured inputs instead of timing inside full runs.
    pub isolate_layers: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub threads: usize,
    pub warmup: usize,
    pub reps: usize,
    pub per_layer: bool,
    pub isolate_layers: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub model: String,
    pub config: ConfigEcho,
    pub end_to_end: TimingRecord,
    pub per_layer: Vec<TimingRecord>,
    #[serde(skip)]
    pub outputs: TensorMap,
}

#[derive(Serialize)]
struct RecordJson<'a> {
    layer: &'a str,
    op: &'a str,
    backend: &'a str,
    reps: usize,
    min_ns: u64,
    median_ns: f64,
    mean_ns: f64,
    std_ns: f64,
    samples: &'a [u64],
}

impl<'a> From<&'a TimingRecord> for RecordJson<'a> {
    fn from(r: &'a TimingRecord) -> Self {
        let s = r.stats();
        RecordJson {
            layer: &r.layer,
            op: &r.op,
            backend: &r.backend,
            reps: r.samples.len(),
            min_ns: s.min_ns,
            median_ns: s.median_ns,
            mean_ns: s.mean_ns,
            std_ns: s.std_ns,
            samples: &r.samples,
        }
    }
}

impl BenchReport {
    pub fn records(&self) -> impl Iterator<Item = &TimingRecord> {
        std::iter::once(&self.end_to_end).chain(&self.per_layer)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in self.records() {
            writeln!(out, "{}", r.csv_row()).unwrap();
        }
        out
    }

    /// JSON with the CSV fields per record, plus the raw samples.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "model": self.model,
            "config": self.config,
            "records": self.records().map(RecordJson::from).collect::<Vec<_>>(),
        })
    }
}

fn check(cfg: &RunConfig) -> Result<()> {
    if cfg.reps < 1 {
        return Err(Error::Config("reps must be >= 1".into()));
    }
    Ok(())
}

fn echo(cfg: &RunConfig, opts: BenchOptions) -> ConfigEcho {
    ConfigEcho {
        threads: cfg.threads,
        warmup: cfg.warmup,
        reps: cfg.reps,
        per_layer: opts.per_layer,
        isolate_layers: opts.isolate_layers,
    }
}

fn layer_records(plan: &ExecutionPlan) -> Vec<TimingRecord> {
    plan.steps
        .iter()
        .map(|s| TimingRecord::new(&s.node.name, s.node.kind().onnx_name(), s.backend.as_str()))
        .collect()
}

/// `cfg.warmup` untimed runs, then `cfg.reps` timed end-to-end runs.
pub fn time_network(plan: &ExecutionPlan, inputs: &TensorMap, cfg: &RunConfig) -> Result<BenchReport> {
    bench(plan, inputs, cfg, BenchOptions::default())
}

/// As [`time_network`], also recording each step's wall time in every run.
pub fn time_layers(plan: &ExecutionPlan, inputs: &TensorMap, cfg: &RunConfig) -> Result<BenchReport> {
    bench(
        plan,
        inputs,
        cfg,
        BenchOptions {
            per_layer: true,
            isolate_layers: false,
        },
    )
}

pub fn bench(
    plan: &ExecutionPlan,
    inputs: &TensorMap,
    cfg: &RunConfig,
    opts: BenchOptions,
) -> Result<BenchReport> {
    check(cfg)?;
    for _ in 0..cfg.warmup {
        plan.execute(inputs)?;
    }
    let mut network = TimingRecord::new(NETWORK_ROW, "network", "-");
    let mut layers = layer_records(plan);
    let mut outputs = TensorMap::new();
    let inline = opts.per_layer && !opts.isolate_layers;
    for _ in 0..cfg.reps {
        let start = Instant::now();
        outputs = if inline {
            plan.execute_timed(inputs, |i, d| layers[i].samples.push(d.as_nanos() as u64))?
        } else {
            plan.execute(inputs)?
        };
        network.samples.push(start.elapsed().as_nanos() as u64);
    }

    if opts.per_layer && opts.isolate_layers {
        let slots = plan.capture(inputs)?;
        for (step, record) in plan.steps.iter().zip(&mut layers) {
            for _ in 0..cfg.warmup {
                plan.run_step_with(step, &step.backend, &slots)?;
            }
            for _ in 0..cfg.reps {
                let start = Instant::now();
                let out = plan.run_step_with(step, &step.backend, &slots)?;
                record.samples.push(start.elapsed().as_nanos() as u64);
                drop(out);
            }
        }
    }

    Ok(BenchReport {
        model: plan.model_name.clone(),
        config: echo(cfg, opts),
        end_to_end: network,
        per_layer: if opts.per_layer { layers } else { Vec::new() },
        outputs,
    })
}
