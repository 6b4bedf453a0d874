//! The `orpheus` command line. Machine-readable results go to stdout,
//! diagnostics to stderr. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | usage or configuration error |
//! | 2 | model parse or validation error |
//! | 3 | unsupported operator, attribute or data type |
//! | 4 | numeric mismatch (`compare`, `selftest`, non-finite output) |
//! | 5 | I/O error |

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::{infer_shapes, inspect, validate};
use crate::kernels::KernelRegistry;
use crate::runtime::{compare_backends, BenchOptions, RunConfig, TensorMap};
use crate::selftest::run_selftest;
use crate::simplify::{run_pipeline, PassPipeline};
use crate::tensor::{self, Shape, Tensor};
use crate::{json_model, load_model, Graph, Session, SessionOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_UNSUPPORTED: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "orpheus", version, about = "Run, simplify and benchmark small CNN models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print one line per node in execution order
    Inspect {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Check structure and shapes; exits 2 on errors
    Validate {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Apply graph passes and print the result as a JSON model
    Simplify {
        #[command(flatten)]
        model: ModelArg,
        /// Comma-separated pass list, `default`, or `none`
        #[arg(long, default_value = "default")]
        passes: String,
        /// Write the simplified model here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run inference once
    Run {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        exec: ExecArgs,
        /// Output file: `.json` for a JSON tensor, anything else raw float32
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the whole network and optionally each layer
    Bench {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        exec: ExecArgs,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long)]
        per_layer: bool,
        /// Replay each layer on captured inputs instead of timing inside runs
        #[arg(long, requires = "per_layer")]
        isolate_layers: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every alternative backend against the reference on real activations
    Compare {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        exec: ExecArgs,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run the built-in golden checks
    Selftest,
}

#[derive(Debug, Args)]
struct ModelArg {
    /// Model file (.onnx or .json)
    #[arg(value_name = "MODEL", conflicts_with = "model")]
    path: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
}

impl ModelArg {
    fn path(&self) -> Result<&Path> {
        self.model
            .as_deref()
            .or(self.path.as_deref())
            .ok_or_else(|| Error::Usage("a model path is required".into()))
    }
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Input tensor: `.json` tensor file or raw little-endian float32
    #[arg(long)]
    input: Option<PathBuf>,
    /// Input shape such as 1x3x32x32; required for raw input files
    #[arg(long)]
    input_shape: Option<Shape>,
    /// Seed for generated inputs when no --input is given
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ExecArgs {
    /// Backend override `<op-or-layer>=<backend-id>`, repeatable
    #[arg(long = "backend", value_name = "KEY=ID")]
    backends: Vec<String>,
    /// Pick each layer's backend by timing all candidates
    #[arg(long, conflicts_with = "backends")]
    autotune: bool,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    threads: u64,
    /// Comma-separated pass list, `default`, or `none`
    #[arg(long, default_value = "default")]
    passes: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_)
        | Error::Config(_)
        | Error::Input(_)
        | Error::UnknownBackend(_)
        | Error::IncompatibleBackend { .. }
        | Error::Registration(_) => EXIT_USAGE,
        Error::Shape(_)
        | Error::Truncated(_)
        | Error::Malformed(_)
        | Error::Limit(_)
        | Error::Parse { .. }
        | Error::Invalid(_)
        | Error::Cycle(_)
        | Error::ShapeInference { .. }
        | Error::InternalPass { .. } => EXIT_PARSE,
        Error::UnsupportedOp { .. } | Error::UnsupportedDtype { .. } | Error::UnsupportedAttribute { .. } => {
            EXIT_UNSUPPORTED
        }
        Error::NonFinite { .. } => EXIT_MISMATCH,
        Error::Io { .. } => EXIT_IO,
    }
}

/// Entry point for the binary.
pub fn main_from_env() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with_registry(args, Arc::new(KernelRegistry::with_builtins()))
}

/// Like [`run`] with a caller-supplied backend registry, e.g. one with extra
/// backends registered.
pub fn run_with_registry<I, T>(args: I, registry: Arc<KernelRegistry>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    run_to(args, registry, &mut stdout.lock())
}

/// Like [`run_with_registry`], writing results to `out` instead of stdout.
pub fn run_to<I, T>(args: I, registry: Arc<KernelRegistry>, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return EXIT_USAGE;
        }
        Err(e) => {
            // --help and --version
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match dispatch(cli.command, registry, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn parse_passes(spec: &str) -> Result<PassPipeline> {
    match spec {
        "default" => Ok(PassPipeline::default()),
        "none" | "" => Ok(PassPipeline::empty()),
        list => PassPipeline::parse(list).map_err(|e| Error::Usage(e.to_string())),
    }
}

fn write_stdout(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .and_then(|_| if text.ends_with('\n') { Ok(()) } else { out.write_all(b"\n") })
        .map_err(|e| Error::io("<stdout>", e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

/// Loads the input tensor named on the command line, if any.
fn read_input(args: &InputArgs) -> Result<Option<Tensor>> {
    let Some(path) = &args.input else {
        return Ok(None);
    };
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let t = if is_json {
        let t = tensor::read_json(path)?;
        if let Some(s) = &args.input_shape {
            if s != t.shape() {
                return Err(Error::Usage(format!(
                    "--input-shape {s} disagrees with {} in {}",
                    t.shape(),
                    path.display()
                )));
            }
        }
        t
    } else {
        let shape = args
            .input_shape
            .clone()
            .ok_or_else(|| Error::Usage("--input-shape is required for raw float32 input".into()))?;
        tensor::read_raw(path, shape)?
    };
    Ok(Some(t))
}

fn single_input_name(g: &Graph) -> Result<String> {
    match &g.inputs[..] {
        [one] => Ok(one.name.clone()),
        _ => Err(Error::Usage(format!(
            "model has {} inputs; the command line supports exactly one",
            g.inputs.len()
        ))),
    }
}

fn run_config(exec: &ExecArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig {
        threads: exec.threads as usize,
        autotune: exec.autotune,
        ..RunConfig::default()
    };
    for spec in &exec.backends {
        cfg.parse_override(spec)?;
    }
    Ok(cfg)
}

/// Builds a session plus the input map for run/bench/compare.
fn prepare(
    model: &ModelArg,
    input: &InputArgs,
    exec: &ExecArgs,
    cfg: RunConfig,
    registry: Arc<KernelRegistry>,
) -> Result<(Session, TensorMap)> {
    let graph = load_model(model.path()?)?;
    let name = single_input_name(&graph)?;
    let given = read_input(input)?;
    let mut opts = SessionOptions {
        pipeline: parse_passes(&exec.passes)?,
        config: cfg,
        seed: input.seed,
        ..SessionOptions::default()
    };
    if let Some(shape) = given.as_ref().map(|t| t.shape().clone()).or(input.input_shape.clone()) {
        opts.input_shapes.insert(name.clone(), shape);
    }
    let session = Session::from_graph(graph, opts, registry)?;
    let inputs = match given {
        Some(t) => TensorMap::from([(name, t)]),
        None => session.random_inputs(input.seed),
    };
    Ok((session, inputs))
}

fn dispatch(cmd: Command, registry: Arc<KernelRegistry>, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Inspect { model, format } => {
            let g = load_model(model.path()?)?;
            let text = match format {
                Format::Text => inspect(&g)?,
                Format::Json => pretty(&json!({
                    "name": g.name,
                    "inputs": g.inputs.iter().map(|i| json!({"name": i.name, "shape": i.shape.as_ref().map(|s| s.dims().to_vec())})).collect::<Vec<_>>(),
                    "outputs": g.outputs,
                    "nodes": json_model::to_json_value(&g)["nodes"],
                })),
                Format::Csv => return Err(Error::Usage("inspect supports --format text|json".into())),
            };
            write_stdout(out, &text)?;
            Ok(EXIT_OK)
        }
        Command::Validate { model, format } => {
            let g = load_model(model.path()?)?;
            let diags = validate(&g);
            let errors = diags.iter().filter(|d| d.is_error()).count();
            let shape_error = match (errors, g.declared_input_shapes()) {
                (0, Some(shapes)) => infer_shapes(&g, &shapes).err().map(|e| e.to_string()),
                _ => None,
            };
            let ok = errors == 0 && shape_error.is_none();
            match format {
                Format::Json => write_stdout(
                    out,
                    &pretty(&json!({
                        "valid": ok,
                        "diagnostics": diags.iter().map(|d| json!({"error": d.is_error(), "message": d.to_string()})).collect::<Vec<_>>(),
                        "shape_error": shape_error,
                    })),
                )?,
                _ => {
                    for d in &diags {
                        eprintln!("{}: {d}", if d.is_error() { "error" } else { "warning" });
                    }
                    if let Some(e) = &shape_error {
                        eprintln!("error: {e}");
                    }
                    write_stdout(out, if ok { "valid" } else { "invalid" })?;
                }
            }
            Ok(if ok { EXIT_OK } else { EXIT_PARSE })
        }
        Command::Simplify { model, passes, out: path } => {
            let g = load_model(model.path()?)?;
            let errors: Vec<_> = validate(&g).into_iter().filter(|d| d.is_error()).collect();
            if !errors.is_empty() {
                return Err(Error::Invalid(errors));
            }
            let (simplified, reports) = run_pipeline(&g, &parse_passes(&passes)?)?;
            let model_json = json_model::to_json_value(&simplified);
            let doc = match &path {
                Some(p) => {
                    write_file(p, &pretty(&model_json))?;
                    json!({ "model_path": p, "reports": reports })
                }
                None => json!({ "model": model_json, "reports": reports }),
            };
            write_stdout(out, &pretty(&doc))?;
            Ok(EXIT_OK)
        }
        Command::Run {
            model,
            input,
            exec,
            out: path,
        } => {
            let (session, inputs) = prepare(&model, &input, &exec, run_config(&exec)?, registry)?;
            let outputs = session.run(&inputs)?;
            let mut summary = Vec::new();
            for (name, t) in &outputs {
                summary.push(json!({
                    "name": name,
                    "shape": t.dims(),
                    "argmax": t.argmax_last_axis(),
                }));
            }
            if let Some(p) = &path {
                let [(_, t)] = <[_; 1]>::try_from(outputs.iter().collect::<Vec<_>>())
                    .map_err(|_| Error::Usage("--out needs a single-output model".into()))?;
                if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
                    tensor::write_json(p, t)?;
                } else {
                    tensor::write_raw(p, t)?;
                }
            }
            let mut doc = json!({
                "model": session.graph().name,
                "outputs": summary,
                "backends": session.plan().backends().iter().map(|(l, b)| json!({"layer": l, "backend": b.as_str()})).collect::<Vec<_>>(),
            });
            if path.is_none() {
                doc["values"] = outputs
                    .iter()
                    .map(|(n, t)| (n.clone(), json!(t.data())))
                    .collect::<serde_json::Map<_, _>>()
                    .into();
            }
            if let Some(log) = session.tuning_log() {
                doc["tuning"] = json!(log);
            }
            write_stdout(out, &pretty(&doc))?;
            Ok(EXIT_OK)
        }
        Command::Bench {
            model,
            input,
            exec,
            warmup,
            reps,
            per_layer,
            isolate_layers,
            format,
            out: path,
        } => {
            let cfg = RunConfig {
                warmup,
                reps,
                ..run_config(&exec)?
            };
            let (session, inputs) = prepare(&model, &input, &exec, cfg, registry)?;
            let report = session.bench(
                &inputs,
                BenchOptions {
                    per_layer,
                    isolate_layers,
                },
            )?;
            let text = match format {
                Format::Csv => report.to_csv(),
                Format::Json => pretty(&report.to_json()),
                Format::Text => return Err(Error::Usage("bench supports --format csv|json".into())),
            };
            match &path {
                Some(p) => write_file(p, &text)?,
                None => write_stdout(out, &text)?,
            }
            Ok(EXIT_OK)
        }
        Command::Compare {
            model,
            input,
            exec,
            tolerance,
            format,
        } => {
            let (session, inputs) = prepare(&model, &input, &exec, run_config(&exec)?, registry)?;
            let report = compare_backends(session.plan(), &inputs, tolerance)?;
            let text = match format {
                Format::Json => pretty(&json!(report)),
                Format::Csv => {
                    let mut s = String::from("layer,op,reference,backend,max_abs_diff,ok\n");
                    for r in &report.rows {
                        let diff = r.max_abs_diff.map_or("error".to_string(), |d| format!("{d:e}"));
                        s += &format!("{},{},{},{},{diff},{}\n", r.layer, r.op, r.reference, r.backend, r.ok);
                    }
                    s
                }
                Format::Text => return Err(Error::Usage("compare supports --format json|csv".into())),
            };
            write_stdout(out, &text)?;
            for r in report.failures() {
                let what = match (&r.max_abs_diff, &r.error) {
                    (Some(d), _) => format!("max_abs_diff {d:e} > {tolerance:e}"),
                    (None, Some(e)) => e.clone(),
                    (None, None) => "failed".into(),
                };
                eprintln!(
                    "mismatch: layer `{}`: backend {} vs reference {}: {what}",
                    r.layer, r.backend, r.reference
                );
            }
            Ok(if report.passed() { EXIT_OK } else { EXIT_MISMATCH })
        }
        Command::Selftest => {
            let results = run_selftest();
            let mut text = String::new();
            for r in &results {
                text += &r.line();
                text.push('\n');
            }
            write_stdout(out, &text)?;
            Ok(if results.iter().all(|r| r.passed()) {
                EXIT_OK
            } else {
                EXIT_MISMATCH
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    fn capture(args: &[&str]) -> (i32, String) {
        let mut out = Vec::new();
        let code = run_to(args, Arc::new(KernelRegistry::with_builtins()), &mut out);
        (code, String::from_utf8(out).unwrap())
    }

    #[test]
    fn usage_errors() {
        assert_eq!(capture(&["orpheus"]).0, EXIT_USAGE);
        assert_eq!(capture(&["orpheus", "frobnicate"]).0, EXIT_USAGE);
        assert_eq!(capture(&["orpheus", "run", "--bogus"]).0, EXIT_USAGE);
        assert_eq!(capture(&["orpheus", "inspect"]).0, EXIT_USAGE);
        assert_eq!(capture(&["orpheus", "bench", "m.json", "--isolate-layers"]).0, EXIT_USAGE);
        let (code, text) = capture(&["orpheus", "--version"]);
        assert_eq!(code, EXIT_OK);
        assert!(text.starts_with("orpheus "));
        let (code, text) = capture(&["orpheus", "--help"]);
        assert_eq!(code, EXIT_OK);
        for sub in ["inspect", "validate", "simplify", "run", "bench", "compare", "selftest"] {
            assert!(text.contains(sub), "{sub}");
        }
    }

    #[test]
    fn selftest_passes() {
        let (code, text) = capture(&["orpheus", "selftest"]);
        assert_eq!(code, EXIT_OK);
        assert!(text.lines().count() >= 15);
        assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
    }

    #[test]
    fn passes_spec() {
        assert_eq!(parse_passes("none").unwrap(), PassPipeline::empty());
        assert_eq!(parse_passes("default").unwrap(), PassPipeline::default());
        assert!(matches!(parse_passes("bogus"), Err(Error::Usage(_))));
    }
}
