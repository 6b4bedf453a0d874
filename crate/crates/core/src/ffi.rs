//! C interface. Build the `cdylib` and declare:
//!
//! ```c
//! typedef struct OrpheusModel OrpheusModel;
//! uint32_t      orpheus_abi_version(void);
//! OrpheusModel *orpheus_load(const char *path, int simplify, uint32_t threads);
//! void          orpheus_free(OrpheusModel *m);
//! size_t        orpheus_node_count(const OrpheusModel *m);
//! int           orpheus_run(OrpheusModel *m, const float *input, const size_t *shape, size_t rank,
//!                           float *out, size_t out_capacity, size_t *out_len);
//! char         *orpheus_bench(OrpheusModel *m, uint32_t reps, int per_layer);
//! void          orpheus_string_free(char *s);
//! int           orpheus_last_error_code(void);
//! const char   *orpheus_last_error_message(void);
//! ```
//!
//! Functions returning `int` return 0 on success and a nonzero code otherwise;
//! pointer-returning functions return NULL on failure. Codes match the
//! command-line exit codes (see [`crate::cli`]). The last error is kept per
//! thread and is reset by the next fallible call on that thread.
//! Panics never cross the boundary; they are reported as code 70.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use crate::cli::exit_code;
use crate::error::{Error, Result};
use crate::runtime::BenchOptions;
use crate::simplify::PassPipeline;
use crate::tensor::{Shape, Tensor};
use crate::{RunConfig, Session, SessionOptions, TensorMap};

/// Bumped on any incompatible change to the functions above.
pub const ABI_VERSION: u32 = 1;

pub const CODE_OK: c_int = 0;
pub const CODE_PANIC: c_int = 70;

pub struct OrpheusModel {
    session: Session,
    input: String,
}

thread_local! {
    static LAST_ERROR: RefCell<(c_int, CString)> = RefCell::new((CODE_OK, CString::default()));
}

fn set_error(code: c_int, msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = (code, msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = (CODE_OK, CString::default()));
}

/// Runs `f`, recording any error or panic, and returns `fallback` on failure.
fn guard<T>(fallback: T, f: impl FnOnce() -> Result<T>) -> T {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => {
            clear_error();
            v
        }
        Ok(Err(e)) => {
            set_error(exit_code(&e), e.to_string());
            fallback
        }
        Err(_) => {
            set_error(CODE_PANIC, "internal panic".into());
            fallback
        }
    }
}

fn null_arg(what: &str) -> Error {
    Error::Usage(format!("{what} is NULL"))
}

#[no_mangle]
pub extern "C" fn orpheus_abi_version() -> u32 {
    ABI_VERSION
}

/// Loads a `.onnx` or `.json` model. `simplify` nonzero applies the default
/// pass pipeline. `threads` 0 means 1.
///
/// # Safety
/// `path` must be NULL or a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn orpheus_load(path: *const c_char, simplify: c_int, threads: u32) -> *mut OrpheusModel {
    guard(ptr::null_mut(), || {
        if path.is_null() {
            return Err(null_arg("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Error::Usage("path is not UTF-8".into()))?;
        let opts = SessionOptions {
            pipeline: if simplify != 0 {
                PassPipeline::default()
            } else {
                PassPipeline::empty()
            },
            config: RunConfig::default().with_threads(threads.max(1) as usize),
            ..SessionOptions::default()
        };
        let session = Session::load(Path::new(path), opts)?;
        let input = match &session.graph().inputs[..] {
            [one] => one.name.clone(),
            many => {
                return Err(Error::Usage(format!(
                    "the C interface supports single-input models; this one has {}",
                    many.len()
                )))
            }
        };
        Ok(Box::into_raw(Box::new(OrpheusModel { session, input })))
    })
}

/// # Safety
/// `m` must be NULL or a pointer from [`orpheus_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn orpheus_free(m: *mut OrpheusModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of nodes after simplification; 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live model.
#[no_mangle]
pub unsafe extern "C" fn orpheus_node_count(m: *const OrpheusModel) -> usize {
    m.as_ref().map_or(0, |m| m.session.graph().nodes.len())
}

/// Runs the model on one input. The first graph output is written to `out`;
/// `*out_len` receives its element count even when `out_capacity` is too
/// small (code 1).
///
/// # Safety
/// `input` must point to as many floats as the product of `shape[..rank]`,
/// `out` to `out_capacity` writable floats, `out_len` to a writable size_t.
#[no_mangle]
pub unsafe extern "C" fn orpheus_run(
    m: *mut OrpheusModel,
    input: *const f32,
    shape: *const usize,
    rank: usize,
    out: *mut f32,
    out_capacity: usize,
    out_len: *mut usize,
) -> c_int {
    guard((), || {
        let m = m.as_ref().ok_or_else(|| null_arg("model"))?;
        if input.is_null() || shape.is_null() || out.is_null() || out_len.is_null() {
            return Err(null_arg("input, shape, out or out_len"));
        }
        let dims = std::slice::from_raw_parts(shape, rank).to_vec();
        let shape = Shape::new(dims)?;
        let data = std::slice::from_raw_parts(input, shape.numel()).to_vec();
        let inputs = TensorMap::from([(m.input.clone(), Tensor::new(shape, data)?)]);
        let outputs = m.session.run(&inputs)?;
        let first = &m.session.graph().outputs[0];
        let y = &outputs[first];
        *out_len = y.numel();
        if y.numel() > out_capacity {
            return Err(Error::Usage(format!(
                "output has {} elements, buffer holds {out_capacity}",
                y.numel()
            )));
        }
        std::slice::from_raw_parts_mut(out, y.numel()).copy_from_slice(y.data());
        Ok(())
    });
    orpheus_last_error_code()
}

/// Benchmarks on a seeded random input and returns the CSV report, to be
/// released with [`orpheus_string_free`].
///
/// # Safety
/// `m` must be NULL or a live model.
#[no_mangle]
pub unsafe extern "C" fn orpheus_bench(m: *mut OrpheusModel, reps: u32, per_layer: c_int) -> *mut c_char {
    guard(ptr::null_mut(), || {
        let m = m.as_ref().ok_or_else(|| null_arg("model"))?;
        let cfg = RunConfig {
            reps: reps.max(1) as usize,
            ..m.session.config().clone()
        };
        let inputs = m.session.random_inputs(0);
        let report = crate::runtime::bench(
            m.session.plan(),
            &inputs,
            &cfg,
            BenchOptions {
                per_layer: per_layer != 0,
                isolate_layers: false,
            },
        )?;
        Ok(CString::new(report.to_csv()).expect("csv has no NUL").into_raw())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn orpheus_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Code of the last failure on this thread, 0 if the last call succeeded.
#[no_mangle]
pub extern "C" fn orpheus_last_error_code() -> c_int {
    LAST_ERROR.with(|e| e.borrow().0)
}

/// Message of the last failure on this thread, empty if none. Owned by the
/// library.
#[no_mangle]
pub extern "C" fn orpheus_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().1.as_ptr())
}
