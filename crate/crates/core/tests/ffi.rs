mod common;

use std::ffi::{CStr, CString};
use std::ptr;

use common::{fixture, io_pair};
use orpheus::cli::{EXIT_IO, EXIT_OK, EXIT_UNSUPPORTED, EXIT_USAGE};
use orpheus::ffi::*;
use orpheus::runtime::CSV_HEADER;
use orpheus::{load_model, Session, SessionOptions};

fn c_path(name: &str) -> CString {
    CString::new(fixture(name).to_str().unwrap()).unwrap()
}

fn last_message() -> String {
    unsafe { CStr::from_ptr(orpheus_last_error_message()) }
        .to_str()
        .unwrap()
        .to_string()
}

#[test]
fn abi_version() {
    assert_eq!(orpheus_abi_version(), ABI_VERSION);
    assert_eq!(ABI_VERSION, 1);
}

#[test]
fn run_matches_session_bitwise() {
    let io = io_pair("residual_block");
    let x = io.inputs.values().next().unwrap();
    for threads in [1, 4] {
        let m = unsafe { orpheus_load(c_path("residual_block.onnx").as_ptr(), 1, threads) };
        assert!(!m.is_null(), "{}", last_message());
        assert_eq!(orpheus_last_error_code(), EXIT_OK);
        assert_eq!(unsafe { orpheus_node_count(m) }, 4);

        let mut out = vec![0f32; 256];
        let mut len = 0usize;
        let code = unsafe {
            orpheus_run(m, x.data().as_ptr(), x.dims().as_ptr(), x.dims().len(), out.as_mut_ptr(), out.len(), &mut len)
        };
        assert_eq!(code, EXIT_OK, "{}", last_message());
        assert_eq!(len, io.expected.numel());

        let session = Session::from_graph(
            load_model(&fixture("residual_block.onnx")).unwrap(),
            SessionOptions::default(),
            Default::default(),
        )
        .unwrap();
        let want = session.run(&io.inputs).unwrap();
        let want = want[&io.output_name].data();
        assert!(out[..len].iter().zip(want).all(|(a, b)| a.to_bits() == b.to_bits()));
        unsafe { orpheus_free(m) };
    }
}

#[test]
fn small_output_buffer_reports_needed_length() {
    let m = unsafe { orpheus_load(c_path("tiny_conv.json").as_ptr(), 0, 1) };
    assert!(!m.is_null());
    let x = [0.5f32; 16];
    let shape = [1usize, 1, 4, 4];
    let mut out = [0f32; 4];
    let mut len = 0usize;
    let code = unsafe { orpheus_run(m, x.as_ptr(), shape.as_ptr(), 4, out.as_mut_ptr(), out.len(), &mut len) };
    assert_eq!(code, EXIT_USAGE);
    assert_eq!(len, 16);
    assert!(last_message().contains("16"));

    // wrong input shape
    let bad = [1usize, 1, 2, 8];
    let code = unsafe { orpheus_run(m, x.as_ptr(), bad.as_ptr(), 4, out.as_mut_ptr(), out.len(), &mut len) };
    assert_eq!(code, EXIT_USAGE);
    assert!(last_message().contains("1x1x4x4"), "{}", last_message());
    unsafe { orpheus_free(m) };
}

#[test]
fn bench_returns_csv() {
    let m = unsafe { orpheus_load(c_path("conv_bn_relu.onnx").as_ptr(), 1, 1) };
    assert!(!m.is_null());
    let s = unsafe { orpheus_bench(m, 3, 1) };
    assert!(!s.is_null(), "{}", last_message());
    let csv = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe {
        orpheus_string_free(s);
        orpheus_free(m);
    }
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert!(lines[1].starts_with("__network__,network,-,3,"));
    assert_eq!(lines.len(), 3);
}

#[test]
fn errors_carry_code_and_message() {
    let m = unsafe { orpheus_load(c_path("no_such_model.onnx").as_ptr(), 1, 1) };
    assert!(m.is_null());
    assert_eq!(orpheus_last_error_code(), EXIT_IO);
    assert!(last_message().contains("no_such_model.onnx"));

    let dir = tempfile::tempdir().unwrap();
    let mut bytes = std::fs::read(fixture("conv_bn_relu.onnx")).unwrap();
    let at = bytes.windows(4).position(|w| w == b"Relu").unwrap();
    bytes[at..at + 4].copy_from_slice(b"Gelu");
    let gelu = dir.path().join("gelu.onnx");
    std::fs::write(&gelu, bytes).unwrap();
    let p = CString::new(gelu.to_str().unwrap()).unwrap();
    assert!(unsafe { orpheus_load(p.as_ptr(), 1, 1) }.is_null());
    assert_eq!(orpheus_last_error_code(), EXIT_UNSUPPORTED);
    assert!(last_message().contains("Gelu"));

    assert!(unsafe { orpheus_load(ptr::null(), 1, 1) }.is_null());
    assert_eq!(orpheus_last_error_code(), EXIT_USAGE);
    let mut len = 0;
    let code = unsafe { orpheus_run(ptr::null_mut(), ptr::null(), ptr::null(), 0, ptr::null_mut(), 0, &mut len) };
    assert_eq!(code, EXIT_USAGE);
    assert!(unsafe { orpheus_bench(ptr::null_mut(), 1, 0) }.is_null());

    // a successful call clears the error
    let m = unsafe { orpheus_load(c_path("relu_only.json").as_ptr(), 1, 1) };
    assert!(!m.is_null());
    assert_eq!(orpheus_last_error_code(), EXIT_OK);
    assert_eq!(last_message(), "");
    unsafe {
        orpheus_free(m);
        orpheus_free(ptr::null_mut());
        orpheus_string_free(ptr::null_mut());
    }
    assert_eq!(unsafe { orpheus_node_count(ptr::null()) }, 0);
}
