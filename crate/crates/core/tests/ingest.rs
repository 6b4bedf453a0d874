mod common;

use std::sync::Arc;

use common::{fixture, io_pair, FIXTURES};
use orpheus::graph::{infer_shapes, validate};
use orpheus::json_model::load_json_model;
use orpheus::onnx::wire::decode_varint;
use orpheus::onnx::{load_onnx, parse_onnx, OnnxLimits};
use orpheus::{Error, KernelRegistry, PassPipeline, Session, SessionOptions};
use proptest::prelude::*;

fn onnx_bytes(name: &str) -> Vec<u8> {
    std::fs::read(fixture(&format!("{name}.onnx"))).unwrap()
}

#[test]
fn onnx_and_json_twins_are_weight_identical() {
    for name in FIXTURES {
        let a = load_onnx(&fixture(&format!("{name}.onnx")), &OnnxLimits::default()).unwrap();
        let b = load_json_model(&fixture(&format!("{name}.json"))).unwrap();
        assert_eq!(a.nodes, b.nodes, "{name}");
        assert_eq!(a.inputs, b.inputs, "{name}");
        assert_eq!(a.outputs, b.outputs, "{name}");
        assert_eq!(
            a.initializers.keys().collect::<Vec<_>>(),
            b.initializers.keys().collect::<Vec<_>>(),
            "{name}"
        );
        for (k, t) in &a.initializers {
            let r = t.compare(&b.initializers[k], 0.0).unwrap();
            assert_eq!(r.max_abs_diff, 0.0, "{name}: {k}");
            assert!(t.bitwise_eq(&b.initializers[k]), "{name}: {k}");
        }
    }
}

#[test]
fn fixtures_validate_infer_and_match_reference_outputs() {
    let reg = Arc::new(KernelRegistry::with_builtins());
    for name in FIXTURES {
        for ext in ["onnx", "json"] {
            let g = orpheus::load_model(&fixture(&format!("{name}.{ext}"))).unwrap();
            assert!(validate(&g).iter().all(|d| !d.is_error()), "{name}.{ext}");
            infer_shapes(&g, &g.declared_input_shapes().unwrap()).unwrap();
            let io = io_pair(name);
            for pipeline in [PassPipeline::empty(), PassPipeline::default()] {
                let opts = SessionOptions {
                    pipeline,
                    ..SessionOptions::default()
                };
                let s = Session::from_graph(g.clone(), opts, reg.clone()).unwrap();
                let out = s.run(&io.inputs).unwrap();
                let r = out[&io.output_name].compare(&io.expected, 1e-3).unwrap();
                assert!(r.max_abs_diff <= 1e-4, "{name}.{ext}: {r:?}");
            }
        }
    }
}

fn append_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

#[test]
fn unknown_fields_are_skipped() {
    let original = onnx_bytes("conv_bn_relu");
    let mut bytes = Vec::new();
    // field 900 varint, field 901 bytes, field 902 fixed32, field 903 fixed64
    append_varint(&mut bytes, 900 << 3);
    append_varint(&mut bytes, 123_456_789);
    append_varint(&mut bytes, (901 << 3) | 2);
    append_varint(&mut bytes, 5);
    bytes.extend_from_slice(b"hello");
    bytes.extend_from_slice(&original);
    append_varint(&mut bytes, (902 << 3) | 5);
    bytes.extend_from_slice(&[1, 2, 3, 4]);
    append_varint(&mut bytes, (903 << 3) | 1);
    bytes.extend_from_slice(&[0; 8]);
    let a = parse_onnx(&original, &OnnxLimits::default()).unwrap();
    let b = parse_onnx(&bytes, &OnnxLimits::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn truncated_model_is_rejected() {
    let bytes = onnx_bytes("residual_block");
    for cut in [bytes.len() / 2, bytes.len() - 1] {
        match parse_onnx(&bytes[..cut], &OnnxLimits::default()) {
            Err(Error::Truncated(_)) => {}
            other => panic!("cut at {cut}: {other:?}"),
        }
    }
}

#[test]
fn unsupported_op_is_named() {
    let mut bytes = onnx_bytes("conv_bn_relu");
    let at = bytes.windows(4).position(|w| w == b"Relu").unwrap();
    bytes[at..at + 4].copy_from_slice(b"Gelu");
    match parse_onnx(&bytes, &OnnxLimits::default()) {
        Err(e @ Error::UnsupportedOp { .. }) => assert!(e.to_string().contains("Gelu"), "{e}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn varint_examples() {
    assert_eq!(decode_varint(&[0x96, 0x01], 0).unwrap(), (150, 2));
    assert_eq!(decode_varint(&[0xAC, 0x02], 0).unwrap(), (300, 2));
    assert_eq!(decode_varint(&[0x00], 0).unwrap(), (0, 1));
    assert!(matches!(decode_varint(&[0x96], 0), Err(Error::Truncated(_))));
    assert!(matches!(decode_varint(&[0xff; 11], 0), Err(Error::Malformed(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn varint_roundtrip(v in any::<u64>(), pad in 0usize..4) {
        let mut bytes = vec![0xAA; pad];
        append_varint(&mut bytes, v);
        let len = bytes.len();
        bytes.push(0x01);
        prop_assert_eq!(decode_varint(&bytes, pad).unwrap(), (v, len));
    }
}
