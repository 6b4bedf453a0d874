//! Golden checks compiled into the library, so a deployed binary can verify
//! its kernels without a test framework (`orpheus selftest`).

use std::collections::HashMap;

use crate::graph::{infer_shapes, ConvParams, Graph, Node, Op, PoolParams};
use crate::kernels::{self, BlockSize, GemmAlgo, Matrix};
use crate::onnx::wire::decode_varint;
use crate::runtime::Stats;
use crate::simplify::fold_batch_norm;
use crate::tensor::{Shape, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub outcome: Result<(), String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn line(&self) -> String {
        match &self.outcome {
            Ok(()) => format!("PASS {}", self.name),
            Err(why) => format!("FAIL {}: {why}", self.name),
        }
    }
}

type Check = fn() -> Result<(), String>;

fn t(dims: &[usize], data: Vec<f32>) -> Tensor {
    Tensor::from_vec(dims, data).expect("static example")
}

fn expect_eq(got: &[f32], want: &[f32]) -> Result<(), String> {
    let same = got.len() == want.len() && got.iter().zip(want).all(|(a, b)| a.to_bits() == b.to_bits());
    if same {
        Ok(())
    } else {
        Err(format!("got {got:?}, want {want:?}"))
    }
}

fn expect_close(got: &[f32], want: &[f32], tol: f32) -> Result<(), String> {
    let close = got.len() == want.len() && got.iter().zip(want).all(|(a, b)| (a - b).abs() <= tol);
    if close {
        Ok(())
    } else {
        Err(format!("got {got:?}, want {want:?} within {tol}"))
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

const CHECKS: &[(&str, Check)] = &[
    ("varint_150", || {
        match decode_varint(&[0x96, 0x01], 0).map_err(err)? {
            (150, 2) => Ok(()),
            other => Err(format!("{other:?}")),
        }
    }),
    ("varint_300", || {
        match decode_varint(&[0xAC, 0x02], 0).map_err(err)? {
            (300, 2) => Ok(()),
            other => Err(format!("{other:?}")),
        }
    }),
    ("conv_direct_sum", || {
        let x = t(&[1, 1, 3, 3], (1..=9).map(|v| v as f32).collect());
        let w = t(&[1, 1, 3, 3], vec![1.0; 9]);
        let y = kernels::conv2d_direct(&x, &w, None, &ConvParams::new(3, 1, 0), 1).map_err(err)?;
        expect_eq(y.data(), &[45.0])
    }),
    ("conv_gemm_padded", || {
        let x = t(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let w = t(&[1, 1, 3, 3], vec![1.0; 9]);
        let p = ConvParams::new(3, 1, 1);
        let y = kernels::conv2d_gemm(&x, &w, None, &p, GemmAlgo::Blocked(BlockSize::default()), 1)
            .map_err(err)?;
        expect_eq(y.data(), &[10.0; 4])
    }),
    ("depthwise_matches_direct", || {
        let x = Tensor::random(Shape::new(vec![1, 4, 7, 7]).map_err(err)?, 1);
        let w = Tensor::random(Shape::new(vec![4, 1, 3, 3]).map_err(err)?, 2);
        let p = ConvParams::new(3, 2, 1).with_groups(4);
        let a = kernels::depthwise_conv2d(&x, &w, None, &p, 1).map_err(err)?;
        let b = kernels::conv2d_direct(&x, &w, None, &p, 1).map_err(err)?;
        expect_eq(a.data(), b.data())
    }),
    ("im2col_2x2", || {
        let x = t(&[1, 1, 3, 3], (1..=9).map(|v| v as f32).collect());
        let m = kernels::im2col(&x, &ConvParams::new(2, 1, 0), 0, 0).map_err(err)?;
        expect_eq(m.row(0), &[1.0, 2.0, 4.0, 5.0])
    }),
    ("gemm_2x2", || {
        let a = Matrix::from_rows(&[&[1., 2.], &[3., 4.]]).map_err(err)?;
        let b = Matrix::from_rows(&[&[5., 6.], &[7., 8.]]).map_err(err)?;
        expect_eq(kernels::gemm_naive(&a, &b).map_err(err)?.data(), &[19., 22., 43., 50.])
    }),
    ("gemm_blocked_bitwise", || {
        let a = Matrix::new(33, 17, Tensor::random(Shape::new(vec![33 * 17]).map_err(err)?, 3).into_data())
            .map_err(err)?;
        let b = Matrix::new(17, 9, Tensor::random(Shape::new(vec![17 * 9]).map_err(err)?, 4).into_data())
            .map_err(err)?;
        let bs = BlockSize::new(4, 4, 4).map_err(err)?;
        expect_eq(
            kernels::gemm_blocked(&a, &b, bs).map_err(err)?.data(),
            kernels::gemm_naive(&a, &b).map_err(err)?.data(),
        )
    }),
    ("maxpool_2x2", || {
        let x = t(&[1, 1, 2, 2], vec![1.0, 5.0, 3.0, 2.0]);
        expect_eq(kernels::maxpool2d(&x, &PoolParams::new(2, 2, 0), 1).map_err(err)?.data(), &[5.0])
    }),
    ("avgpool_2x2", || {
        let x = t(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        expect_eq(kernels::avgpool2d(&x, &PoolParams::new(2, 2, 0), 1).map_err(err)?.data(), &[2.5])
    }),
    ("batch_norm", || {
        let one = |v| t(&[1], vec![v]);
        let y = kernels::batch_norm_inference(&t(&[1, 1, 1, 1], vec![2.0]), &one(3.0), &one(0.5), &one(1.0), &one(1.0), 0.0)
            .map_err(err)?;
        expect_eq(y.data(), &[3.5])
    }),
    ("softmax", || {
        let y = kernels::softmax(&t(&[1, 2], vec![0.0, 3f32.ln()]), 1).map_err(err)?;
        expect_close(y.data(), &[0.25, 0.75], 1e-6)
    }),
    ("relu", || expect_eq(kernels::relu(&t(&[4], vec![-1.0, 0.0, 2.0, -3.0])).data(), &[0.0, 0.0, 2.0, 0.0])),
    ("concat_channels", || {
        let a = t(&[1, 1, 1, 2], vec![1.0, 2.0]);
        let b = t(&[1, 2, 1, 2], vec![3.0, 4.0, 5.0, 6.0]);
        expect_eq(kernels::concat(&[&a, &b], 1).map_err(err)?.data(), &[1., 2., 3., 4., 5., 6.])
    }),
    ("shape_stride2", || {
        let g = Graph::new("s")
            .with_input("x", &[1, 3, 224, 224])
            .with_initializer("w", Tensor::zeros(Shape::new(vec![64, 3, 7, 7]).map_err(err)?))
            .with_node(Node::new("c", Op::Conv(ConvParams::new(7, 2, 3)), &["x", "w"], &["y"]))
            .with_output("y");
        let shapes: HashMap<String, Shape> = g.declared_input_shapes().ok_or("no shapes")?;
        let out = infer_shapes(&g, &shapes).map_err(err)?;
        match out["y"].shape.dims() {
            [1, 64, 112, 112] => Ok(()),
            d => Err(format!("{d:?}")),
        }
    }),
    ("bn_fold", || {
        let w = t(&[1, 1, 1, 1], vec![1.5]);
        let g = Graph::new("f")
            .with_input("x", &[1, 1, 2, 2])
            .with_initializer("w", w)
            .with_initializer("g", t(&[1], vec![2.0]))
            .with_initializer("b", t(&[1], vec![1.0]))
            .with_initializer("m", t(&[1], vec![0.5]))
            .with_initializer("v", t(&[1], vec![0.25]))
            .with_node(Node::new("c", Op::Conv(ConvParams::new(1, 1, 0)), &["x", "w"], &["c"]))
            .with_node(Node::new("bn", Op::BatchNorm { epsilon: 0.0 }, &["c", "g", "b", "m", "v"], &["y"]))
            .with_output("y");
        let (out, _) = fold_batch_norm(&g);
        let conv = out.nodes.first().ok_or("no nodes")?;
        expect_eq(out.initializers[&conv.inputs[1]].data(), &[6.0])?;
        expect_eq(out.initializers[&conv.inputs[2]].data(), &[-1.0])
    }),
    ("stats", || {
        let s = Stats::of(&[3, 1, 2]).ok_or("empty")?;
        if (s.min_ns, s.median_ns, s.mean_ns) == (1, 2.0, 2.0) {
            Ok(())
        } else {
            Err(format!("{s:?}"))
        }
    }),
];

pub fn run_selftest() -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|(name, check)| CheckResult {
            name,
            outcome: check(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let results = run_selftest();
        assert!(results.len() >= 15);
        for r in &results {
            assert!(r.passed(), "{}", r.line());
        }
    }
}
