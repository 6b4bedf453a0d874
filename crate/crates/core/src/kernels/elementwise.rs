use super::relu_scalar;
use crate::error::{Error, Result};
use crate::graph::normalize_axis;
use crate::tensor::{Shape, Tensor};

pub fn relu(x: &Tensor) -> Tensor {
    x.map(relu_scalar)
}

/// Elementwise sum of equal shapes.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "add needs equal shapes, got {} and {}",
            a.shape(),
            b.shape()
        )));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::new(a.shape().clone(), data)
}

pub fn concat(inputs: &[&Tensor], axis: i64) -> Result<Tensor> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::shape("concat needs at least one input"))?;
    let rank = first.shape().rank();
    let axis = normalize_axis(axis, rank, false)
        .ok_or_else(|| Error::shape(format!("concat axis {axis} out of range for rank {rank}")))?;
    let mut dims = first.dims().to_vec();
    dims[axis] = 0;
    for t in inputs {
        let d = t.dims();
        let compatible = d.len() == rank
            && d.iter()
                .zip(first.dims())
                .enumerate()
                .all(|(i, (a, b))| i == axis || a == b);
        if !compatible {
            return Err(Error::shape(format!(
                "concat on axis {axis}: {} does not match {}",
                t.shape(),
                first.shape()
            )));
        }
        dims[axis] += d[axis];
    }
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let mut data = Vec::with_capacity(dims.iter().product());
    for o in 0..outer {
        for t in inputs {
            let run = t.dims()[axis] * inner;
            data.extend_from_slice(&t.data()[o * run..(o + 1) * run]);
        }
    }
    Tensor::new(Shape::new(dims)?, data)
}

/// Inference-mode batch normalization over the channel axis (axis 1).
pub fn batch_norm_inference(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    mean: &Tensor,
    var: &Tensor,
    epsilon: f32,
) -> Result<Tensor> {
    let dims = x.dims();
    if dims.len() < 2 {
        return Err(Error::shape(format!("batch norm needs rank >= 2, got {}", x.shape())));
    }
    let c = dims[1];
    for (name, t) in [("scale", gamma), ("bias", beta), ("mean", mean), ("var", var)] {
        if t.numel() != c {
            return Err(Error::shape(format!(
                "batch norm {name} has {} values for {c} channels",
                t.numel()
            )));
        }
    }
    let inner: usize = dims[2..].iter().product();
    let mut y = x.data().to_vec();
    for (i, chunk) in y.chunks_exact_mut(inner).enumerate() {
        let ch = i % c;
        let (g, b, m) = (gamma.data()[ch], beta.data()[ch], mean.data()[ch]);
        let sd = (var.data()[ch] + epsilon).sqrt();
        for v in chunk {
            *v = g * (*v - m) / sd + b;
        }
    }
    Tensor::new(x.shape().clone(), y)
}

/// Numerically stable softmax along `axis`.
pub fn softmax(x: &Tensor, axis: i64) -> Result<Tensor> {
    let dims = x.dims();
    let axis = normalize_axis(axis, dims.len(), false).ok_or_else(|| {
        Error::shape(format!("softmax axis {axis} out of range for {}", x.shape()))
    })?;
    let len = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let mut y = x.data().to_vec();
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| (o * len + k) * inner + i;
            let max = (0..len).map(|k| y[at(k)]).fold(f32::NEG_INFINITY, f32::max);
            let mut sum = 0.0f32;
            for k in 0..len {
                let e = (y[at(k)] - max).exp();
                y[at(k)] = e;
                sum += e;
            }
            for k in 0..len {
                y[at(k)] /= sum;
            }
        }
    }
    Tensor::new(x.shape().clone(), y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(dims: &[usize], data: Vec<f32>) -> Tensor {
        Tensor::from_vec(dims, data).unwrap()
    }

    #[test]
    fn relu_example() {
        let y = relu(&t(&[4], vec![-1.0, 0.0, 2.0, -3.0]));
        assert_eq!(y.data(), &[0.0, 0.0, 2.0, 0.0]);
        assert!(relu(&t(&[1], vec![f32::NAN])).data()[0].is_nan());
    }

    #[test]
    fn add_example() {
        let y = add(&t(&[2], vec![1.0, 2.0]), &t(&[2], vec![3.0, 4.0])).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0]);
        assert!(add(&t(&[2], vec![1.0, 2.0]), &t(&[1, 2], vec![3.0, 4.0])).is_err());
    }

    #[test]
    fn concat_example() {
        let a = t(&[1, 1, 1, 2], vec![1.0, 2.0]);
        let b = t(&[1, 2, 1, 2], vec![3.0, 4.0, 5.0, 6.0]);
        let y = concat(&[&a, &b], 1).unwrap();
        assert_eq!(y.dims(), &[1, 3, 1, 2]);
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let c = t(&[1, 1, 2, 2], vec![0.0; 4]);
        assert!(concat(&[&a, &c], 1).is_err());
        // inner axis, several outer rows
        let y = concat(&[&t(&[2, 1], vec![1.0, 2.0]), &t(&[2, 2], vec![3.0, 4.0, 5.0, 6.0])], -1).unwrap();
        assert_eq!(y.data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
    }

    #[test]
    fn batch_norm_example() {
        let one = |v| t(&[1], vec![v]);
        let x = t(&[1, 1, 1, 1], vec![2.0]);
        let y = batch_norm_inference(&x, &one(3.0), &one(0.5), &one(1.0), &one(1.0), 0.0).unwrap();
        assert_eq!(y.data(), &[3.5]);
    }

    #[test]
    fn batch_norm_identity() {
        let x = Tensor::random(Shape::new(vec![2, 3, 4, 4]).unwrap(), 1);
        let ones = t(&[3], vec![1.0; 3]);
        let zeros = t(&[3], vec![0.0; 3]);
        let y = batch_norm_inference(&x, &ones, &zeros, &zeros, &ones, 0.0).unwrap();
        assert!(y.bitwise_eq(&x));
    }

    #[test]
    fn softmax_examples() {
        let y = softmax(&t(&[1, 2], vec![0.0, 0.0]), 1).unwrap();
        assert_eq!(y.data(), &[0.5, 0.5]);
        let y = softmax(&t(&[1, 2], vec![0.0, 3f32.ln()]), -1).unwrap();
        assert!((y.data()[0] - 0.25).abs() < 1e-6 && (y.data()[1] - 0.75).abs() < 1e-6);
        let y = softmax(&t(&[1, 3], vec![1000.0, 1000.0, 1000.0]), 1).unwrap();
        assert!(y.data().iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-6));
    }

    #[test]
    fn softmax_inner_axis() {
        // axis 1 of [1,2,2]: lanes are (0,2) and (1,3)
        let y = softmax(&t(&[1, 2, 2], vec![0.0, 1.0, 0.0, 1.0]), 1).unwrap();
        assert_eq!(y.data(), &[0.5; 4]);
    }

    fn sixteenths(len: usize) -> impl Strategy<Value = Vec<f32>> {
        prop::collection::vec((-160i32..160).prop_map(|k| k as f32 / 16.0), len)
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(v in (1usize..12).prop_flat_map(sixteenths)) {
            let n = v.len();
            let y = softmax(&t(&[1, n], v), 1).unwrap();
            let sum: f32 = y.data().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-5);
            prop_assert!(y.data().iter().all(|&p| (0.0..=1.0).contains(&p)));
        }

        #[test]
        fn softmax_shift_invariant(v in (1usize..12).prop_flat_map(sixteenths), shift in -20i32..20) {
            let n = v.len();
            let shifted: Vec<f32> = v.iter().map(|&x| x + shift as f32).collect();
            let a = softmax(&t(&[1, n], v), 1).unwrap();
            let b = softmax(&t(&[1, n], shifted), 1).unwrap();
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }

        #[test]
        fn relu_is_idempotent(v in prop::collection::vec(-1e3f32..1e3, 1..64)) {
            let n = v.len();
            let once = relu(&t(&[n], v));
            prop_assert!(relu(&once).bitwise_eq(&once));
            prop_assert!(once.data().iter().all(|&x| x >= 0.0));
        }
    }
}
