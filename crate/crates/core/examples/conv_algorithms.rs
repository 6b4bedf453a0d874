//! Direct, im2col + GEMM and depthwise convolution side by side on one layer,
//! with a rough timing of each.
//!
//!     cargo run --release --example conv_algorithms -- [channels] [size]

use std::time::Instant;

use orpheus::graph::ConvParams;
use orpheus::kernels::{conv2d_direct, conv2d_gemm, depthwise_conv2d, BlockSize, GemmAlgo};
use orpheus::{Shape, Tensor};

fn time<F: FnMut() -> Tensor>(reps: usize, mut f: F) -> (Tensor, f64) {
    let y = f();
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(f());
    }
    (y, start.elapsed().as_secs_f64() * 1e3 / reps as f64)
}

fn main() -> orpheus::Result<()> {
    let mut args = std::env::args().skip(1);
    let c: usize = args.next().map_or(64, |v| v.parse().expect("channels"));
    let hw: usize = args.next().map_or(28, |v| v.parse().expect("size"));
    let x = Tensor::random(Shape::new(vec![1, c, hw, hw])?, 1);
    let reps = 5;

    println!("dense 3x3 conv, {c} -> {c} channels, {hw}x{hw}");
    let w = Tensor::random(Shape::new(vec![c, c, 3, 3])?, 2);
    let p = ConvParams::new(3, 1, 1);
    let (a, t_direct) = time(reps, || conv2d_direct(&x, &w, None, &p, 1).unwrap());
    let naive = GemmAlgo::Naive;
    let (b, t_naive) = time(reps, || conv2d_gemm(&x, &w, None, &p, naive, 1).unwrap());
    let blocked = GemmAlgo::Blocked(BlockSize::default());
    let (d, t_blocked) = time(reps, || conv2d_gemm(&x, &w, None, &p, blocked, 1).unwrap());
    println!("  direct          {t_direct:8.2} ms");
    println!("  im2col + naive  {t_naive:8.2} ms");
    println!("  im2col + blocked{t_blocked:8.2} ms");
    // naive and blocked gemm accumulate in the same order
    assert!(b.bitwise_eq(&d));
    println!("  direct vs gemm max |diff| {:.2e}", a.compare(&d, 1e-3)?.max_abs_diff);

    println!("depthwise 3x3 conv, {c} channels");
    let wd = Tensor::random(Shape::new(vec![c, 1, 3, 3])?, 3);
    let pd = p.with_groups(c);
    let (e, t_dw) = time(reps, || depthwise_conv2d(&x, &wd, None, &pd, 1).unwrap());
    let (f, t_grouped) = time(reps, || conv2d_gemm(&x, &wd, None, &pd, blocked, 1).unwrap());
    println!("  specialized     {t_dw:8.3} ms");
    println!("  grouped gemm    {t_grouped:8.3} ms");
    println!("  max |diff| {:.2e}", e.compare(&f, 1e-3)?.max_abs_diff);
    Ok(())
}
