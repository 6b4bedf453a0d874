//! Matrix multiplication: a naive reference and a cache-blocked variant.
//!
//! Both accumulate every output element over `k` in ascending order, one
//! multiply-add at a time, starting from zero. The blocked variant therefore
//! produces results that are bitwise identical to the naive one for every
//! block size; only the memory access pattern changes.

use super::parallel::par_units;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-major dense matrix with non-zero extents.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Matrix> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(format!(
                "matrix extents must be >= 1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f32]]) -> Result<Matrix> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Matrix {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Matrix::new(n, n, data).expect("n >= 1")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

/// Tile extents over the M, N and K dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSize {
    pub mb: usize,
    pub nb: usize,
    pub kb: usize,
}

impl BlockSize {
    pub fn new(mb: usize, nb: usize, kb: usize) -> Result<BlockSize> {
        if mb == 0 || nb == 0 || kb == 0 {
            return Err(Error::Config(format!(
                "block sizes must be >= 1, got ({mb},{nb},{kb})"
            )));
        }
        Ok(BlockSize { mb, nb, kb })
    }
}

impl Default for BlockSize {
    fn default() -> Self {
        BlockSize {
            mb: 64,
            nb: 64,
            kb: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GemmAlgo {
    Naive,
    Blocked(BlockSize),
}

fn check_dims(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.cols != b.rows {
        return Err(Error::shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(())
}

pub fn gemm_naive(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    gemm(a, b, GemmAlgo::Naive, 1)
}

pub fn gemm_blocked(a: &Matrix, b: &Matrix, block: BlockSize) -> Result<Matrix> {
    gemm(a, b, GemmAlgo::Blocked(block), 1)
}

pub fn gemm(a: &Matrix, b: &Matrix, algo: GemmAlgo, threads: usize) -> Result<Matrix> {
    check_dims(a, b)?;
    let mut c = vec![0.0; a.rows * b.cols];
    matmul_into(algo, &a.data, &b.data, &mut c, a.rows, a.cols, b.cols, threads);
    Ok(Matrix {
        rows: a.rows,
        cols: b.cols,
        data: c,
    })
}

/// `c[m×n] = a[m×k] · b[k×n]`, overwriting `c`. Rows of `c` are split across
/// `threads` workers.
#[allow(clippy::too_many_arguments)]
pub(crate) fn matmul_into(
    algo: GemmAlgo,
    a: &[f32],
    b: &[f32],
    c: &mut [f32],
    m: usize,
    k: usize,
    n: usize,
    threads: usize,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    par_units(c, n, threads, |first_row, c_rows| {
        let rows = c_rows.len() / n;
        let a_rows = &a[first_row * k..(first_row + rows) * k];
        match algo {
            GemmAlgo::Naive => naive_rows(a_rows, b, c_rows, k, n),
            GemmAlgo::Blocked(bs) => blocked_rows(a_rows, b, c_rows, k, n, bs),
        }
    });
}

fn naive_rows(a: &[f32], b: &[f32], c: &mut [f32], k: usize, n: usize) {
    for (a_row, c_row) in a.chunks_exact(k).zip(c.chunks_exact_mut(n)) {
        for (j, out) in c_row.iter_mut().enumerate() {
            let mut acc = 0.0f32;
            for (p, &av) in a_row.iter().enumerate() {
                acc += av * b[p * n + j];
            }
            *out = acc;
        }
    }
}

fn blocked_rows(a: &[f32], b: &[f32], c: &mut [f32], k: usize, n: usize, bs: BlockSize) {
    let m = c.len() / n;
    c.fill(0.0);
    for i0 in (0..m).step_by(bs.mb) {
        let i1 = (i0 + bs.mb).min(m);
        for j0 in (0..n).step_by(bs.nb) {
            let j1 = (j0 + bs.nb).min(n);
            // k blocks ascend for a fixed (i, j) tile: per-element order is 0..k
            for p0 in (0..k).step_by(bs.kb) {
                let p1 = (p0 + bs.kb).min(k);
                for i in i0..i1 {
                    let c_row = &mut c[i * n + j0..i * n + j1];
                    let a_row = &a[i * k..(i + 1) * k];
                    for p in p0..p1 {
                        let av = a_row[p];
                        let b_row = &b[p * n + j0..p * n + j1];
                        for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                            *cv += av * bv;
                        }
                    }
                }
            }
        }
    }
}

/// Fully connected layer: `y = x · W (or Wᵀ) + b`, with an optional ReLU.
pub fn gemm_fc(
    x: &Tensor,
    w: &Tensor,
    b: Option<&Tensor>,
    trans_b: bool,
    fused_relu: bool,
    algo: GemmAlgo,
    threads: usize,
) -> Result<Tensor> {
    let (xd, wd) = (x.dims(), w.dims());
    if xd.len() != 2 || wd.len() != 2 {
        return Err(Error::shape(format!(
            "gemm needs rank-2 operands, got {} and {}",
            x.shape(),
            w.shape()
        )));
    }
    let (rows, inner) = (xd[0], xd[1]);
    let (wk, m) = if trans_b { (wd[1], wd[0]) } else { (wd[0], wd[1]) };
    if wk != inner {
        return Err(Error::shape(format!(
            "gemm inner dimensions differ: {} vs {} (trans_b={trans_b})",
            x.shape(),
            w.shape()
        )));
    }
    if let Some(b) = b {
        if b.numel() != m {
            return Err(Error::shape(format!(
                "bias {} does not broadcast to {m} columns",
                b.shape()
            )));
        }
    }

    let transposed;
    let bmat: &[f32] = if trans_b {
        transposed = Matrix::new(wd[0], wd[1], w.data().to_vec())?.transpose();
        transposed.data()
    } else {
        w.data()
    };
    let mut y = vec![0.0; rows * m];
    matmul_into(algo, x.data(), bmat, &mut y, rows, inner, m, threads);
    for row in y.chunks_exact_mut(m) {
        if let Some(b) = b {
            for (v, &bv) in row.iter_mut().zip(b.data()) {
                *v += bv;
            }
        }
        if fused_relu {
            for v in row.iter_mut() {
                *v = super::relu_scalar(*v);
            }
        }
    }
    Tensor::from_vec(&[rows, m], y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Lcg64;

    fn random(rows: usize, cols: usize, rng: &mut Lcg64) -> Matrix {
        Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
    }

    fn bits(m: &Matrix) -> Vec<u32> {
        m.data().iter().map(|v| v.to_bits()).collect()
    }

    #[test]
    fn identity_times_a() {
        let mut rng = Lcg64::new(1);
        let a = random(2, 5, &mut rng);
        assert_eq!(gemm_naive(&Matrix::identity(2), &a).unwrap(), a);
    }

    #[test]
    fn two_by_two() {
        let a = Matrix::from_rows(&[&[1., 2.], &[3., 4.]]).unwrap();
        let b = Matrix::from_rows(&[&[5., 6.], &[7., 8.]]).unwrap();
        let c = gemm_naive(&a, &b).unwrap();
        assert_eq!(c.data(), &[19., 22., 43., 50.]);
    }

    #[test]
    fn empty_and_mismatched() {
        assert!(matches!(Matrix::new(0, 3, vec![]), Err(Error::Shape(_))));
        let a = Matrix::identity(2);
        let b = Matrix::identity(3);
        assert!(matches!(gemm_naive(&a, &b), Err(Error::Shape(_))));
        assert!(matches!(
            gemm_blocked(&a, &b, BlockSize::default()),
            Err(Error::Shape(_))
        ));
        assert!(BlockSize::new(0, 1, 1).is_err());
    }

    #[test]
    fn degenerate_and_oversized_blocks() {
        let mut rng = Lcg64::new(2);
        let a = random(7, 9, &mut rng);
        let b = random(9, 5, &mut rng);
        let reference = bits(&gemm_naive(&a, &b).unwrap());
        for bs in [(1, 1, 1), (100, 100, 100)] {
            let bs = BlockSize::new(bs.0, bs.1, bs.2).unwrap();
            assert_eq!(bits(&gemm_blocked(&a, &b, bs).unwrap()), reference);
        }
    }

    #[test]
    fn seeded_64_cube() {
        let mut rng = Lcg64::new(64);
        let a = random(64, 64, &mut rng);
        let b = random(64, 64, &mut rng);
        let bs = BlockSize::new(16, 16, 16).unwrap();
        assert_eq!(
            bits(&gemm_blocked(&a, &b, bs).unwrap()),
            bits(&gemm_naive(&a, &b).unwrap())
        );
    }

    #[test]
    fn threads_do_not_change_bits() {
        let mut rng = Lcg64::new(9);
        let a = random(37, 20, &mut rng);
        let b = random(20, 11, &mut rng);
        for algo in [GemmAlgo::Naive, GemmAlgo::Blocked(BlockSize::new(8, 4, 3).unwrap())] {
            let one = bits(&gemm(&a, &b, algo, 1).unwrap());
            for t in [2, 4, 8] {
                assert_eq!(bits(&gemm(&a, &b, algo, t).unwrap()), one);
            }
        }
    }

    #[test]
    fn fc_examples() {
        let x = Tensor::random(crate::tensor::Shape::new(vec![3, 4]).unwrap(), 5);
        let eye = Tensor::from_vec(&[4, 4], Matrix::identity(4).into_data()).unwrap();
        let zero_b = Tensor::zeros(crate::tensor::Shape::new(vec![4]).unwrap());
        let y = gemm_fc(&x, &eye, Some(&zero_b), false, false, GemmAlgo::Naive, 1).unwrap();
        assert!(y.bitwise_eq(&x));

        let zx = Tensor::zeros(crate::tensor::Shape::new(vec![2, 4]).unwrap());
        let w = Tensor::random(crate::tensor::Shape::new(vec![4, 3]).unwrap(), 6);
        let b = Tensor::from_vec(&[3], vec![0.5, -1.0, 2.0]).unwrap();
        let y = gemm_fc(&zx, &w, Some(&b), false, false, GemmAlgo::Naive, 1).unwrap();
        assert_eq!(y.data(), &[0.5, -1.0, 2.0, 0.5, -1.0, 2.0]);
    }

    #[test]
    fn fc_trans_b_matches_pretransposed() {
        let x = Tensor::random(crate::tensor::Shape::new(vec![2, 6]).unwrap(), 7);
        let w = Tensor::random(crate::tensor::Shape::new(vec![6, 5]).unwrap(), 8);
        // transpose oracle, independent of Matrix::transpose
        let mut wt = vec![0.0; 30];
        for r in 0..6 {
            for c in 0..5 {
                wt[c * 6 + r] = w.data()[r * 5 + c];
            }
        }
        let wt = Tensor::from_vec(&[5, 6], wt).unwrap();
        for algo in [GemmAlgo::Naive, GemmAlgo::Blocked(BlockSize::default())] {
            let plain = gemm_fc(&x, &w, None, false, false, algo, 1).unwrap();
            let trans = gemm_fc(&x, &wt, None, true, false, algo, 1).unwrap();
            assert!(plain.bitwise_eq(&trans));
        }
        assert!(gemm_fc(&x, &w, None, true, false, GemmAlgo::Naive, 1).is_err());
    }
}
