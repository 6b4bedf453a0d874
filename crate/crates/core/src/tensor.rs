//! Dense float32 tensors in NCHW order.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Lcg64;

pub const MAX_RANK: usize = 4;

/// Tensor extents, 1 to 4 dims, each at least 1.
#[derive(Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() || dims.len() > MAX_RANK {
            return Err(Error::shape(format!(
                "rank must be between 1 and {MAX_RANK}, got {}",
                dims.len()
            )));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::shape(format!(
                "extent {pos} of {dims:?} is zero"
            )));
        }
        Ok(Shape(dims))
    }

    /// Builds a shape from signed extents, as found in model files.
    pub fn from_i64(dims: &[i64]) -> Result<Self> {
        let mut out = Vec::with_capacity(dims.len());
        for &d in dims {
            if d < 1 {
                return Err(Error::shape(format!("non-positive extent {d} in {dims:?}")));
            }
            out.push(d as usize);
        }
        Shape::new(out)
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.0[axis]
    }

    /// `(N, C, H, W)` of a rank-4 shape.
    pub fn nchw(&self) -> Result<(usize, usize, usize, usize)> {
        match self.0[..] {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(Error::shape(format!("expected a rank-4 NCHW shape, got {self}"))),
        }
    }

    /// Row-major offset of a full coordinate.
    pub fn offset(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.0.len());
        coords
            .iter()
            .zip(&self.0)
            .fold(0, |acc, (&c, &d)| acc * d + c)
    }

    /// Inverse of [`Shape::offset`].
    pub fn coords(&self, mut offset: usize) -> Vec<usize> {
        let mut coords = vec![0; self.0.len()];
        for (slot, &d) in coords.iter_mut().zip(&self.0).rev() {
            *slot = offset % d;
            offset /= d;
        }
        coords
    }
}

impl<'de> Deserialize<'de> for Shape {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let dims = Vec::<i64>::deserialize(de)?;
        Shape::from_i64(&dims).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;

    /// Parses `1x3x32x32` (also accepts commas).
    fn from_str(s: &str) -> Result<Self> {
        let dims = s
            .split(['x', 'X', ','])
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::shape(format!("bad extent `{p}` in shape `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Shape::new(dims)
    }
}

/// How to populate a new tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FillSpec {
    Zeros,
    Constant(f32),
    /// 0, 1, 2, ... in row-major order.
    Sequence,
    /// Uniform in `[lo, hi)` from [`Lcg64`] seeded with `seed`.
    SeededUniform { seed: u64, lo: f32, hi: f32 },
}

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f32>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::shape(format!(
                "shape {shape} needs {} values, got {}",
                shape.numel(),
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn from_vec(dims: &[usize], data: Vec<f32>) -> Result<Self> {
        Tensor::new(Shape::new(dims)?, data)
    }

    pub fn create(shape: Shape, fill: FillSpec) -> Tensor {
        let n = shape.numel();
        let data = match fill {
            FillSpec::Zeros => vec![0.0; n],
            FillSpec::Constant(v) => vec![v; n],
            FillSpec::Sequence => (0..n).map(|i| i as f32).collect(),
            FillSpec::SeededUniform { seed, lo, hi } => {
                let mut rng = Lcg64::new(seed);
                (0..n).map(|_| rng.uniform(lo, hi)).collect()
            }
        };
        Tensor { shape, data }
    }

    pub fn zeros(shape: Shape) -> Tensor {
        Tensor::create(shape, FillSpec::Zeros)
    }

    pub fn random(shape: Shape, seed: u64) -> Tensor {
        Tensor::create(
            shape,
            FillSpec::SeededUniform {
                seed,
                lo: -1.0,
                hi: 1.0,
            },
        )
    }

    pub fn scalar1(v: f32) -> Tensor {
        Tensor {
            shape: Shape(vec![1]),
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn at(&self, coords: &[usize]) -> f32 {
        self.data[self.shape.offset(coords)]
    }

    pub fn reshape(&self, new: Shape) -> Result<Tensor> {
        if new.numel() != self.shape.numel() {
            return Err(Error::shape(format!(
                "cannot reshape {} ({} values) to {} ({} values)",
                self.shape,
                self.shape.numel(),
                new,
                new.numel()
            )));
        }
        Ok(Tensor {
            shape: new,
            data: self.data.clone(),
        })
    }

    /// Same as [`Tensor::reshape`] but reuses the buffer.
    pub fn into_reshaped(self, new: Shape) -> Result<Tensor> {
        if new.numel() != self.shape.numel() {
            return Err(Error::shape(format!(
                "cannot reshape {} to {}",
                self.shape, new
            )));
        }
        Ok(Tensor {
            shape: new,
            data: self.data,
        })
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Index of the largest value in each row over the last axis.
    pub fn argmax_last_axis(&self) -> Vec<usize> {
        let last = *self.shape.dims().last().unwrap();
        self.data
            .chunks(last)
            .map(|row| {
                let mut best = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }

    pub fn compare(&self, other: &Tensor, rel_floor: f32) -> Result<ComparisonReport> {
        compare(self, other, rel_floor)
    }

    pub fn bitwise_eq(&self, other: &Tensor) -> bool {
        self.shape == other.shape
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "Tensor({}, ", self.shape)?;
        if self.data.len() <= SHOWN {
            write!(f, "{:?})", self.data)
        } else {
            write!(f, "{:?}...)", &self.data[..SHOWN])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub max_abs_diff: f64,
    pub max_rel_diff: f64,
    pub argmax_match: bool,
    pub worst_index: usize,
}

/// Elementwise difference summary. NaN on either side counts as an infinite
/// difference unless both are NaN.
pub fn compare(a: &Tensor, b: &Tensor, rel_floor: f32) -> Result<ComparisonReport> {
    if a.shape != b.shape {
        return Err(Error::shape(format!(
            "cannot compare {} with {}",
            a.shape, b.shape
        )));
    }
    let mut report = ComparisonReport {
        max_abs_diff: 0.0,
        max_rel_diff: 0.0,
        argmax_match: a.argmax_last_axis() == b.argmax_last_axis(),
        worst_index: 0,
    };
    for (i, (&x, &y)) in a.data.iter().zip(&b.data).enumerate() {
        let (x, y) = (x as f64, y as f64);
        let abs = if (x.is_nan() && y.is_nan()) || x == y {
            0.0
        } else {
            let d = (x - y).abs();
            if d.is_nan() {
                f64::INFINITY
            } else {
                d
            }
        };
        let denom = x.abs().max(y.abs()).max(rel_floor as f64);
        let rel = if abs == 0.0 { 0.0 } else { abs / denom };
        if abs > report.max_abs_diff {
            report.max_abs_diff = abs;
            report.worst_index = i;
        }
        if rel > report.max_rel_diff {
            report.max_rel_diff = rel;
        }
    }
    Ok(report)
}

/// The `{"shape": [...], "data": [...]}` file form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonTensor {
    pub shape: Vec<i64>,
    pub data: Vec<f32>,
}

impl TryFrom<JsonTensor> for Tensor {
    type Error = Error;

    fn try_from(t: JsonTensor) -> Result<Tensor> {
        Tensor::new(Shape::from_i64(&t.shape)?, t.data)
    }
}

impl From<&Tensor> for JsonTensor {
    fn from(t: &Tensor) -> Self {
        JsonTensor {
            shape: t.dims().iter().map(|&d| d as i64).collect(),
            data: t.data.clone(),
        }
    }
}

pub fn f32_from_le_bytes(bytes: &[u8]) -> Result<Vec<f32>> {
    if !bytes.len().is_multiple_of(4) {
        return Err(Error::Input(format!(
            "raw float32 data has {} bytes, not a multiple of 4",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn f32_to_le_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Reads little-endian float32 values; the shape comes from the caller.
pub fn read_raw(path: &Path, shape: Shape) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let data = f32_from_le_bytes(&bytes)?;
    Tensor::new(shape, data).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

pub fn write_raw(path: &Path, t: &Tensor) -> Result<()> {
    std::fs::write(path, f32_to_le_bytes(t.data())).map_err(|e| Error::io(path, e))
}

pub fn read_json(path: &Path) -> Result<Tensor> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let jt: JsonTensor = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    Tensor::try_from(jt)
}

pub fn write_json(path: &Path, t: &Tensor) -> Result<()> {
    let text = serde_json::to_string(&JsonTensor::from(t)).expect("tensor serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
