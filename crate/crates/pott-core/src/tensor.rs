//! Dense row-major f64 tensors and the POTT binary encoding.
//!
//! All numeric state in this project is 64-bit floats in row-major order,
//! and every reduction runs in fixed index-ascending order, so identical
//! inputs produce bit-identical outputs on any platform.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Shape plus flattened values. `values.len()` always equals the product of
/// the extents; constructors enforce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor")]
pub struct DenseTensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl TryFrom<RawTensor> for DenseTensor {
    type Error = ShapeError;

    fn try_from(raw: RawTensor) -> Result<Self, ShapeError> {
        DenseTensor::new(raw.shape, raw.values)
    }
}

/// A shape/length disagreement. The message carries both sides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeError {
    pub op: &'static str,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl core::fmt::Display for ShapeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "shape mismatch in {}: left {:?}, right {:?}",
            self.op, self.left, self.right
        )
    }
}

fn numel_of(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self, ShapeError> {
        if numel_of(&shape) != values.len() {
            return Err(ShapeError {
                op: "new",
                left: shape,
                right: vec![values.len()],
            });
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = numel_of(&shape);
        Self {
            shape,
            values: vec![0.0; n],
        }
    }

    pub fn filled(shape: Vec<usize>, v: f64) -> Self {
        let n = numel_of(&shape);
        Self {
            shape,
            values: vec![v; n],
        }
    }

    /// A `[1, 1]` tensor, the scalar convention used by the autodiff graph.
    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![1, 1],
            values: vec![v],
        }
    }

    /// Rank-1 tensor over `values`.
    pub fn vector(values: Vec<f64>) -> Self {
        Self {
            shape: vec![values.len()],
            values,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Rows of a rank-2 tensor (or 1 for rank-1, mirroring a row vector).
    pub fn rows(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[0]
        } else {
            1
        }
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[1],
            1 => self.shape[0],
            _ => self.numel(),
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.numel() == 1
    }

    pub fn scalar_value(&self) -> f64 {
        self.values[0]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Self, ShapeError> {
        if numel_of(&shape) != self.numel() {
            return Err(ShapeError {
                op: "reshape",
                left: self.shape.clone(),
                right: shape,
            });
        }
        Ok(Self {
            shape,
            values: self.values.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip(&self, other: &Self, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self, ShapeError> {
        if self.shape != other.shape {
            return Err(ShapeError {
                op,
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            values,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, ShapeError> {
        self.zip(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, ShapeError> {
        self.zip(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self, ShapeError> {
        self.zip(other, "mul", |a, b| a * b)
    }

    pub fn div(&self, other: &Self) -> Result<Self, ShapeError> {
        self.zip(other, "div", |a, b| a / b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    /// `[n, k] x [k, m] -> [n, m]`, plain sequential triple loop.
    pub fn matmul(&self, other: &Self) -> Result<Self, ShapeError> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(ShapeError {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let (n, k) = (self.shape[0], self.shape[1]);
        let m = other.shape[1];
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for p in 0..k {
                let a = self.values[i * k + p];
                let row = &other.values[p * m..(p + 1) * m];
                let dst = &mut out[i * m..(i + 1) * m];
                for j in 0..m {
                    dst[j] += a * row[j];
                }
            }
        }
        Ok(Self {
            shape: vec![n, m],
            values: out,
        })
    }

    pub fn transpose(&self) -> Result<Self, ShapeError> {
        if self.rank() != 2 {
            return Err(ShapeError {
                op: "transpose",
                left: self.shape.clone(),
                right: Vec::new(),
            });
        }
        let (n, m) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[j * n + i] = self.values[i * m + j];
            }
        }
        Ok(Self {
            shape: vec![m, n],
            values: out,
        })
    }

    /// Index-ascending sum; the fixed reduction order of the project.
    pub fn sum(&self) -> f64 {
        let mut acc = 0.0;
        for &v in &self.values {
            acc += v;
        }
        acc
    }

    pub fn dot(&self, other: &Self) -> Result<f64, ShapeError> {
        Ok(self.mul(other)?.sum())
    }

    pub fn l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        for &v in &self.values {
            acc += v * v;
        }
        crate::fmath::sqrt(acc)
    }
}

/// L2 distance between two flat tensors, the distance used project-wide.
pub fn l2_distance(a: &DenseTensor, b: &DenseTensor) -> Result<f64, ShapeError> {
    Ok(a.sub(b)?.l2_norm())
}

// ---------------------------------------------------------------------------
// POTT binary encoding
// ---------------------------------------------------------------------------

/// Header: magic `POTT`, version 0x01, dtype 0x00 (f64), u8 ndim, 4 zero
/// padding bytes, then `ndim` little-endian u64 extents and the row-major
/// little-endian f64 payload.
pub const POTT_MAGIC: [u8; 4] = *b"POTT";
pub const POTT_VERSION: u8 = 0x01;
pub const POTT_DTYPE_F64: u8 = 0x00;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CodecError {
    BadMagic,
    UnsupportedVersion(u8),
    UnsupportedDtype(u8),
    Truncated { needed: usize, got: usize },
    ExtentOverflow,
}

impl core::fmt::Display for CodecError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CodecError::BadMagic => write!(f, "not a POTT tensor (bad magic)"),
            CodecError::UnsupportedVersion(v) => write!(f, "unsupported POTT version {v:#04x}"),
            CodecError::UnsupportedDtype(d) => write!(f, "unsupported POTT dtype {d:#04x}"),
            CodecError::Truncated { needed, got } => {
                write!(f, "truncated POTT tensor: needed {needed} bytes, got {got}")
            }
            CodecError::ExtentOverflow => write!(f, "POTT extents overflow usize"),
        }
    }
}

pub fn encode_pott(t: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(11 + 8 * t.rank() + 8 * t.numel());
    out.extend_from_slice(&POTT_MAGIC);
    out.push(POTT_VERSION);
    out.push(POTT_DTYPE_F64);
    out.push(t.rank() as u8);
    out.extend_from_slice(&[0, 0, 0, 0]);
    for &e in t.shape() {
        out.extend_from_slice(&(e as u64).to_le_bytes());
    }
    for &v in t.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_pott(bytes: &[u8]) -> Result<DenseTensor, CodecError> {
    if bytes.len() < 11 {
        return Err(CodecError::Truncated {
            needed: 11,
            got: bytes.len(),
        });
    }
    if bytes[0..4] != POTT_MAGIC {
        return Err(CodecError::BadMagic);
    }
    if bytes[4] != POTT_VERSION {
        return Err(CodecError::UnsupportedVersion(bytes[4]));
    }
    if bytes[5] != POTT_DTYPE_F64 {
        return Err(CodecError::UnsupportedDtype(bytes[5]));
    }
    let ndim = bytes[6] as usize;
    let header = 11 + 8 * ndim;
    if bytes.len() < header {
        return Err(CodecError::Truncated {
            needed: header,
            got: bytes.len(),
        });
    }
    let mut shape = Vec::with_capacity(ndim);
    let mut numel: usize = 1;
    for d in 0..ndim {
        let off = 11 + 8 * d;
        let e = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let e: usize = e.try_into().map_err(|_| CodecError::ExtentOverflow)?;
        numel = numel.checked_mul(e).ok_or(CodecError::ExtentOverflow)?;
        shape.push(e);
    }
    let total = header + 8 * numel;
    if bytes.len() != total {
        return Err(CodecError::Truncated {
            needed: total,
            got: bytes.len(),
        });
    }
    let mut values = Vec::with_capacity(numel);
    for i in 0..numel {
        let off = header + 8 * i;
        values.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
    }
    Ok(DenseTensor { shape, values })
}

/// Human-oriented shape rendering for messages, e.g. `[2, 3]`.
pub fn shape_string(shape: &[usize]) -> String {
    format!("{shape:?}")
}
