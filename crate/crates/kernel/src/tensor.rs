//! Dense `(B, C, F, H, W)` tensors of `f64`.
//!
//! Binary form: magic `"CMT5"`, five little-endian `u64` dimensions, then the
//! elements as little-endian IEEE-754 doubles in row-major order.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::KernelError;

pub const TENSOR_MAGIC: &[u8; 4] = b"CMT5";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor5 {
    shape: [usize; 5],
    data: Vec<f64>,
}

impl Tensor5 {
    pub fn new(shape: [usize; 5], data: Vec<f64>) -> Result<Self, KernelError> {
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(KernelError::ShapeMismatch(format!(
                "shape {shape:?} needs {len} elements, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite);
        }
        Ok(Tensor5 { shape, data })
    }

    pub fn zeros(shape: [usize; 5]) -> Self {
        Tensor5 {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: [usize; 5], value: f64) -> Self {
        Tensor5 {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    /// Independent standard normal entries.
    pub fn randn<R: Rng + ?Sized>(shape: [usize; 5], rng: &mut R) -> Self {
        let len = shape.iter().product();
        Tensor5 {
            shape,
            data: (0..len).map(|_| rng.sample(StandardNormal)).collect(),
        }
    }

    pub fn shape(&self) -> [usize; 5] {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor5 {
        Tensor5 {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, k: f64) -> Tensor5 {
        self.map(|v| k * v)
    }

    pub fn check_same_shape(&self, other: &Tensor5) -> Result<(), KernelError> {
        if self.shape != other.shape {
            return Err(KernelError::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn zip_with(&self, other: &Tensor5, f: impl Fn(f64, f64) -> f64) -> Result<Tensor5, KernelError> {
        self.check_same_shape(other)?;
        Ok(Tensor5 {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Tensor5) -> Result<Tensor5, KernelError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn max_abs_diff(&self, other: &Tensor5) -> Result<f64, KernelError> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 40 + 8 * self.data.len());
        out.extend_from_slice(TENSOR_MAGIC);
        for d in self.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, KernelError> {
        if bytes.len() < 44 || &bytes[..4] != TENSOR_MAGIC {
            return Err(KernelError::Format("missing tensor header".into()));
        }
        let mut shape = [0usize; 5];
        for (i, d) in shape.iter_mut().enumerate() {
            let at = 4 + 8 * i;
            let raw = u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
            *d = usize::try_from(raw).map_err(|_| KernelError::Format("dimension overflow".into()))?;
        }
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| KernelError::Format("element count overflow".into()))?;
        let body = &bytes[44..];
        if body.len() != len * 8 {
            return Err(KernelError::Format(format!(
                "expected {} payload bytes, found {}",
                len * 8,
                body.len()
            )));
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Tensor5::new(shape, data)
    }
}
