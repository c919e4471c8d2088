use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// `[channels × length]` extent of an activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Shape {
    pub channels: usize,
    pub length: usize,
}

impl Shape {
    pub const fn new(channels: usize, length: usize) -> Self {
        Self { channels, length }
    }

    pub const fn numel(&self) -> usize {
        self.channels * self.length
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} x {}]", self.channels, self.length)
    }
}

/// Single-precision `[channels × length]` array stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor1D {
    shape: Shape,
    data: Vec<f32>,
}

impl Tensor1D {
    /// Wraps `data`, checking extent and finiteness.
    pub fn new(channels: usize, length: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || length == 0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "tensor extent must be positive, got [{channels} x {length}]"
            )));
        }
        if data.len() != channels * length {
            return Err(Error::Shape {
                layer: 0,
                detail: alloc::format!(
                    "tensor [{channels} x {length}] needs {} values, got {}",
                    channels * length,
                    data.len()
                ),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor data"));
        }
        Ok(Self {
            shape: Shape::new(channels, length),
            data,
        })
    }

    pub fn zeros(channels: usize, length: usize) -> Self {
        Self {
            shape: Shape::new(channels, length),
            data: vec![0.0; channels * length],
        }
    }

    /// Single-channel tensor from a window of samples.
    pub fn from_window(samples: &[f32]) -> Result<Self> {
        Self::new(1, samples.len(), samples.to_vec())
    }

    pub(crate) fn from_parts(shape: Shape, data: Vec<f32>) -> Self {
        debug_assert_eq!(shape.numel(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn length(&self) -> usize {
        self.shape.length
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let l = self.shape.length;
        &self.data[c * l..(c + 1) * l]
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}
