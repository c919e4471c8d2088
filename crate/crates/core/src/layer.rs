//! Layer descriptions and their weight tensors.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::tensor::Shape;

/// Zero-padding policy for convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Padding {
    /// Output length `ceil(L / stride)`, padding split evenly (extra on the right).
    #[default]
    Same,
    /// No padding; output length `floor((L - K) / stride) + 1`.
    Valid,
    /// `K - 1` zeros on the left only.
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv1D,
    DepthwiseConv1D,
    PointwiseConv1D,
    BatchNorm,
    ReLU,
    MaxPool,
    AvgPool,
    GlobalAvgPool,
    Flatten,
    Dense,
    Dropout,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv1D => "Conv1D",
            LayerKind::DepthwiseConv1D => "DepthwiseConv1D",
            LayerKind::PointwiseConv1D => "PointwiseConv1D",
            LayerKind::BatchNorm => "BatchNorm",
            LayerKind::ReLU => "ReLU",
            LayerKind::MaxPool => "MaxPool",
            LayerKind::AvgPool => "AvgPool",
            LayerKind::GlobalAvgPool => "GlobalAvgPool",
            LayerKind::Flatten => "Flatten",
            LayerKind::Dense => "Dense",
            LayerKind::Dropout => "Dropout",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One layer of a sequential 1D network.
///
/// Dense layers consume the full input in channel-major order and produce
/// `[n_out × 1]`, so a following BatchNorm normalizes per output feature.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum LayerSpec {
    #[cfg_attr(feature = "serde", serde(rename = "conv1d"))]
    Conv1D {
        c_in: usize,
        c_out: usize,
        kernel: usize,
        #[cfg_attr(feature = "serde", serde(default = "one"))]
        stride: usize,
        #[cfg_attr(feature = "serde", serde(default))]
        padding: Padding,
    },
    #[cfg_attr(feature = "serde", serde(rename = "depthwise_conv1d"))]
    DepthwiseConv1D {
        channels: usize,
        kernel: usize,
        #[cfg_attr(feature = "serde", serde(default = "one"))]
        stride: usize,
        #[cfg_attr(feature = "serde", serde(default))]
        padding: Padding,
    },
    #[cfg_attr(feature = "serde", serde(rename = "pointwise_conv1d"))]
    PointwiseConv1D { c_in: usize, c_out: usize },
    BatchNorm {
        channels: usize,
        #[cfg_attr(
            feature = "serde",
            serde(default = "default_epsilon", serialize_with = "crate::short_f32")
        )]
        epsilon: f32,
    },
    #[cfg_attr(feature = "serde", serde(rename = "relu"))]
    ReLU,
    MaxPool { kernel: usize, stride: usize },
    AvgPool { kernel: usize, stride: usize },
    GlobalAvgPool,
    Flatten,
    Dense { n_in: usize, n_out: usize },
    /// Identity at inference; the rate is kept for documentation.
    Dropout {
        #[cfg_attr(feature = "serde", serde(serialize_with = "crate::short_f32"))]
        rate: f32,
    },
}

#[cfg(feature = "serde")]
fn one() -> usize {
    1
}

#[cfg(feature = "serde")]
fn default_epsilon() -> f32 {
    DEFAULT_BN_EPSILON
}

/// BatchNorm epsilon used by the reference networks.
pub const DEFAULT_BN_EPSILON: f32 = 1e-3;

/// Expected tensor lengths of a parametric layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightShape {
    /// Weight tensor of `weight` values plus `bias` values.
    Affine { weight: usize, bias: usize },
    /// Four per-channel vectors.
    BatchNorm { channels: usize },
}

impl LayerSpec {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerSpec::Conv1D { .. } => LayerKind::Conv1D,
            LayerSpec::DepthwiseConv1D { .. } => LayerKind::DepthwiseConv1D,
            LayerSpec::PointwiseConv1D { .. } => LayerKind::PointwiseConv1D,
            LayerSpec::BatchNorm { .. } => LayerKind::BatchNorm,
            LayerSpec::ReLU => LayerKind::ReLU,
            LayerSpec::MaxPool { .. } => LayerKind::MaxPool,
            LayerSpec::AvgPool { .. } => LayerKind::AvgPool,
            LayerSpec::GlobalAvgPool => LayerKind::GlobalAvgPool,
            LayerSpec::Flatten => LayerKind::Flatten,
            LayerSpec::Dense { .. } => LayerKind::Dense,
            LayerSpec::Dropout { .. } => LayerKind::Dropout,
        }
    }

    pub fn is_parametric(&self) -> bool {
        self.weight_shape().is_some()
    }

    pub fn weight_shape(&self) -> Option<WeightShape> {
        match *self {
            LayerSpec::Conv1D {
                c_in, c_out, kernel, ..
            } => Some(WeightShape::Affine {
                weight: c_out * c_in * kernel,
                bias: c_out,
            }),
            LayerSpec::DepthwiseConv1D {
                channels, kernel, ..
            } => Some(WeightShape::Affine {
                weight: channels * kernel,
                bias: channels,
            }),
            LayerSpec::PointwiseConv1D { c_in, c_out } => Some(WeightShape::Affine {
                weight: c_out * c_in,
                bias: c_out,
            }),
            LayerSpec::Dense { n_in, n_out } => Some(WeightShape::Affine {
                weight: n_out * n_in,
                bias: n_out,
            }),
            LayerSpec::BatchNorm { channels, .. } => Some(WeightShape::BatchNorm { channels }),
            _ => None,
        }
    }

    /// Checks hyperparameters that do not depend on the input.
    pub fn check(&self) -> Result<(), String> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(format!("{name} must be positive"))
            } else {
                Ok(())
            }
        };
        match *self {
            LayerSpec::Conv1D {
                c_in,
                c_out,
                kernel,
                stride,
                ..
            } => {
                positive("c_in", c_in)?;
                positive("c_out", c_out)?;
                positive("kernel", kernel)?;
                positive("stride", stride)
            }
            LayerSpec::DepthwiseConv1D {
                channels,
                kernel,
                stride,
                ..
            } => {
                positive("channels", channels)?;
                positive("kernel", kernel)?;
                positive("stride", stride)
            }
            LayerSpec::PointwiseConv1D { c_in, c_out } => {
                positive("c_in", c_in)?;
                positive("c_out", c_out)
            }
            LayerSpec::BatchNorm { channels, epsilon } => {
                positive("channels", channels)?;
                if !(epsilon.is_finite() && epsilon > 0.0) {
                    return Err(format!("epsilon must be positive, got {epsilon}"));
                }
                Ok(())
            }
            LayerSpec::MaxPool { kernel, stride } | LayerSpec::AvgPool { kernel, stride } => {
                positive("kernel", kernel)?;
                positive("stride", stride)
            }
            LayerSpec::Dense { n_in, n_out } => {
                positive("n_in", n_in)?;
                positive("n_out", n_out)
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    return Err(format!("dropout rate must lie in [0, 1), got {rate}"));
                }
                Ok(())
            }
            LayerSpec::ReLU | LayerSpec::GlobalAvgPool | LayerSpec::Flatten => Ok(()),
        }
    }

    /// Output extent for a given input, or a description of the mismatch.
    pub fn output_shape(&self, input: Shape) -> Result<Shape, String> {
        self.check()?;
        let need_channels = |c: usize| {
            if input.channels != c {
                Err(format!("expects {c} input channels, got {input}"))
            } else {
                Ok(())
            }
        };
        match *self {
            LayerSpec::Conv1D {
                c_in,
                c_out,
                kernel,
                stride,
                padding,
            } => {
                need_channels(c_in)?;
                let len = conv_geometry(padding, input.length, kernel, stride)?.out_len;
                Ok(Shape::new(c_out, len))
            }
            LayerSpec::DepthwiseConv1D {
                channels,
                kernel,
                stride,
                padding,
            } => {
                need_channels(channels)?;
                let len = conv_geometry(padding, input.length, kernel, stride)?.out_len;
                Ok(Shape::new(channels, len))
            }
            LayerSpec::PointwiseConv1D { c_in, c_out } => {
                need_channels(c_in)?;
                Ok(Shape::new(c_out, input.length))
            }
            LayerSpec::BatchNorm { channels, .. } => {
                need_channels(channels)?;
                Ok(input)
            }
            LayerSpec::ReLU | LayerSpec::Dropout { .. } => Ok(input),
            LayerSpec::MaxPool { kernel, stride } | LayerSpec::AvgPool { kernel, stride } => {
                if input.length < kernel {
                    return Err(format!("pool kernel {kernel} longer than input {input}"));
                }
                Ok(Shape::new(
                    input.channels,
                    (input.length - kernel) / stride + 1,
                ))
            }
            LayerSpec::GlobalAvgPool => Ok(Shape::new(input.channels, 1)),
            LayerSpec::Flatten => Ok(Shape::new(1, input.numel())),
            LayerSpec::Dense { n_in, n_out } => {
                if input.numel() != n_in {
                    return Err(format!("expects {n_in} inputs, got {input}"));
                }
                Ok(Shape::new(n_out, 1))
            }
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv1D {
                c_in,
                c_out,
                kernel,
                stride,
                padding,
            } => write!(
                f,
                "Conv1D{{{c_in}->{c_out}, K={kernel}, stride={stride}, {padding:?}}}"
            ),
            LayerSpec::DepthwiseConv1D {
                channels,
                kernel,
                stride,
                padding,
            } => write!(
                f,
                "DepthwiseConv1D{{{channels}, K={kernel}, stride={stride}, {padding:?}}}"
            ),
            LayerSpec::PointwiseConv1D { c_in, c_out } => {
                write!(f, "PointwiseConv1D{{{c_in}->{c_out}}}")
            }
            LayerSpec::BatchNorm { channels, epsilon } => {
                write!(f, "BatchNorm{{{channels}, eps={epsilon}}}")
            }
            LayerSpec::ReLU => f.write_str("ReLU"),
            LayerSpec::MaxPool { kernel, stride } => {
                write!(f, "MaxPool{{K={kernel}, stride={stride}}}")
            }
            LayerSpec::AvgPool { kernel, stride } => {
                write!(f, "AvgPool{{K={kernel}, stride={stride}}}")
            }
            LayerSpec::GlobalAvgPool => f.write_str("GlobalAvgPool"),
            LayerSpec::Flatten => f.write_str("Flatten"),
            LayerSpec::Dense { n_in, n_out } => write!(f, "Dense{{{n_in}->{n_out}}}"),
            LayerSpec::Dropout { rate } => write!(f, "Dropout{{{rate}}}"),
        }
    }
}

/// Where a convolution reads from for output position `t`:
/// input index `t * stride + k - pad_left`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub out_len: usize,
    pub pad_left: usize,
}

pub fn conv_geometry(
    padding: Padding,
    len: usize,
    kernel: usize,
    stride: usize,
) -> Result<ConvGeometry, String> {
    match padding {
        Padding::Same => {
            let out_len = len.div_ceil(stride);
            let total = ((out_len - 1) * stride + kernel).saturating_sub(len);
            Ok(ConvGeometry {
                out_len,
                pad_left: total / 2,
            })
        }
        Padding::Valid => {
            if len < kernel {
                return Err(format!("kernel {kernel} longer than input length {len}"));
            }
            Ok(ConvGeometry {
                out_len: (len - kernel) / stride + 1,
                pad_left: 0,
            })
        }
        Padding::Causal => Ok(ConvGeometry {
            out_len: (len - 1) / stride + 1,
            pad_left: kernel - 1,
        }),
    }
}

/// Trained tensors of one parametric layer.
///
/// Layouts: Conv1D `[c_out][c_in][kernel]`, depthwise `[c][kernel]`,
/// pointwise `[c_out][c_in]`, Dense `[n_out][n_in]`.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights {
    Affine {
        weight: Vec<f32>,
        bias: Vec<f32>,
    },
    BatchNorm {
        gamma: Vec<f32>,
        beta: Vec<f32>,
        running_mean: Vec<f32>,
        running_var: Vec<f32>,
    },
}

impl LayerWeights {
    pub fn zeros(shape: WeightShape) -> Self {
        match shape {
            WeightShape::Affine { weight, bias } => LayerWeights::Affine {
                weight: vec![0.0; weight],
                bias: vec![0.0; bias],
            },
            WeightShape::BatchNorm { channels } => LayerWeights::BatchNorm {
                gamma: vec![1.0; channels],
                beta: vec![0.0; channels],
                running_mean: vec![0.0; channels],
                running_var: vec![1.0; channels],
            },
        }
    }

    /// Named tensors in serialization order.
    pub fn tensors(&self) -> [(&'static str, &[f32]); 4] {
        match self {
            LayerWeights::Affine { weight, bias } => {
                [("weight", weight), ("bias", bias), ("", &[]), ("", &[])]
            }
            LayerWeights::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
            } => [
                ("gamma", gamma),
                ("beta", beta),
                ("running_mean", running_mean),
                ("running_var", running_var),
            ],
        }
    }

    pub fn value_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Checks tensor lengths, finiteness and `running_var >= 0`.
    pub fn check_against(&self, shape: WeightShape) -> Result<(), String> {
        match (self, shape) {
            (LayerWeights::Affine { weight, bias }, WeightShape::Affine { weight: w, bias: b }) => {
                if weight.len() != w {
                    return Err(format!("weight has {} entries, expected {w}", weight.len()));
                }
                if bias.len() != b {
                    return Err(format!("bias has {} entries, expected {b}", bias.len()));
                }
            }
            (LayerWeights::BatchNorm { running_var, .. }, WeightShape::BatchNorm { channels }) => {
                for (name, t) in self.tensors() {
                    if t.len() != channels {
                        return Err(format!(
                            "{name} has {} entries, expected {channels}",
                            t.len()
                        ));
                    }
                }
                if running_var.iter().any(|v| *v < 0.0) {
                    return Err("running_var has negative entries".into());
                }
            }
            (LayerWeights::Affine { .. }, WeightShape::BatchNorm { .. }) => {
                return Err("expected batch-norm statistics, got weight/bias".into());
            }
            (LayerWeights::BatchNorm { .. }, WeightShape::Affine { .. }) => {
                return Err("expected weight/bias, got batch-norm statistics".into());
            }
        }
        for (name, t) in self.tensors() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(format!("non-finite value in {name}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_padding_lengths() {
        for len in 1..40 {
            for k in 1..8 {
                for s in 1..4 {
                    let g = conv_geometry(Padding::Same, len, k, s).unwrap();
                    assert_eq!(g.out_len, len.div_ceil(s));
                    let c = conv_geometry(Padding::Causal, len, k, s).unwrap();
                    assert_eq!(c.pad_left, k - 1);
                    if len >= k {
                        let v = conv_geometry(Padding::Valid, len, k, s).unwrap();
                        assert_eq!(v.out_len, (len - k) / s + 1);
                    }
                }
            }
        }
    }

    #[test]
    fn dense_requires_exact_input() {
        let d = LayerSpec::Dense { n_in: 160, n_out: 1 };
        assert_eq!(d.output_shape(Shape::new(1, 160)), Ok(Shape::new(1, 1)));
        assert!(d.output_shape(Shape::new(1, 159)).is_err());
    }

    #[test]
    fn rejects_zero_stride() {
        let c = LayerSpec::Conv1D {
            c_in: 1,
            c_out: 1,
            kernel: 3,
            stride: 0,
            padding: Padding::Same,
        };
        assert!(c.output_shape(Shape::new(1, 10)).is_err());
    }
}
