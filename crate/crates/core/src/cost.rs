//! Parameter and multiply-accumulate accounting.
//!
//! MACs count multiplies only; bias additions are free. Batch norm
//! contributes `4 × channels` parameters (gamma, beta, running mean and
//! variance) and no MACs, since deployment folds it into the preceding layer.
//! Pooling, activations, flatten and dropout cost nothing.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign};

use crate::error::{Error, Result};
use crate::layer::LayerSpec;
use crate::model::ArchConfig;
use crate::tensor::Shape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostReport {
    pub params: u64,
    pub macs: u64,
}

impl CostReport {
    pub const fn new(params: u64, macs: u64) -> Self {
        Self { params, macs }
    }
}

impl Add for CostReport {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.params + rhs.params, self.macs + rhs.macs)
    }
}

impl AddAssign for CostReport {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl core::iter::Sum for CostReport {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

impl core::fmt::Display for CostReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "params={} macs={}", self.params, self.macs)
    }
}

/// Cost of one layer given the output extent it produces.
pub fn layer_cost(spec: &LayerSpec, output: Shape) -> CostReport {
    let l_out = output.length as u64;
    match *spec {
        LayerSpec::Conv1D {
            c_in, c_out, kernel, ..
        } => {
            let (ci, co, k) = (c_in as u64, c_out as u64, kernel as u64);
            CostReport::new(co * ci * k + co, l_out * co * k * ci)
        }
        LayerSpec::DepthwiseConv1D {
            channels, kernel, ..
        } => {
            let (c, k) = (channels as u64, kernel as u64);
            CostReport::new(c * k + c, l_out * c * k)
        }
        LayerSpec::PointwiseConv1D { c_in, c_out } => {
            let (ci, co) = (c_in as u64, c_out as u64);
            CostReport::new(co * ci + co, l_out * co * ci)
        }
        LayerSpec::Dense { n_in, n_out } => {
            let (ni, no) = (n_in as u64, n_out as u64);
            CostReport::new(no * ni + no, no * ni)
        }
        LayerSpec::BatchNorm { channels, .. } => CostReport::new(4 * channels as u64, 0),
        LayerSpec::ReLU
        | LayerSpec::MaxPool { .. }
        | LayerSpec::AvgPool { .. }
        | LayerSpec::GlobalAvgPool
        | LayerSpec::Flatten
        | LayerSpec::Dropout { .. } => CostReport::default(),
    }
}

/// Per-layer costs of a layer list applied to `input`, plus the final extent.
pub fn count_layers(input: Shape, layers: &[LayerSpec]) -> Result<(Vec<CostReport>, Shape)> {
    let mut shape = input;
    let mut costs = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        shape = layer.output_shape(shape).map_err(|detail| Error::Shape {
            layer: i,
            detail: alloc::format!("{layer}: {detail}"),
        })?;
        costs.push(layer_cost(layer, shape));
    }
    Ok((costs, shape))
}

/// Total cost of one forward pass of a validated config.
pub fn count_costs(config: &ArchConfig) -> Result<CostReport> {
    config.validate()?;
    let (costs, _) = count_layers(config.input, &config.layers)?;
    Ok(costs.into_iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::Padding;
    use alloc::vec;

    #[test]
    fn dense_head() {
        let cfg = ArchConfig::new(
            "d",
            Shape::new(1, 32),
            vec![LayerSpec::Flatten, LayerSpec::Dense { n_in: 32, n_out: 1 }],
        );
        assert_eq!(count_costs(&cfg).unwrap(), CostReport::new(33, 32));
    }

    #[test]
    fn first_conv() {
        let spec = LayerSpec::Conv1D {
            c_in: 1,
            c_out: 4,
            kernel: 5,
            stride: 1,
            padding: Padding::Same,
        };
        let (costs, shape) = count_layers(Shape::new(1, 160), &[spec]).unwrap();
        assert_eq!(shape, Shape::new(4, 160));
        assert_eq!(costs[0], CostReport::new(24, 3200));
    }

    #[test]
    fn separable_per_position() {
        // Conv1D{8,8,K=3} against depthwise(8,3) + pointwise(8->8), per output position.
        let std = layer_cost(
            &LayerSpec::Conv1D {
                c_in: 8,
                c_out: 8,
                kernel: 3,
                stride: 1,
                padding: Padding::Same,
            },
            Shape::new(8, 1),
        );
        let dw = layer_cost(
            &LayerSpec::DepthwiseConv1D {
                channels: 8,
                kernel: 3,
                stride: 1,
                padding: Padding::Same,
            },
            Shape::new(8, 1),
        );
        let pw = layer_cost(&LayerSpec::PointwiseConv1D { c_in: 8, c_out: 8 }, Shape::new(8, 1));
        assert_eq!(std.macs, 192);
        assert_eq!(dw.macs + pw.macs, 88);
    }

    #[test]
    fn batchnorm_counts_params_only() {
        let c = layer_cost(
            &LayerSpec::BatchNorm {
                channels: 6,
                epsilon: 1e-3,
            },
            Shape::new(6, 10),
        );
        assert_eq!(c, CostReport::new(24, 0));
    }
}
