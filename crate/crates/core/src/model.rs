//! Sequential network configs and the preallocated inference engine.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels;
use crate::layer::{LayerSpec, LayerWeights, WeightShape};
use crate::tensor::{Shape, Tensor1D};

/// Ordered description of a network from its input window to one logit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArchConfig {
    pub model_id: String,
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

impl ArchConfig {
    pub fn new(model_id: impl Into<String>, input: Shape, layers: Vec<LayerSpec>) -> Self {
        Self {
            model_id: model_id.into(),
            input,
            layers,
        }
    }

    /// Shape-checks the chain and returns the extent after every layer
    /// (index 0 is the input). The last extent must be `[1 × 1]`.
    pub fn validate(&self) -> Result<Vec<Shape>> {
        let shapes = self.trace_shapes()?;
        let last = *shapes.last().expect("input shape present");
        if last != Shape::new(1, 1) {
            return Err(Error::Shape {
                layer: self.layers.len(),
                detail: format!("network must end in a single logit, ends in {last}"),
            });
        }
        Ok(shapes)
    }

    /// Like [`ArchConfig::validate`] without requiring a scalar output.
    pub fn trace_shapes(&self) -> Result<Vec<Shape>> {
        if self.input.numel() == 0 {
            return Err(Error::InvalidConfig(format!(
                "input extent must be positive, got {}",
                self.input
            )));
        }
        let mut shapes = Vec::with_capacity(self.layers.len() + 1);
        shapes.push(self.input);
        let mut current = self.input;
        for (i, layer) in self.layers.iter().enumerate() {
            current = layer.output_shape(current).map_err(|detail| Error::Shape {
                layer: i,
                detail: format!("{layer}: {detail}"),
            })?;
            shapes.push(current);
        }
        Ok(shapes)
    }

    /// Indices of layers that own weights, in order.
    pub fn parametric_layers(&self) -> impl Iterator<Item = (usize, &LayerSpec)> {
        self.layers.iter().enumerate().filter(|(_, l)| l.is_parametric())
    }

    pub fn weight_shapes(&self) -> Vec<WeightShape> {
        self.layers.iter().filter_map(LayerSpec::weight_shape).collect()
    }
}

/// Runs a whole network on one window, allocating per layer.
///
/// Uses the same kernels as [`Model::infer`], so both produce bit-identical
/// logits for the same inputs.
pub fn forward_model(input: &Tensor1D, config: &ArchConfig, weights: &[LayerWeights]) -> Result<f32> {
    config.validate()?;
    if input.shape() != config.input {
        return Err(Error::Shape {
            layer: 0,
            detail: format!("input {} does not match config input {}", input.shape(), config.input),
        });
    }
    crate::zoo::validate_weights(config, weights).map_err(Error::from)?;
    let mut current = input.clone();
    let mut next_weight = weights.iter();
    for layer in &config.layers {
        let w = if layer.is_parametric() {
            next_weight.next()
        } else {
            None
        };
        current = kernels::forward_layer(&current, layer, w)?;
    }
    Ok(current.data()[0])
}

/// A validated network with ping-pong activation buffers sized at
/// construction, so [`Model::infer`] never allocates.
#[derive(Debug, Clone)]
pub struct Model {
    config: ArchConfig,
    weights: Vec<LayerWeights>,
    /// Weight slot for each layer, `None` for parameter-free layers.
    slots: Vec<Option<usize>>,
    shapes: Vec<Shape>,
    front: Vec<f32>,
    back: Vec<f32>,
}

impl Model {
    pub fn new(config: ArchConfig, weights: Vec<LayerWeights>) -> Result<Self> {
        let shapes = config.validate()?;
        crate::zoo::validate_weights(&config, &weights).map_err(Error::from)?;
        let mut slot = 0;
        let slots = config
            .layers
            .iter()
            .map(|l| {
                l.is_parametric().then(|| {
                    slot += 1;
                    slot - 1
                })
            })
            .collect();
        let widest = shapes.iter().map(Shape::numel).max().unwrap_or(0);
        Ok(Self {
            config,
            weights,
            slots,
            shapes,
            front: vec![0.0; widest],
            back: vec![0.0; widest],
        })
    }

    pub fn config(&self) -> &ArchConfig {
        &self.config
    }

    pub fn weights(&self) -> &[LayerWeights] {
        &self.weights
    }

    pub fn input_len(&self) -> usize {
        self.config.input.numel()
    }

    /// Logit for one window laid out as the config's input tensor.
    ///
    /// # Panics
    /// If `window.len()` differs from the config input element count.
    pub fn infer(&mut self, window: &[f32]) -> f32 {
        assert_eq!(window.len(), self.input_len(), "window length");
        let n = window.len();
        self.front[..n].copy_from_slice(window);
        for (i, layer) in self.config.layers.iter().enumerate() {
            let w = self.slots[i].map(|s| &self.weights[s]);
            let in_shape = self.shapes[i];
            let out_shape = kernels::apply(
                layer,
                w,
                &self.front[..in_shape.numel()],
                in_shape,
                &mut self.back,
            );
            debug_assert_eq!(out_shape, self.shapes[i + 1]);
            core::mem::swap(&mut self.front, &mut self.back);
        }
        self.front[0]
    }
}

/// Zero weights for every parametric layer (identity batch norm).
pub fn zero_weights(config: &ArchConfig) -> Vec<LayerWeights> {
    config.weight_shapes().into_iter().map(LayerWeights::zeros).collect()
}

/// Seeded random weights with roughly unit activation variance.
///
/// Weights are uniform in `±sqrt(3 / fan_in)`; batch-norm statistics are drawn
/// near identity.
pub fn init_weights(config: &ArchConfig, seed: u64) -> Vec<LayerWeights> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (_, layer) in config.parametric_layers() {
        let fan_in = match *layer {
            LayerSpec::Conv1D { c_in, kernel, .. } => c_in * kernel,
            LayerSpec::DepthwiseConv1D { kernel, .. } => kernel,
            LayerSpec::PointwiseConv1D { c_in, .. } => c_in,
            LayerSpec::Dense { n_in, .. } => n_in,
            _ => 1,
        };
        let w = match layer.weight_shape().expect("parametric") {
            WeightShape::Affine { weight, bias } => {
                let bound = libm::sqrtf(3.0 / fan_in as f32);
                LayerWeights::Affine {
                    weight: (0..weight).map(|_| rng.random_range(-bound..bound)).collect(),
                    bias: (0..bias).map(|_| rng.random_range(-0.1..0.1)).collect(),
                }
            }
            WeightShape::BatchNorm { channels } => {
                let mut draw = |lo: f32, hi: f32| -> Vec<f32> {
                    (0..channels).map(|_| rng.random_range(lo..hi)).collect()
                };
                LayerWeights::BatchNorm {
                    gamma: draw(0.5, 1.5),
                    beta: draw(-0.2, 0.2),
                    running_mean: draw(-0.2, 0.2),
                    running_var: draw(0.5, 1.5),
                }
            }
        };
        out.push(w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::Padding;

    fn dense_model() -> ArchConfig {
        ArchConfig::new(
            "dense",
            Shape::new(1, 160),
            vec![LayerSpec::Flatten, LayerSpec::Dense { n_in: 160, n_out: 1 }],
        )
    }

    #[test]
    fn zero_dense_gives_zero_logit() {
        let cfg = dense_model();
        let w = zero_weights(&cfg);
        let x = Tensor1D::new(1, 160, (0..160).map(|i| i as f32 * 0.1).collect()).unwrap();
        assert_eq!(forward_model(&x, &cfg, &w).unwrap(), 0.0);
    }

    #[test]
    fn engine_matches_allocating_path() {
        let cfg = ArchConfig::new(
            "small",
            Shape::new(1, 32),
            vec![
                LayerSpec::Conv1D {
                    c_in: 1,
                    c_out: 3,
                    kernel: 5,
                    stride: 1,
                    padding: Padding::Same,
                },
                LayerSpec::BatchNorm {
                    channels: 3,
                    epsilon: 1e-3,
                },
                LayerSpec::ReLU,
                LayerSpec::MaxPool { kernel: 2, stride: 2 },
                LayerSpec::GlobalAvgPool,
                LayerSpec::Flatten,
                LayerSpec::Dense { n_in: 3, n_out: 1 },
            ],
        );
        let w = init_weights(&cfg, 3);
        let mut model = Model::new(cfg.clone(), w.clone()).unwrap();
        let xs: Vec<f32> = (0..32).map(|i| libm::sinf(i as f32 * 0.4)).collect();
        let a = model.infer(&xs);
        let b = forward_model(&Tensor1D::from_window(&xs).unwrap(), &cfg, &w).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(model.infer(&xs).to_bits(), a.to_bits());
    }

    #[test]
    fn rejects_non_scalar_output() {
        let cfg = ArchConfig::new("bad", Shape::new(1, 8), vec![LayerSpec::ReLU]);
        assert!(matches!(cfg.validate(), Err(Error::Shape { layer: 1, .. })));
    }

    #[test]
    fn rejects_wrong_input() {
        let cfg = dense_model();
        let w = zero_weights(&cfg);
        let x = Tensor1D::zeros(1, 100);
        assert!(forward_model(&x, &cfg, &w).is_err());
    }
}
