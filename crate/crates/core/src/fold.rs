//! Folding inference-time batch norm into the preceding affine layer.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::layer::{LayerSpec, LayerWeights};
use crate::model::ArchConfig;

/// Removes every BatchNorm, rescaling the layer in front of it.
///
/// With `s = gamma / sqrt(var + eps)` per output channel, the preceding
/// weights become `w * s` and the bias `(b - mean) * s + beta`. Arithmetic is
/// done in double precision and rounded once.
pub fn fold_batchnorm(
    config: &ArchConfig,
    weights: &[LayerWeights],
) -> Result<(ArchConfig, Vec<LayerWeights>)> {
    config.validate()?;
    crate::zoo::validate_weights(config, weights).map_err(Error::from)?;

    let mut layers: Vec<LayerSpec> = Vec::with_capacity(config.layers.len());
    let mut folded: Vec<LayerWeights> = Vec::with_capacity(weights.len());
    let mut source = weights.iter();
    for (i, layer) in config.layers.iter().enumerate() {
        let w = layer.is_parametric().then(|| source.next().expect("validated"));
        let LayerSpec::BatchNorm { channels, epsilon } = *layer else {
            layers.push(layer.clone());
            if let Some(w) = w {
                folded.push(w.clone());
            }
            continue;
        };
        let Some(LayerWeights::BatchNorm {
            gamma,
            beta,
            running_mean,
            running_var,
        }) = w
        else {
            unreachable!("validated batch-norm weights")
        };
        // Output channels of the previous layer, and how many weights each owns.
        let per_channel = match layers.last() {
            Some(LayerSpec::Conv1D { c_in, kernel, .. }) => c_in * kernel,
            Some(LayerSpec::DepthwiseConv1D { kernel, .. }) => *kernel,
            Some(LayerSpec::PointwiseConv1D { c_in, .. }) => *c_in,
            Some(LayerSpec::Dense { n_in, .. }) => *n_in,
            _ => return Err(Error::Unfoldable(i)),
        };
        let Some(LayerWeights::Affine { weight, bias }) = folded.last_mut() else {
            return Err(Error::Unfoldable(i));
        };
        if bias.len() != channels {
            return Err(Error::Shape {
                layer: i,
                detail: format!("batch norm over {channels} channels follows {} outputs", bias.len()),
            });
        }
        for c in 0..channels {
            let scale =
                gamma[c] as f64 / libm::sqrt(running_var[c] as f64 + epsilon as f64);
            for wv in &mut weight[c * per_channel..(c + 1) * per_channel] {
                *wv = (*wv as f64 * scale) as f32;
            }
            bias[c] =
                ((bias[c] as f64 - running_mean[c] as f64) * scale + beta[c] as f64) as f32;
        }
    }
    let mut out = ArchConfig::new(config.model_id.clone(), config.input, layers);
    if !out.model_id.ends_with("-folded") {
        out.model_id.push_str("-folded");
    }
    Ok((out, folded))
}
