//! CRNW weight container.
//!
//! ```text
//! "CRNW"            4 bytes
//! version           u32 = 1
//! layer_count       u32
//! per layer:
//!   type id         u8   1 Conv1D, 2 Depthwise, 3 Pointwise, 4 BatchNorm, 5 Dense
//!   hyper[4]        u32  Conv1D      c_in, c_out, kernel, stride
//!                        Depthwise   channels, kernel, stride, 0
//!                        Pointwise   c_in, c_out, 0, 0
//!                        BatchNorm   channels, epsilon f32 bits, 0, 0
//!                        Dense       n_in, n_out, 0, 0
//!   payload_len     u64  bytes
//!   payload         f32  affine: weight then bias; batch norm: gamma, beta,
//!                        running_mean, running_var
//! crc32             u32  over every preceding byte
//! ```
//!
//! All integers and floats are little-endian. Padding modes are not stored;
//! pass the architecture to [`decode_weights_for`] to cross-check.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::layer::{LayerSpec, LayerWeights, WeightShape};
use crate::model::ArchConfig;
use crate::zoo::validate_weights;

pub const MAGIC: [u8; 4] = *b"CRNW";
pub const VERSION: u32 = 1;

/// One parametric layer as declared in a weight file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerDescriptor {
    pub type_id: u8,
    pub hyper: [u32; 4],
}

impl LayerDescriptor {
    /// Descriptor for a parametric layer, `None` otherwise.
    pub fn for_layer(spec: &LayerSpec) -> Option<Self> {
        let u = |v: usize| v as u32;
        let (type_id, hyper) = match *spec {
            LayerSpec::Conv1D {
                c_in,
                c_out,
                kernel,
                stride,
                ..
            } => (1, [u(c_in), u(c_out), u(kernel), u(stride)]),
            LayerSpec::DepthwiseConv1D {
                channels,
                kernel,
                stride,
                ..
            } => (2, [u(channels), u(kernel), u(stride), 0]),
            LayerSpec::PointwiseConv1D { c_in, c_out } => (3, [u(c_in), u(c_out), 0, 0]),
            LayerSpec::BatchNorm { channels, epsilon } => (4, [u(channels), epsilon.to_bits(), 0, 0]),
            LayerSpec::Dense { n_in, n_out } => (5, [u(n_in), u(n_out), 0, 0]),
            _ => return None,
        };
        Some(Self { type_id, hyper })
    }

    pub fn type_name(&self) -> &'static str {
        match self.type_id {
            1 => "Conv1D",
            2 => "DepthwiseConv1D",
            3 => "PointwiseConv1D",
            4 => "BatchNorm",
            5 => "Dense",
            _ => "unknown",
        }
    }

    /// Tensor lengths implied by the hyperparameters.
    pub fn weight_shape(&self) -> Result<WeightShape> {
        let [a, b, c, _] = self.hyper.map(|v| v as usize);
        let shape = match self.type_id {
            1 => WeightShape::Affine {
                weight: b * a * c,
                bias: b,
            },
            2 => WeightShape::Affine { weight: a * b, bias: a },
            3 | 5 => WeightShape::Affine {
                weight: b * a,
                bias: b,
            },
            4 => WeightShape::BatchNorm { channels: a },
            t => return Err(Error::Format(format!("unknown layer type id {t}"))),
        };
        Ok(shape)
    }

    fn is_batchnorm(&self) -> bool {
        self.type_id == 4
    }
}

/// Serializes weights for `config`; the weights must validate against it.
pub fn encode_weights(config: &ArchConfig, weights: &[LayerWeights]) -> Result<Vec<u8>> {
    validate_weights(config, weights)?;
    let descriptors: Vec<LayerDescriptor> = config.layers.iter().filter_map(LayerDescriptor::for_layer).collect();
    let payload: usize = weights.iter().map(|w| 4 * w.value_count() + 25).sum();
    let mut out = Vec::with_capacity(16 + payload);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(descriptors.len() as u32).to_le_bytes());
    for (d, w) in descriptors.iter().zip(weights) {
        out.push(d.type_id);
        for h in d.hyper {
            out.extend_from_slice(&h.to_le_bytes());
        }
        out.extend_from_slice(&(4 * w.value_count() as u64).to_le_bytes());
        for (_, t) in w.tensors() {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated(format!(
                "{what} needs {n} bytes at offset {}, {} left",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn floats(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let raw = self.take(4 * n, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

/// Parses a weight file. Checks magic, version and CRC before the body.
pub fn decode_weights(bytes: &[u8]) -> Result<(Vec<LayerDescriptor>, Vec<LayerWeights>)> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(Error::Truncated("header".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    if bytes.len() < 16 {
        return Err(Error::Truncated(format!("{} bytes is shorter than header and checksum", bytes.len())));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::CrcMismatch { stored, computed });
    }

    let mut r = Reader { bytes: body, pos: 8 };
    let count = r.u32("layer count")? as usize;
    let mut descriptors = Vec::new();
    let mut weights = Vec::new();
    for i in 0..count {
        let type_id = r.take(1, "layer type")?[0];
        let mut hyper = [0u32; 4];
        for h in hyper.iter_mut() {
            *h = r.u32("hyperparameter")?;
        }
        let d = LayerDescriptor { type_id, hyper };
        let shape = d.weight_shape().map_err(|e| Error::Format(format!("layer {i}: {e}")))?;
        let declared = r.u64("payload length")?;
        let values = match shape {
            WeightShape::Affine { weight, bias } => weight + bias,
            WeightShape::BatchNorm { channels } => 4 * channels,
        };
        if declared != 4 * values as u64 {
            return Err(Error::Format(format!(
                "layer {i} ({}): payload is {declared} bytes, hyperparameters imply {}",
                d.type_name(),
                4 * values
            )));
        }
        let what = format!("layer {i} payload");
        let w = match shape {
            WeightShape::Affine { weight, bias } => LayerWeights::Affine {
                weight: r.floats(weight, &what)?,
                bias: r.floats(bias, &what)?,
            },
            WeightShape::BatchNorm { channels } => LayerWeights::BatchNorm {
                gamma: r.floats(channels, &what)?,
                beta: r.floats(channels, &what)?,
                running_mean: r.floats(channels, &what)?,
                running_var: r.floats(channels, &what)?,
            },
        };
        descriptors.push(d);
        weights.push(w);
    }
    if r.pos != body.len() {
        return Err(Error::Format(format!("{} trailing bytes after the last layer", body.len() - r.pos)));
    }
    Ok((descriptors, weights))
}

/// Decodes and checks the declared layers against `config`.
pub fn decode_weights_for(bytes: &[u8], config: &ArchConfig) -> Result<Vec<LayerWeights>> {
    let (descriptors, weights) = decode_weights(bytes)?;
    let expected: Vec<(usize, LayerDescriptor)> = config
        .layers
        .iter()
        .enumerate()
        .filter_map(|(i, l)| LayerDescriptor::for_layer(l).map(|d| (i, d)))
        .collect();
    if expected.len() != descriptors.len() {
        return Err(Error::Format(format!(
            "file declares {} parametric layers, {} has {}",
            descriptors.len(),
            config.model_id,
            expected.len()
        )));
    }
    for ((layer, want), got) in expected.iter().zip(&descriptors) {
        if want != got {
            return Err(Error::Format(describe_mismatch(*layer, want, got)));
        }
    }
    validate_weights(config, &weights)?;
    Ok(weights)
}

fn describe_mismatch(layer: usize, want: &LayerDescriptor, got: &LayerDescriptor) -> String {
    if want.type_id != got.type_id {
        format!("layer {layer}: file has {}, config has {}", got.type_name(), want.type_name())
    } else if want.is_batchnorm() && want.hyper[0] == got.hyper[0] {
        format!(
            "layer {layer} (BatchNorm): file epsilon {}, config epsilon {}",
            f32::from_bits(got.hyper[1]),
            f32::from_bits(want.hyper[1])
        )
    } else {
        format!(
            "layer {layer} ({}): file hyperparameters {:?}, config {:?}",
            want.type_name(),
            got.hyper,
            want.hyper
        )
    }
}
