//! Collar recognition network (CRN) family and the frozen reference models.
//!
//! A CRN is a stack of convolution blocks followed by a small dense head:
//!
//! ```text
//! [AvgPool p0]                                   (CRN-3 only)
//! block × B:   Conv1D(K) → BN → ReLU → Dropout    (CRN-1)
//!              Depthwise(K) → BN → ReLU →
//!              Pointwise → BN → ReLU → Dropout    (CRN-2, CRN-3)
//!              [MaxPool p]
//! head:        [GlobalAvgPool] → Flatten → [Dense(h) → ReLU → Dropout] → Dense(1)
//! ```
//!
//! Every block shares one kernel size and channel widths never shrink. The
//! reference hyperparameters were found by [`crate::search_budget_config`]
//! against the published parameter and MAC budgets and are frozen here.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::cost::CostReport;
use crate::error::Error;
use crate::layer::{LayerSpec, LayerWeights, Padding, DEFAULT_BN_EPSILON};
use crate::model::ArchConfig;
use crate::search::BudgetTarget;
use crate::tensor::Shape;
use crate::WINDOW_LEN;

/// Spatial dropout rate after each block (inference identity).
pub const BLOCK_DROPOUT: f32 = 0.1;
/// Dropout rate in the head (inference identity).
pub const HEAD_DROPOUT: f32 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelId {
    Crn1,
    Crn2,
    Crn3,
}

impl ModelId {
    pub const ALL: [ModelId; 3] = [ModelId::Crn1, ModelId::Crn2, ModelId::Crn3];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::Crn1 => "crn1",
            ModelId::Crn2 => "crn2",
            ModelId::Crn3 => "crn3",
        }
    }

    /// Published parameter and MAC budget.
    pub fn budget(self) -> CostReport {
        match self {
            ModelId::Crn1 => CostReport::new(4305, 45584),
            ModelId::Crn2 => CostReport::new(2497, 22544),
            ModelId::Crn3 => CostReport::new(1985, 8208),
        }
    }

    pub fn target(self) -> BudgetTarget {
        let b = self.budget();
        BudgetTarget::exact(b.params, b.macs)
    }

    pub fn family(self) -> crate::search::Family {
        match self {
            ModelId::Crn1 => crate::search::Family::Crn1,
            ModelId::Crn2 => crate::search::Family::Crn2,
            ModelId::Crn3 => crate::search::Family::Crn3,
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "crn1" => Ok(ModelId::Crn1),
            "crn2" => Ok(ModelId::Crn2),
            "crn3" => Ok(ModelId::Crn3),
            _ => Err(format!("unknown model id {s:?} (expected crn1, crn2 or crn3)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ConvStyle {
    Standard,
    Separable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum HeadInput {
    GlobalAvgPool,
    Flatten,
}

impl HeadInput {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadInput::GlobalAvgPool => "global_avg_pool",
            HeadInput::Flatten => "flatten",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockSpec {
    pub channels: usize,
    /// MaxPool kernel and stride after the block; 1 means no pooling.
    pub pool: usize,
}

/// Compact hyperparameters of one CRN.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CrnSpec {
    pub style: ConvStyle,
    pub input_pool: Option<usize>,
    pub kernel: usize,
    pub blocks: Vec<BlockSpec>,
    pub head_input: HeadInput,
    pub hidden: Option<usize>,
}

impl CrnSpec {
    pub fn build(&self, model_id: impl Into<String>) -> ArchConfig {
        let mut layers = Vec::new();
        if let Some(p) = self.input_pool {
            layers.push(LayerSpec::AvgPool { kernel: p, stride: p });
        }
        let mut c_prev = 1;
        for block in &self.blocks {
            layers.extend(block_layers(self.style, c_prev, block.channels, self.kernel));
            if block.pool > 1 {
                layers.push(LayerSpec::MaxPool {
                    kernel: block.pool,
                    stride: block.pool,
                });
            }
            c_prev = block.channels;
        }
        let mut length = WINDOW_LEN / self.input_pool.unwrap_or(1);
        for block in &self.blocks {
            length /= block.pool;
        }
        let n = match self.head_input {
            HeadInput::GlobalAvgPool => {
                layers.push(LayerSpec::GlobalAvgPool);
                c_prev
            }
            HeadInput::Flatten => c_prev * length,
        };
        layers.push(LayerSpec::Flatten);
        match self.hidden {
            Some(h) => {
                layers.push(LayerSpec::Dense { n_in: n, n_out: h });
                layers.push(LayerSpec::ReLU);
                layers.push(LayerSpec::Dropout { rate: HEAD_DROPOUT });
                layers.push(LayerSpec::Dense { n_in: h, n_out: 1 });
            }
            None => layers.push(LayerSpec::Dense { n_in: n, n_out: 1 }),
        }
        ArchConfig::new(model_id, Shape::new(1, WINDOW_LEN), layers)
    }
}

/// Layers of one convolution block, without the trailing pool.
pub fn block_layers(style: ConvStyle, c_in: usize, c_out: usize, kernel: usize) -> Vec<LayerSpec> {
    let bn = |channels| LayerSpec::BatchNorm {
        channels,
        epsilon: DEFAULT_BN_EPSILON,
    };
    let mut v = Vec::with_capacity(7);
    match style {
        ConvStyle::Standard => {
            v.push(LayerSpec::Conv1D {
                c_in,
                c_out,
                kernel,
                stride: 1,
                padding: Padding::Same,
            });
        }
        ConvStyle::Separable => {
            v.push(LayerSpec::DepthwiseConv1D {
                channels: c_in,
                kernel,
                stride: 1,
                padding: Padding::Same,
            });
            v.push(bn(c_in));
            v.push(LayerSpec::ReLU);
            v.push(LayerSpec::PointwiseConv1D { c_in, c_out });
        }
    }
    v.push(bn(c_out));
    v.push(LayerSpec::ReLU);
    v.push(LayerSpec::Dropout {
        rate: BLOCK_DROPOUT,
    });
    v
}

/// Frozen hyperparameters of a reference model.
pub fn reference_spec(id: ModelId) -> CrnSpec {
    let b = |channels, pool| BlockSpec { channels, pool };
    match id {
        ModelId::Crn1 => CrnSpec {
            style: ConvStyle::Standard,
            input_pool: None,
            kernel: 9,
            blocks: alloc::vec![b(5, 4), b(6, 1), b(6, 4), b(23, 2)],
            head_input: HeadInput::Flatten,
            hidden: Some(19),
        },
        ModelId::Crn2 => CrnSpec {
            style: ConvStyle::Separable,
            input_pool: None,
            kernel: 3,
            blocks: alloc::vec![b(3, 4), b(3, 1), b(27, 2), b(27, 1)],
            head_input: HeadInput::GlobalAvgPool,
            hidden: Some(38),
        },
        ModelId::Crn3 => CrnSpec {
            style: ConvStyle::Separable,
            input_pool: Some(2),
            kernel: 7,
            blocks: alloc::vec![b(2, 4), b(20, 2), b(20, 1)],
            head_input: HeadInput::GlobalAvgPool,
            hidden: Some(48),
        },
    }
}

/// Reference architecture of CRN-1, CRN-2 or CRN-3.
pub fn reference_config(id: ModelId) -> ArchConfig {
    reference_spec(id).build(id.as_str())
}

/// First problem found when pairing weights with a config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightDiagnostic {
    /// Config layer index, when the problem belongs to one layer.
    pub layer: Option<usize>,
    pub kind: Option<&'static str>,
    pub detail: String,
}

impl fmt::Display for WeightDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.layer, self.kind) {
            (Some(i), Some(k)) => write!(f, "layer {i} ({k}): {}", self.detail),
            _ => f.write_str(&self.detail),
        }
    }
}

impl From<WeightDiagnostic> for Error {
    fn from(d: WeightDiagnostic) -> Self {
        Error::Weights {
            layer: d.layer.unwrap_or(0),
            kind: d.kind.unwrap_or("model"),
            detail: d.detail,
        }
    }
}

/// Checks that `weights` pairs one-to-one with the parametric layers of
/// `config`, with exact tensor lengths and finite values.
pub fn validate_weights(config: &ArchConfig, weights: &[LayerWeights]) -> Result<(), WeightDiagnostic> {
    let mut supplied = weights.iter();
    let mut expected = 0;
    for (i, layer) in config.parametric_layers() {
        expected += 1;
        let shape = layer.weight_shape().expect("parametric");
        let diag = |detail: String| WeightDiagnostic {
            layer: Some(i),
            kind: Some(layer.kind().name()),
            detail,
        };
        let Some(w) = supplied.next() else {
            return Err(diag(format!(
                "missing weights ({} entries supplied for {} parametric layers)",
                weights.len(),
                config.parametric_layers().count()
            )));
        };
        w.check_against(shape).map_err(|d| diag(format!("{d} [{layer}]")))?;
    }
    if weights.len() > expected {
        return Err(WeightDiagnostic {
            layer: None,
            kind: None,
            detail: format!(
                "{} weight entries supplied but the model has {expected} parametric layers",
                weights.len()
            ),
        });
    }
    Ok(())
}
