//! Seeded generators for random networks, weights and windows.

#![allow(dead_code)]

use ccl_core::layer::{LayerSpec, Padding, DEFAULT_BN_EPSILON};
use ccl_core::model::ArchConfig;
use ccl_core::tensor::Shape;
use ccl_core::zoo::{BlockSpec, ConvStyle, CrnSpec, HeadInput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random member of the CRN family with a 160-sample input.
pub fn crn_spec(r: &mut ChaCha8Rng, style: Option<ConvStyle>) -> CrnSpec {
    let style = style.unwrap_or(if r.random() { ConvStyle::Standard } else { ConvStyle::Separable });
    // 160 = 32 * 5, so pools of 2 and 4 divide it while their product stays <= 32.
    let mut budget = 32usize;
    let input_pool = if r.random_bool(0.3) {
        let p = [2, 4][r.random_range(0..2)];
        budget /= p;
        Some(p)
    } else {
        None
    };
    let head_input = if r.random() {
        HeadInput::GlobalAvgPool
    } else {
        HeadInput::Flatten
    };
    let n_blocks = r.random_range(1..=4);
    let mut channels = 0;
    let mut blocks = Vec::new();
    for b in 0..n_blocks {
        channels = r.random_range(channels.max(1)..=channels.max(1) + 8);
        let last = b + 1 == n_blocks;
        let mut pool = [1, 1, 2, 4][r.random_range(0..4)];
        if pool > budget || (last && head_input == HeadInput::GlobalAvgPool) {
            pool = 1;
        }
        budget /= pool;
        blocks.push(BlockSpec { channels, pool });
    }
    CrnSpec {
        style,
        input_pool,
        kernel: [1, 3, 5, 7, 9][r.random_range(0..5)],
        blocks,
        head_input,
        hidden: r.random_bool(0.6).then(|| r.random_range(1..=32)),
    }
}

pub fn crn_config(r: &mut ChaCha8Rng) -> ArchConfig {
    crn_spec(r, None).build("random-crn")
}

fn padding(r: &mut ChaCha8Rng) -> Padding {
    [Padding::Same, Padding::Valid, Padding::Causal][r.random_range(0..3)]
}

/// Random single layer and an input it accepts.
pub fn layer(r: &mut ChaCha8Rng) -> (Shape, LayerSpec) {
    let c = r.random_range(1..=16);
    let len = r.random_range(1..=200);
    let kernel = r.random_range(1..=len.min(11));
    let stride = r.random_range(1..=3);
    let spec = match r.random_range(0..9) {
        0 => LayerSpec::Conv1D {
            c_in: c,
            c_out: r.random_range(1..=16),
            kernel,
            stride,
            padding: padding(r),
        },
        1 => LayerSpec::DepthwiseConv1D {
            channels: c,
            kernel,
            stride,
            padding: padding(r),
        },
        2 => LayerSpec::PointwiseConv1D {
            c_in: c,
            c_out: r.random_range(1..=16),
        },
        3 => LayerSpec::BatchNorm {
            channels: c,
            epsilon: DEFAULT_BN_EPSILON,
        },
        4 => LayerSpec::MaxPool { kernel, stride },
        5 => LayerSpec::AvgPool { kernel, stride },
        6 => LayerSpec::GlobalAvgPool,
        7 => LayerSpec::Flatten,
        _ => LayerSpec::Dense {
            n_in: c * len,
            n_out: r.random_range(1..=16),
        },
    };
    (Shape::new(c, len), spec)
}

/// Random stack of convolutions with mixed padding and stride, closed by a
/// dense head.
pub fn conv_stack(r: &mut ChaCha8Rng) -> ArchConfig {
    let mut layers = Vec::new();
    let mut shape = Shape::new(1, 160);
    for _ in 0..r.random_range(1..=4) {
        let kernel = r.random_range(1..=7);
        let stride = r.random_range(1..=2);
        let c_out = r.random_range(1..=8);
        let spec = match r.random_range(0..3) {
            0 => LayerSpec::Conv1D {
                c_in: shape.channels,
                c_out,
                kernel,
                stride,
                padding: padding(r),
            },
            1 => LayerSpec::DepthwiseConv1D {
                channels: shape.channels,
                kernel,
                stride,
                padding: padding(r),
            },
            _ => LayerSpec::PointwiseConv1D {
                c_in: shape.channels,
                c_out,
            },
        };
        shape = spec.output_shape(shape).expect("stack stays long enough");
        layers.push(spec);
        layers.push(LayerSpec::BatchNorm {
            channels: shape.channels,
            epsilon: DEFAULT_BN_EPSILON,
        });
        layers.push(LayerSpec::ReLU);
    }
    layers.push(LayerSpec::Flatten);
    layers.push(LayerSpec::Dense {
        n_in: shape.numel(),
        n_out: 1,
    });
    ArchConfig::new("random-stack", Shape::new(1, 160), layers)
}

pub fn window(r: &mut ChaCha8Rng) -> Vec<f32> {
    (0..160).map(|_| r.random_range(-3.0f32..3.0)).collect()
}
