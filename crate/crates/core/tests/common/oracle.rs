//! Naive double-precision reference implementations for tests.
//!
//! Convolutions physically zero-pad the input and then run an unpadded
//! sliding dot product, so they share no index arithmetic with the engine.

#![allow(dead_code)]

use ccl_core::layer::{LayerSpec, LayerWeights, Padding};
use ccl_core::model::ArchConfig;

/// Activations as `x[channel][position]`.
pub type Act = Vec<Vec<f64>>;

/// Zeros added before and after the input for a convolution.
pub fn pad_amounts(padding: Padding, len: usize, kernel: usize, stride: usize) -> (usize, usize) {
    match padding {
        Padding::Valid => (0, 0),
        Padding::Causal => (kernel - 1, 0),
        Padding::Same => {
            // Smallest total padding that yields ceil(len / stride) outputs,
            // with any odd sample going on the right.
            let want = (len + stride - 1) / stride;
            let mut total = 0;
            while (len + total).saturating_sub(kernel) / stride + 1 < want || len + total < kernel {
                total += 1;
            }
            (total / 2, total - total / 2)
        }
    }
}

fn pad(x: &Act, left: usize, right: usize) -> Act {
    x.iter()
        .map(|ch| {
            let mut v = vec![0.0; left];
            v.extend_from_slice(ch);
            v.extend(std::iter::repeat(0.0).take(right));
            v
        })
        .collect()
}

fn affine(w: &LayerWeights) -> (Vec<f64>, Vec<f64>) {
    match w {
        LayerWeights::Affine { weight, bias } => (
            weight.iter().map(|&v| v as f64).collect(),
            bias.iter().map(|&v| v as f64).collect(),
        ),
        _ => panic!("expected affine weights"),
    }
}

fn positions(len: usize, window: usize, stride: usize) -> impl Iterator<Item = usize> {
    (0..).map(move |t| t * stride).take_while(move |&s| s + window <= len)
}

pub fn layer(x: &Act, spec: &LayerSpec, w: Option<&LayerWeights>) -> Act {
    match *spec {
        LayerSpec::Conv1D {
            c_in,
            c_out,
            kernel,
            stride,
            padding,
        } => {
            let (wt, b) = affine(w.unwrap());
            let (l, r) = pad_amounts(padding, x[0].len(), kernel, stride);
            let xp = pad(x, l, r);
            (0..c_out)
                .map(|o| {
                    positions(xp[0].len(), kernel, stride)
                        .map(|s| {
                            let mut acc = b[o];
                            for i in 0..c_in {
                                for k in 0..kernel {
                                    acc += wt[(o * c_in + i) * kernel + k] * xp[i][s + k];
                                }
                            }
                            acc
                        })
                        .collect()
                })
                .collect()
        }
        LayerSpec::DepthwiseConv1D {
            channels,
            kernel,
            stride,
            padding,
        } => {
            let (wt, b) = affine(w.unwrap());
            let (l, r) = pad_amounts(padding, x[0].len(), kernel, stride);
            let xp = pad(x, l, r);
            (0..channels)
                .map(|c| {
                    positions(xp[0].len(), kernel, stride)
                        .map(|s| b[c] + (0..kernel).map(|k| wt[c * kernel + k] * xp[c][s + k]).sum::<f64>())
                        .collect()
                })
                .collect()
        }
        LayerSpec::PointwiseConv1D { c_in, c_out } => {
            let (wt, b) = affine(w.unwrap());
            (0..c_out)
                .map(|o| {
                    (0..x[0].len())
                        .map(|t| b[o] + (0..c_in).map(|i| wt[o * c_in + i] * x[i][t]).sum::<f64>())
                        .collect()
                })
                .collect()
        }
        LayerSpec::BatchNorm { epsilon, .. } => {
            let Some(LayerWeights::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
            }) = w
            else {
                panic!("expected batch norm weights")
            };
            x.iter()
                .enumerate()
                .map(|(c, ch)| {
                    let (g, be, m, v) = (
                        gamma[c] as f64,
                        beta[c] as f64,
                        running_mean[c] as f64,
                        running_var[c] as f64,
                    );
                    ch.iter()
                        .map(|&z| g * (z - m) / (v + epsilon as f64).sqrt() + be)
                        .collect()
                })
                .collect()
        }
        LayerSpec::ReLU => x.iter().map(|ch| ch.iter().map(|&v| v.max(0.0)).collect()).collect(),
        LayerSpec::Dropout { .. } => x.clone(),
        LayerSpec::MaxPool { kernel, stride } => x
            .iter()
            .map(|ch| {
                positions(ch.len(), kernel, stride)
                    .map(|s| ch[s..s + kernel].iter().cloned().fold(f64::NEG_INFINITY, f64::max))
                    .collect()
            })
            .collect(),
        LayerSpec::AvgPool { kernel, stride } => x
            .iter()
            .map(|ch| {
                positions(ch.len(), kernel, stride)
                    .map(|s| ch[s..s + kernel].iter().sum::<f64>() / kernel as f64)
                    .collect()
            })
            .collect(),
        LayerSpec::GlobalAvgPool => x
            .iter()
            .map(|ch| vec![ch.iter().sum::<f64>() / ch.len() as f64])
            .collect(),
        LayerSpec::Flatten => vec![x.iter().flatten().cloned().collect()],
        LayerSpec::Dense { n_in, n_out } => {
            let (wt, b) = affine(w.unwrap());
            let flat: Vec<f64> = x.iter().flatten().cloned().collect();
            assert_eq!(flat.len(), n_in);
            (0..n_out)
                .map(|o| vec![b[o] + (0..n_in).map(|i| wt[o * n_in + i] * flat[i]).sum::<f64>()])
                .collect()
        }
    }
}

pub fn forward(config: &ArchConfig, weights: &[LayerWeights], input: &[f32]) -> f64 {
    let c = config.input.channels;
    let l = config.input.length;
    let mut x: Act = (0..c)
        .map(|ch| input[ch * l..(ch + 1) * l].iter().map(|&v| v as f64).collect())
        .collect();
    let mut w = weights.iter();
    for spec in &config.layers {
        let lw = if spec.is_parametric() { w.next() } else { None };
        x = layer(&x, spec, lw);
    }
    assert_eq!((x.len(), x[0].len()), (1, 1));
    x[0][0]
}

/// Multiplies performed by one layer, counted one output element at a time.
/// Returns `(macs, output channels, output length)`.
pub fn count_macs(spec: &LayerSpec, channels: usize, len: usize) -> (u64, usize, usize) {
    let out_len = |kernel, stride, padding| {
        let (l, r) = pad_amounts(padding, len, kernel, stride);
        positions(len + l + r, kernel, stride).count()
    };
    let mut macs = 0u64;
    let (c, l) = match *spec {
        LayerSpec::Conv1D {
            c_in,
            c_out,
            kernel,
            stride,
            padding,
        } => {
            let n = out_len(kernel, stride, padding);
            for _ in 0..c_out * n {
                for _ in 0..c_in * kernel {
                    macs += 1;
                }
            }
            (c_out, n)
        }
        LayerSpec::DepthwiseConv1D {
            channels,
            kernel,
            stride,
            padding,
        } => {
            let n = out_len(kernel, stride, padding);
            for _ in 0..channels * n {
                macs += kernel as u64;
            }
            (channels, n)
        }
        LayerSpec::PointwiseConv1D { c_in, c_out } => {
            for _ in 0..c_out * len {
                macs += c_in as u64;
            }
            (c_out, len)
        }
        LayerSpec::Dense { n_in, n_out } => {
            for _ in 0..n_out {
                macs += n_in as u64;
            }
            (n_out, 1)
        }
        LayerSpec::MaxPool { kernel, stride } | LayerSpec::AvgPool { kernel, stride } => {
            (channels, positions(len, kernel, stride).count())
        }
        LayerSpec::GlobalAvgPool => (channels, 1),
        LayerSpec::Flatten => (1, channels * len),
        _ => (channels, len),
    };
    (macs, c, l)
}

/// Stored scalars of one layer, read off the tensors it would carry.
pub fn count_params(spec: &LayerSpec) -> u64 {
    match *spec {
        LayerSpec::Conv1D {
            c_in, c_out, kernel, ..
        } => (c_out * c_in * kernel + c_out) as u64,
        LayerSpec::DepthwiseConv1D {
            channels, kernel, ..
        } => (channels * kernel + channels) as u64,
        LayerSpec::PointwiseConv1D { c_in, c_out } => (c_out * c_in + c_out) as u64,
        LayerSpec::Dense { n_in, n_out } => (n_out * n_in + n_out) as u64,
        LayerSpec::BatchNorm { channels, .. } => 4 * channels as u64,
        _ => 0,
    }
}
