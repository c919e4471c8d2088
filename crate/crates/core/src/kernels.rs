//! Single-precision layer kernels.
//!
//! [`apply`] writes into caller-provided storage and is shared by the
//! allocating [`forward_layer`] and the preallocated [`crate::Model`], so both
//! paths run the identical arithmetic.

use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::layer::{conv_geometry, LayerSpec, LayerWeights};
use crate::tensor::{Shape, Tensor1D};

/// Runs one layer, validating shapes and weights first.
pub fn forward_layer(
    input: &Tensor1D,
    spec: &LayerSpec,
    weights: Option<&LayerWeights>,
) -> Result<Tensor1D> {
    let out_shape = spec.output_shape(input.shape()).map_err(|detail| Error::Shape {
        layer: 0,
        detail: format!("{spec}: {detail}"),
    })?;
    match (spec.weight_shape(), weights) {
        (Some(shape), Some(w)) => w.check_against(shape).map_err(|detail| Error::Weights {
            layer: 0,
            kind: spec.kind().name(),
            detail,
        })?,
        (Some(_), None) => {
            return Err(Error::Weights {
                layer: 0,
                kind: spec.kind().name(),
                detail: "missing weights".into(),
            })
        }
        (None, Some(_)) => {
            return Err(Error::Weights {
                layer: 0,
                kind: spec.kind().name(),
                detail: "unexpected weights for a parameter-free layer".into(),
            })
        }
        (None, None) => {}
    }
    if input.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("layer input"));
    }
    let mut out = vec![0.0; out_shape.numel()];
    apply(spec, weights, input.data(), input.shape(), &mut out);
    Ok(Tensor1D::from_parts(out_shape, out))
}

/// Computes one layer into `out`, returning the output extent.
///
/// Shapes and weights must already be validated; `out` must hold at least
/// the output element count.
pub(crate) fn apply(
    spec: &LayerSpec,
    weights: Option<&LayerWeights>,
    input: &[f32],
    in_shape: Shape,
    out: &mut [f32],
) -> Shape {
    let len = in_shape.length;
    match *spec {
        LayerSpec::Conv1D {
            c_in,
            c_out,
            kernel,
            stride,
            padding,
        } => {
            let (weight, bias) = affine(weights);
            let geo = conv_geometry(padding, len, kernel, stride).expect("validated");
            for o in 0..c_out {
                let row = &mut out[o * geo.out_len..(o + 1) * geo.out_len];
                for (t, y) in row.iter_mut().enumerate() {
                    let (start, k_lo, k_hi) = window(t, stride, geo.pad_left, kernel, len);
                    let mut acc = bias[o];
                    for i in 0..c_in {
                        let w = &weight[(o * c_in + i) * kernel..(o * c_in + i + 1) * kernel];
                        let x = &input[i * len..(i + 1) * len];
                        for k in k_lo..k_hi {
                            acc += w[k] * x[start + k - geo.pad_left];
                        }
                    }
                    *y = acc;
                }
            }
            Shape::new(c_out, geo.out_len)
        }
        LayerSpec::DepthwiseConv1D {
            channels,
            kernel,
            stride,
            padding,
        } => {
            let (weight, bias) = affine(weights);
            let geo = conv_geometry(padding, len, kernel, stride).expect("validated");
            for c in 0..channels {
                let w = &weight[c * kernel..(c + 1) * kernel];
                let x = &input[c * len..(c + 1) * len];
                let row = &mut out[c * geo.out_len..(c + 1) * geo.out_len];
                for (t, y) in row.iter_mut().enumerate() {
                    let (start, k_lo, k_hi) = window(t, stride, geo.pad_left, kernel, len);
                    let mut acc = bias[c];
                    for k in k_lo..k_hi {
                        acc += w[k] * x[start + k - geo.pad_left];
                    }
                    *y = acc;
                }
            }
            Shape::new(channels, geo.out_len)
        }
        LayerSpec::PointwiseConv1D { c_in, c_out } => {
            let (weight, bias) = affine(weights);
            for o in 0..c_out {
                let w = &weight[o * c_in..(o + 1) * c_in];
                let row = &mut out[o * len..(o + 1) * len];
                row.fill(bias[o]);
                for (i, wi) in w.iter().enumerate() {
                    let x = &input[i * len..(i + 1) * len];
                    for (y, xv) in row.iter_mut().zip(x) {
                        *y += wi * xv;
                    }
                }
            }
            Shape::new(c_out, len)
        }
        LayerSpec::BatchNorm { channels, epsilon } => {
            let Some(LayerWeights::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
            }) = weights
            else {
                unreachable!("validated batch-norm weights")
            };
            for c in 0..channels {
                let scale = gamma[c] / libm::sqrtf(running_var[c] + epsilon);
                let (mean, shift) = (running_mean[c], beta[c]);
                let x = &input[c * len..(c + 1) * len];
                for (y, xv) in out[c * len..(c + 1) * len].iter_mut().zip(x) {
                    *y = (xv - mean) * scale + shift;
                }
            }
            in_shape
        }
        LayerSpec::ReLU => {
            for (y, x) in out.iter_mut().zip(&input[..in_shape.numel()]) {
                *y = x.max(0.0);
            }
            in_shape
        }
        LayerSpec::Dropout { .. } | LayerSpec::Flatten => {
            let n = in_shape.numel();
            out[..n].copy_from_slice(&input[..n]);
            if matches!(spec, LayerSpec::Flatten) {
                Shape::new(1, n)
            } else {
                in_shape
            }
        }
        LayerSpec::MaxPool { kernel, stride } | LayerSpec::AvgPool { kernel, stride } => {
            let out_len = (len - kernel) / stride + 1;
            let is_max = matches!(spec, LayerSpec::MaxPool { .. });
            for c in 0..in_shape.channels {
                let x = &input[c * len..(c + 1) * len];
                for t in 0..out_len {
                    let span = &x[t * stride..t * stride + kernel];
                    out[c * out_len + t] = if is_max {
                        span.iter().copied().fold(f32::NEG_INFINITY, f32::max)
                    } else {
                        span.iter().sum::<f32>() / kernel as f32
                    };
                }
            }
            Shape::new(in_shape.channels, out_len)
        }
        LayerSpec::GlobalAvgPool => {
            for c in 0..in_shape.channels {
                let x = &input[c * len..(c + 1) * len];
                out[c] = x.iter().sum::<f32>() / len as f32;
            }
            Shape::new(in_shape.channels, 1)
        }
        LayerSpec::Dense { n_in, n_out } => {
            let (weight, bias) = affine(weights);
            let x = &input[..n_in];
            for o in 0..n_out {
                let w = &weight[o * n_in..(o + 1) * n_in];
                let mut acc = bias[o];
                for (wi, xi) in w.iter().zip(x) {
                    acc += wi * xi;
                }
                out[o] = acc;
            }
            Shape::new(n_out, 1)
        }
    }
}

fn affine(weights: Option<&LayerWeights>) -> (&[f32], &[f32]) {
    match weights {
        Some(LayerWeights::Affine { weight, bias }) => (weight, bias),
        _ => unreachable!("validated affine weights"),
    }
}

/// Padded start position and the kernel taps that land inside the input.
#[inline]
fn window(t: usize, stride: usize, pad_left: usize, kernel: usize, len: usize) -> (usize, usize, usize) {
    let start = t * stride;
    let k_lo = pad_left.saturating_sub(start);
    let k_hi = kernel.min((len + pad_left).saturating_sub(start));
    (start, k_lo, k_hi.max(k_lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::Padding;
    use alloc::vec::Vec;

    fn t(data: &[f32]) -> Tensor1D {
        Tensor1D::new(1, data.len(), data.to_vec()).unwrap()
    }

    fn affine_w(weight: &[f32], bias: &[f32]) -> LayerWeights {
        LayerWeights::Affine {
            weight: weight.to_vec(),
            bias: bias.to_vec(),
        }
    }

    fn conv(kernel: usize, padding: Padding) -> LayerSpec {
        LayerSpec::Conv1D {
            c_in: 1,
            c_out: 1,
            kernel,
            stride: 1,
            padding,
        }
    }

    #[test]
    fn identity_kernel() {
        let y = forward_layer(
            &t(&[1.0, 2.0, 3.0]),
            &conv(1, Padding::Same),
            Some(&affine_w(&[1.0], &[0.0])),
        )
        .unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn ones_kernel_with_zero_padding() {
        let y = forward_layer(
            &t(&[0.0, 1.0, 0.0]),
            &conv(3, Padding::Same),
            Some(&affine_w(&[1.0; 3], &[0.0])),
        )
        .unwrap();
        assert_eq!(y.data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn causal_only_looks_back() {
        // y[t] = x[t-2] with taps [1, 0, 0]
        let y = forward_layer(
            &t(&[1.0, 2.0, 3.0, 4.0]),
            &conv(3, Padding::Causal),
            Some(&affine_w(&[1.0, 0.0, 0.0], &[0.0])),
        )
        .unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn valid_and_strided() {
        let spec = LayerSpec::Conv1D {
            c_in: 1,
            c_out: 1,
            kernel: 2,
            stride: 2,
            padding: Padding::Valid,
        };
        let y = forward_layer(
            &t(&[1.0, 2.0, 3.0, 4.0, 5.0]),
            &spec,
            Some(&affine_w(&[1.0, 1.0], &[0.5])),
        )
        .unwrap();
        assert_eq!(y.data(), &[3.5, 7.5]);
    }

    #[test]
    fn max_pool() {
        let y = forward_layer(
            &t(&[1.0, 3.0, 2.0, 0.0]),
            &LayerSpec::MaxPool { kernel: 2, stride: 2 },
            None,
        )
        .unwrap();
        assert_eq!(y.data(), &[3.0, 2.0]);
    }

    #[test]
    fn avg_and_global_pool() {
        let x = Tensor1D::new(2, 4, alloc::vec![1.0, 3.0, 2.0, 0.0, 4.0, 4.0, 8.0, 0.0]).unwrap();
        let y = forward_layer(&x, &LayerSpec::AvgPool { kernel: 2, stride: 2 }, None).unwrap();
        assert_eq!(y.data(), &[2.0, 1.0, 4.0, 4.0]);
        let g = forward_layer(&x, &LayerSpec::GlobalAvgPool, None).unwrap();
        assert_eq!(g.shape(), Shape::new(2, 1));
        assert_eq!(g.data(), &[1.5, 4.0]);
    }

    #[test]
    fn batchnorm_formula() {
        let spec = LayerSpec::BatchNorm {
            channels: 1,
            epsilon: 1e-3,
        };
        let w = LayerWeights::BatchNorm {
            gamma: alloc::vec![2.0],
            beta: alloc::vec![1.0],
            running_mean: alloc::vec![0.5],
            running_var: alloc::vec![0.999],
        };
        let y = forward_layer(&t(&[1.5, 0.5]), &spec, Some(&w)).unwrap();
        assert!((y.data()[0] - 3.0).abs() < 1e-6);
        assert!((y.data()[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dropout_and_relu() {
        let x = t(&[-1.0, 2.0]);
        let d = forward_layer(&x, &LayerSpec::Dropout { rate: 0.3 }, None).unwrap();
        assert_eq!(d, x);
        let r = forward_layer(&x, &LayerSpec::ReLU, None).unwrap();
        assert_eq!(r.data(), &[0.0, 2.0]);
    }

    #[test]
    fn weight_errors() {
        let x = t(&[1.0, 2.0]);
        let dense = LayerSpec::Dense { n_in: 2, n_out: 1 };
        assert!(matches!(
            forward_layer(&x, &dense, None),
            Err(Error::Weights { .. })
        ));
        assert!(matches!(
            forward_layer(&x, &LayerSpec::ReLU, Some(&affine_w(&[1.0], &[0.0]))),
            Err(Error::Weights { .. })
        ));
        assert!(matches!(
            forward_layer(&x, &dense, Some(&affine_w(&[1.0], &[0.0]))),
            Err(Error::Weights { .. })
        ));
        assert!(matches!(
            forward_layer(&t(&[1.0, 2.0, 3.0]), &dense, Some(&affine_w(&[1.0, 1.0], &[0.0]))),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn depthwise_and_pointwise_compose() {
        let x = Tensor1D::new(2, 3, alloc::vec![1.0, 2.0, 3.0, 10.0, 20.0, 30.0]).unwrap();
        let dw = LayerSpec::DepthwiseConv1D {
            channels: 2,
            kernel: 1,
            stride: 1,
            padding: Padding::Same,
        };
        let y = forward_layer(&x, &dw, Some(&affine_w(&[2.0, 0.5], &[0.0, 1.0]))).unwrap();
        assert_eq!(y.data(), &[2.0, 4.0, 6.0, 6.0, 11.0, 16.0]);
        let pw = LayerSpec::PointwiseConv1D { c_in: 2, c_out: 1 };
        let z = forward_layer(&y, &pw, Some(&affine_w(&[1.0, 1.0], &[0.0]))).unwrap();
        let expect: Vec<f32> = alloc::vec![8.0, 15.0, 22.0];
        assert_eq!(z.data(), expect.as_slice());
    }
}
