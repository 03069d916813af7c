//! Layer primitives: 3x3(x3) same-padding convolutions, dense layers and
//! activations, each with a matching backward pass.
//!
//! Data layout is channels-last throughout, so the innermost loops run over
//! contiguous channel slices.

use super::Scalar;
use crate::{Error, Result};

/// LeakyReLU negative slope.
pub const LEAKY_SLOPE: f64 = 0.01;

/// 3D convolution, kernel 3x3x3, stride 1, same padding.
///
/// `input` has shape `[d0, d1, d2, cin]`; `weights` are `[cout, 27, cin]`;
/// the output is `[d0, d1, d2, cout]`.
pub fn conv3d_forward<F: Scalar>(
    input: &[F],
    dims: [usize; 3],
    cin: usize,
    weights: &[F],
    bias: &[F],
    cout: usize,
) -> Result<Vec<F>> {
    let [d0, d1, d2] = dims;
    check_conv_shapes(input.len(), d0 * d1 * d2, cin, weights.len(), 27, bias.len(), cout)?;
    let mut out = vec![F::zero(); d0 * d1 * d2 * cout];
    let mut acc = vec![F::zero(); cout];
    for z in 0..d0 {
        for y in 0..d1 {
            for x in 0..d2 {
                for (o, a) in acc.iter_mut().enumerate() {
                    *a = bias[o];
                }
                for dz in 0..3usize {
                    let Some(iz) = (z + dz).checked_sub(1).filter(|&v| v < d0) else { continue };
                    for dy in 0..3usize {
                        let Some(iy) = (y + dy).checked_sub(1).filter(|&v| v < d1) else { continue };
                        for dx in 0..3usize {
                            let Some(ix) = (x + dx).checked_sub(1).filter(|&v| v < d2) else { continue };
                            let k = (dz * 3 + dy) * 3 + dx;
                            let in_row = &input[((iz * d1 + iy) * d2 + ix) * cin..][..cin];
                            for (o, a) in acc.iter_mut().enumerate() {
                                let w_row = &weights[(o * 27 + k) * cin..][..cin];
                                let mut dot = F::zero();
                                for (wv, iv) in w_row.iter().zip(in_row) {
                                    dot += *wv * *iv;
                                }
                                *a += dot;
                            }
                        }
                    }
                }
                let base = ((z * d1 + y) * d2 + x) * cout;
                out[base..base + cout].copy_from_slice(&acc);
            }
        }
    }
    Ok(out)
}

/// Backward pass of [`conv3d_forward`]; returns `(d_input, d_weights, d_bias)`.
pub fn conv3d_backward<F: Scalar>(
    input: &[F],
    dims: [usize; 3],
    cin: usize,
    weights: &[F],
    cout: usize,
    grad_out: &[F],
) -> Result<(Vec<F>, Vec<F>, Vec<F>)> {
    let [d0, d1, d2] = dims;
    check_conv_shapes(input.len(), d0 * d1 * d2, cin, weights.len(), 27, cout, cout)?;
    if grad_out.len() != d0 * d1 * d2 * cout {
        return Err(Error::Shape("conv3d: upstream gradient shape mismatch".into()));
    }
    let mut d_input = vec![F::zero(); input.len()];
    let mut d_weights = vec![F::zero(); weights.len()];
    let mut d_bias = vec![F::zero(); cout];
    for z in 0..d0 {
        for y in 0..d1 {
            for x in 0..d2 {
                let g_row = &grad_out[((z * d1 + y) * d2 + x) * cout..][..cout];
                for (o, g) in g_row.iter().enumerate() {
                    d_bias[o] += *g;
                }
                for dz in 0..3usize {
                    let Some(iz) = (z + dz).checked_sub(1).filter(|&v| v < d0) else { continue };
                    for dy in 0..3usize {
                        let Some(iy) = (y + dy).checked_sub(1).filter(|&v| v < d1) else { continue };
                        for dx in 0..3usize {
                            let Some(ix) = (x + dx).checked_sub(1).filter(|&v| v < d2) else { continue };
                            let k = (dz * 3 + dy) * 3 + dx;
                            let in_base = ((iz * d1 + iy) * d2 + ix) * cin;
                            let in_row = &input[in_base..in_base + cin];
                            let di_row = &mut d_input[in_base..in_base + cin];
                            for (o, g) in g_row.iter().enumerate() {
                                let w_base = (o * 27 + k) * cin;
                                let w_row = &weights[w_base..w_base + cin];
                                let dw_row = &mut d_weights[w_base..w_base + cin];
                                for ci in 0..cin {
                                    di_row[ci] += *g * w_row[ci];
                                    dw_row[ci] += *g * in_row[ci];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((d_input, d_weights, d_bias))
}

/// 2D convolution, kernel 3x3, stride 1, same padding.
/// `input` is `[d0, d1, cin]`; `weights` are `[cout, 9, cin]`.
pub fn conv2d_forward<F: Scalar>(
    input: &[F],
    dims: [usize; 2],
    cin: usize,
    weights: &[F],
    bias: &[F],
    cout: usize,
) -> Result<Vec<F>> {
    let [d0, d1] = dims;
    check_conv_shapes(input.len(), d0 * d1, cin, weights.len(), 9, bias.len(), cout)?;
    let mut out = vec![F::zero(); d0 * d1 * cout];
    let mut acc = vec![F::zero(); cout];
    for y in 0..d0 {
        for x in 0..d1 {
            for (o, a) in acc.iter_mut().enumerate() {
                *a = bias[o];
            }
            for dy in 0..3usize {
                let Some(iy) = (y + dy).checked_sub(1).filter(|&v| v < d0) else { continue };
                for dx in 0..3usize {
                    let Some(ix) = (x + dx).checked_sub(1).filter(|&v| v < d1) else { continue };
                    let k = dy * 3 + dx;
                    let in_row = &input[(iy * d1 + ix) * cin..][..cin];
                    for (o, a) in acc.iter_mut().enumerate() {
                        let w_row = &weights[(o * 9 + k) * cin..][..cin];
                        let mut dot = F::zero();
                        for (wv, iv) in w_row.iter().zip(in_row) {
                            dot += *wv * *iv;
                        }
                        *a += dot;
                    }
                }
            }
            let base = (y * d1 + x) * cout;
            out[base..base + cout].copy_from_slice(&acc);
        }
    }
    Ok(out)
}

/// Backward pass of [`conv2d_forward`]; returns `(d_input, d_weights, d_bias)`.
pub fn conv2d_backward<F: Scalar>(
    input: &[F],
    dims: [usize; 2],
    cin: usize,
    weights: &[F],
    cout: usize,
    grad_out: &[F],
) -> Result<(Vec<F>, Vec<F>, Vec<F>)> {
    let [d0, d1] = dims;
    check_conv_shapes(input.len(), d0 * d1, cin, weights.len(), 9, cout, cout)?;
    if grad_out.len() != d0 * d1 * cout {
        return Err(Error::Shape("conv2d: upstream gradient shape mismatch".into()));
    }
    let mut d_input = vec![F::zero(); input.len()];
    let mut d_weights = vec![F::zero(); weights.len()];
    let mut d_bias = vec![F::zero(); cout];
    for y in 0..d0 {
        for x in 0..d1 {
            let g_row = &grad_out[(y * d1 + x) * cout..][..cout];
            for (o, g) in g_row.iter().enumerate() {
                d_bias[o] += *g;
            }
            for dy in 0..3usize {
                let Some(iy) = (y + dy).checked_sub(1).filter(|&v| v < d0) else { continue };
                for dx in 0..3usize {
                    let Some(ix) = (x + dx).checked_sub(1).filter(|&v| v < d1) else { continue };
                    let k = dy * 3 + dx;
                    let in_base = (iy * d1 + ix) * cin;
                    let in_row = &input[in_base..in_base + cin];
                    let di_row = &mut d_input[in_base..in_base + cin];
                    for (o, g) in g_row.iter().enumerate() {
                        let w_base = (o * 9 + k) * cin;
                        let w_row = &weights[w_base..w_base + cin];
                        let dw_row = &mut d_weights[w_base..w_base + cin];
                        for ci in 0..cin {
                            di_row[ci] += *g * w_row[ci];
                            dw_row[ci] += *g * in_row[ci];
                        }
                    }
                }
            }
        }
    }
    Ok((d_input, d_weights, d_bias))
}

fn check_conv_shapes(
    input_len: usize,
    positions: usize,
    cin: usize,
    weights_len: usize,
    kvol: usize,
    bias_len: usize,
    cout: usize,
) -> Result<()> {
    if input_len != positions * cin {
        return Err(Error::Shape(format!(
            "conv input length {input_len} != {positions} positions x {cin} channels"
        )));
    }
    if weights_len != cout * kvol * cin {
        return Err(Error::Shape(format!(
            "conv weights length {weights_len} != {cout} x {kvol} x {cin}"
        )));
    }
    if bias_len != cout {
        return Err(Error::Shape(format!("conv bias length {bias_len} != {cout} filters")));
    }
    Ok(())
}

/// Dense layer forward: `out = x W + b`, weights stored `[in, out]`.
pub fn dense_forward<F: Scalar>(input: &[F], weights: &[F], bias: &[F]) -> Result<Vec<F>> {
    let out_dim = bias.len();
    if out_dim == 0 || weights.len() != input.len() * out_dim {
        return Err(Error::Shape(format!(
            "dense: weights {} != in {} x out {}",
            weights.len(),
            input.len(),
            out_dim
        )));
    }
    let mut out = bias.to_vec();
    for (i, &xi) in input.iter().enumerate() {
        let w_row = &weights[i * out_dim..(i + 1) * out_dim];
        for (o, wv) in out.iter_mut().zip(w_row) {
            *o += xi * *wv;
        }
    }
    Ok(out)
}

/// Backward pass of [`dense_forward`]; returns `(d_input, d_weights, d_bias)`.
pub fn dense_backward<F: Scalar>(
    input: &[F],
    weights: &[F],
    grad_out: &[F],
) -> Result<(Vec<F>, Vec<F>, Vec<F>)> {
    let out_dim = grad_out.len();
    if weights.len() != input.len() * out_dim {
        return Err(Error::Shape("dense backward: shape mismatch".into()));
    }
    let mut d_input = vec![F::zero(); input.len()];
    let mut d_weights = vec![F::zero(); weights.len()];
    for (i, &xi) in input.iter().enumerate() {
        let w_row = &weights[i * out_dim..(i + 1) * out_dim];
        let dw_row = &mut d_weights[i * out_dim..(i + 1) * out_dim];
        let mut acc = F::zero();
        for o in 0..out_dim {
            acc += grad_out[o] * w_row[o];
            dw_row[o] = xi * grad_out[o];
        }
        d_input[i] = acc;
    }
    Ok((d_input, d_weights, grad_out.to_vec()))
}

pub fn leaky_relu<F: Scalar>(x: &mut [F]) {
    let slope = F::from_f64(LEAKY_SLOPE);
    for v in x.iter_mut() {
        if *v < F::zero() {
            *v *= slope;
        }
    }
}

/// `pre` is the layer input cached before the activation.
pub fn leaky_relu_backward<F: Scalar>(pre: &[F], grad: &mut [F]) {
    let slope = F::from_f64(LEAKY_SLOPE);
    for (g, p) in grad.iter_mut().zip(pre) {
        if *p < F::zero() {
            *g *= slope;
        }
    }
}

pub fn relu<F: Scalar>(x: &mut [F]) {
    for v in x.iter_mut() {
        if *v < F::zero() {
            *v = F::zero();
        }
    }
}

pub fn relu_backward<F: Scalar>(pre: &[F], grad: &mut [F]) {
    for (g, p) in grad.iter_mut().zip(pre) {
        if *p < F::zero() {
            *g = F::zero();
        }
    }
}

/// Numerically-stable softmax.
pub fn softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().cloned().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: F = exps.iter().cloned().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Categorical cross-entropy `-sum_k y_k log(p_k)` with entries clamped to
/// `[1e-12, 1]`. The prediction must be a distribution (sums to 1 within
/// 1e-6).
pub fn cross_entropy_loss<F: Scalar>(predicted: &[F], label_onehot: &[F]) -> Result<F> {
    if predicted.len() != label_onehot.len() {
        return Err(Error::Shape(format!(
            "cross entropy: {} predictions vs {} labels",
            predicted.len(),
            label_onehot.len()
        )));
    }
    let total: f64 = predicted.iter().map(|&p| Scalar::to_f64(p)).sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Domain(format!("predicted probabilities sum to {total}, not 1")));
    }
    let mut loss = F::zero();
    let lo = F::from_f64(1e-12);
    let hi = F::one();
    for (p, y) in predicted.iter().zip(label_onehot) {
        if *y != F::zero() {
            let clamped = p.max(lo).min(hi);
            loss -= *y * clamped.ln();
        }
    }
    Ok(loss)
}
