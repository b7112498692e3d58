//! Naive reference versions of the neural operators, accumulating in f64.
//!
//! Tensors are passed as flat row-major slices with explicit NCHW dims so the
//! oracle does not depend on any library tensor type.

/// Output spatial extent of a convolution axis, or `None` if it would be empty.
pub fn conv_out_dim(
    input: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    dil: usize,
) -> Option<usize> {
    let span = (input + 2 * pad) as isize - (dil * (kernel - 1) + 1) as isize;
    if span < 0 {
        return None;
    }
    Some(span as usize / stride + 1)
}

/// Six-nested-loop convolution. Out-of-bounds input samples count as zero.
#[allow(clippy::too_many_arguments)]
pub fn conv2d(
    (n, c, h, w): (usize, usize, usize, usize),
    input: &[f32],
    (oc, kh, kw): (usize, usize, usize),
    weights: &[f32],
    bias: &[f32],
    stride: usize,
    pad: usize,
    dil: usize,
) -> (usize, usize, Vec<f64>) {
    assert_eq!(input.len(), n * c * h * w);
    assert_eq!(weights.len(), oc * c * kh * kw);
    assert_eq!(bias.len(), oc);
    let oh = conv_out_dim(h, kh, stride, pad, dil).expect("empty output");
    let ow = conv_out_dim(w, kw, stride, pad, dil).expect("empty output");
    let mut out = vec![0.0f64; n * oc * oh * ow];
    for b in 0..n {
        for o in 0..oc {
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = bias[o] as f64;
                    for i in 0..c {
                        for u in 0..kh {
                            for v in 0..kw {
                                let iy = (y * stride + u * dil) as isize - pad as isize;
                                let ix = (x * stride + v * dil) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let iv = input[((b * c + i) * h + iy as usize) * w + ix as usize];
                                let wv = weights[((o * c + i) * kh + u) * kw + v];
                                acc += iv as f64 * wv as f64;
                            }
                        }
                    }
                    out[((b * oc + o) * oh + y) * ow + x] = acc;
                }
            }
        }
    }
    (oh, ow, out)
}

/// Scalar-loop inference batch norm.
#[allow(clippy::too_many_arguments)]
pub fn batchnorm(
    (n, c, h, w): (usize, usize, usize, usize),
    input: &[f32],
    gamma: &[f32],
    beta: &[f32],
    mean: &[f32],
    var: &[f32],
    eps: f32,
) -> Vec<f64> {
    let mut out = vec![0.0f64; input.len()];
    for b in 0..n {
        for ch in 0..c {
            for p in 0..h * w {
                let idx = (b * c + ch) * h * w + p;
                let x = input[idx] as f64;
                out[idx] = gamma[ch] as f64 * (x - mean[ch] as f64)
                    / (var[ch] as f64 + eps as f64).sqrt()
                    + beta[ch] as f64;
            }
        }
    }
    out
}

/// Window-scan 2x2 max pool. Ties go to the first cell in row-major order.
/// Returned indices are flat offsets into the source (h, w) plane.
pub fn maxpool2x2(
    (n, c, h, w): (usize, usize, usize, usize),
    input: &[f32],
) -> (Vec<f32>, Vec<u32>) {
    assert!(h % 2 == 0 && w % 2 == 0);
    let (oh, ow) = (h / 2, w / 2);
    let mut vals = vec![0.0f32; n * c * oh * ow];
    let mut idxs = vec![0u32; n * c * oh * ow];
    for b in 0..n {
        for ch in 0..c {
            let plane = &input[(b * c + ch) * h * w..(b * c + ch + 1) * h * w];
            for y in 0..oh {
                for x in 0..ow {
                    let mut best = f32::NEG_INFINITY;
                    let mut best_off = 0u32;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let off = (2 * y + dy) * w + 2 * x + dx;
                            if plane[off] > best {
                                best = plane[off];
                                best_off = off as u32;
                            }
                        }
                    }
                    vals[((b * c + ch) * oh + y) * ow + x] = best;
                    idxs[((b * c + ch) * oh + y) * ow + x] = best_off;
                }
            }
        }
    }
    (vals, idxs)
}

/// Scatter unpool: zeros everywhere except the recorded max locations.
pub fn maxunpool2x2(
    (n, c, h, w): (usize, usize, usize, usize),
    input: &[f32],
    indices: &[u32],
    out_h: usize,
    out_w: usize,
) -> Vec<f32> {
    let mut out = vec![0.0f32; n * c * out_h * out_w];
    for b in 0..n {
        for ch in 0..c {
            for p in 0..h * w {
                let src = (b * c + ch) * h * w + p;
                out[(b * c + ch) * out_h * out_w + indices[src] as usize] = input[src];
            }
        }
    }
    out
}

/// Per-pixel channel softmax with max subtraction, in f64.
pub fn softmax_channels((n, c, h, w): (usize, usize, usize, usize), input: &[f32]) -> Vec<f64> {
    let mut out = vec![0.0f64; input.len()];
    let plane = h * w;
    for b in 0..n {
        for p in 0..plane {
            let mut mx = f64::NEG_INFINITY;
            for ch in 0..c {
                mx = mx.max(input[(b * c + ch) * plane + p] as f64);
            }
            let mut sum = 0.0f64;
            for ch in 0..c {
                sum += ((input[(b * c + ch) * plane + p] as f64) - mx).exp();
            }
            for ch in 0..c {
                let idx = (b * c + ch) * plane + p;
                out[idx] = ((input[idx] as f64) - mx).exp() / sum;
            }
        }
    }
    out
}
