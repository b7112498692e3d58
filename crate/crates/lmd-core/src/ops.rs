//! The neural operators used by the lane-marking network.
//!
//! All operators are pure functions over immutable tensors. Each output
//! element is accumulated in a fixed sequential order (input channel, then
//! kernel row, then kernel column), and parallelism only ever splits work
//! across independent output elements, so results are bit-identical across
//! runs and thread counts.

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{BatchNormParams, ConvParams, PoolIndices, Tensor};

fn conv_out_dim(
    input: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    dil: usize,
    axis: &str,
) -> Result<usize> {
    let extent = dil * (kernel - 1) + 1;
    let span = (input + 2 * pad) as isize - extent as isize;
    if span < 0 {
        return Err(Error::shape(
            "conv2d",
            format!("{axis} >= kernel extent {extent} (kernel {kernel}, dilation {dil}) minus 2*padding {pad}"),
            format!("{axis} = {input}"),
        ));
    }
    Ok(span as usize / stride + 1)
}

/// 2-D convolution with zero padding and dilation.
///
/// `out[n,o,y,x] = bias[o] + sum_{i,u,v} in[n,i, y*s - p + u*d, x*s - p + v*d] * w[o,i,u,v]`
/// with out-of-bounds samples treated as zero.
pub fn conv2d(input: &Tensor, p: &ConvParams) -> Result<Tensor> {
    let (n, c, h, w) = input.shape();
    let (oc, ic, kh, kw) = p.weights.shape();
    if ic != c {
        return Err(Error::shape(
            "conv2d",
            format!("input channels = kernel in-channels ({ic})"),
            format!("input channels {c}"),
        ));
    }
    let oh = conv_out_dim(h, kh, p.stride, p.padding, p.dilation, "height")?;
    let ow = conv_out_dim(w, kw, p.stride, p.padding, p.dilation, "width")?;
    let mut out = Tensor::zeros(n, oc, oh, ow)?;

    let wdata = p.weights.data();
    let (stride, pad, dil) = (p.stride, p.padding, p.dilation);
    let plane = oh * ow;
    par::for_each_chunk_mut(out.data_mut(), plane, |pi, oplane| {
        let (bn, o) = (pi / oc, pi % oc);
        for y in 0..oh {
            let row = &mut oplane[y * ow..(y + 1) * ow];
            row.fill(p.bias[o]);
            for i in 0..c {
                let iplane = input.plane(bn, i);
                let wbase = (o * c + i) * kh * kw;
                for u in 0..kh {
                    let iy = (y * stride + u * dil) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let irow = &iplane[iy as usize * w..(iy as usize + 1) * w];
                    for v in 0..kw {
                        let wt = wdata[wbase + u * kw + v];
                        let off = (v * dil) as isize - pad as isize;
                        if stride == 1 {
                            // in_x = x + off; keep x where that lands in bounds
                            let x0 = (-off).max(0) as usize;
                            let x1 = (w as isize - off).min(ow as isize).max(x0 as isize) as usize;
                            if x0 < x1 {
                                let src = &irow
                                    [(x0 as isize + off) as usize..(x1 as isize + off) as usize];
                                for (dst, s) in row[x0..x1].iter_mut().zip(src) {
                                    *dst += wt * *s;
                                }
                            }
                        } else {
                            for (x, dst) in row.iter_mut().enumerate() {
                                let ix = (x * stride) as isize + off;
                                if ix >= 0 && ix < w as isize {
                                    *dst += wt * irow[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    Ok(out)
}

/// Inference-mode batch normalization:
/// `gamma * (x - running_mean) / sqrt(running_var + eps) + beta` per channel.
pub fn batchnorm_infer(input: &Tensor, p: &BatchNormParams) -> Result<Tensor> {
    let (_, c, h, w) = input.shape();
    if p.channels() != c {
        return Err(Error::shape(
            "batchnorm_infer",
            format!("parameter vectors of length {c}"),
            format!("{}", p.channels()),
        ));
    }
    let scale: Vec<f32> =
        (0..c).map(|i| p.gamma[i] / (p.running_var[i] + p.epsilon).sqrt()).collect();
    let mut out = input.clone();
    par::for_each_chunk_mut(out.data_mut(), h * w, |pi, plane| {
        let ch = pi % c;
        let (s, m, b) = (scale[ch], p.running_mean[ch], p.beta[ch]);
        for v in plane.iter_mut() {
            *v = (*v - m) * s + b;
        }
    });
    Ok(out)
}

/// Elementwise `max(0, x)`.
pub fn relu(input: &Tensor) -> Tensor {
    let (_, _, h, w) = input.shape();
    let mut out = input.clone();
    par::for_each_chunk_mut(out.data_mut(), h * w, |_, plane| {
        for v in plane.iter_mut() {
            *v = v.max(0.0);
        }
    });
    out
}

/// 2x2 max pooling with stride 2, recording the flat plane offset of each
/// max. Ties go to the first cell of the window in row-major order, which
/// keeps index capture deterministic.
pub fn maxpool2x2(input: &Tensor) -> Result<(Tensor, PoolIndices)> {
    let (n, c, h, w) = input.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::InputContract(format!(
            "maxpool2x2 requires even spatial dims, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut vals = Tensor::zeros(n, c, oh, ow)?;
    let mut idxs = vec![0u32; n * c * oh * ow];
    let plane = oh * ow;
    par::for_each_chunk_mut2(vals.data_mut(), &mut idxs, plane, plane, |pi, vplane, iplane| {
        let (bn, ch) = (pi / c, pi % c);
        let src = input.plane(bn, ch);
        for y in 0..oh {
            for x in 0..ow {
                let mut best_off = 2 * y * w + 2 * x;
                let mut best = src[best_off];
                for (dy, dx) in [(0usize, 1usize), (1, 0), (1, 1)] {
                    let off = (2 * y + dy) * w + 2 * x + dx;
                    if src[off] > best {
                        best = src[off];
                        best_off = off;
                    }
                }
                vplane[y * ow + x] = best;
                iplane[y * ow + x] = best_off as u32;
            }
        }
    });
    Ok((vals, PoolIndices::from_raw(n, c, oh, ow, idxs)?))
}

/// Places each value at the source offset recorded by the paired
/// [`maxpool2x2`], zero everywhere else.
pub fn maxunpool2x2(
    input: &Tensor,
    idx: &PoolIndices,
    out_h: usize,
    out_w: usize,
) -> Result<Tensor> {
    let (n, c, h, w) = input.shape();
    if idx.shape() != (n, c, h, w) {
        return Err(Error::shape(
            "maxunpool2x2",
            format!("indices shaped {:?}", (n, c, h, w)),
            format!("{:?}", idx.shape()),
        ));
    }
    if out_h != 2 * h || out_w != 2 * w {
        return Err(Error::shape(
            "maxunpool2x2",
            format!("output {}x{}", 2 * h, 2 * w),
            format!("{out_h}x{out_w}"),
        ));
    }
    let mut out = Tensor::zeros(n, c, out_h, out_w)?;
    let oplane_len = out_h * out_w;
    let odata = out.data_mut();
    for bn in 0..n {
        for ch in 0..c {
            let vplane = input.plane(bn, ch);
            let iplane = idx.plane(bn, ch);
            let oplane = &mut odata[(bn * c + ch) * oplane_len..(bn * c + ch + 1) * oplane_len];
            for y in 0..h {
                for x in 0..w {
                    let off = iplane[y * w + x] as usize;
                    if off >= oplane_len || off / out_w / 2 != y || off % out_w / 2 != x {
                        return Err(Error::CorruptIndices { offset: off, y, x });
                    }
                    oplane[off] = vplane[y * w + x];
                }
            }
        }
    }
    Ok(out)
}

/// Per-pixel softmax over the channel axis, shifted by the channel max so
/// large logits cannot overflow.
pub fn softmax_channels(input: &Tensor) -> Tensor {
    let (n, c, h, w) = input.shape();
    let plane = h * w;
    let mut out = input.clone();
    let data = out.data_mut();
    for bn in 0..n {
        let base = bn * c * plane;
        for p in 0..plane {
            let mut mx = data[base + p];
            for ch in 1..c {
                mx = mx.max(data[base + ch * plane + p]);
            }
            let mut sum = 0.0f32;
            for ch in 0..c {
                let e = (data[base + ch * plane + p] - mx).exp();
                data[base + ch * plane + p] = e;
                sum += e;
            }
            for ch in 0..c {
                data[base + ch * plane + p] /= sum;
            }
        }
    }
    out
}

#[inline]
fn lerp(a: f32, b: f32, t: f32) -> f32 {
    a + t * (b - a)
}

// Source taps for one output coordinate of a 2x borders-clamped bilinear
// upsample (align-corners-false convention).
fn bilinear_taps(out_len: usize, in_len: usize) -> Vec<(usize, usize, f32)> {
    (0..out_len)
        .map(|o| {
            let src = (o as f32 + 0.5) * 0.5 - 0.5;
            let floor = src.floor();
            let t = src - floor;
            let i0 = if floor < 0.0 { 0 } else { (floor as usize).min(in_len - 1) };
            let i1 = (i0 + 1).min(in_len - 1).min((floor as isize + 1).max(0) as usize);
            (i0, i1, t)
        })
        .collect()
}

/// Doubles the spatial resolution by bilinear interpolation
/// (align-corners-false sample positions, borders clamped).
pub fn upsample2x_bilinear(input: &Tensor) -> Tensor {
    let (n, c, h, w) = input.shape();
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = Tensor::zeros(n, c, oh, ow).expect("dims stay positive");
    let ytaps = bilinear_taps(oh, h);
    let xtaps = bilinear_taps(ow, w);
    par::for_each_chunk_mut(out.data_mut(), oh * ow, |pi, oplane| {
        let src = input.plane(pi / c, pi % c);
        for oy in 0..oh {
            let (y0, y1, ty) = ytaps[oy];
            for ox in 0..ow {
                let (x0, x1, tx) = xtaps[ox];
                let top = lerp(src[y0 * w + x0], src[y0 * w + x1], tx);
                let bot = lerp(src[y1 * w + x0], src[y1 * w + x1], tx);
                oplane[oy * ow + ox] = lerp(top, bot, ty);
            }
        }
    });
    out
}
