//! The lane-marking network: layer table construction, architecture
//! introspection, and forward inference.
//!
//! The encoder is a VGG16-style stack of 14 3x3 convolutions keeping only the
//! first three 2x2 max pools (after convs 2, 4 and 7), with convs 11-13
//! dilated by 2 to preserve the receptive field lost with the discarded
//! pools. The decoder is thin (width 64): 7 convolutions and 2 max-unpool
//! layers that consume the indices captured by the later two encoder pools.
//! Two unpools recover stride 2 out of the encoder's stride 8, so a
//! parameter-free 2x bilinear upsample is appended before the softmax
//! classifier to reach full resolution — see the README for why that layer
//! exists.

use crate::error::{Error, Result};
use crate::label::LabelMap;
use crate::ops;
use crate::tensor::{PoolIndices, Tensor};
use crate::weights::WeightStore;

/// Epsilon used by every batch-normalization layer at inference time.
pub const BN_EPSILON: f32 = 1e-5;

/// One layer of the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    /// 3x3 convolution, stride 1, zero padding equal to the dilation (so the
    /// spatial size is preserved), optionally followed by batch norm + ReLU.
    Conv { name: String, in_c: usize, out_c: usize, dilation: usize, bn_relu: bool },
    /// 2x2 max pool, stride 2, with index capture.
    MaxPool,
    /// 2x unpool consuming the indices captured by the pool at layer index
    /// `source`.
    MaxUnpool { source: usize },
    /// Parameter-free 2x bilinear upsample.
    Upsample2x,
    /// Per-pixel channel softmax.
    Softmax,
}

impl LayerSpec {
    fn conv(
        name: impl Into<String>,
        in_c: usize,
        out_c: usize,
        dilation: usize,
        bn_relu: bool,
    ) -> LayerSpec {
        LayerSpec::Conv { name: name.into(), in_c, out_c, dilation, bn_relu }
    }
}

/// An ordered, validated layer table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    layers: Vec<LayerSpec>,
    encoder_len: usize,
    num_classes: usize,
    input_multiple: usize,
}

/// Receptive field of one activation at the encoder output, plus the
/// encoder's cumulative downsampling factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReceptiveField {
    pub height: usize,
    pub width: usize,
    pub output_stride: usize,
}

/// Dense per-pixel class scores plus the argmax label map.
#[derive(Debug, Clone)]
pub struct ForwardResult {
    pub scores: Tensor,
    pub labels: LabelMap,
}

impl NetworkSpec {
    /// Builds an arbitrary layer table with structural validation only
    /// (unpool sources must point at earlier pools, conv dims must be
    /// positive). Used for toy networks in introspection and tests; the
    /// lane-marking topology itself comes from [`build_lmd`].
    pub fn custom(
        layers: Vec<LayerSpec>,
        num_classes: usize,
        encoder_len: usize,
    ) -> Result<NetworkSpec> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        if encoder_len > layers.len() {
            return Err(Error::InvalidArgument(format!(
                "encoder length {encoder_len} exceeds layer count {}",
                layers.len()
            )));
        }
        let mut pools = 0usize;
        for (i, layer) in layers.iter().enumerate() {
            match layer {
                LayerSpec::Conv { in_c, out_c, dilation, .. } => {
                    if *in_c == 0 || *out_c == 0 || *dilation == 0 {
                        return Err(Error::InvalidArgument(format!(
                            "layer {i}: conv dims and dilation must be >= 1"
                        )));
                    }
                }
                LayerSpec::MaxPool => pools += 1,
                LayerSpec::MaxUnpool { source }
                    if *source >= i || !matches!(layers[*source], LayerSpec::MaxPool) =>
                {
                    return Err(Error::InvalidArgument(format!(
                        "layer {i}: unpool source {source} is not an earlier max pool"
                    )));
                }
                _ => {}
            }
        }
        Ok(NetworkSpec { layers, encoder_len, num_classes, input_multiple: 1 << pools })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn encoder_len(&self) -> usize {
        self.encoder_len
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Input height and width must be multiples of this (2^pool count).
    pub fn input_multiple(&self) -> usize {
        self.input_multiple
    }

    /// Convolution layers in execution order.
    pub fn conv_layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.layers.iter().filter(|l| matches!(l, LayerSpec::Conv { .. }))
    }

    pub fn first_conv_in_channels(&self) -> Option<usize> {
        self.conv_layers().next().map(|l| match l {
            LayerSpec::Conv { in_c, .. } => *in_c,
            _ => unreachable!(),
        })
    }

    /// Total learnable parameters: 9*in*out + out per convolution plus four
    /// vectors per batch-norm layer.
    pub fn param_count(&self) -> u64 {
        self.layers
            .iter()
            .map(|l| match l {
                LayerSpec::Conv { in_c, out_c, bn_relu, .. } => {
                    (9 * in_c * out_c + out_c + if *bn_relu { 4 * out_c } else { 0 }) as u64
                }
                _ => 0,
            })
            .sum()
    }

    /// Receptive field at the encoder output by the standard recurrence
    /// `rf += (extent - 1) * jump; jump *= stride`, where a dilated 3x3 conv
    /// has extent `2*dilation + 1`.
    pub fn receptive_field(&self) -> ReceptiveField {
        let mut rf = 1usize;
        let mut jump = 1usize;
        for layer in &self.layers[..self.encoder_len] {
            match layer {
                LayerSpec::Conv { dilation, .. } => {
                    rf += 2 * dilation * jump;
                }
                LayerSpec::MaxPool => {
                    rf += jump;
                    jump *= 2;
                }
                _ => {}
            }
        }
        ReceptiveField { height: rf, width: rf, output_stride: jump }
    }

    fn validate_lmd(&self) -> Result<()> {
        let complain =
            |what: &str| Err(Error::InvalidArgument(format!("not a valid LMD topology: {what}")));

        let enc = &self.layers[..self.encoder_len];
        let dec = &self.layers[self.encoder_len..];
        let enc_convs: Vec<&LayerSpec> =
            enc.iter().filter(|l| matches!(l, LayerSpec::Conv { .. })).collect();
        if enc_convs.len() != 14 {
            return complain("encoder must contain exactly 14 convolutions");
        }
        // pools sit immediately after encoder convs 2, 4 and 7
        let mut convs_seen = 0usize;
        let mut pool_positions = Vec::new();
        for layer in enc {
            match layer {
                LayerSpec::Conv { .. } => convs_seen += 1,
                LayerSpec::MaxPool => pool_positions.push(convs_seen),
                _ => return complain("encoder may only contain convolutions and pools"),
            }
        }
        if pool_positions != [2, 4, 7] {
            return complain("pools must follow encoder convs 2, 4 and 7");
        }
        for (i, layer) in enc_convs.iter().enumerate() {
            if let LayerSpec::Conv { dilation, bn_relu, .. } = layer {
                let want = if (10..13).contains(&i) { 2 } else { 1 }; // convs 11-13, zero-based 10..12
                if *dilation != want {
                    return complain("encoder convs 11-13 carry dilation 2, all others dilation 1");
                }
                if !bn_relu {
                    return complain("every encoder conv is followed by batch norm + ReLU");
                }
            }
        }
        let dec_convs = dec.iter().filter(|l| matches!(l, LayerSpec::Conv { .. })).count();
        let unpools: Vec<usize> = dec
            .iter()
            .filter_map(|l| match l {
                LayerSpec::MaxUnpool { source } => Some(*source),
                _ => None,
            })
            .collect();
        if dec_convs != 7 || unpools.len() != 2 {
            return complain("decoder must contain exactly 7 convolutions and 2 unpools");
        }
        let pool_idx: Vec<usize> = self
            .layers
            .iter()
            .enumerate()
            .filter_map(|(i, l)| matches!(l, LayerSpec::MaxPool).then_some(i))
            .collect();
        if unpools != [pool_idx[2], pool_idx[1]] {
            return complain(
                "unpools must consume the indices of encoder pools 3 and 2, in that order",
            );
        }
        match dec.iter().rfind(|l| matches!(l, LayerSpec::Conv { .. })) {
            Some(LayerSpec::Conv { out_c, bn_relu, .. })
                if *out_c == self.num_classes && !bn_relu => {}
            _ => return complain("final conv must be the bare classifier"),
        }
        let tail: Vec<&LayerSpec> = dec.iter().rev().take(2).collect();
        if !matches!(tail[0], LayerSpec::Softmax) || !matches!(tail[1], LayerSpec::Upsample2x) {
            return complain("network must end with upsample then softmax");
        }
        Ok(())
    }
}

/// Constructs the lane-marking network for `num_classes` output classes.
pub fn build_lmd(num_classes: usize) -> Result<NetworkSpec> {
    if num_classes < 2 {
        return Err(Error::InvalidArgument(format!(
            "a pixel classifier needs at least 2 classes, got {num_classes}"
        )));
    }
    if num_classes > 254 {
        return Err(Error::InvalidArgument(
            "class ids must fit in a byte with 255 reserved for ignore".into(),
        ));
    }

    let mut layers = Vec::with_capacity(28);
    let mut enc = 0usize;
    let mut conv = |layers: &mut Vec<LayerSpec>, in_c: usize, out_c: usize, dil: usize| {
        enc += 1;
        layers.push(LayerSpec::conv(format!("enc_conv{enc}"), in_c, out_c, dil, true));
    };

    conv(&mut layers, 3, 64, 1);
    conv(&mut layers, 64, 64, 1);
    layers.push(LayerSpec::MaxPool);
    conv(&mut layers, 64, 128, 1);
    conv(&mut layers, 128, 128, 1);
    layers.push(LayerSpec::MaxPool);
    conv(&mut layers, 128, 256, 1);
    conv(&mut layers, 256, 256, 1);
    conv(&mut layers, 256, 256, 1);
    layers.push(LayerSpec::MaxPool);
    conv(&mut layers, 256, 512, 1);
    conv(&mut layers, 512, 512, 1);
    conv(&mut layers, 512, 512, 1);
    conv(&mut layers, 512, 512, 2);
    conv(&mut layers, 512, 512, 2);
    conv(&mut layers, 512, 512, 2);
    conv(&mut layers, 512, 64, 1);
    let encoder_len = layers.len();

    let pool3 = 9usize; // layer indices of the second and third pools
    let pool2 = 5usize;
    layers.push(LayerSpec::conv("dec_conv1", 64, 64, 1, true));
    layers.push(LayerSpec::MaxUnpool { source: pool3 });
    layers.push(LayerSpec::conv("dec_conv2", 64, 64, 1, true));
    layers.push(LayerSpec::conv("dec_conv3", 64, 64, 1, true));
    layers.push(LayerSpec::MaxUnpool { source: pool2 });
    layers.push(LayerSpec::conv("dec_conv4", 64, 64, 1, true));
    layers.push(LayerSpec::conv("dec_conv5", 64, 64, 1, true));
    layers.push(LayerSpec::conv("dec_conv6", 64, 64, 1, true));
    layers.push(LayerSpec::conv("dec_conv7", 64, num_classes, 1, false));
    layers.push(LayerSpec::Upsample2x);
    layers.push(LayerSpec::Softmax);

    let spec = NetworkSpec::custom(layers, num_classes, encoder_len)?;
    spec.validate_lmd()?;
    Ok(spec)
}

fn argmax_labels(scores: &Tensor) -> Result<LabelMap> {
    let (_, c, h, w) = scores.shape();
    if c > 255 {
        return Err(Error::InvalidArgument(format!(
            "cannot encode {c} classes in a byte label map"
        )));
    }
    let mut labels = LabelMap::filled(h, w, 0);
    let plane = h * w;
    let data = scores.data();
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let mut best = data[p];
            let mut best_c = 0usize;
            for ch in 1..c {
                let v = data[ch * plane + p];
                if v > best {
                    best = v;
                    best_c = ch;
                }
            }
            labels.set(y, x, best_c as u8);
        }
    }
    Ok(labels)
}

/// Runs the network on a single image tensor of shape (1, channels, H, W)
/// where H and W honor [`NetworkSpec::input_multiple`].
///
/// Per-call activation state is local, so concurrent calls on different
/// images are safe, and the result is bit-identical across runs and thread
/// counts.
pub fn forward(net: &NetworkSpec, weights: &WeightStore, image: &Tensor) -> Result<ForwardResult> {
    let (n, c, h, w) = image.shape();
    if n != 1 {
        return Err(Error::InputContract(format!("expected a single image, got batch {n}")));
    }
    if let Some(want) = net.first_conv_in_channels() {
        if want != c {
            return Err(Error::InputContract(format!("expected {want} input channels, got {c}")));
        }
    }
    let m = net.input_multiple();
    if h % m != 0 || w % m != 0 {
        return Err(Error::InputContract(format!(
            "height and width must be multiples of {m}, got {h}x{w}"
        )));
    }

    let mut cur = image.clone();
    let mut saved: Vec<Option<(PoolIndices, usize, usize)>> = vec![None; net.layers.len()];
    let mut conv_cursor = 0usize;
    for (li, layer) in net.layers.iter().enumerate() {
        match layer {
            LayerSpec::Conv { name, in_c, out_c, dilation, bn_relu } => {
                let lw = weights.layers.get(conv_cursor).ok_or_else(|| Error::BadWeights {
                    layer: name.clone(),
                    reason: "no weight entry for this layer".into(),
                })?;
                if lw.name != *name {
                    return Err(Error::BadWeights {
                        layer: name.clone(),
                        reason: format!("weight store has '{}' at this position", lw.name),
                    });
                }
                let params = lw.conv_params(*in_c, *out_c, *dilation)?;
                cur = ops::conv2d(&cur, &params)?;
                if *bn_relu {
                    let bn = lw.batchnorm_params(*out_c, BN_EPSILON)?;
                    cur = ops::batchnorm_infer(&cur, &bn)?;
                    cur = ops::relu(&cur);
                }
                conv_cursor += 1;
            }
            LayerSpec::MaxPool => {
                let (pre_h, pre_w) = (cur.height(), cur.width());
                let (pooled, idx) = ops::maxpool2x2(&cur)?;
                saved[li] = Some((idx, pre_h, pre_w));
                cur = pooled;
            }
            LayerSpec::MaxUnpool { source } => {
                let (idx, pre_h, pre_w) = saved[*source].as_ref().ok_or_else(|| {
                    Error::InvalidArgument(format!("unpool at layer {li} ran before its pool"))
                })?;
                let (_, idx_c, ih, iw) = idx.shape();
                if (cur.height(), cur.width()) != (ih, iw) {
                    return Err(Error::shape(
                        format!("unpool at layer {li}"),
                        format!("{ih}x{iw} input"),
                        format!("{}x{}", cur.height(), cur.width()),
                    ));
                }
                if cur.channels() > idx_c {
                    return Err(Error::shape(
                        format!("unpool at layer {li}"),
                        format!("at most {idx_c} channels"),
                        format!("{}", cur.channels()),
                    ));
                }
                // The thin decoder carries fewer channels than the encoder
                // pool recorded; consume the matching prefix of the indices.
                let sliced = idx.truncate_channels(cur.channels())?;
                cur = ops::maxunpool2x2(&cur, &sliced, *pre_h, *pre_w)?;
            }
            LayerSpec::Upsample2x => cur = ops::upsample2x_bilinear(&cur),
            LayerSpec::Softmax => cur = ops::softmax_channels(&cur),
        }
    }
    if conv_cursor != weights.layers.len() {
        return Err(Error::BadWeights {
            layer: weights.layers[conv_cursor].name.clone(),
            reason: "weight store has entries for more layers than the network".into(),
        });
    }
    let labels = argmax_labels(&cur)?;
    Ok(ForwardResult { scores: cur, labels })
}
