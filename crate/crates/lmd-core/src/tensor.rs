//! Dense NCHW tensors and the parameter bundles consumed by the operators.

use crate::error::{Error, Result};

/// Dense 4-D array of f32 in (batch, channel, row, column) order, row-major.
///
/// Tensors are immutable values once built; every operator returns a fresh
/// tensor, which is what makes concurrent inference trivially safe.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Result<Tensor> {
        Self::from_vec(n, c, h, w, vec![0.0; n * c * h * w])
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<f32>) -> Result<Tensor> {
        if n == 0 || c == 0 || h == 0 || w == 0 {
            return Err(Error::InvalidArgument(format!(
                "tensor dims must all be >= 1, got ({n}, {c}, {h}, {w})"
            )));
        }
        if data.len() != n * c * h * w {
            return Err(Error::shape(
                "Tensor::from_vec",
                format!("{} values for ({n}, {c}, {h}, {w})", n * c * h * w),
                format!("{}", data.len()),
            ));
        }
        Ok(Tensor { n, c, h, w, data })
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    pub fn batch(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false // all dims are >= 1 by construction
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// The (h, w) plane for batch `n`, channel `c`.
    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let sz = self.h * self.w;
        let start = (n * self.c + c) * sz;
        &self.data[start..start + sz]
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[((n * self.c + c) * self.h + y) * self.w + x]
    }
}

/// Max locations captured by a 2x2 pool, consumed later by the paired unpool.
///
/// Offsets are flat positions inside the pre-pool (h, w) plane of the same
/// batch and channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<u32>,
}

impl PoolIndices {
    pub fn from_raw(n: usize, c: usize, h: usize, w: usize, data: Vec<u32>) -> Result<PoolIndices> {
        if data.len() != n * c * h * w {
            return Err(Error::shape(
                "PoolIndices::from_raw",
                format!("{} offsets for ({n}, {c}, {h}, {w})", n * c * h * w),
                format!("{}", data.len()),
            ));
        }
        Ok(PoolIndices { n, c, h, w, data })
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub(crate) fn plane(&self, n: usize, c: usize) -> &[u32] {
        let sz = self.h * self.w;
        let start = (n * self.c + c) * sz;
        &self.data[start..start + sz]
    }

    /// Keeps the first `c` channels. The decoder is thinner than the encoder,
    /// so unpooling consumes only a prefix of the stored index channels.
    pub fn truncate_channels(&self, c: usize) -> Result<PoolIndices> {
        if c == 0 || c > self.c {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {c} of {} index channels",
                self.c
            )));
        }
        let plane = self.h * self.w;
        let mut data = Vec::with_capacity(self.n * c * plane);
        for n in 0..self.n {
            let start = n * self.c * plane;
            data.extend_from_slice(&self.data[start..start + c * plane]);
        }
        Ok(PoolIndices { n: self.n, c, h: self.h, w: self.w, data })
    }
}

/// Convolution weights plus geometry.
#[derive(Debug, Clone)]
pub struct ConvParams {
    pub weights: Tensor, // (out_c, in_c, kh, kw)
    pub bias: Vec<f32>,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl ConvParams {
    pub fn new(
        weights: Tensor,
        bias: Vec<f32>,
        stride: usize,
        padding: usize,
        dilation: usize,
    ) -> Result<ConvParams> {
        let (out_c, _, _, _) = weights.shape();
        if bias.len() != out_c {
            return Err(Error::shape(
                "ConvParams::new",
                format!("bias of length {out_c}"),
                format!("{}", bias.len()),
            ));
        }
        if stride == 0 || dilation == 0 {
            return Err(Error::InvalidArgument(format!(
                "stride and dilation must be >= 1, got stride {stride}, dilation {dilation}"
            )));
        }
        Ok(ConvParams { weights, bias, stride, padding, dilation })
    }

    pub fn out_channels(&self) -> usize {
        self.weights.batch()
    }

    pub fn in_channels(&self) -> usize {
        self.weights.channels()
    }
}

/// Inference-mode batch normalization constants.
#[derive(Debug, Clone)]
pub struct BatchNormParams {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub epsilon: f32,
}

impl BatchNormParams {
    pub fn new(
        gamma: Vec<f32>,
        beta: Vec<f32>,
        running_mean: Vec<f32>,
        running_var: Vec<f32>,
        epsilon: f32,
    ) -> Result<BatchNormParams> {
        let c = gamma.len();
        if beta.len() != c || running_mean.len() != c || running_var.len() != c {
            return Err(Error::shape(
                "BatchNormParams::new",
                format!("four vectors of length {c}"),
                format!(
                    "gamma {}, beta {}, mean {}, var {}",
                    gamma.len(),
                    beta.len(),
                    running_mean.len(),
                    running_var.len()
                ),
            ));
        }
        if running_var.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidArgument("running variance must be non-negative".into()));
        }
        if epsilon.is_nan() || epsilon < 0.0 || !epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be finite and >= 0, got {epsilon}"
            )));
        }
        if running_var.iter().any(|v| *v + epsilon <= 0.0) {
            return Err(Error::InvalidArgument("variance + epsilon must be positive".into()));
        }
        Ok(BatchNormParams { gamma, beta, running_mean, running_var, epsilon })
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Identity transform for `c` channels (gamma 1, beta 0, mean 0, var 1).
    pub fn identity(c: usize, epsilon: f32) -> BatchNormParams {
        BatchNormParams {
            gamma: vec![1.0; c],
            beta: vec![0.0; c],
            running_mean: vec![0.0; c],
            running_var: vec![1.0; c],
            epsilon,
        }
    }
}
