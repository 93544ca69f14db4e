//! Forward and backward kernels for every layer the architectures use.
//!
//! Kernels are pure functions `(input, weights, spec) -> (output, cache)`;
//! the cache carries exactly what the matching backward pass needs. Nothing
//! here owns parameters — the model graph does.

mod act;
mod conv;
mod cost;
mod norm;
mod pool;

pub use act::{
    relu_backward, relu_forward, softmax_backward, softmax_forward, ReluCache, ReluMode,
    SoftmaxCache,
};
pub use conv::{
    conv2d_backward, conv2d_forward, depthwise_backward, depthwise_conv_forward,
    pointwise_backward, pointwise_conv_forward, separable_backward, separable_conv_forward,
    ConvCache, ConvGrads, SeparableCache, SeparableGrads,
};
pub use cost::{mult_count, mult_count_ratio, ConvFlavor};
pub use norm::{batchnorm_backward, batchnorm_forward, BatchNormCache, BatchNormState};
pub use pool::{gap_backward, gap_forward, maxpool_backward, maxpool_forward, GapCache, MaxPoolCache};

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Forward execution mode. Train mode uses batch statistics in batch norm
/// and updates running averages; infer mode is stateless.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Padding convention. `Same` pads by (D-1)/2 zeros per side, which keeps
/// the spatial size at stride 1 and yields ceil(size/2) at stride 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Valid,
    Same,
}

/// Geometry of a convolution: D x D kernel over M input channels producing
/// N output channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub padding: Padding,
    pub has_bias: bool,
}

impl ConvSpec {
    pub fn new(
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        padding: Padding,
        has_bias: bool,
    ) -> Result<ConvSpec> {
        let spec = ConvSpec { kernel, in_channels, out_channels, stride, padding, has_bias };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::Shape(format!(
                "kernel size must be odd and >= 1, got {}",
                self.kernel
            )));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Shape("channel counts must be >= 1".into()));
        }
        if self.stride != 1 && self.stride != 2 {
            return Err(Error::Shape(format!("stride must be 1 or 2, got {}", self.stride)));
        }
        Ok(())
    }

    /// Zero padding per side.
    pub fn pad(&self) -> usize {
        match self.padding {
            Padding::Valid => 0,
            Padding::Same => (self.kernel - 1) / 2,
        }
    }

    /// Output spatial size for an input of (h, w).
    pub fn out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let pad = self.pad();
        let padded_h = h + 2 * pad;
        let padded_w = w + 2 * pad;
        if padded_h < self.kernel || padded_w < self.kernel {
            return Err(Error::Shape(format!(
                "{}x{} kernel larger than padded input {}x{}",
                self.kernel, self.kernel, padded_h, padded_w
            )));
        }
        Ok((
            (padded_h - self.kernel) / self.stride + 1,
            (padded_w - self.kernel) / self.stride + 1,
        ))
    }
}

/// Pooling window geometry; same conventions as `ConvSpec`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSpec {
    pub window: usize,
    pub stride: usize,
    pub padding: Padding,
}

impl PoolSpec {
    pub fn new(window: usize, stride: usize, padding: Padding) -> Result<PoolSpec> {
        if window == 0 || stride == 0 {
            return Err(Error::Shape("pool window and stride must be >= 1".into()));
        }
        if padding == Padding::Same && window % 2 == 0 {
            return Err(Error::Shape("same-padded pooling requires an odd window".into()));
        }
        Ok(PoolSpec { window, stride, padding })
    }

    pub fn pad(&self) -> usize {
        match self.padding {
            Padding::Valid => 0,
            Padding::Same => (self.window - 1) / 2,
        }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let pad = self.pad();
        let padded_h = h + 2 * pad;
        let padded_w = w + 2 * pad;
        if padded_h < self.window || padded_w < self.window {
            return Err(Error::Shape(format!(
                "{0}x{0} pool window larger than padded input {1}x{2}",
                self.window, padded_h, padded_w
            )));
        }
        Ok((
            (padded_h - self.window) / self.stride + 1,
            (padded_w - self.window) / self.stride + 1,
        ))
    }
}

/// Residual merge: H(x) = F(x) + x. Branches must already be shape-equal;
/// the graph projects the skip branch beforehand when shapes differ.
pub fn residual_add<E: Element>(main: &Tensor<E>, skip: &Tensor<E>) -> Result<Tensor<E>> {
    if main.shape() != skip.shape() {
        return Err(Error::Shape(format!(
            "residual merge on mismatched shapes {} vs {}",
            main.shape(),
            skip.shape()
        )));
    }
    main.add(skip)
}
