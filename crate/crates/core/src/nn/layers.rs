use genboot_tensor::Expr;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One causal dilated convolution layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub dilation: usize,
    pub has_bias: bool,
}

impl ConvLayerSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel_size: usize, dilation: usize) -> Self {
        ConvLayerSpec {
            in_channels,
            out_channels,
            kernel_size,
            dilation,
            has_bias: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config("conv channels must be positive".into()));
        }
        if self.kernel_size == 0 || self.dilation == 0 {
            return Err(Error::Config("conv kernel size and dilation must be >= 1".into()));
        }
        Ok(())
    }

    pub fn weight_shape(&self) -> [usize; 3] {
        [self.kernel_size, self.in_channels, self.out_channels]
    }

    pub fn param_count(&self) -> usize {
        let w = self.kernel_size * self.in_channels * self.out_channels;
        w + if self.has_bias { self.out_channels } else { 0 }
    }

    /// Past steps this layer adds to the receptive field.
    pub fn lookback(&self) -> usize {
        (self.kernel_size - 1) * self.dilation
    }
}

/// Adds a bias vector along the last axis of `x`.
pub fn add_bias(x: &Expr, bias: &Expr) -> Result<Expr> {
    Ok(x.add_broadcast(bias)?)
}

/// Causal dilated convolution of a `(batch, time, in)` input, with the time
/// axis left-padded by zeros so the output keeps the input's length.
pub fn causal_dilated_conv(input: &Expr, spec: &ConvLayerSpec, weight: &Expr, bias: Option<&Expr>) -> Result<Expr> {
    spec.validate()?;
    if input.shape().len() != 3 || input.shape()[2] != spec.in_channels {
        return Err(Error::Config(format!(
            "conv expects (batch, time, {}) input, got {:?}",
            spec.in_channels,
            input.shape()
        )));
    }
    if weight.shape() != spec.weight_shape() {
        return Err(Error::Config(format!(
            "conv weight has shape {:?}, layer needs {:?}",
            weight.shape(),
            spec.weight_shape()
        )));
    }
    let y = input.conv_causal(weight, spec.dilation)?;
    match (spec.has_bias, bias) {
        (true, Some(b)) => add_bias(&y, b),
        (false, None) => Ok(y),
        (true, None) => Err(Error::Config("conv layer expects a bias".into())),
        (false, Some(_)) => Err(Error::Config("conv layer has no bias".into())),
    }
}

/// Adaptive max pooling of each `(batch, len)` row into `bins` values.
pub fn adaptive_max_pool(features: &Expr, bins: usize) -> Result<Expr> {
    Ok(features.segment_max(bins)?)
}

/// Affine map `x · W + b` of a `(batch, in)` input with `W: (in, out)`.
pub fn dense(input: &Expr, weight: &Expr, bias: &Expr) -> Result<Expr> {
    let y = input.matmul(weight)?;
    add_bias(&y, bias)
}
