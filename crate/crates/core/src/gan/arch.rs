use genboot_tensor::{Expr, Tensor};

use crate::error::{Error, Result};
use crate::gan::config::{DiscriminatorArch, GanConfig, GeneratorArch};
use crate::gan::noise::NoiseBlock;
use crate::nn::{
    adaptive_max_pool, causal_dilated_conv, dense, Architecture, BlockSpec, ConvLayerSpec, NetworkParams, ParamLeaves,
};
use crate::path::SamplePath;

/// Past steps seen by one output of a stack of causal convolutions.
pub fn receptive_field(dilations: &[usize], kernel_size: usize) -> usize {
    dilations.iter().map(|d| kernel_size.saturating_sub(1) * d).sum()
}

fn conv_stack(in_channels: usize, filters: &[usize], dilations: &[usize], kernel: usize) -> Vec<ConvLayerSpec> {
    let mut c_in = in_channels;
    filters
        .iter()
        .zip(dilations)
        .map(|(&c_out, &d)| {
            let spec = ConvLayerSpec::new(c_in, c_out, kernel, d);
            c_in = c_out;
            spec
        })
        .collect()
}

fn conv_names(i: usize) -> (String, String) {
    (format!("conv{}.weight", i + 1), format!("conv{}.bias", i + 1))
}

fn conv_specs(layers: &[ConvLayerSpec]) -> Vec<BlockSpec> {
    layers
        .iter()
        .enumerate()
        .flat_map(|(i, l)| {
            let (w, b) = conv_names(i);
            [
                BlockSpec::weight(w, &l.weight_shape()),
                BlockSpec::bias(b, l.out_channels),
            ]
        })
        .collect()
}

fn conv_layer(x: &Expr, leaves: &ParamLeaves, i: usize, spec: &ConvLayerSpec) -> Result<Expr> {
    let (w, b) = conv_names(i);
    causal_dilated_conv(x, spec, leaves.get(&w), Some(leaves.get(&b)))
}

/// Temporal convolution generator mapping a `(rows, noise_dim)` noise
/// sequence to a univariate path. Hidden layers use tanh, the output layer
/// is linear.
#[derive(Clone, Debug)]
pub struct Generator {
    layers: Vec<ConvLayerSpec>,
    noise_dim: usize,
}

impl Generator {
    pub fn new(config: &GanConfig) -> Self {
        Self::from_arch(&config.generator, config.noise_dim)
    }

    pub fn from_arch(arch: &GeneratorArch, noise_dim: usize) -> Self {
        Generator {
            layers: conv_stack(noise_dim, &arch.filters, &arch.dilations, arch.kernel_size),
            noise_dim,
        }
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    /// Extra leading noise rows needed per output path.
    pub fn window(&self) -> usize {
        self.layers.iter().map(ConvLayerSpec::lookback).sum()
    }

    /// Graph from a `(batch, rows, noise_dim)` noise input to the
    /// `(batch, rows - window)` generated paths.
    pub fn build(&self, leaves: &ParamLeaves, noise: &Expr) -> Result<Expr> {
        let shape = noise.shape().to_vec();
        let p = self.window();
        if shape.len() != 3 || shape[2] != self.noise_dim {
            return Err(Error::Config(format!(
                "generator expects (batch, rows, {}) noise, got {shape:?}",
                self.noise_dim
            )));
        }
        if shape[1] <= p {
            return Err(Error::TooShort {
                len: shape[1],
                reason: format!("generator needs more than {p} noise rows"),
            });
        }
        let last = self.layers.len() - 1;
        let mut h = noise.clone();
        for (i, spec) in self.layers.iter().enumerate() {
            h = conv_layer(&h, leaves, i, spec)?;
            if i != last {
                h = h.tanh();
            }
        }
        let out = h.reshape(&shape[..2])?;
        Ok(out.slice_last(p, shape[1] - p)?)
    }

    /// Generated paths for a `(batch, rows, noise_dim)` noise tensor.
    pub fn generate_batch(&self, params: &NetworkParams, noise: &Tensor) -> Result<Tensor> {
        let input = Expr::leaf("noise", noise.shape());
        let out = self.build(&params.leaves(), &input)?;
        let mut bindings = params.bindings();
        bindings.bind("noise", noise);
        Ok(out.eval(&bindings)?)
    }

    pub fn generate(&self, params: &NetworkParams, noise: &NoiseBlock) -> Result<SamplePath> {
        if noise.window() != self.window() {
            return Err(Error::Config(format!(
                "noise block drawn for window {}, generator window is {}",
                noise.window(),
                self.window()
            )));
        }
        let m = noise.matrix();
        let batch = m.clone().reshape(vec![1, m.shape()[0], m.shape()[1]])?;
        Ok(SamplePath::new(self.generate_batch(params, &batch)?.into_data()))
    }
}

impl Architecture for Generator {
    fn param_specs(&self) -> Vec<BlockSpec> {
        conv_specs(&self.layers)
    }
}

/// Temporal convolution critic: conv stack with leaky ReLU, adaptive max
/// pooling of selected layers, then two dense layers to one unbounded score.
#[derive(Clone, Debug)]
pub struct Discriminator {
    layers: Vec<ConvLayerSpec>,
    taps: Vec<usize>,
    bins: usize,
    hidden: usize,
    slope: f64,
}

impl Discriminator {
    pub fn new(config: &GanConfig) -> Self {
        Self::from_arch(&config.discriminator)
    }

    pub fn from_arch(arch: &DiscriminatorArch) -> Self {
        Discriminator {
            layers: conv_stack(1, &arch.filters, &arch.dilations, arch.kernel_size),
            taps: arch.pool_taps.iter().map(|t| t - 1).collect(),
            bins: arch.pool_bins,
            hidden: arch.hidden_width,
            slope: arch.leaky_slope,
        }
    }

    /// Shortest path the pooling stage accepts.
    pub fn min_len(&self) -> usize {
        self.taps
            .iter()
            .map(|&t| self.bins.div_ceil(self.layers[t].out_channels))
            .max()
            .unwrap_or(1)
    }

    fn features(&self) -> usize {
        self.taps.len() * self.bins
    }

    /// Graph from `(batch, len)` paths to `(batch, 1)` scores.
    pub fn build(&self, leaves: &ParamLeaves, paths: &Expr) -> Result<Expr> {
        let shape = paths.shape().to_vec();
        if shape.len() != 2 {
            return Err(Error::Config(format!(
                "discriminator expects (batch, len) input, got {shape:?}"
            )));
        }
        if shape[1] < self.min_len() {
            return Err(Error::TooShort {
                len: shape[1],
                reason: format!("discriminator pooling needs length >= {}", self.min_len()),
            });
        }
        let (batch, len) = (shape[0], shape[1]);
        let mut h = paths.reshape(&[batch, len, 1])?;
        let mut pooled = Vec::with_capacity(self.taps.len());
        for (i, spec) in self.layers.iter().enumerate() {
            h = conv_layer(&h, leaves, i, spec)?.leaky_relu(self.slope);
            if self.taps.contains(&i) {
                // channel-major flatten: (batch, len, c) -> (batch, c * len)
                let flat = h.transpose_last2()?.reshape(&[batch, spec.out_channels * len])?;
                pooled.push(adaptive_max_pool(&flat, self.bins)?);
            }
        }
        let features = Expr::concat_last(&pooled)?;
        let hidden = dense(&features, leaves.get("fc1.weight"), leaves.get("fc1.bias"))?.leaky_relu(self.slope);
        dense(&hidden, leaves.get("fc2.weight"), leaves.get("fc2.bias"))
    }

    /// Scores for a `(batch, len)` tensor of paths.
    pub fn score_batch(&self, params: &NetworkParams, paths: &Tensor) -> Result<Vec<f64>> {
        let input = Expr::leaf("paths", paths.shape());
        let out = self.build(&params.leaves(), &input)?;
        let mut bindings = params.bindings();
        bindings.bind("paths", paths);
        Ok(out.eval(&bindings)?.into_data())
    }

    pub fn score(&self, params: &NetworkParams, path: &SamplePath) -> Result<f64> {
        let t = Tensor::new(vec![1, path.len()], path.to_vec())?;
        Ok(self.score_batch(params, &t)?[0])
    }
}

impl Architecture for Discriminator {
    fn param_specs(&self) -> Vec<BlockSpec> {
        let mut specs = conv_specs(&self.layers);
        specs.push(BlockSpec::weight("fc1.weight", &[self.features(), self.hidden]));
        specs.push(BlockSpec::bias("fc1.bias", self.hidden));
        specs.push(BlockSpec::weight("fc2.weight", &[self.hidden, 1]));
        specs.push(BlockSpec::bias("fc2.bias", 1));
        specs
    }
}
