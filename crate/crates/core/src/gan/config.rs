use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AdamConfig, InitSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    #[default]
    WganGp,
    BasicGan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorArch {
    pub filters: Vec<usize>,
    pub dilations: Vec<usize>,
    pub kernel_size: usize,
}

impl Default for GeneratorArch {
    fn default() -> Self {
        GeneratorArch {
            filters: vec![128, 64, 32, 32, 16, 1],
            dilations: default_dilations(),
            kernel_size: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscriminatorArch {
    pub filters: Vec<usize>,
    pub dilations: Vec<usize>,
    pub kernel_size: usize,
    /// 1-based indices of the conv layers whose activations are pooled.
    pub pool_taps: Vec<usize>,
    pub pool_bins: usize,
    pub hidden_width: usize,
    pub leaky_slope: f64,
}

impl Default for DiscriminatorArch {
    fn default() -> Self {
        DiscriminatorArch {
            filters: vec![8, 16, 32, 32, 64, 64],
            dilations: default_dilations(),
            kernel_size: 2,
            pool_taps: vec![1, 2, 6],
            pool_bins: 16,
            hidden_width: 4096,
            leaky_slope: 0.01,
        }
    }
}

fn default_dilations() -> Vec<usize> {
    vec![1, 2, 4, 8, 16, 32]
}

/// Architectures plus training hyperparameters. Defaults follow the
/// reference setup: Adam(0.5, 0.9, 1e-8), learning rates 2.5e-4, penalty
/// weight 20, batches of 64, 50 initial critic updates, 5 critic updates
/// per generator update and 5,000 steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanConfig {
    pub generator: GeneratorArch,
    pub discriminator: DiscriminatorArch,
    pub noise_dim: usize,
    pub objective: Objective,
    pub lr_d: f64,
    pub lr_g: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub n_init: usize,
    pub n_discriminator: usize,
    pub n_generator: usize,
    pub total_steps: usize,
    pub adam: AdamConfig,
    pub init: InitSpec,
    /// Fill the `wall_ms` trace column. Off by default so traces are
    /// byte-reproducible.
    pub record_wall_time: bool,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            generator: GeneratorArch::default(),
            discriminator: DiscriminatorArch::default(),
            noise_dim: 256,
            objective: Objective::WganGp,
            lr_d: 0.00025,
            lr_g: 0.00025,
            lambda: 20.0,
            batch_size: 64,
            n_init: 50,
            n_discriminator: 5,
            n_generator: 1,
            total_steps: 5000,
            adam: AdamConfig::default(),
            init: InitSpec::default(),
            record_wall_time: false,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let g = &self.generator;
        let d = &self.discriminator;
        for (who, filters, dilations, k) in [
            ("generator", &g.filters, &g.dilations, g.kernel_size),
            ("discriminator", &d.filters, &d.dilations, d.kernel_size),
        ] {
            if filters.is_empty() || filters.len() != dilations.len() {
                return bad(format!(
                    "{who}: {} filters but {} dilations",
                    filters.len(),
                    dilations.len()
                ));
            }
            if filters.contains(&0) || dilations.contains(&0) || k == 0 {
                return bad(format!("{who}: filters, dilations and kernel size must be >= 1"));
            }
        }
        if g.filters.last() != Some(&1) {
            return bad("generator: last layer must have exactly 1 filter".into());
        }
        if d.pool_taps.is_empty() || d.pool_taps.iter().any(|&t| t == 0 || t > d.filters.len()) {
            return bad(format!(
                "discriminator: pool taps {:?} must index layers 1..={}",
                d.pool_taps,
                d.filters.len()
            ));
        }
        if d.pool_bins == 0 || d.hidden_width == 0 {
            return bad("discriminator: pool bins and hidden width must be >= 1".into());
        }
        if !(d.leaky_slope.is_finite() && d.leaky_slope >= 0.0) {
            return bad("discriminator: leaky slope must be finite and >= 0".into());
        }
        if self.noise_dim == 0 {
            return bad("noise_dim must be >= 1".into());
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if !(self.lr_d > 0.0 && self.lr_g > 0.0 && self.lr_d.is_finite() && self.lr_g.is_finite()) {
            return bad("learning rates must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        let a = &self.adam;
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return bad("adam: need 0 <= beta < 1 and eps > 0".into());
        }
        if !(self.init.sd > 0.0 && self.init.sd.is_finite()) {
            return bad("init.sd must be positive".into());
        }
        Ok(())
    }
}
