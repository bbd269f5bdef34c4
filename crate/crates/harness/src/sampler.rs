//! Sources of bootstrap paths for one observed path.

use genboot_core::bootstrap::{gb_sample, make_blocks};
use genboot_core::gan::{train, GanConfig, Generator, TrainOutput};
use genboot_core::rng::{fork_seed, stream_rng, GbRng};
use genboot_core::timeseries::{ls_estimate, simulate_ar1, Ar1Spec};
use genboot_core::{Error, SamplePath};

use crate::config::{ExperimentConfig, SamplerKind};

pub trait PathSampler: Sync {
    /// `m` paths of length `len` resembling `observed`, which was drawn
    /// from the AR(1) with coefficient `phi`.
    fn sample(
        &self,
        observed: &SamplePath,
        phi: f64,
        len: usize,
        m: usize,
        rng: &mut GbRng,
    ) -> Result<Vec<SamplePath>, Error>;
}

/// Trains a GAN on blocks of the observed path and samples its generator.
#[derive(Clone, Debug)]
pub struct GanSampler {
    pub gan: GanConfig,
    pub b1: usize,
    /// Generate paths on the rayon pool.
    pub parallel: bool,
}

impl GanSampler {
    pub fn train(&self, observed: &SamplePath, rng: &mut GbRng) -> Result<TrainOutput, Error> {
        let mut blocks = make_blocks(observed, self.b1)?;
        train(&self.gan, &mut blocks, rng)
    }
}

impl PathSampler for GanSampler {
    fn sample(
        &self,
        observed: &SamplePath,
        _phi: f64,
        len: usize,
        m: usize,
        rng: &mut GbRng,
    ) -> Result<Vec<SamplePath>, Error> {
        let out = self.train(observed, rng)?;
        gb_sample(&Generator::new(&self.gan), &out.generator, len, m, rng, self.parallel)
    }
}

/// `m` AR(1) paths with coefficient `phi`, path `i` on its own stream.
pub fn ar1_paths(phi: f64, len: usize, m: usize, rng: &mut GbRng) -> Result<Vec<SamplePath>, Error> {
    let base = fork_seed(rng);
    let spec = Ar1Spec::new(phi, len);
    (0..m)
        .map(|i| simulate_ar1(&spec, &mut stream_rng(base, i as u64)))
        .collect()
}

/// Simulates from the AR(1) that generated the observed path.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrueDgpSampler;

impl PathSampler for TrueDgpSampler {
    fn sample(
        &self,
        _: &SamplePath,
        phi: f64,
        len: usize,
        m: usize,
        rng: &mut GbRng,
    ) -> Result<Vec<SamplePath>, Error> {
        ar1_paths(phi, len, m, rng)
    }
}

/// Parametric bootstrap: simulates from the AR(1) fitted to the observed
/// path by least squares.
#[derive(Clone, Copy, Debug, Default)]
pub struct FittedDgpSampler;

impl PathSampler for FittedDgpSampler {
    fn sample(
        &self,
        observed: &SamplePath,
        _: f64,
        len: usize,
        m: usize,
        rng: &mut GbRng,
    ) -> Result<Vec<SamplePath>, Error> {
        let fitted = ls_estimate(observed)?;
        ar1_paths(fitted, len, m, rng)
    }
}

/// Sampler selected by `gb.sampler`. `parallel` is passed to the GAN
/// sampler's generation step.
pub fn from_config(config: &ExperimentConfig, parallel: bool) -> Box<dyn PathSampler> {
    match config.gb.sampler {
        SamplerKind::Gan => Box::new(GanSampler {
            gan: config.gb.gan.clone(),
            b1: config.gb.b1,
            parallel,
        }),
        SamplerKind::TrueDgp => Box::new(TrueDgpSampler),
        SamplerKind::FittedDgp => Box::new(FittedDgpSampler),
    }
}
