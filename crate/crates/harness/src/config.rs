//! Experiment configuration.
//!
//! A config is a TOML file. Every section and key is optional except
//! `schema_version`; missing keys take the defaults below, unknown keys are
//! rejected.
//!
//! ```toml
//! schema_version = 1
//! seed = 42
//! workers = 0              # 0 uses every available core
//! output_dir = "out"
//! levels = [0.99, 0.95, 0.90, 0.80]
//!
//! [dgp]
//! phis = [0.5, 0.8, 0.9]
//! len = 1000
//!
//! [gb]
//! sampler = "gan"          # or "true-dgp", "fitted-dgp"
//! replications = 1000
//! b1 = 150
//! # b2 = 1000              # omitted: complete sampling, b2 = len
//! samples = 10000
//!
//! [gb.gan]                 # network and training settings
//! total_steps = 5000
//!
//! [cbb]
//! block_lens = [50, 100, 150]
//! replications = 5000
//! resamples = 10000
//!
//! [acf]
//! max_lag = 20
//! # band_replications = 1000
//! # cbb_block_len = 150
//!
//! [coverage]
//! methods = ["gb", "cbb"]
//! statistic = "ls"         # or "mean"
//! intercept = false        # LS with an intercept
//! ```
//!
//! Any key can be overridden from the command line as `--set dotted.key=value`,
//! where `value` is read as a TOML value and falls back to a bare string.

use std::path::{Path, PathBuf};

use genboot_core::bootstrap::BootstrapConfig;
use genboot_core::gan::{Discriminator, GanConfig};
use genboot_core::timeseries::{ls_estimate, ls_estimate_with_intercept};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Source of the bootstrap paths in the GB arm of an experiment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Train the GAN on the observed path and sample its generator.
    #[default]
    Gan,
    /// Simulate from the AR(1) that produced the observed path.
    TrueDgp,
    /// Simulate from the AR(1) with the least-squares coefficient of the
    /// observed path (parametric bootstrap).
    FittedDgp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gb,
    Cbb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DgpConfig {
    pub phis: Vec<f64>,
    pub len: usize,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            phis: vec![0.5, 0.8, 0.9],
            len: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbConfig {
    pub sampler: SamplerKind,
    pub replications: usize,
    /// Training block length.
    pub b1: usize,
    /// Generated path length; `None` means the observed length.
    pub b2: Option<usize>,
    /// Bootstrap paths per replication.
    pub samples: usize,
    pub gan: GanConfig,
}

impl Default for GbConfig {
    fn default() -> Self {
        GbConfig {
            sampler: SamplerKind::Gan,
            replications: 1000,
            b1: 150,
            b2: None,
            samples: 10_000,
            gan: GanConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CbbConfig {
    pub block_lens: Vec<usize>,
    pub replications: usize,
    pub resamples: usize,
}

impl Default for CbbConfig {
    fn default() -> Self {
        CbbConfig {
            block_lens: vec![50, 100, 150],
            replications: 5000,
            resamples: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcfConfig {
    pub max_lag: usize,
    /// Monte Carlo replications for the theoretical IQR band; `None` uses
    /// the GB replication count.
    pub band_replications: Option<usize>,
    /// Adds the CBB correlograms with this block length.
    pub cbb_block_len: Option<usize>,
}

impl Default for AcfConfig {
    fn default() -> Self {
        AcfConfig {
            max_lag: 20,
            band_replications: None,
            cbb_block_len: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageConfig {
    pub methods: Vec<Method>,
    pub statistic: Statistic,
    /// Fit the LS coefficient with an intercept.
    pub intercept: bool,
    /// Replace every interval by this one; a plumbing check.
    pub fixed_interval: Option<[f64; 2]>,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            methods: vec![Method::Gb, Method::Cbb],
            statistic: Statistic::Ls,
            intercept: false,
            fixed_interval: None,
        }
    }
}

/// The statistic whose bootstrap intervals are scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    /// Least-squares AR(1) coefficient; its true value is `phi`.
    Ls,
    /// Sample mean; its true value is 0.
    Mean,
}

impl CoverageConfig {
    pub fn estimate(&self, path: &[f64]) -> genboot_core::Result<f64> {
        match self.statistic {
            Statistic::Ls if self.intercept => ls_estimate_with_intercept(path),
            Statistic::Ls => ls_estimate(path),
            Statistic::Mean => Ok(path.iter().sum::<f64>() / path.len() as f64),
        }
    }

    /// True value of the statistic under the AR(1) with coefficient `phi`.
    pub fn target(&self, phi: f64) -> f64 {
        match self.statistic {
            Statistic::Ls => phi,
            Statistic::Mean => 0.0,
        }
    }
}

fn default_seed() -> u64 {
    42
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_levels() -> Vec<f64> {
    vec![0.99, 0.95, 0.90, 0.80]
}

/// Full experiment settings. `workers` and `output_dir` do not affect
/// results and are left out of the serialized form embedded in outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub workers: usize,
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default)]
    pub dgp: DgpConfig,
    #[serde(default)]
    pub gb: GbConfig,
    #[serde(default)]
    pub cbb: CbbConfig,
    #[serde(default)]
    pub acf: AcfConfig,
    #[serde(default)]
    pub coverage: CoverageConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            seed: default_seed(),
            workers: 0,
            output_dir: default_output_dir(),
            levels: default_levels(),
            dgp: DgpConfig::default(),
            gb: GbConfig::default(),
            cbb: CbbConfig::default(),
            acf: AcfConfig::default(),
            coverage: CoverageConfig::default(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses TOML text, applies `overrides` and validates the result.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: Table = text.parse().map_err(|e| config_err(format!("{e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config = ExperimentConfig::deserialize(Value::Table(table)).map_err(|e| config_err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path`, or starts from the defaults when `path` is `None`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?,
            None => format!("schema_version = {SCHEMA_VERSION}\n"),
        };
        Self::from_toml(&text, overrides)
    }

    /// One-line JSON of every result-affecting setting.
    pub fn provenance_json(&self) -> String {
        serde_json::to_string(self).expect("config is always serializable")
    }

    pub fn sample_len(&self) -> usize {
        self.gb.b2.unwrap_or(self.dgp.len)
    }

    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            b1: self.gb.b1,
            b2: self.gb.b2,
            m: self.gb.samples,
            levels: self.levels.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.dgp.phis.is_empty() {
            return Err(config_err("dgp.phis is empty"));
        }
        if let Some(phi) = self.dgp.phis.iter().find(|p| p.is_nan() || p.abs() >= 1.0) {
            return Err(config_err(format!("dgp.phis: {phi} is not in (-1, 1)")));
        }
        if self.dgp.len < 3 {
            return Err(config_err("dgp.len must be >= 3"));
        }
        let counts = [
            ("gb.replications", self.gb.replications),
            ("gb.samples", self.gb.samples),
            ("cbb.replications", self.cbb.replications),
            ("cbb.resamples", self.cbb.resamples),
            ("acf.max_lag", self.acf.max_lag),
            ("acf.band_replications", self.acf.band_replications.unwrap_or(1)),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, n)| *n == 0) {
            return Err(config_err(format!("{name} must be >= 1")));
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(config_err(format!(
                "levels {:?} must be non-empty and in (0, 1)",
                self.levels
            )));
        }
        let len = self.dgp.len;
        if self.gb.b1 == 0 || self.gb.b1 >= len {
            return Err(config_err(format!("gb.b1 = {} must be in 1..{len}", self.gb.b1)));
        }
        self.gb.gan.validate().map_err(|e| config_err(e.to_string()))?;
        let min = Discriminator::new(&self.gb.gan).min_len();
        if self.gb.b1 < min {
            return Err(config_err(format!(
                "gb.b1 = {} is below the critic's minimum {min}",
                self.gb.b1
            )));
        }
        if self.gb.b2 == Some(0) {
            return Err(config_err("gb.b2 must be >= 1"));
        }
        if self.acf.max_lag >= self.sample_len() {
            return Err(config_err(format!(
                "acf.max_lag = {} must be below the sample length {}",
                self.acf.max_lag,
                self.sample_len()
            )));
        }
        let blocks = self.cbb.block_lens.iter().chain(self.acf.cbb_block_len.iter());
        if let Some(b) = blocks.clone().find(|&&b| b == 0 || b > len) {
            return Err(config_err(format!("CBB block length {b} must be in 1..={len}")));
        }
        if self.coverage.methods.is_empty() {
            return Err(config_err("coverage.methods is empty"));
        }
        if self.coverage.methods.contains(&Method::Cbb) && self.cbb.block_lens.is_empty() {
            return Err(config_err("cbb.block_lens is empty"));
        }
        if let Some([lo, hi]) = self.coverage.fixed_interval {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(config_err(format!("coverage.fixed_interval [{lo}, {hi}] is reversed")));
            }
        }
        Ok(())
    }
}

fn parse_value(text: &str) -> Value {
    format!("v = {text}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

/// Sets `dotted.key=value` in `table`, creating intermediate tables.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{assignment}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("override key `{key}` is malformed")));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut t = table;
    for p in parents {
        let entry = t.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override `{key}`: `{p}` is not a table")))?;
    }
    t.insert(last.to_string(), parse_value(value.trim()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_need_only_the_version() {
        let c = ExperimentConfig::from_toml("schema_version = 1", &[]).unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.dgp.phis, vec![0.5, 0.8, 0.9]);
        assert_eq!((c.gb.replications, c.cbb.replications), (1000, 5000));
        assert_eq!(c.sample_len(), 1000);
    }

    #[test]
    fn version_is_required_and_checked() {
        assert!(matches!(
            ExperimentConfig::from_toml("seed = 1", &[]),
            Err(HarnessError::Config(_))
        ));
        assert!(ExperimentConfig::from_toml("schema_version = 2", &[]).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("schema_version = 1\nsede = 3", &[]).is_err());
        assert!(ExperimentConfig::from_toml("schema_version = 1\n[gb.gan]\nlr = 0.1", &[]).is_err());
        assert!(ExperimentConfig::from_toml("schema_version = 1", &["dgp.lenn=5".into()]).is_err());
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = ExperimentConfig::from_toml(
            "schema_version = 1\n[dgp]\nlen = 500",
            &[
                "gb.gan.lr_d=0.001".into(),
                "dgp.phis=[0.2]".into(),
                "gb.sampler=fitted-dgp".into(),
                "output_dir=results/a".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.gb.gan.lr_d, 0.001);
        assert_eq!(c.dgp.phis, vec![0.2]);
        assert_eq!(c.dgp.len, 500);
        assert_eq!(c.gb.sampler, SamplerKind::FittedDgp);
        assert_eq!(c.output_dir, PathBuf::from("results/a"));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for o in [
            "dgp.phis=[1.0]",
            "gb.b1=1000",
            "gb.replications=0",
            "levels=[1.5]",
            "cbb.block_lens=[0]",
        ] {
            let r = ExperimentConfig::from_toml("schema_version = 1", &[o.into()]);
            assert!(matches!(r, Err(HarnessError::Config(_))), "{o}");
        }
    }

    #[test]
    fn provenance_omits_scheduling() {
        let mut a = ExperimentConfig::default();
        let mut b = a.clone();
        a.workers = 1;
        b.workers = 8;
        b.output_dir = "elsewhere".into();
        assert_eq!(a.provenance_json(), b.provenance_json());
        assert!(a.provenance_json().contains("\"seed\":42"));
    }
}
