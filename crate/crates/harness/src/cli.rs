//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use genboot_core::bootstrap::{cbb_bootstrap, gb_sample, gb_statistics};
use genboot_core::gan::{GanModel, Generator};
use genboot_core::{Error as CoreError, SamplePath};

use crate::chart::{emit_chart, Chart};
use crate::config::{ExperimentConfig, SamplerKind};
use crate::error::{HarnessError, Result};
use crate::experiment::{run_acf_experiment, run_coverage_experiment, thread_pool, Replication};
use crate::output::{phi_tag, provenance, write_comments, OutputDir};
use crate::sampler::{from_config, GanSampler};

#[derive(Debug, Parser)]
#[command(name = "genboot", version, about = "Generative bootstrap for time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML config file; built-in defaults apply when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set gb.gan.total_steps=100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn load(&self) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::load(self.config.as_deref(), &self.overrides)?;
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(w) = self.workers {
            c.workers = w;
        }
        if let Some(o) = &self.out {
            c.output_dir = o.clone();
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct WithInput {
    #[command(flatten)]
    pub common: Common,
    /// Observed path as single-column CSV; by default one AR(1) path is
    /// simulated with the first coefficient in `dgp.phis`.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Simulate one AR(1) path per coefficient.
    Simulate(Common),
    /// Train the GAN on an observed path and save a checkpoint.
    Train(WithInput),
    /// Generate paths from a saved checkpoint.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Checkpoint file; defaults to `model.ckpt` in the output directory.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Generative bootstrap of the LS coefficient of an observed path.
    Gb(WithInput),
    /// Circular block bootstrap of the LS coefficient of an observed path.
    Cbb(WithInput),
    /// Correlogram fidelity experiment.
    AcfExperiment(Common),
    /// Confidence interval coverage experiment.
    CoverageExperiment(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c) | Command::AcfExperiment(c) | Command::CoverageExperiment(c) => c,
            Command::Train(w) | Command::Gb(w) | Command::Cbb(w) => &w.common,
            Command::Sample { common, .. } => common,
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = cli.command.common().load()?;
    let pool = thread_pool(config.workers)?;
    pool.install(|| match &cli.command {
        Command::Simulate(_) => simulate(&config),
        Command::Train(w) => train(&config, w.input.as_deref()).map(|_| ()),
        Command::Sample { model, .. } => sample(&config, model.as_deref()),
        Command::Gb(w) => gb(&config, w.input.as_deref()),
        Command::Cbb(w) => cbb(&config, w.input.as_deref()),
        Command::AcfExperiment(_) => run_acf_experiment(&config).map(|_| ()),
        Command::CoverageExperiment(_) => run_coverage_experiment(&config).map(|_| ()),
    })
}

fn comments(command: &str, config: &ExperimentConfig, extra: &[String]) -> Vec<String> {
    let mut c = provenance(command, config);
    c.extend_from_slice(extra);
    c
}

fn simulate(config: &ExperimentConfig) -> Result<()> {
    let out = OutputDir::create(&config.output_dir)?;
    for (k, &phi) in config.dgp.phis.iter().enumerate() {
        let path = Replication::draw(config.seed, k, 0, phi, config.dgp.len)?.observed;
        let c = comments("simulate", config, &[format!("phi: {phi}")]);
        let tag = phi_tag(phi);
        out.write(&format!("path_phi{tag}.csv"), |w| {
            write_comments(w, &c)?;
            path.write_csv(&mut *w, "y").map_err(std::io::Error::other)
        })?;
        let t: Vec<f64> = (0..path.len()).map(|i| i as f64).collect();
        let chart = Chart::line(&format!("AR(1) path, phi = {phi}"), "t", "y")
            .with_series("y", t, path.to_vec(), false)
            .with_metadata(&c);
        emit_chart(&chart, &out.path(&format!("path_phi{tag}.svg")))?;
    }
    Ok(())
}

/// The observed path and the replication whose streams drive the command.
fn observed(config: &ExperimentConfig, input: Option<&Path>) -> Result<(Replication, Vec<String>)> {
    let phi = config.dgp.phis[0];
    let mut rep = Replication::draw(config.seed, 0, 0, phi, config.dgp.len)?;
    let source = match input {
        Some(p) => {
            let file = std::fs::File::open(p).map_err(HarnessError::io(p))?;
            rep.observed = SamplePath::read_csv(std::io::BufReader::new(file))?;
            format!(
                "input: {}",
                p.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
            )
        }
        None => format!("input: simulated AR(1), phi = {phi}, T = {}", config.dgp.len),
    };
    if rep.observed.len() <= config.gb.b1 {
        return Err(HarnessError::Config(format!(
            "observed path has {} values; gb.b1 = {} needs more",
            rep.observed.len(),
            config.gb.b1
        )));
    }
    Ok((rep, vec![source]))
}

fn write_trace(out: &OutputDir, c: &[String], trace: &genboot_core::gan::TrainingTrace) -> Result<()> {
    out.write("trace.csv", |w| trace.write_csv(w, c))?;
    let (mut steps, mut loss_d, mut gsteps, mut loss_g) = (vec![], vec![], vec![], vec![]);
    for r in &trace.records {
        if let Some(d) = r.loss_d {
            steps.push(r.step as f64);
            loss_d.push(d);
        }
        if let Some(g) = r.loss_g {
            gsteps.push(r.step as f64);
            loss_g.push(g);
        }
    }
    if steps.is_empty() {
        return Ok(());
    }
    let mut chart = Chart::line("Training losses", "step", "loss")
        .with_series("critic", steps, loss_d, false)
        .with_metadata(c);
    if !gsteps.is_empty() {
        chart = chart.with_series("generator", gsteps, loss_g, false);
    }
    emit_chart(&chart, &out.path("trace.svg"))
}

/// Trains on the observed path, saving `model.ckpt` and the trace. A
/// diverged run still leaves its trace behind.
fn train(config: &ExperimentConfig, input: Option<&Path>) -> Result<GanModel> {
    let out = OutputDir::create(&config.output_dir)?;
    let (rep, extra) = observed(config, input)?;
    let c = comments("train", config, &extra);
    let sampler = GanSampler {
        gan: config.gb.gan.clone(),
        b1: config.gb.b1,
        parallel: true,
    };
    let mut rng = rep.gb_rng();
    let trained = match sampler.train(&rep.observed, &mut rng) {
        Ok(t) => t,
        Err(CoreError::NonFiniteLoss { step, trace }) => {
            write_trace(&out, &c, &trace)?;
            return Err(CoreError::NonFiniteLoss { step, trace }.into());
        }
        Err(e) => return Err(e.into()),
    };
    write_trace(&out, &c, &trained.trace)?;
    let model = GanModel {
        config: config.gb.gan.clone(),
        generator: trained.generator,
        discriminator: trained.discriminator,
        rng,
    };
    let path = out.path("model.ckpt");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&path).map_err(HarnessError::io(&path))?);
    model.save(&mut file)?;
    file.flush().map_err(HarnessError::io(&path))?;
    Ok(model)
}

fn write_paths(out: &OutputDir, name: &str, c: &[String], paths: &[SamplePath]) -> Result<()> {
    out.write(name, |w| {
        write_comments(w, c)?;
        writeln!(w, "sample,t,value")?;
        for (i, p) in paths.iter().enumerate() {
            for (t, v) in p.iter().enumerate() {
                writeln!(w, "{i},{t},{v}")?;
            }
        }
        Ok(())
    })?;
    Ok(())
}

fn sample(config: &ExperimentConfig, model: Option<&Path>) -> Result<()> {
    let out = OutputDir::create(&config.output_dir)?;
    let path = model.map(Path::to_path_buf).unwrap_or_else(|| out.path("model.ckpt"));
    let file = std::fs::File::open(&path).map_err(HarnessError::io(&path))?;
    let mut model = GanModel::load(&mut std::io::BufReader::new(file))?;
    let gen = Generator::new(&model.config);
    let paths = gb_sample(
        &gen,
        &model.generator,
        config.sample_len(),
        config.gb.samples,
        &mut model.rng,
        true,
    )?;
    let c = comments(
        "sample",
        config,
        &[format!(
            "model config: {}",
            serde_json::to_string(&model.config).unwrap_or_default()
        )],
    );
    write_paths(&out, "samples.csv", &c, &paths)
}

fn statistic(config: &ExperimentConfig) -> impl Fn(&SamplePath) -> genboot_core::Result<f64> + Sync + '_ {
    |p| config.coverage.estimate(p)
}

fn gb(config: &ExperimentConfig, input: Option<&Path>) -> Result<()> {
    let out = OutputDir::create(&config.output_dir)?;
    let (rep, extra) = observed(config, input)?;
    let c = comments("gb", config, &extra);
    let (len, m) = (config.sample_len(), config.gb.samples);
    let paths = match config.gb.sampler {
        SamplerKind::Gan => {
            let mut model = train(config, input)?;
            gb_sample(
                &Generator::new(&model.config),
                &model.generator,
                len,
                m,
                &mut model.rng,
                true,
            )?
        }
        _ => from_config(config, true).sample(&rep.observed, config.dgp.phis[0], len, m, &mut rep.gb_rng())?,
    };
    let estimates = paths
        .iter()
        .map(statistic(config))
        .collect::<genboot_core::Result<Vec<f64>>>()?;
    let res = gb_statistics(estimates, &config.levels)?;
    out.write("gb_estimates.csv", |w| res.write_estimates_csv(w, &c))?;
    out.write("gb_summary.csv", |w| res.write_summary_csv(w, &c))?;
    Ok(())
}

fn cbb(config: &ExperimentConfig, input: Option<&Path>) -> Result<()> {
    let out = OutputDir::create(&config.output_dir)?;
    let (rep, extra) = observed(config, input)?;
    let c = comments("cbb", config, &extra);
    let mut summary = Vec::new();
    for &b in &config.cbb.block_lens {
        let res = cbb_bootstrap(
            &rep.observed,
            b,
            statistic(config),
            config.cbb.resamples,
            &config.levels,
            &mut rep.cbb_rng(b),
            true,
        )?;
        let mut cb = c.clone();
        cb.push(format!("block length: {b}"));
        out.write(&format!("cbb_estimates_b{b}.csv"), |w| res.write_estimates_csv(w, &cb))?;
        summary.push((b, res));
    }
    out.write("cbb_summary.csv", |w| {
        write_comments(w, &c)?;
        writeln!(w, "block_len,level,lower,upper,mean,variance")?;
        for (b, res) in &summary {
            for i in &res.intervals {
                writeln!(
                    w,
                    "{b},{},{},{},{},{}",
                    i.level, i.lower, i.upper, res.mean, res.variance
                )?;
            }
        }
        Ok(())
    })?;
    Ok(())
}
