//! Monte Carlo experiments: correlogram fidelity and CI coverage.
//!
//! Replication `r` at the `k`-th coefficient draws its observed path from
//! `stream_rng(seed, k << 32 | r)`, then forks one base seed `s` from the
//! same generator. The GB arm continues on `stream_rng(s, 0)` and the CBB
//! arm with block length `b` on `stream_rng(s, 1 + b)`, so both methods
//! resample the same observed path. Monte Carlo replications of the
//! theoretical band use `stream_rng(seed, k << 32 | 1 << 31 | r)`. Results
//! are collected in replication order and do not depend on the worker count.

use std::io::Write;

use genboot_core::bootstrap::{cbb_bootstrap, cbb_resample, gb_statistics, Interval};
use genboot_core::rng::{fork_seed, stream_rng, GbRng};
use genboot_core::timeseries::{acf, ls_estimate, pacf, simulate_ar1, theoretical_refs, Ar1Spec, CorrelogramStats};
use genboot_core::SamplePath;
use rayon::prelude::*;

use crate::chart::{emit_chart, Chart};
use crate::config::{ExperimentConfig, Method};
use crate::error::{HarnessError, Result};
use crate::output::{phi_tag, provenance, write_comments, OutputDir};
use crate::sampler::{ar1_paths, from_config, PathSampler};

type CoreResult<T> = std::result::Result<T, genboot_core::Error>;

const BAND_STREAM: u64 = 1 << 31;

/// Observed path and method seed of one replication.
pub struct Replication {
    pub observed: SamplePath,
    base: u64,
}

impl Replication {
    pub fn draw(seed: u64, phi_index: usize, r: usize, phi: f64, len: usize) -> CoreResult<Self> {
        let mut rng = stream_rng(seed, ((phi_index as u64) << 32) | r as u64);
        let observed = simulate_ar1(&Ar1Spec::new(phi, len), &mut rng)?;
        let base = fork_seed(&mut rng);
        Ok(Replication { observed, base })
    }

    pub fn gb_rng(&self) -> GbRng {
        stream_rng(self.base, 0)
    }

    pub fn cbb_rng(&self, block_len: usize) -> GbRng {
        stream_rng(self.base, 1 + block_len as u64)
    }
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Runtime(format!("cannot start worker pool: {e}")))
}

fn par_map<T, F>(pool: &rayon::ThreadPool, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

/// A replication left out of an experiment, with the reason.
#[derive(Clone, Debug, PartialEq)]
pub struct Excluded {
    pub phi: f64,
    pub arm: String,
    pub replication: usize,
    pub reason: String,
}

/// Mean ACF and PACF curves (lags `0..=max_lag`) over a set of paths.
pub fn mean_correlograms(paths: &[SamplePath], max_lag: usize) -> CoreResult<(Vec<f64>, Vec<f64>)> {
    let mut a = vec![0.0; max_lag + 1];
    let mut p = vec![0.0; max_lag + 1];
    for path in paths {
        for (s, v) in a.iter_mut().zip(acf(path, max_lag)?) {
            *s += v;
        }
        for (s, v) in p.iter_mut().zip(pacf(path, max_lag)?) {
            *s += v;
        }
    }
    let n = paths.len() as f64;
    a.iter_mut().chain(p.iter_mut()).for_each(|v| *v /= n);
    Ok((a, p))
}

fn mean_ls(paths: &[SamplePath]) -> CoreResult<f64> {
    let mut sum = 0.0;
    for p in paths {
        sum += ls_estimate(p)?;
    }
    Ok(sum / paths.len() as f64)
}

/// Summary of one arm's per-replication mean correlograms.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmCorrelograms {
    pub acf: CorrelogramStats,
    pub pacf: CorrelogramStats,
    /// Mean LS coefficient over each replication's paths.
    pub mean_ls: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcfResult {
    pub phi: f64,
    pub theory_acf: Vec<f64>,
    pub theory_pacf: Vec<f64>,
    /// Spread of true-DGP correlograms over sample sets of the same size.
    pub band: ArmCorrelograms,
    /// `None` when every replication was excluded.
    pub gb: Option<ArmCorrelograms>,
    pub cbb: Option<ArmCorrelograms>,
    pub replications: usize,
    pub excluded: Vec<Excluded>,
}

struct ReplicationCurves {
    acf: Vec<f64>,
    pacf: Vec<f64>,
    ls: f64,
}

fn curves_for(paths: &[SamplePath], max_lag: usize) -> CoreResult<ReplicationCurves> {
    let (acf, pacf) = mean_correlograms(paths, max_lag)?;
    Ok(ReplicationCurves {
        acf,
        pacf,
        ls: mean_ls(paths)?,
    })
}

fn summarise(curves: &[ReplicationCurves]) -> Option<ArmCorrelograms> {
    let acfs: Vec<Vec<f64>> = curves.iter().map(|c| c.acf.clone()).collect();
    let pacfs: Vec<Vec<f64>> = curves.iter().map(|c| c.pacf.clone()).collect();
    Some(ArmCorrelograms {
        acf: CorrelogramStats::from_curves(&acfs).ok()?,
        pacf: CorrelogramStats::from_curves(&pacfs).ok()?,
        mean_ls: curves.iter().map(|c| c.ls).collect(),
    })
}

/// Splits per-replication outcomes into kept values and exclusions.
fn partition<T>(outcomes: Vec<CoreResult<T>>, phi: f64, arm: &str) -> (Vec<T>, Vec<Excluded>) {
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(v) => kept.push(v),
            Err(e) => excluded.push(Excluded {
                phi,
                arm: arm.into(),
                replication: r,
                reason: e.to_string(),
            }),
        }
    }
    (kept, excluded)
}

fn cbb_paths(observed: &SamplePath, block_len: usize, m: usize, rng: &mut GbRng) -> CoreResult<Vec<SamplePath>> {
    let base = fork_seed(rng);
    (0..m)
        .map(|i| cbb_resample(observed, block_len, &mut stream_rng(base, i as u64)))
        .collect()
}

/// Correlogram experiment with the sampler chosen in the config; writes
/// its outputs to `config.output_dir`.
pub fn run_acf_experiment(config: &ExperimentConfig) -> Result<Vec<AcfResult>> {
    let sampler = from_config(config, config.gb.replications == 1);
    run_acf_experiment_with(config, sampler.as_ref())
}

pub fn run_acf_experiment_with(config: &ExperimentConfig, sampler: &dyn PathSampler) -> Result<Vec<AcfResult>> {
    config.validate()?;
    let out = OutputDir::create(&config.output_dir)?;
    let pool = thread_pool(config.workers)?;
    let prov = provenance("acf-experiment", config);
    let (len, m, max_lag) = (config.sample_len(), config.gb.samples, config.acf.max_lag);
    let reps = config.gb.replications;
    let band_reps = config.acf.band_replications.unwrap_or(reps);

    let mut results = Vec::new();
    let mut failure = None;
    for (k, &phi) in config.dgp.phis.iter().enumerate() {
        let outcomes = par_map(
            &pool,
            reps,
            |r| -> CoreResult<(ReplicationCurves, Option<ReplicationCurves>)> {
                let rep = Replication::draw(config.seed, k, r, phi, config.dgp.len)?;
                let paths = sampler.sample(&rep.observed, phi, len, m, &mut rep.gb_rng())?;
                let gb = curves_for(&paths, max_lag)?;
                let cbb = match config.acf.cbb_block_len {
                    Some(b) => Some(curves_for(
                        &cbb_paths(&rep.observed, b, m, &mut rep.cbb_rng(b))?,
                        max_lag,
                    )?),
                    None => None,
                };
                Ok((gb, cbb))
            },
        );
        let (kept, excluded) = partition(outcomes, phi, "gb");
        let (gb, cbb): (Vec<_>, Vec<_>) = kept.into_iter().unzip();
        let cbb: Vec<ReplicationCurves> = cbb.into_iter().flatten().collect();

        let band = par_map(&pool, band_reps, |r| {
            let mut rng = stream_rng(config.seed, ((k as u64) << 32) | BAND_STREAM | r as u64);
            curves_for(&ar1_paths(phi, len, m, &mut rng)?, max_lag)
        });
        let band: Vec<ReplicationCurves> = band.into_iter().collect::<CoreResult<_>>()?;
        let refs = theoretical_refs(phi, len, max_lag)?;
        let result = AcfResult {
            phi,
            theory_acf: refs.acf,
            theory_pacf: refs.pacf,
            band: summarise(&band).expect("band replications are never empty"),
            gb: summarise(&gb),
            cbb: summarise(&cbb),
            replications: reps,
            excluded,
        };
        write_acf_outputs(&out, &prov, &result)?;
        if result.gb.is_none() && failure.is_none() {
            failure = Some(format!("every GB replication failed for phi = {phi}"));
        }
        results.push(result);
    }
    write_acf_summary(&out, &prov, &results)?;
    match failure {
        Some(msg) => Err(HarnessError::Runtime(msg)),
        None => Ok(results),
    }
}

fn opt_cols(s: Option<&CorrelogramStats>, j: usize) -> String {
    match s {
        Some(s) => format!("{},{},{}", s.mean[j], s.q25[j], s.q75[j]),
        None => ",,".into(),
    }
}

/// Name, theoretical curve, band, GB and CBB statistics of one correlogram.
type Table<'a> = (
    &'a str,
    &'a [f64],
    &'a CorrelogramStats,
    Option<&'a CorrelogramStats>,
    Option<&'a CorrelogramStats>,
);

fn write_acf_outputs(out: &OutputDir, prov: &[String], r: &AcfResult) -> Result<()> {
    let tag = phi_tag(r.phi);
    let mut comments = prov.to_vec();
    comments.push(format!("phi: {}", r.phi));
    comments.push(format!(
        "replications: {}, excluded: {}",
        r.replications,
        r.excluded.len()
    ));
    let tables: [Table; 2] = [
        (
            "acf",
            &r.theory_acf,
            &r.band.acf,
            r.gb.as_ref().map(|g| &g.acf),
            r.cbb.as_ref().map(|c| &c.acf),
        ),
        (
            "pacf",
            &r.theory_pacf,
            &r.band.pacf,
            r.gb.as_ref().map(|g| &g.pacf),
            r.cbb.as_ref().map(|c| &c.pacf),
        ),
    ];
    for (name, theory, band, gb, cbb) in tables {
        out.write(&format!("{name}_phi{tag}.csv"), |w| {
            write_comments(w, &comments)?;
            writeln!(
                w,
                "lag,theory,theory_q25,theory_q75,gb_mean,gb_q25,gb_q75,cbb_mean,cbb_q25,cbb_q75"
            )?;
            for (j, t) in theory.iter().enumerate() {
                writeln!(
                    w,
                    "{j},{t},{},{},{},{}",
                    band.q25[j],
                    band.q75[j],
                    opt_cols(gb, j),
                    opt_cols(cbb, j)
                )?;
            }
            Ok(())
        })?;
    }
    out.write(&format!("ls_phi{tag}.csv"), |w| {
        write_comments(w, &comments)?;
        writeln!(w, "replication,gb_mean_ls,cbb_mean_ls")?;
        let gb = r.gb.as_ref().map(|g| g.mean_ls.as_slice()).unwrap_or(&[]);
        let cbb = r.cbb.as_ref().map(|c| c.mean_ls.as_slice()).unwrap_or(&[]);
        for i in 0..gb.len().max(cbb.len()) {
            let cell = |v: &[f64]| v.get(i).map(|x| x.to_string()).unwrap_or_default();
            writeln!(w, "{i},{},{}", cell(gb), cell(cbb))?;
        }
        Ok(())
    })?;

    let lags: Vec<f64> = (0..r.theory_acf.len()).map(|j| j as f64).collect();
    let mut chart = Chart::line(&format!("ACF, phi = {}", r.phi), "lag", "autocorrelation")
        .with_band(
            "theory IQR",
            lags.clone(),
            r.band.acf.q25.clone(),
            r.band.acf.q75.clone(),
        )
        .with_series("theory", lags.clone(), r.theory_acf.clone(), true)
        .with_metadata(&comments);
    if let Some(g) = &r.gb {
        chart = chart
            .with_band("GB IQR", lags.clone(), g.acf.q25.clone(), g.acf.q75.clone())
            .with_series("GB mean", lags.clone(), g.acf.mean.clone(), false);
    }
    if let Some(c) = &r.cbb {
        chart = chart
            .with_band("CBB IQR", lags.clone(), c.acf.q25.clone(), c.acf.q75.clone())
            .with_series("CBB mean", lags.clone(), c.acf.mean.clone(), false);
    }
    emit_chart(&chart, &out.path(&format!("acf_phi{tag}.svg")))?;

    let cats: Vec<String> = (1..r.theory_pacf.len()).map(|j| j.to_string()).collect();
    let whiskers = |s: &CorrelogramStats| Some((1..s.mean.len()).map(|j| (s.q25[j], s.q75[j])).collect());
    let mut chart = Chart::bar(
        &format!("PACF, phi = {}", r.phi),
        "lag",
        "partial autocorrelation",
        cats,
    )
    .with_bars("theory", r.theory_pacf[1..].to_vec(), whiskers(&r.band.pacf))
    .with_metadata(&comments);
    if let Some(g) = &r.gb {
        chart = chart.with_bars("GB mean", g.pacf.mean[1..].to_vec(), whiskers(&g.pacf));
    }
    if let Some(c) = &r.cbb {
        chart = chart.with_bars("CBB mean", c.pacf.mean[1..].to_vec(), whiskers(&c.pacf));
    }
    emit_chart(&chart, &out.path(&format!("pacf_phi{tag}.svg")))
}

fn write_excluded(w: &mut impl std::io::Write, excluded: &[&Excluded]) -> std::io::Result<()> {
    writeln!(w, "phi,arm,replication,reason")?;
    for e in excluded {
        writeln!(
            w,
            "{},{},{},\"{}\"",
            e.phi,
            e.arm,
            e.replication,
            e.reason.replace('"', "'")
        )?;
    }
    Ok(())
}

fn write_acf_summary(out: &OutputDir, prov: &[String], results: &[AcfResult]) -> Result<()> {
    out.write("acf_summary.csv", |w| {
        write_comments(w, prov)?;
        writeln!(w, "phi,replications,used,excluded,gb_mean_ls,cbb_mean_ls")?;
        for r in results {
            let mean = |a: Option<&ArmCorrelograms>| {
                a.map(|a| (a.mean_ls.iter().sum::<f64>() / a.mean_ls.len() as f64).to_string())
                    .unwrap_or_default()
            };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.phi,
                r.replications,
                r.replications - r.excluded.len(),
                r.excluded.len(),
                mean(r.gb.as_ref()),
                mean(r.cbb.as_ref())
            )?;
        }
        Ok(())
    })?;
    let all: Vec<&Excluded> = results.iter().flat_map(|r| &r.excluded).collect();
    out.write("acf_excluded.csv", |w| {
        write_comments(w, prov)?;
        write_excluded(w, &all)
    })?;
    Ok(())
}

/// Empirical coverage of one method at one coefficient and level.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageRow {
    pub method: Method,
    pub phi: f64,
    /// `b1` for the GB, the resampling block length for the CBB.
    pub block_len: usize,
    pub level: f64,
    pub coverage: f64,
    pub mean_length: f64,
    /// Replications that produced intervals.
    pub replications: usize,
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageResult {
    pub rows: Vec<CoverageRow>,
    /// Intervals per arm and replication, in level order.
    pub intervals: Vec<ArmIntervals>,
    pub excluded: Vec<Excluded>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArmIntervals {
    pub method: Method,
    pub phi: f64,
    pub block_len: usize,
    /// `(replication, intervals)` for each kept replication.
    pub replications: Vec<(usize, Vec<Interval>)>,
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Gb => "gb",
        Method::Cbb => "cbb",
    }
}

/// Coverage experiment with the sampler chosen in the config; writes its
/// outputs to `config.output_dir`.
pub fn run_coverage_experiment(config: &ExperimentConfig) -> Result<CoverageResult> {
    let sampler = from_config(config, config.gb.replications == 1);
    run_coverage_experiment_with(config, sampler.as_ref())
}

pub fn run_coverage_experiment_with(config: &ExperimentConfig, sampler: &dyn PathSampler) -> Result<CoverageResult> {
    config.validate()?;
    if config.gb.samples < 2 || config.cbb.resamples < 2 {
        return Err(HarnessError::Config("coverage needs at least 2 bootstrap paths".into()));
    }
    let out = OutputDir::create(&config.output_dir)?;
    let pool = thread_pool(config.workers)?;
    let prov = provenance("coverage-experiment", config);
    let levels = &config.levels;
    let statistic = |p: &SamplePath| config.coverage.estimate(p);
    let fixed = |mut iv: Vec<Interval>| {
        if let Some([lo, hi]) = config.coverage.fixed_interval {
            for i in &mut iv {
                (i.lower, i.upper) = (lo, hi);
            }
        }
        iv
    };

    let mut arms = Vec::new();
    for (k, &phi) in config.dgp.phis.iter().enumerate() {
        for &method in &config.coverage.methods {
            let blocks = match method {
                Method::Gb => vec![config.gb.b1],
                Method::Cbb => config.cbb.block_lens.clone(),
            };
            for b in blocks {
                let reps = match method {
                    Method::Gb => config.gb.replications,
                    Method::Cbb => config.cbb.replications,
                };
                let outcomes = par_map(&pool, reps, |r| -> CoreResult<Vec<Interval>> {
                    let rep = Replication::draw(config.seed, k, r, phi, config.dgp.len)?;
                    let iv = match method {
                        Method::Gb => {
                            let paths = sampler.sample(
                                &rep.observed,
                                phi,
                                config.sample_len(),
                                config.gb.samples,
                                &mut rep.gb_rng(),
                            )?;
                            let est = paths.iter().map(statistic).collect::<CoreResult<Vec<f64>>>()?;
                            gb_statistics(est, levels)?.intervals
                        }
                        Method::Cbb => {
                            cbb_bootstrap(
                                &rep.observed,
                                b,
                                statistic,
                                config.cbb.resamples,
                                levels,
                                &mut rep.cbb_rng(b),
                                false,
                            )?
                            .intervals
                        }
                    };
                    Ok(fixed(iv))
                });
                let arm = format!("{}-b{b}", method_name(method));
                let indexed: Vec<CoreResult<(usize, Vec<Interval>)>> = outcomes
                    .into_iter()
                    .enumerate()
                    .map(|(r, o)| o.map(|iv| (r, iv)))
                    .collect();
                let (kept, excluded) = partition(indexed, phi, &arm);
                arms.push((
                    ArmIntervals {
                        method,
                        phi,
                        block_len: b,
                        replications: kept,
                    },
                    excluded,
                ));
            }
        }
    }

    let mut result = CoverageResult {
        rows: Vec::new(),
        intervals: Vec::new(),
        excluded: Vec::new(),
    };
    for (arm, excluded) in arms {
        let used = arm.replications.len();
        if used > 0 {
            for (li, &level) in levels.iter().enumerate() {
                let covered = arm
                    .replications
                    .iter()
                    .filter(|(_, iv)| iv[li].contains(config.coverage.target(arm.phi)))
                    .count();
                let length = arm.replications.iter().map(|(_, iv)| iv[li].width()).sum::<f64>();
                result.rows.push(CoverageRow {
                    method: arm.method,
                    phi: arm.phi,
                    block_len: arm.block_len,
                    level,
                    coverage: covered as f64 / used as f64,
                    mean_length: length / used as f64,
                    replications: used,
                    excluded: excluded.len(),
                });
            }
        }
        result.intervals.push(arm);
        result.excluded.extend(excluded);
    }
    write_coverage_outputs(&out, &prov, config, &result)?;
    if let Some(arm) = result.intervals.iter().find(|a| a.replications.is_empty()) {
        return Err(HarnessError::Runtime(format!(
            "every {} replication failed for phi = {} (block length {})",
            method_name(arm.method),
            arm.phi,
            arm.block_len
        )));
    }
    Ok(result)
}

fn write_coverage_outputs(
    out: &OutputDir,
    prov: &[String],
    config: &ExperimentConfig,
    res: &CoverageResult,
) -> Result<()> {
    out.write("coverage.csv", |w| {
        write_comments(w, prov)?;
        writeln!(
            w,
            "method,phi,block_len,level,coverage,mean_length,replications,excluded"
        )?;
        for r in &res.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                method_name(r.method),
                r.phi,
                r.block_len,
                r.level,
                r.coverage,
                r.mean_length,
                r.replications,
                r.excluded
            )?;
        }
        Ok(())
    })?;
    out.write("coverage_intervals.csv", |w| {
        write_comments(w, prov)?;
        writeln!(w, "method,phi,block_len,replication,level,lower,upper,covered")?;
        for arm in &res.intervals {
            for (r, ivs) in &arm.replications {
                for iv in ivs {
                    writeln!(
                        w,
                        "{},{},{},{r},{},{},{},{}",
                        method_name(arm.method),
                        arm.phi,
                        arm.block_len,
                        iv.level,
                        iv.lower,
                        iv.upper,
                        u8::from(iv.contains(config.coverage.target(arm.phi)))
                    )?;
                }
            }
        }
        Ok(())
    })?;
    let excluded: Vec<&Excluded> = res.excluded.iter().collect();
    out.write("coverage_excluded.csv", |w| {
        write_comments(w, prov)?;
        write_excluded(w, &excluded)
    })?;

    let cats: Vec<String> = config.dgp.phis.iter().map(|p| p.to_string()).collect();
    let mut arm_names: Vec<(Method, usize)> = Vec::new();
    for r in &res.rows {
        if !arm_names.contains(&(r.method, r.block_len)) {
            arm_names.push((r.method, r.block_len));
        }
    }
    for &level in &config.levels {
        let mut chart = Chart::bar(
            &format!("Coverage at nominal level {level}"),
            "phi",
            "empirical coverage",
            cats.clone(),
        )
        .with_reference("nominal", level)
        .with_metadata(prov);
        for &(method, b) in &arm_names {
            let values: Vec<f64> = config
                .dgp
                .phis
                .iter()
                .map(|&phi| {
                    res.rows
                        .iter()
                        .find(|r| r.method == method && r.block_len == b && r.phi == phi && r.level == level)
                        .map_or(0.0, |r| r.coverage)
                })
                .collect();
            let name = match method {
                Method::Gb => format!("GB b1={b}"),
                Method::Cbb => format!("CBB b={b}"),
            };
            chart = chart.with_bars(&name, values, None);
        }
        if !arm_names.is_empty() {
            emit_chart(&chart, &out.path(&format!("coverage_{level}.svg")))?;
        }
    }
    Ok(())
}
