//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers (`-- 3 5`) to run a subset.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use genboot_core::bootstrap::{
    cbb_bootstrap, cbb_resample, cbb_resample_with_starts, make_blocks, training_batch_starts,
};
use genboot_core::gan::*;
use genboot_core::nn::{init_network, Architecture, InitSpec, NetworkParams};
use genboot_core::rng::{fill_standard_normal, stream_rng, GbRng};
use genboot_core::timeseries::{acf, ls_estimate, pacf, simulate_ar1, Ar1Spec};
use genboot_core::SamplePath;
use genboot_harness::config::{ExperimentConfig, Method, SamplerKind};
use genboot_harness::experiment::{run_acf_experiment, run_coverage_experiment};
use genboot_tensor::{evaluate, gradient, Bindings, Expr, Tensor};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (usize, &'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() -> ExitCode {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 8] = [
        (1, "gradient correctness", gradients),
        (2, "causality and sliding-window equivalence", causality),
        (3, "blocking and bootstrap oracles", bootstrap_oracles),
        (4, "estimator fidelity", estimator_fidelity),
        (5, "coverage in oracle mode", oracle_coverage),
        (6, "desk-scale GB fidelity", gb_fidelity),
        (7, "loss identities", loss_identities),
        (8, "CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {n} {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {n} {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("genboot-accept-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn normals(n: usize, rng: &mut GbRng) -> Vec<f64> {
    let mut v = vec![0.0; n];
    fill_standard_normal(rng, &mut v);
    v
}

fn batch(rows: usize, len: usize, rng: &mut GbRng) -> Tensor {
    Tensor::new(vec![rows, len], normals(rows * len, rng)).unwrap()
}

/// Initialised weights plus noise on every block, biases included.
fn dense_params(arch: &dyn Architecture, sd: f64, rng: &mut GbRng) -> NetworkParams {
    let mut p = init_network(arch, &InitSpec { sd }, rng).unwrap();
    for b in p.blocks_mut() {
        let draws = normals(b.value.len(), rng);
        for (v, d) in b.value.data_mut().iter_mut().zip(draws) {
            *v += 0.3 * sd * d;
        }
    }
    p
}

fn random_generator(rng: &mut GbRng) -> (GeneratorArch, usize) {
    let layers = rng.random_range(1..=3);
    let mut filters: Vec<usize> = (0..layers).map(|_| rng.random_range(1..=4)).collect();
    *filters.last_mut().unwrap() = 1;
    let arch = GeneratorArch {
        filters,
        dilations: (0..layers).map(|_| rng.random_range(1..=3)).collect(),
        kernel_size: rng.random_range(1..=3),
    };
    (arch, rng.random_range(1..=3))
}

fn random_critic(rng: &mut GbRng) -> DiscriminatorArch {
    let layers = rng.random_range(1..=3);
    let mut taps: Vec<usize> = (1..=layers).filter(|_| rng.random_bool(0.5)).collect();
    if taps.is_empty() {
        taps.push(layers);
    }
    DiscriminatorArch {
        filters: (0..layers).map(|_| rng.random_range(1..=4)).collect(),
        dilations: (0..layers).map(|_| rng.random_range(1..=3)).collect(),
        kernel_size: rng.random_range(1..=3),
        pool_taps: taps,
        pool_bins: rng.random_range(1..=4),
        hidden_width: rng.random_range(2..=6),
        leaky_slope: 0.01,
    }
}

/// Compares analytic gradients with central differences, entry by entry.
/// Entries whose one-sided differences disagree sit next to a kink (a
/// leaky-ReLU zero or a max-pool switch); they pass if the analytic value
/// matches either side to within `kink_tol`.
struct GradCheck {
    entries: usize,
    kinks: usize,
    worst: f64,
}

impl GradCheck {
    fn new() -> Self {
        GradCheck {
            entries: 0,
            kinks: 0,
            worst: 0.0,
        }
    }

    fn run(
        &mut self,
        what: &str,
        params: &NetworkParams,
        analytic: &[Tensor],
        f: impl Fn(&NetworkParams) -> f64,
        tol: f64,
        kink_tol: f64,
    ) -> Result<(), String> {
        let h = 1e-6;
        let f0 = f(params);
        for (bi, g) in analytic.iter().enumerate() {
            for k in 0..g.len() {
                let at = |d: f64| {
                    let mut p = params.clone();
                    p.blocks_mut()[bi].value.data_mut()[k] += d;
                    f(&p)
                };
                let (up, down) = (at(h), at(-h));
                let fd = (up - down) / (2.0 * h);
                let a = g.data()[k];
                let rel = |x: f64| (a - x).abs() / (1.0 + x.abs());
                self.entries += 1;
                if rel(fd) <= tol {
                    self.worst = self.worst.max(rel(fd));
                    continue;
                }
                let (fwd, bwd) = ((up - f0) / h, (f0 - down) / h);
                let kink = (fwd - bwd).abs() > kink_tol * (1.0 + fd.abs());
                let name = &params.blocks()[bi].name;
                ensure!(
                    kink && rel(fwd).min(rel(bwd)) <= kink_tol,
                    "{what}: {name}[{k}] analytic {a} vs difference {fd} (one-sided {fwd}, {bwd})"
                );
                self.kinks += 1;
            }
        }
        Ok(())
    }
}

fn eval_with(e: &Expr, b: &Bindings) -> f64 {
    e.eval(b).unwrap().item()
}

fn gradients() -> Outcome {
    let nets = 50;
    let mut check = GradCheck::new();
    let mut penalty = GradCheck::new();
    for seed in 0..nets {
        let rng = &mut stream_rng(0xacce, seed);
        let (garch, noise_dim) = random_generator(rng);
        let gen = Generator::from_arch(&garch, noise_dim);
        let disc = Discriminator::from_arch(&random_critic(rng));
        let len = disc.min_len().max(rng.random_range(4..=8));
        let rows = rng.random_range(1..=3);
        let gp = dense_params(&gen, 0.5, rng);
        let dp = dense_params(&disc, 0.5, rng);
        let real = batch(rows, len, rng);
        let fake = batch(rows, len, rng);
        let noise = noise_batch(rows, len, gen.window(), noise_dim, rng);
        let mix_seed = rng.random::<u64>();

        // Critic loss, without and with the double-backprop penalty.
        for (lambda, sink) in [(0.0, &mut check), (20.0, &mut penalty)] {
            let loss = |p: &NetworkParams| {
                let leaves = p.leaves();
                let l = wgan_discriminator_loss(&disc, &leaves, &real, &fake, lambda, &mut stream_rng(mix_seed, 0))
                    .unwrap();
                (leaves, l.total)
            };
            let (leaves, total) = loss(&dp);
            let g = evaluate(&gradient(&total, leaves.all()).unwrap(), &dp.bindings()).unwrap();
            let tol = if lambda == 0.0 { 1e-5 } else { 1e-4 };
            sink.run(
                &format!("net {seed} critic loss, lambda {lambda}"),
                &dp,
                &g,
                |p| eval_with(&loss(p).1, &p.bindings()),
                tol,
                1e-3,
            )?;
        }

        // Generator loss in the generator parameters.
        let dl = dp.leaves_with_prefix("d/");
        let gen_value = |p: &NetworkParams| {
            let loss = wgan_generator_loss(&gen, &p.leaves(), &disc, &dl, &noise).unwrap();
            let mut b = p.bindings();
            dp.bind_with_prefix("d/", &mut b);
            eval_with(&loss, &b)
        };
        let gl = gp.leaves();
        let loss = wgan_generator_loss(&gen, &gl, &disc, &dl, &noise).unwrap();
        let mut b = gp.bindings();
        dp.bind_with_prefix("d/", &mut b);
        let g = evaluate(&gradient(&loss, gl.all()).unwrap(), &b).unwrap();
        check.run(&format!("net {seed} generator loss"), &gp, &g, gen_value, 1e-5, 1e-3)?;

        // The original objective, through sigmoid, clamp and log.
        let basic = |p: &NetworkParams| {
            let gl = gp.leaves_with_prefix("g/");
            let leaves = p.leaves();
            let l = basic_gan_losses(&disc, &leaves, &gen, &gl, &real, &noise).unwrap();
            (leaves, l.discriminator)
        };
        let (leaves, obj) = basic(&dp);
        let mut b = dp.bindings();
        gp.bind_with_prefix("g/", &mut b);
        let g = evaluate(&gradient(&obj, leaves.all()).unwrap(), &b).unwrap();
        let value = |p: &NetworkParams| {
            let mut b = p.bindings();
            gp.bind_with_prefix("g/", &mut b);
            eval_with(&basic(p).1, &b)
        };
        check.run(&format!("net {seed} basic objective"), &dp, &g, value, 1e-5, 1e-3)?;
    }
    let kinks = check.kinks + penalty.kinks;
    let entries = check.entries + penalty.entries;
    ensure!(kinks * 100 <= entries, "{kinks} of {entries} entries fell on kinks");
    Ok(format!(
        "{nets} nets, {entries} entries, worst rel. err {:.1e} (penalty {:.1e}), {kinks} near kinks",
        check.worst, penalty.worst
    ))
}

fn causality() -> Outcome {
    let (nets, len) = (8, 8);
    let mut worst = 0.0f64;
    for seed in 0..nets {
        let rng = &mut stream_rng(0xca05, seed);
        let (arch, noise_dim) = random_generator(rng);
        let gen = Generator::from_arch(&arch, noise_dim);
        let p = gen.window();
        let params = dense_params(&gen, 0.5, rng);
        let noise = NoiseBlock::draw(len, p, noise_dim, rng).unwrap();
        let base = gen.generate(&params, &noise).unwrap();
        let m = noise.matrix();
        for row in 0..len + p {
            let mut moved = m.clone();
            for c in 0..noise_dim {
                moved.data_mut()[row * noise_dim + c] += 1.5;
            }
            let out = gen
                .generate(&params, &NoiseBlock::from_matrix(moved, p).unwrap())
                .unwrap();
            for t in 0..len {
                if row < t || row > t + p {
                    ensure!(
                        out[t].to_bits() == base[t].to_bits(),
                        "net {seed}: noise row {row} moved output {t} (window {p})"
                    );
                }
            }
        }
        for t in 0..len {
            let rows = m.data()[t * noise_dim..(t + p + 1) * noise_dim].to_vec();
            let window = NoiseBlock::from_matrix(Tensor::new(vec![p + 1, noise_dim], rows).unwrap(), p).unwrap();
            let one = gen.generate(&params, &window).unwrap();
            let err = (one[0] - base[t]).abs();
            worst = worst.max(err);
            ensure!(
                err <= 1e-12 * (1.0 + base[t].abs()),
                "net {seed}: window {t} differs by {err}"
            );
        }
    }
    Ok(format!(
        "{nets} nets, b = {len}, worst sliding-window difference {worst:.1e}"
    ))
}

/// Largest deviation of `counts` from a uniform multinomial, in standard
/// deviations.
fn max_sigma(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let p = 1.0 / counts.len() as f64;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    counts
        .iter()
        .map(|&c| (c as f64 - n as f64 * p).abs() / sd)
        .fold(0.0, f64::max)
}

fn bootstrap_oracles() -> Outcome {
    // Enumeration against slice windows.
    let path = SamplePath::new((0..40).map(|i| i as f64 * 0.5).collect());
    for b in [1, 7, 39] {
        let blocks = make_blocks(&path, b).unwrap();
        let expect: Vec<&[f64]> = path.windows(b).collect();
        ensure!(blocks.len() == 40 - b + 1, "b = {b}: {} blocks", blocks.len());
        ensure!(
            blocks.iter().collect::<Vec<_>>() == expect,
            "b = {b}: blocks differ from windows"
        );
    }
    ensure!(
        make_blocks(&path, 0).is_err() && make_blocks(&path, 40).is_err(),
        "bad block lengths accepted"
    );

    // Single-block batches are uniform over blocks.
    let draws = 100_000;
    let blocks = make_blocks(&SamplePath::new(vec![0.0; 60]), 11).unwrap();
    let mut counts = vec![0; blocks.len()];
    let rng = &mut stream_rng(0xb10c, 0);
    for _ in 0..draws {
        counts[training_batch_starts(&blocks, 1, rng).unwrap()[0]] += 1;
    }
    let block_sigma = max_sigma(&counts);
    ensure!(block_sigma < 5.0, "block frequencies deviate by {block_sigma:.2} sd");
    let starts = training_batch_starts(&blocks, 50, rng).unwrap();
    let mut sorted = starts.clone();
    sorted.sort_unstable();
    sorted.dedup();
    ensure!(sorted.len() == 50, "a full batch repeated a block");

    // Circular resampling: wrap-around layout, and uniform entries at b = 1.
    let ramp: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let r = cbb_resample_with_starts(&ramp, 4, &[8, 2, 9]).unwrap();
    let expect = [8.0, 9.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 9.0, 0.0];
    ensure!(r.values() == expect, "circular blocks {:?}", r.values());
    let values: Vec<f64> = (0..50).map(|i| i as f64).collect();
    let mut counts = vec![0; 50];
    for _ in 0..draws / 50 {
        for &v in cbb_resample(&values, 1, rng).unwrap().iter() {
            counts[v as usize] += 1;
        }
    }
    let entry_sigma = max_sigma(&counts);
    ensure!(entry_sigma < 5.0, "resampled entries deviate by {entry_sigma:.2} sd");

    // Unit blocks give the iid bootstrap of the mean.
    let t = 500;
    let path = normals(t, &mut stream_rng(0xb10c, 1));
    let mean = |p: &SamplePath| Ok(p.iter().sum::<f64>() / p.len() as f64);
    let res = cbb_bootstrap(&path, 1, mean, 2000, &[0.95], &mut stream_rng(0xb10c, 2), false).unwrap();
    let half = res.intervals[0].width() / 2.0;
    let classical = 1.96 / (t as f64).sqrt();
    let rel = (half - classical).abs() / classical;
    ensure!(rel <= 0.15, "half-width {half} vs {classical}");
    Ok(format!(
        "block freq. {block_sigma:.2} sd, entry freq. {entry_sigma:.2} sd, half-width {half:.4} vs {classical:.4}"
    ))
}

fn estimator_fidelity() -> Outcome {
    let mut notes = Vec::new();
    for (i, phi) in [0.5, 0.8, 0.9].into_iter().enumerate() {
        let path = simulate_ar1(&Ar1Spec::new(phi, 100_000), &mut stream_rng(0xe57, i as u64)).unwrap();
        let r1 = acf(&path, 1).unwrap()[1];
        ensure!((r1 - phi).abs() <= 0.01, "phi {phi}: ACF(1) = {r1}");
        let p = pacf(&path, 20).unwrap();
        let worst = p[2..].iter().map(|v| v.abs()).fold(0.0, f64::max);
        ensure!(worst <= 0.02, "phi {phi}: |PACF(j >= 2)| up to {worst}");
        notes.push(format!("phi {phi}: ACF(1) {r1:.4}, max |PACF(j>=2)| {worst:.4}"));
    }
    let (phi, t, reps) = (0.5, 1000, 1000);
    let est: Vec<f64> = (0..reps)
        .map(|r| ls_estimate(&simulate_ar1(&Ar1Spec::new(phi, t), &mut stream_rng(0xe58, r)).unwrap()).unwrap())
        .collect();
    let m = est.iter().sum::<f64>() / reps as f64;
    let sd = (est.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    let theory = ((1.0 - phi * phi) / t as f64).sqrt();
    ensure!(
        (sd - theory).abs() <= 0.15 * theory,
        "sd of LS estimate {sd} vs {theory}"
    );
    notes.push(format!("sd(LS) {sd:.4} vs {theory:.4}"));
    Ok(notes.join("; "))
}

/// Smallest and largest counts outside which a Binomial(n, p) variable
/// falls with probability at most `alpha / 2` on each side.
fn binomial_band(n: usize, p: f64, alpha: f64) -> (usize, usize) {
    let mut log_pmf = vec![n as f64 * (1.0 - p).ln()];
    for k in 0..n {
        let next = log_pmf[k] + ((n - k) as f64 / (k + 1) as f64).ln() + (p / (1.0 - p)).ln();
        log_pmf.push(next);
    }
    let pmf: Vec<f64> = log_pmf.iter().map(|l| l.exp()).collect();
    let mut lo = 0;
    let mut below = 0.0;
    while below + pmf[lo] <= alpha / 2.0 {
        below += pmf[lo];
        lo += 1;
    }
    let mut hi = n;
    let mut above = 0.0;
    while above + pmf[hi] <= alpha / 2.0 {
        above += pmf[hi];
        hi -= 1;
    }
    (lo, hi)
}

fn oracle_coverage() -> Outcome {
    let mut c = ExperimentConfig {
        output_dir: scratch_dir("coverage"),
        ..ExperimentConfig::default()
    };
    c.dgp.phis = vec![0.5];
    c.dgp.len = 1000;
    c.gb.sampler = SamplerKind::FittedDgp;
    c.gb.replications = 200;
    c.gb.b2 = None;
    c.gb.samples = 1000;
    c.coverage.methods = vec![Method::Gb];
    let res = run_coverage_experiment(&c).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for row in &res.rows {
        let n = row.replications;
        ensure!(
            n == 200 && row.excluded == 0,
            "{} replications kept, {} excluded",
            n,
            row.excluded
        );
        let (lo, hi) = binomial_band(n, row.level, 0.01);
        let covered = (row.coverage * n as f64).round() as usize;
        ensure!(
            (lo..=hi).contains(&covered),
            "level {}: {covered}/{n} covered, band {lo}..={hi}",
            row.level
        );
        notes.push(format!("{}: {covered}/{n} in {lo}..={hi}", row.level));
    }
    ensure!(res.rows.len() == c.levels.len(), "{} coverage rows", res.rows.len());
    Ok(notes.join(", "))
}

fn gb_fidelity() -> Outcome {
    let mut c = ExperimentConfig {
        output_dir: scratch_dir("fidelity"),
        ..ExperimentConfig::default()
    };
    c.dgp.phis = vec![0.5];
    c.dgp.len = 1000;
    c.gb.sampler = SamplerKind::Gan;
    c.gb.replications = 1;
    c.gb.b1 = 150;
    c.gb.b2 = Some(1000);
    c.gb.samples = 1000;
    c.gb.gan.total_steps = 2000;
    c.acf.max_lag = 5;
    let res = run_acf_experiment(&c).map_err(|e| e.to_string())?;
    let gb = res[0].gb.as_ref().ok_or("the replication was excluded")?;
    let acf = &gb.acf.mean[1..=5];
    let ls = gb.mean_ls[0];
    let shown = acf.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", ");
    for (j, v) in acf.iter().enumerate() {
        let target = 0.5f64.powi(j as i32 + 1);
        ensure!(
            (v - target).abs() <= 0.15,
            "ACF lag {}: {v:.3} vs {target} (all: {shown}; LS {ls:.3})",
            j + 1
        );
    }
    ensure!((ls - 0.5).abs() <= 0.15, "mean LS {ls:.3} (ACF {shown})");
    Ok(format!("mean ACF lags 1-5 [{shown}], mean LS {ls:.3}"))
}

fn loss_identities() -> Outcome {
    let critic = DiscriminatorArch {
        filters: vec![3, 4],
        dilations: vec![1, 2],
        kernel_size: 2,
        pool_taps: vec![1, 2],
        pool_bins: 4,
        hidden_width: 8,
        leaky_slope: 0.01,
    };
    let disc = Discriminator::from_arch(&critic);
    let rng = &mut stream_rng(0x1055, 0);
    let mut constant = |c: f64| {
        let mut p = init_network(&disc, &InitSpec::default(), rng).unwrap();
        for b in p.blocks_mut() {
            b.value.data_mut().fill(0.0);
        }
        p.get_mut("fc2.bias").unwrap().data_mut()[0] = c;
        p
    };
    let lambda = 20.0;
    let mut seen = 0;
    for (i, c) in [-3.0, 0.0, 0.7, 12.5].into_iter().enumerate() {
        let params = constant(c);
        let rng = &mut stream_rng(0x1055, 1 + i as u64);
        let (real, fake) = (batch(5, 9, rng), batch(5, 9, rng));
        let loss = wgan_discriminator_loss(&disc, &params.leaves(), &real, &fake, lambda, rng).unwrap();
        let total = eval_with(&loss.total, &params.bindings());
        ensure!(total == lambda, "constant critic {c}: loss {total}");
        seen += 1;
    }

    let len = 7;
    let w: Vec<f64> = (0..len).map(|i| ((i * i) as f64 + 0.5).cos()).collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let w = Tensor::new(vec![len, 1], w.iter().map(|v| v / norm).collect()).unwrap();
    let rng = &mut stream_rng(0x1055, 9);
    let (real, fake) = (batch(6, len, rng), batch(6, len, rng));
    let loss = critic_loss(|x| Ok(x.matmul(&Expr::constant(w.clone()))?), &real, &fake, lambda, rng).unwrap();
    let pen = eval_with(&loss.penalty, &Bindings::new());
    ensure!(pen < 1e-12, "unit-gradient critic penalty {pen}");

    let gen = Generator::from_arch(
        &GeneratorArch {
            filters: vec![4, 1],
            dilations: vec![1, 2],
            kernel_size: 2,
        },
        3,
    );
    let gp = dense_params(&gen, 0.5, rng);
    let half = constant(0.0);
    let noise = noise_batch(5, 9, gen.window(), 3, rng);
    let real = batch(5, 9, rng);
    let l = basic_gan_losses(
        &disc,
        &half.leaves_with_prefix("d/"),
        &gen,
        &gp.leaves_with_prefix("g/"),
        &real,
        &noise,
    )
    .unwrap();
    let mut b = Bindings::new();
    half.bind_with_prefix("d/", &mut b);
    gp.bind_with_prefix("g/", &mut b);
    let v = evaluate(&[l.discriminator, l.generator], &b).unwrap();
    let (ld, lg) = (v[0].item(), v[1].item());
    ensure!((ld + 2.0 * 2f64.ln()).abs() <= 1e-15, "discriminator objective {ld}");
    ensure!((lg - 0.5f64.ln()).abs() <= 1e-15, "generator objective {lg}");
    Ok(format!(
        "{seen} constant critics give {lambda}, penalty {pen:.1e}, basic losses {ld:.6} / {lg:.6}"
    ))
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        files.insert(
            e.file_name().to_string_lossy().into_owned(),
            std::fs::read(e.path()).unwrap(),
        );
    }
    files
}

fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_genboot");
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/smoke.toml");
    let root = scratch_dir("cli");
    let runs = [("serial", 1), ("parallel", 4), ("rerun", 1)];
    let commands = [
        "simulate",
        "train",
        "sample",
        "gb",
        "cbb",
        "acf-experiment",
        "coverage-experiment",
    ];
    let mut checked = 0;
    for cmd in commands {
        let mut trees = Vec::new();
        for (label, workers) in runs {
            let out = root.join(label).join(cmd);
            let mut args = vec![
                cmd.to_string(),
                "--config".into(),
                config.into(),
                "--workers".into(),
                workers.to_string(),
                "--out".into(),
                out.display().to_string(),
            ];
            if cmd == "sample" {
                let model = root.join(label).join("train/model.ckpt");
                args.extend(["--model".into(), model.display().to_string()]);
            }
            let status = Command::new(bin).args(&args).output().map_err(|e| e.to_string())?;
            ensure!(
                status.status.success(),
                "{cmd} ({label}) failed: {}",
                String::from_utf8_lossy(&status.stderr)
            );
            trees.push(read_tree(&out));
        }
        let names: Vec<&String> = trees[0].keys().collect();
        ensure!(
            names.iter().any(|n| n.ends_with(".csv")),
            "{cmd} wrote no CSV: {names:?}"
        );
        for (i, t) in trees.iter().enumerate().skip(1) {
            ensure!(t == &trees[0], "{cmd}: {} output differs from serial", runs[i].0);
        }
        checked += trees[0].len();
    }
    let _ = std::fs::remove_dir_all(&root);
    Ok(format!(
        "{} subcommands, {checked} files identical across 3 runs",
        commands.len()
    ))
}
