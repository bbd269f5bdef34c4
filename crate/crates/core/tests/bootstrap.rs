use std::collections::HashSet;

use genboot_core::bootstrap::*;
use genboot_core::gan::{GanConfig, Generator, GeneratorArch};
use genboot_core::nn::{init_network, InitSpec};
use genboot_core::rng::stream_rng;
use genboot_core::{Error, SamplePath};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

fn five_sigma(count: f64, expected: f64, sd: f64) -> bool {
    (count - expected).abs() <= 5.0 * sd
}

#[test]
fn blocks_reconstruct_the_path() {
    let values: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
    let path = SamplePath::new(values.clone());
    for b1 in [1, 5, 19] {
        let blocks = make_blocks(&path, b1).unwrap();
        assert_eq!(blocks.len(), 20 - b1 + 1);
        let mut rebuilt: Vec<f64> = blocks.iter().map(|b| b[0]).collect();
        rebuilt.extend_from_slice(&blocks.block(blocks.len() - 1)[1..]);
        assert_eq!(rebuilt, values);
    }
    assert_eq!(make_blocks(&path, 19).unwrap().len(), 2);
    assert!(make_blocks(&path, 20).is_err());
}

#[test]
fn training_batches_are_distinct_and_uniform() {
    let path = SamplePath::new((0..12).map(f64::from).collect());
    let blocks = make_blocks(&path, 3).unwrap();
    let n_blocks = blocks.len();
    let mut rng = stream_rng(21, 0);

    let all = training_batch_starts(&blocks, n_blocks, &mut rng).unwrap();
    let mut sorted = all.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..n_blocks).collect::<Vec<_>>());

    for _ in 0..200 {
        let starts = training_batch_starts(&blocks, 6, &mut rng).unwrap();
        assert_eq!(starts.iter().collect::<HashSet<_>>().len(), 6);
    }
    assert!(training_batch(&blocks, n_blocks + 1, &mut rng).is_err());

    let draws = 100_000;
    let mut counts = vec![0usize; n_blocks];
    for _ in 0..draws {
        counts[training_batch_starts(&blocks, 1, &mut rng).unwrap()[0]] += 1;
    }
    let p = 1.0 / n_blocks as f64;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    for (j, &c) in counts.iter().enumerate() {
        assert!(five_sigma(c as f64, draws as f64 * p, sd), "block {j}: {c}");
    }
}

#[test]
fn training_batch_is_deterministic() {
    let path = SamplePath::new((0..50).map(f64::from).collect());
    let blocks = make_blocks(&path, 10).unwrap();
    let a = training_batch_starts(&blocks, 8, &mut stream_rng(3, 3)).unwrap();
    let b = training_batch_starts(&blocks, 8, &mut stream_rng(3, 3)).unwrap();
    assert_eq!(a, b);
}

fn tiny_generator() -> (Generator, genboot_core::nn::NetworkParams) {
    let config = GanConfig {
        generator: GeneratorArch {
            filters: vec![4, 1],
            dilations: vec![1, 2],
            kernel_size: 2,
        },
        noise_dim: 3,
        ..GanConfig::default()
    };
    let generator = Generator::new(&config);
    let params = init_network(&generator, &InitSpec { sd: 0.5 }, &mut stream_rng(5, 0)).unwrap();
    (generator, params)
}

#[test]
fn generated_sample_shapes() {
    let (generator, params) = tiny_generator();
    let mut rng = stream_rng(22, 0);
    assert!(gb_sample(&generator, &params, 16, 0, &mut rng, false)
        .unwrap()
        .is_empty());
    // sampling length need not equal the training block length
    let paths = gb_sample(&generator, &params, 64, 37, &mut rng, false).unwrap();
    assert_eq!(paths.len(), 37);
    assert!(paths.iter().all(|p| p.len() == 64));
    assert_ne!(paths[0], paths[1]);
}

#[test]
fn generated_samples_are_reproducible_serial_or_parallel() {
    let (generator, params) = tiny_generator();
    let a = gb_sample(&generator, &params, 30, 40, &mut stream_rng(23, 0), false).unwrap();
    let b = gb_sample(&generator, &params, 30, 40, &mut stream_rng(23, 0), false).unwrap();
    let c = gb_sample(&generator, &params, 30, 40, &mut stream_rng(23, 0), true).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn statistics_examples() {
    let r = gb_statistics(vec![1.0; 4], &[0.99, 0.5]).unwrap();
    assert_eq!(r.variance, 0.0);
    assert!(r.intervals.iter().all(|i| i.lower == 1.0 && i.upper == 1.0));

    let r = gb_statistics(vec![0.0, 1.0], &[0.5]).unwrap();
    assert_eq!(r.mean, 0.5);
    assert_eq!(r.variance, 0.25);

    assert!(gb_statistics(vec![], &[0.9]).is_err());
}

/// Smallest order statistic with at least a fraction `p` of the data at or
/// below it, found by counting.
fn counting_quantile(data: &[f64], p: f64) -> f64 {
    let n = data.len() as f64;
    let mut candidates = data.to_vec();
    candidates.sort_by(f64::total_cmp);
    *candidates
        .iter()
        .find(|&&c| data.iter().filter(|&&x| x <= c).count() as f64 >= p * n)
        .unwrap()
}

#[test]
fn percentile_intervals_against_counting() {
    let mut est: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
    est.shuffle(&mut stream_rng(24, 0));
    let r = gb_statistics(est.clone(), &[0.95, 0.90]).unwrap();
    for (level, i) in [(0.95, r.interval(0.95).unwrap()), (0.90, r.interval(0.90).unwrap())] {
        let alpha = 1.0 - level;
        let lo = counting_quantile(&est, alpha / 2.0);
        let hi = counting_quantile(&est, 1.0 - alpha / 2.0);
        // interpolated quantiles sit within one grid step of the counted ones
        assert!((i.lower - lo).abs() <= 0.01 + 1e-12, "{level}: {} vs {lo}", i.lower);
        assert!((i.upper - hi).abs() <= 0.01 + 1e-12, "{level}: {} vs {hi}", i.upper);
    }
    let i95 = r.interval(0.95).unwrap();
    assert!((i95.lower - 0.02475).abs() < 1e-12 && (i95.upper - 0.96525).abs() < 1e-12);
}

#[test]
fn summary_csv_layout() {
    let r = gb_statistics(vec![0.0, 1.0], &[0.5]).unwrap();
    let mut out = Vec::new();
    r.write_summary_csv(&mut out, &["config x".into()]).unwrap();
    assert_eq!(
        String::from_utf8(out).unwrap(),
        "# config x\nlevel,lower,upper,mean,variance\n0.5,0.25,0.75,0.5,0.25\n"
    );
    let mut out = Vec::new();
    r.write_estimates_csv(&mut out, &[]).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "sample_index,estimate\n0,0\n1,1\n");
}

#[test]
fn cbb_examples() {
    let mut rng = stream_rng(25, 0);
    let c = cbb_resample(&[2.5; 9], 4, &mut rng).unwrap();
    assert_eq!(c.values(), &[2.5; 9]);
    let path = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert_eq!(cbb_resample_with_starts(&path, 5, &[0]).unwrap().values(), &path);
    assert_eq!(
        cbb_resample_with_starts(&path, 2, &[4, 1, 3]).unwrap().values(),
        &[5.0, 1.0, 2.0, 3.0, 4.0]
    );
    assert!(cbb_resample(&path, 6, &mut rng).is_err());
}

#[test]
fn cbb_positions_are_uniform() {
    let path: Vec<f64> = (0..8).map(f64::from).collect();
    let draws = 100_000;
    let mut rng = stream_rng(26, 0);
    let mut totals = [0f64; 8];
    let mut squares = [0f64; 8];
    for _ in 0..draws {
        let r = cbb_resample(&path, 3, &mut rng).unwrap();
        let mut counts = [0f64; 8];
        for v in r.values() {
            counts[*v as usize] += 1.0;
        }
        for k in 0..8 {
            totals[k] += counts[k];
            squares[k] += counts[k] * counts[k];
        }
    }
    let n = draws as f64;
    for k in 0..8 {
        // per-resample counts are iid across resamples; use their variance
        let mean = totals[k] / n;
        let var = squares[k] / n - mean * mean;
        let sd = (n * var).sqrt();
        assert!(five_sigma(totals[k], n, sd), "position {k}: {} vs {n}", totals[k]);
    }
}

#[test]
fn cbb_unit_blocks_match_iid_bootstrap() {
    let mut rng = stream_rng(27, 0);
    let path: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mean = |p: &SamplePath| Ok(p.values().iter().sum::<f64>() / p.len() as f64);
    let r = cbb_bootstrap(&path, 1, mean, 2000, &[0.95], &mut rng, false).unwrap();
    let half = r.interval(0.95).unwrap().width() / 2.0;
    let oracle = 1.96 / 500f64.sqrt();
    assert!((half / oracle - 1.0).abs() <= 0.15, "half-width {half} vs {oracle}");
}

#[test]
fn cbb_bootstrap_constant_statistic_and_replay() {
    let path: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).cos()).collect();
    let seven = |_: &SamplePath| Ok(7.0);
    let r = cbb_bootstrap(&path, 4, seven, 50, &[0.9, 0.5], &mut stream_rng(28, 0), false).unwrap();
    assert!(r.intervals.iter().all(|i| i.lower == 7.0 && i.upper == 7.0));

    let stat = |p: &SamplePath| genboot_core::timeseries::ls_estimate(p.values());
    let a = cbb_bootstrap(&path, 5, stat, 300, &[0.9], &mut stream_rng(28, 1), false).unwrap();
    let b = cbb_bootstrap(&path, 5, stat, 300, &[0.9], &mut stream_rng(28, 1), true).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cbb_statistic_error_names_resample() {
    let fail = |_: &SamplePath| Err(Error::ZeroVariance);
    let err = cbb_bootstrap(&[1.0, 2.0, 3.0], 1, fail, 5, &[0.9], &mut stream_rng(0, 0), false).unwrap_err();
    assert!(matches!(err, Error::Statistic { index: 0, .. }));
}

#[test]
fn bootstrap_config_rules() {
    let c = BootstrapConfig::default();
    assert_eq!((c.b1, c.b2, c.m), (150, None, 10_000));
    assert_eq!(c.levels, vec![0.99, 0.95, 0.90, 0.80]);
    assert_eq!(c.sample_len(1000), 1000);
    assert!(c.validate(1000).is_ok());
    assert!(c.validate(150).is_err());
    assert!(BootstrapConfig { m: 1, ..c.clone() }.validate(1000).is_err());
    assert!(BootstrapConfig {
        b2: Some(0),
        ..c.clone()
    }
    .validate(1000)
    .is_err());
    assert!(BootstrapConfig { levels: vec![1.0], ..c }.validate(1000).is_err());
}

proptest! {
    #[test]
    fn statistics_ignore_order(values in prop::collection::vec(-5.0f64..5.0, 2..50), seed in 0u64..100) {
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut stream_rng(seed, 0));
        let a = gb_statistics(values, &[0.9, 0.5]).unwrap();
        let b = gb_statistics(shuffled, &[0.9, 0.5]).unwrap();
        prop_assert_eq!(&a.intervals, &b.intervals);
        prop_assert!((a.mean - b.mean).abs() <= 1e-12);
        prop_assert!((a.variance - b.variance).abs() <= 1e-12);
    }

    #[test]
    fn statistics_are_affine_equivariant(
        values in prop::collection::vec(-5.0f64..5.0, 2..50),
        a in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
        c in -10.0f64..10.0,
    ) {
        let mapped: Vec<f64> = values.iter().map(|x| a * x + c).collect();
        let r = gb_statistics(values, &[0.95, 0.8]).unwrap();
        let s = gb_statistics(mapped, &[0.95, 0.8]).unwrap();
        let tol = 1e-9;
        prop_assert!((s.mean - (a * r.mean + c)).abs() <= tol);
        prop_assert!((s.variance - a * a * r.variance).abs() <= tol);
        for (i, j) in r.intervals.iter().zip(&s.intervals) {
            let (lo, hi) = if a > 0.0 { (i.lower, i.upper) } else { (i.upper, i.lower) };
            prop_assert!((j.lower - (a * lo + c)).abs() <= tol);
            prop_assert!((j.upper - (a * hi + c)).abs() <= tol);
            prop_assert!(j.lower <= j.upper);
        }
    }

    #[test]
    fn cbb_keeps_length_and_values(len in 1usize..40, b in 1usize..40, seed in 0u64..1000) {
        let b = b.min(len);
        let path: Vec<f64> = (0..len).map(|i| i as f64 * 1.5).collect();
        let r = cbb_resample(&path, b, &mut stream_rng(seed, 0)).unwrap();
        prop_assert_eq!(r.len(), len);
        prop_assert!(r.values().iter().all(|v| path.contains(v)));
    }
}
