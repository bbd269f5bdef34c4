//! Moving-block training batches, sampling from a trained generator,
//! percentile bootstrap summaries and the circular block bootstrap.

use std::io::Write;

use genboot_tensor::Tensor;
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gan::{BatchSupplier, Generator};
use crate::nn::NetworkParams;
use crate::path::SamplePath;
use crate::rng::{fill_standard_normal, fork_seed, stream_rng, GbRng};

/// All overlapping windows of length `block_len` of one path.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSet {
    source: SamplePath,
    block_len: usize,
}

pub fn make_blocks(path: &SamplePath, block_len: usize) -> Result<BlockSet> {
    if block_len == 0 || block_len >= path.len() {
        return Err(Error::Config(format!(
            "block length {block_len} must be in 1..{} for a path of length {}",
            path.len(),
            path.len()
        )));
    }
    Ok(BlockSet {
        source: path.clone(),
        block_len,
    })
}

impl BlockSet {
    pub fn source(&self) -> &SamplePath {
        &self.source
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Number of blocks, `T - block_len + 1`.
    pub fn len(&self) -> usize {
        self.source.len() - self.block_len + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Block starting at position `start`.
    pub fn block(&self, start: usize) -> &[f64] {
        &self.source[start..start + self.block_len]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(|j| self.block(j))
    }
}

/// Start positions of `n` distinct blocks drawn uniformly without
/// replacement.
pub fn training_batch_starts(blocks: &BlockSet, n: usize, rng: &mut GbRng) -> Result<Vec<usize>> {
    if n == 0 || n > blocks.len() {
        return Err(Error::Config(format!(
            "batch size {n} must be in 1..={} (number of blocks)",
            blocks.len()
        )));
    }
    Ok(index::sample(rng, blocks.len(), n).into_vec())
}

pub fn training_batch<'a>(blocks: &'a BlockSet, n: usize, rng: &mut GbRng) -> Result<Vec<&'a [f64]>> {
    Ok(training_batch_starts(blocks, n, rng)?
        .into_iter()
        .map(|s| blocks.block(s))
        .collect())
}

impl BatchSupplier for BlockSet {
    fn block_len(&self) -> usize {
        self.block_len
    }

    fn next_batch(&mut self, n: usize, rng: &mut GbRng) -> Result<Tensor> {
        let data = training_batch(self, n, rng)?.concat();
        Ok(Tensor::new(vec![n, self.block_len], data)?)
    }
}

/// Paths generated per graph evaluation when sampling.
const SAMPLE_CHUNK: usize = 16;

/// `m` generated paths of length `len`. Path `i` draws its noise from its
/// own stream, so the result is the same serially and in parallel.
pub fn gb_sample(
    generator: &Generator,
    gen_params: &NetworkParams,
    len: usize,
    m: usize,
    rng: &mut GbRng,
    parallel: bool,
) -> Result<Vec<SamplePath>> {
    if len == 0 {
        return Err(Error::Config("sample length must be >= 1".into()));
    }
    let base = fork_seed(rng);
    let rows = len + generator.window();
    let per_path = rows * generator.noise_dim();
    let chunk = |c: usize| -> Result<Vec<SamplePath>> {
        let lo = c * SAMPLE_CHUNK;
        let hi = (lo + SAMPLE_CHUNK).min(m);
        let mut noise = vec![0.0; (hi - lo) * per_path];
        for (i, block) in (lo..hi).zip(noise.chunks_mut(per_path)) {
            fill_standard_normal(&mut stream_rng(base, i as u64), block);
        }
        let noise = Tensor::new(vec![hi - lo, rows, generator.noise_dim()], noise)?;
        let out = generator.generate_batch(gen_params, &noise)?;
        Ok(out.data().chunks(len).map(|p| SamplePath::new(p.to_vec())).collect())
    };
    let chunks = m.div_ceil(SAMPLE_CHUNK);
    let parts: Vec<Vec<SamplePath>> = if parallel {
        (0..chunks).into_par_iter().map(chunk).collect::<Result<_>>()?
    } else {
        (0..chunks).map(chunk).collect::<Result<_>>()?
    };
    Ok(parts.into_iter().flatten().collect())
}

/// Bootstrap settings for one observed path of length `T`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    /// Training block length.
    pub b1: usize,
    /// Length of generated paths; `None` means `T` (complete sampling).
    pub b2: Option<usize>,
    /// Number of generated paths.
    pub m: usize,
    /// Confidence levels `1 - alpha`.
    pub levels: Vec<f64>,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            b1: 150,
            b2: None,
            m: 10_000,
            levels: vec![0.99, 0.95, 0.90, 0.80],
        }
    }
}

impl BootstrapConfig {
    pub fn sample_len(&self, path_len: usize) -> usize {
        self.b2.unwrap_or(path_len)
    }

    pub fn validate(&self, path_len: usize) -> Result<()> {
        if self.b1 == 0 || self.b1 >= path_len {
            return Err(Error::Config(format!("b1 = {} must be in 1..{path_len}", self.b1)));
        }
        if self.b2 == Some(0) {
            return Err(Error::Config("b2 must be >= 1".into()));
        }
        if self.m < 2 {
            return Err(Error::Config(format!("m = {} must be >= 2", self.m)));
        }
        check_levels(&self.levels)
    }
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(Error::Config(format!("confidence level {l} is not in (0, 1)")));
    }
    Ok(())
}

/// Empirical quantile of sorted data, interpolating linearly between order
/// statistics placed at `(i - 1) / (m - 1)`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    /// Confidence level `1 - alpha`.
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Bootstrap estimates with their mean, `1/m` variance and percentile
/// intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapResult {
    pub estimates: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub intervals: Vec<Interval>,
}

pub fn gb_statistics(estimates: Vec<f64>, levels: &[f64]) -> Result<BootstrapResult> {
    if estimates.is_empty() {
        return Err(Error::Config("no bootstrap estimates".into()));
    }
    if let Some(i) = estimates.iter().position(|x| !x.is_finite()) {
        return Err(Error::Config(format!("bootstrap estimate {i} is not finite")));
    }
    check_levels(levels)?;
    let m = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / m;
    let variance = estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m;
    let mut sorted = estimates.clone();
    sorted.sort_by(f64::total_cmp);
    let intervals = levels
        .iter()
        .map(|&level| {
            let alpha = 1.0 - level;
            Interval {
                level,
                lower: quantile(&sorted, alpha / 2.0),
                upper: quantile(&sorted, 1.0 - alpha / 2.0),
            }
        })
        .collect();
    Ok(BootstrapResult {
        estimates,
        mean,
        variance,
        intervals,
    })
}

impl BootstrapResult {
    pub fn interval(&self, level: f64) -> Option<&Interval> {
        self.intervals.iter().find(|i| i.level == level)
    }

    /// CSV with columns `sample_index,estimate`.
    pub fn write_estimates_csv(&self, w: &mut impl Write, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "sample_index,estimate")?;
        for (i, e) in self.estimates.iter().enumerate() {
            writeln!(w, "{i},{e}")?;
        }
        Ok(())
    }

    /// CSV with columns `level,lower,upper,mean,variance`.
    pub fn write_summary_csv(&self, w: &mut impl Write, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "level,lower,upper,mean,variance")?;
        for i in &self.intervals {
            writeln!(w, "{},{},{},{},{}", i.level, i.lower, i.upper, self.mean, self.variance)?;
        }
        Ok(())
    }
}

fn check_cbb(path: &[f64], block_len: usize) -> Result<()> {
    if path.is_empty() {
        return Err(Error::Config("cannot resample an empty path".into()));
    }
    if block_len == 0 || block_len > path.len() {
        return Err(Error::Config(format!(
            "CBB block length {block_len} must be in 1..={}",
            path.len()
        )));
    }
    Ok(())
}

/// Circular block resample built from the given block start positions.
pub fn cbb_resample_with_starts(path: &[f64], block_len: usize, starts: &[usize]) -> Result<SamplePath> {
    check_cbb(path, block_len)?;
    let n = path.len();
    if starts.len() != n.div_ceil(block_len) || starts.iter().any(|&s| s >= n) {
        return Err(Error::Config(format!(
            "need {} block starts in 0..{n}",
            n.div_ceil(block_len)
        )));
    }
    let out = starts
        .iter()
        .flat_map(|&s| (0..block_len).map(move |k| path[(s + k) % n]))
        .take(n)
        .collect();
    Ok(SamplePath::new(out))
}

/// Circular block bootstrap resample of the same length as `path`.
pub fn cbb_resample(path: &[f64], block_len: usize, rng: &mut GbRng) -> Result<SamplePath> {
    check_cbb(path, block_len)?;
    let n = path.len();
    let starts: Vec<usize> = (0..n.div_ceil(block_len)).map(|_| rng.random_range(0..n)).collect();
    cbb_resample_with_starts(path, block_len, &starts)
}

/// `m` circular block resamples summarised by [`gb_statistics`]. Resample
/// `i` uses its own stream, so serial and parallel runs agree.
pub fn cbb_bootstrap<S>(
    path: &[f64],
    block_len: usize,
    statistic: S,
    m: usize,
    levels: &[f64],
    rng: &mut GbRng,
    parallel: bool,
) -> Result<BootstrapResult>
where
    S: Fn(&SamplePath) -> Result<f64> + Sync,
{
    check_cbb(path, block_len)?;
    let base = fork_seed(rng);
    let one = |i: usize| -> Result<f64> {
        let r = cbb_resample(path, block_len, &mut stream_rng(base, i as u64))?;
        statistic(&r).map_err(|e| Error::Statistic {
            index: i,
            source: Box::new(e),
        })
    };
    let estimates: Vec<f64> = if parallel {
        (0..m).into_par_iter().map(one).collect::<Result<_>>()?
    } else {
        (0..m).map(one).collect::<Result<_>>()?
    };
    gb_statistics(estimates, levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerate_blocks() {
        let p = SamplePath::new(vec![1.0, 2.0, 3.0, 4.0]);
        let b = make_blocks(&p, 2).unwrap();
        let all: Vec<&[f64]> = b.iter().collect();
        assert_eq!(all, vec![&[1.0, 2.0][..], &[2.0, 3.0], &[3.0, 4.0]]);
        assert_eq!(make_blocks(&p, 3).unwrap().len(), 2);
        assert!(make_blocks(&p, 4).is_err());
    }

    #[test]
    fn full_batch_is_a_permutation() {
        let p = SamplePath::new((0..10).map(f64::from).collect());
        let b = make_blocks(&p, 3).unwrap();
        let mut s = training_batch_starts(&b, b.len(), &mut stream_rng(1, 0)).unwrap();
        s.sort();
        assert_eq!(s, (0..8).collect::<Vec<_>>());
        assert!(training_batch_starts(&b, 9, &mut stream_rng(1, 0)).is_err());
    }

    #[test]
    fn statistics_by_hand() {
        let r = gb_statistics(vec![0.0, 1.0], &[0.5]).unwrap();
        assert_eq!((r.mean, r.variance), (0.5, 0.25));
        let c = gb_statistics(vec![1.0; 4], &[0.9, 0.5]).unwrap();
        assert_eq!(c.variance, 0.0);
        assert!(c.intervals.iter().all(|i| i.lower == 1.0 && i.upper == 1.0));
        assert!(gb_statistics(vec![], &[0.9]).is_err());
    }

    #[test]
    fn quantile_rule() {
        let s = [10.0, 20.0, 30.0, 40.0, 50.0];
        assert_eq!(quantile(&s, 0.0), 10.0);
        assert_eq!(quantile(&s, 0.5), 30.0);
        assert_eq!(quantile(&s, 1.0), 50.0);
        assert_eq!(quantile(&s, 0.125), 15.0);
    }

    #[test]
    fn cbb_degenerate_cases() {
        let p = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(cbb_resample_with_starts(&p, 5, &[0]).unwrap().values(), &p);
        assert_eq!(
            cbb_resample_with_starts(&p, 2, &[4, 1, 3]).unwrap().values(),
            &[5.0, 1.0, 2.0, 3.0, 4.0]
        );
        let c = cbb_resample(&[7.0; 9], 4, &mut stream_rng(0, 0)).unwrap();
        assert_eq!(c.values(), &[7.0; 9]);
        assert!(cbb_resample(&p, 6, &mut stream_rng(0, 0)).is_err());
    }

    #[test]
    fn statistic_errors_carry_index() {
        let p = [1.0, 2.0, 3.0];
        let err = cbb_bootstrap(
            &p,
            1,
            |_| Err(Error::ZeroVariance),
            3,
            &[0.9],
            &mut stream_rng(0, 0),
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Statistic { index: 0, .. }));
    }
}
