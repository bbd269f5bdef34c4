//! AR(1) simulation, sample correlograms and the least-squares AR(1)
//! estimator.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bootstrap::quantile;
use crate::error::{Error, Result};
use crate::path::SamplePath;
use crate::rng::GbRng;

/// Zero-mean Gaussian AR(1): `y_t = phi * y_{t-1} + sigma * e_t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ar1Spec {
    pub phi: f64,
    pub sigma: f64,
    pub len: usize,
}

impl Ar1Spec {
    pub fn new(phi: f64, len: usize) -> Self {
        Ar1Spec { phi, sigma: 1.0, len }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phi.is_nan() || self.phi.abs() >= 1.0 {
            return Err(Error::NonStationary(self.phi));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("innovation sd must be >= 0, got {}", self.sigma)));
        }
        if self.len == 0 {
            return Err(Error::Config("AR(1) path length must be >= 1".into()));
        }
        Ok(())
    }

    /// Variance of the stationary distribution.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (1.0 - self.phi * self.phi)
    }
}

/// Stationary AR(1) path: the first value is drawn from the stationary law,
/// so no burn-in is needed.
pub fn simulate_ar1(spec: &Ar1Spec, rng: &mut GbRng) -> Result<SamplePath> {
    spec.validate()?;
    let z: f64 = rng.sample(StandardNormal);
    simulate_ar1_from(spec, z * spec.stationary_variance().sqrt(), rng)
}

/// AR(1) path started at `y0`.
pub fn simulate_ar1_from(spec: &Ar1Spec, y0: f64, rng: &mut GbRng) -> Result<SamplePath> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.len);
    let mut y = y0;
    out.push(y);
    for _ in 1..spec.len {
        let e: f64 = rng.sample(StandardNormal);
        y = spec.phi * y + spec.sigma * e;
        out.push(y);
    }
    Ok(SamplePath::new(out))
}

fn check_lag(len: usize, max_lag: usize) -> Result<()> {
    if max_lag >= len {
        return Err(Error::TooShort {
            len,
            reason: format!("max lag {max_lag} needs a longer path"),
        });
    }
    Ok(())
}

/// Sample autocorrelations at lags `0..=max_lag`, using the divisor-`T`
/// autocovariance so the sequence is non-negative definite.
pub fn acf(path: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    check_lag(path.len(), max_lag)?;
    let n = path.len() as f64;
    let mean = path.iter().sum::<f64>() / n;
    let c: Vec<f64> = path.iter().map(|y| y - mean).collect();
    let c0: f64 = c.iter().map(|x| x * x).sum();
    if c0 == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((0..=max_lag)
        .map(|j| {
            if j == 0 {
                1.0
            } else {
                c[j..].iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / c0
            }
        })
        .collect())
}

/// Partial autocorrelations from autocorrelations `r[0..=k]` by the
/// Durbin-Levinson recursion. Index 0 holds 1.
pub fn pacf_from_acf(r: &[f64]) -> Vec<f64> {
    let k = r.len().saturating_sub(1);
    let mut out = vec![1.0];
    let mut phi: Vec<f64> = Vec::with_capacity(k);
    let mut v = 1.0;
    for n in 1..=k {
        let num = r[n] - (1..n).map(|j| phi[j - 1] * r[n - j]).sum::<f64>();
        let a = if v > 0.0 { num / v } else { 0.0 };
        let prev = phi.clone();
        for j in 1..n {
            phi[j - 1] = prev[j - 1] - a * prev[n - j - 1];
        }
        phi.push(a);
        v *= 1.0 - a * a;
        out.push(a);
    }
    out
}

/// Sample partial autocorrelations at lags `0..=max_lag`; index 0 holds 1.
pub fn pacf(path: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    Ok(pacf_from_acf(&acf(path, max_lag)?))
}

/// Least-squares AR(1) coefficient without intercept.
pub fn ls_estimate(path: &[f64]) -> Result<f64> {
    if path.len() < 2 {
        return Err(Error::TooShort {
            len: path.len(),
            reason: "least squares needs at least 2 observations".into(),
        });
    }
    let (mut num, mut den) = (0.0, 0.0);
    for w in path.windows(2) {
        num += w[1] * w[0];
        den += w[0] * w[0];
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}

/// Least-squares slope of `y_t` on `(1, y_{t-1})`.
pub fn ls_estimate_with_intercept(path: &[f64]) -> Result<f64> {
    if path.len() < 3 {
        return Err(Error::TooShort {
            len: path.len(),
            reason: "least squares with intercept needs at least 3 observations".into(),
        });
    }
    let x = &path[..path.len() - 1];
    let y = &path[1..];
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        num += (a - mx) * (b - my);
        den += (a - mx) * (a - mx);
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}

/// Closed-form AR(1) reference curves.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoreticalRefs {
    /// `phi^j` for `j = 0..=max_lag`.
    pub acf: Vec<f64>,
    /// `(1, phi, 0, 0, ...)`.
    pub pacf: Vec<f64>,
    /// Large-sample sd of the least-squares estimator, `sqrt((1 - phi^2) / T)`.
    pub ls_sd: f64,
}

pub fn theoretical_refs(phi: f64, len: usize, max_lag: usize) -> Result<TheoreticalRefs> {
    if phi.is_nan() || phi.abs() >= 1.0 {
        return Err(Error::NonStationary(phi));
    }
    let acf = (0..=max_lag).map(|j| phi.powi(j as i32)).collect();
    let pacf = (0..=max_lag)
        .map(|j| match j {
            0 => 1.0,
            1 => phi,
            _ => 0.0,
        })
        .collect();
    Ok(TheoreticalRefs {
        acf,
        pacf,
        ls_sd: ((1.0 - phi * phi) / len as f64).sqrt(),
    })
}

/// Per-lag mean and interquartile range of a set of correlograms.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelogramStats {
    pub mean: Vec<f64>,
    pub q25: Vec<f64>,
    pub q75: Vec<f64>,
}

impl CorrelogramStats {
    /// Summarises correlograms that all cover lags `0..=max_lag`.
    pub fn from_curves(curves: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = curves.first() else {
            return Err(Error::Config("no correlograms to summarise".into()));
        };
        let lags = first.len();
        if curves.iter().any(|c| c.len() != lags) {
            return Err(Error::Config("correlograms have different lengths".into()));
        }
        let mut stats = CorrelogramStats {
            mean: Vec::with_capacity(lags),
            q25: Vec::with_capacity(lags),
            q75: Vec::with_capacity(lags),
        };
        for j in 0..lags {
            let mut col: Vec<f64> = curves.iter().map(|c| c[j]).collect();
            col.sort_by(f64::total_cmp);
            stats.mean.push(col.iter().sum::<f64>() / col.len() as f64);
            stats.q25.push(quantile(&col, 0.25));
            stats.q75.push(quantile(&col, 0.75));
        }
        Ok(stats)
    }

    pub fn max_lag(&self) -> usize {
        self.mean.len().saturating_sub(1)
    }

    /// CSV with columns `lag,mean,q25,q75`.
    pub fn write_csv(&self, w: &mut impl Write, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "lag,mean,q25,q75")?;
        for j in 0..self.mean.len() {
            writeln!(w, "{j},{},{},{}", self.mean[j], self.q25[j], self.q75[j])?;
        }
        Ok(())
    }
}
