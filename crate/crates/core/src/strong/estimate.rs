use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Error, Result};

/// Number of batches for batch-means standard errors.
pub const BATCHES: usize = 32;
/// Estimates below this many standard errors are treated as noise.
pub const NOISE_FLOOR: f64 = 3.0;

/// Sample mean with a batch-means standard error.
///
/// Sample `i` goes to batch `i mod B`, `B = min(32, M)`. Batches may differ
/// in size by one; the standard error uses the size-weighted estimator
/// `SE^2 = B / (B - 1) * sum_b n_b^2 (m_b - m)^2 / M^2`, which reduces to the
/// usual `sd(batch means) / sqrt(B)` for equal sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub samples: usize,
    pub batches: usize,
}

pub fn batch_mean(samples: &[f64]) -> Result<MeanEstimate> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(invalid("samples", "samples must be finite"));
    }
    let m = samples.len();
    let b = BATCHES.min(m);
    let mut sums = vec![0.0; b];
    let mut counts = vec![0usize; b];
    for (i, v) in samples.iter().enumerate() {
        sums[i % b] += v;
        counts[i % b] += 1;
    }
    let mean = sums.iter().sum::<f64>() / m as f64;
    let se = if b < 2 {
        0.0
    } else {
        let spread: f64 = sums
            .iter()
            .zip(&counts)
            .map(|(s, &n)| {
                let d = s / n as f64 - mean;
                (n * n) as f64 * d * d
            })
            .sum();
        (spread / (m * m) as f64 * b as f64 / (b - 1) as f64).sqrt()
    };
    Ok(MeanEstimate {
        mean,
        se,
        samples: m,
        batches: b,
    })
}

/// Two-sided Student-t quantile with `batches - 1` degrees of freedom.
fn t_quantile(level: f64, batches: usize) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid("level", "confidence level must lie in (0, 1)"));
    }
    if batches < 2 {
        return Ok(0.0);
    }
    let dist = StudentsT::new(0.0, 1.0, (batches - 1) as f64).map_err(|e| invalid("batches", e.to_string()))?;
    Ok(dist.inverse_cdf(0.5 + 0.5 * level))
}

impl MeanEstimate {
    pub fn confidence_interval(&self, level: f64) -> Result<(f64, f64)> {
        let q = t_quantile(level, self.batches)?;
        Ok((self.mean - q * self.se, self.mean + q * self.se))
    }
}

/// Estimate of `(E|D|^p)^{1/p}` from coupled samples of `D`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpEstimate {
    pub p: f64,
    pub estimate: f64,
    /// Delta-method standard error of `estimate`.
    pub se: f64,
    pub paths: usize,
    pub batches: usize,
    /// Batch-means estimate of `E|D|^p`.
    pub moment: MeanEstimate,
    pub master_seed: Option<u64>,
}

pub fn lp_estimate(samples: &[f64], p: f64) -> Result<LpEstimate> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid("p", format!("must be finite and >= 1, got {p}")));
    }
    let powers: Vec<f64> = samples.iter().map(|d| d.abs().powf(p)).collect();
    let moment = batch_mean(&powers)?;
    let estimate = moment.mean.powf(1.0 / p);
    let se = if moment.mean > 0.0 {
        moment.mean.powf(1.0 / p - 1.0) * moment.se / p
    } else {
        0.0
    };
    Ok(LpEstimate {
        p,
        estimate,
        se,
        paths: moment.samples,
        batches: moment.batches,
        moment,
        master_seed: None,
    })
}

impl LpEstimate {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = Some(seed);
        self
    }

    /// CI for the norm, mapped from the Student-t interval of `E|D|^p`.
    pub fn confidence_interval(&self, level: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.moment.confidence_interval(level)?;
        Ok((lo.max(0.0).powf(1.0 / self.p), hi.max(0.0).powf(1.0 / self.p)))
    }

    /// Within `3 SE` of zero (or exactly zero): too noisy for a log-log fit.
    pub fn flagged(&self) -> bool {
        self.estimate == 0.0 || self.estimate < NOISE_FLOOR * self.se
    }

    /// Both the estimate and its standard error multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> (f64, f64) {
        (self.estimate * factor, self.se * factor)
    }
}

/// Anything with a value that can go into a rate fit.
pub trait Estimate {
    fn value(&self) -> f64;
    fn flagged(&self) -> bool;
}

impl Estimate for LpEstimate {
    fn value(&self) -> f64 {
        self.estimate
    }

    fn flagged(&self) -> bool {
        LpEstimate::flagged(self)
    }
}

/// Least-squares line through `(ln n, ln error)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub points: Vec<(usize, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
    /// Step counts dropped because their estimate was below the noise floor.
    pub excluded: Vec<usize>,
}

pub fn fit_rate(points: &[(usize, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    for &(n, value) in points {
        if n == 0 {
            return Err(invalid("n", "step counts must be positive"));
        }
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveError { n, value });
        }
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, e)| e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("n", "rate fit needs at least two distinct step counts"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(RateFit {
        points: points.to_vec(),
        slope,
        intercept,
        max_residual,
        excluded: Vec::new(),
    })
}

/// [`fit_rate`] over the estimates that clear the noise floor.
pub fn fit_rate_estimates<E: Estimate>(points: &[(usize, E)]) -> Result<RateFit> {
    let kept: Vec<(usize, f64)> = points
        .iter()
        .filter(|(_, e)| !e.flagged())
        .map(|(n, e)| (*n, e.value()))
        .collect();
    let mut fit = fit_rate(&kept)?;
    fit.excluded = points.iter().filter(|(_, e)| e.flagged()).map(|(n, _)| *n).collect();
    Ok(fit)
}
