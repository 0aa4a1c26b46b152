use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use super::{ReferenceLattice, WindError};
use crate::interp::endpoint_line;
use crate::rng::substream;

/// A secondly window with its endpoint line removed, and the step
/// differences of the remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct Detrended {
    pub detrended: Vec<f64>,
    /// First entry is 0 by definition.
    pub differenced: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of `differenced`, leading 0 included.
    pub sigma: f64,
}

pub fn detrend_and_difference(window: &[f64]) -> Result<Detrended, WindError> {
    let s = window.len();
    if s < 2 {
        return Err(WindError::TooShort(s));
    }
    let (first, last) = (window[0], window[s - 1]);
    let detrended: Vec<f64> = window.iter().enumerate().map(|(i, w)| w - endpoint_line(first, last, s, i)).collect();
    let mut differenced = Vec::with_capacity(s);
    differenced.push(0.0);
    differenced.extend(detrended.windows(2).map(|p| p[1] - p[0]));
    let n = s as f64;
    let mean = differenced.iter().sum::<f64>() / n;
    let sigma = (differenced.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n).sqrt();
    Ok(Detrended { detrended, differenced, mean, sigma })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalFit {
    pub mu: f64,
    pub sigma: f64,
}

/// Empirical collection of variation scales, optionally replaced by a
/// lognormal fit when drawing.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaDistribution {
    pub samples: Vec<f64>,
    pub lognormal: Option<LogNormalFit>,
}

impl SigmaDistribution {
    pub fn from_samples(samples: Vec<f64>) -> Result<Self, WindError> {
        if samples.is_empty() {
            return Err(WindError::InvalidInput("sigma distribution needs at least one sample".into()));
        }
        if samples.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(WindError::InvalidInput("sigma samples must be finite and >= 0".into()));
        }
        Ok(SigmaDistribution { samples, lognormal: None })
    }

    /// Fits a lognormal to the positive samples by moments of the log.
    pub fn fit_lognormal(&mut self) -> Result<LogNormalFit, WindError> {
        let logs: Vec<f64> = self.samples.iter().filter(|s| **s > 0.0).map(|s| s.ln()).collect();
        if logs.len() < 2 {
            return Err(WindError::InvalidInput("lognormal fit needs at least two positive sigma samples".into()));
        }
        let n = logs.len() as f64;
        let mu = logs.iter().sum::<f64>() / n;
        let sigma = (logs.iter().map(|l| (l - mu) * (l - mu)).sum::<f64>() / (n - 1.0)).sqrt();
        let fit = LogNormalFit { mu, sigma };
        self.lognormal = Some(fit);
        Ok(fit)
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.lognormal {
            Some(f) if f.sigma > 0.0 => LogNormal::new(f.mu, f.sigma).expect("checked parameters").sample(rng),
            Some(f) => f.mu.exp(),
            None => self.samples[rng.random_range(0..self.samples.len())],
        }
    }
}

/// One scale per rolling window of `window_len` samples, advancing by
/// `stride`. Windows holding non-finite values are skipped.
pub fn estimate_sigma_distribution(
    segments: &[Vec<f64>],
    window_len: usize,
    stride: usize,
) -> Result<SigmaDistribution, WindError> {
    if window_len < 2 {
        return Err(WindError::TooShort(window_len));
    }
    if stride == 0 {
        return Err(WindError::InvalidInput("window stride must be at least 1".into()));
    }
    let mut samples = Vec::new();
    for seg in segments {
        let mut start = 0;
        while start + window_len <= seg.len() {
            let w = &seg[start..start + window_len];
            if w.iter().all(|v| v.is_finite()) {
                samples.push(detrend_and_difference(w)?.sigma);
            }
            start += stride;
        }
    }
    if samples.is_empty() {
        return Err(WindError::NoWindows { window: window_len });
    }
    SigmaDistribution::from_samples(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariationOwner {
    /// Index into the lattice points.
    Reference(usize),
    Farm(u32),
}

/// Accumulated variation over one 5-minute window; starts at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationSeries {
    pub owner: VariationOwner,
    pub values: Vec<f64>,
}

/// Independent variation paths for `points` reference points in window
/// `window`. Each point draws its own scale and increments from a private
/// substream.
pub fn synthesize_reference_variations(
    points: usize,
    psi: &SigmaDistribution,
    steps: usize,
    seed: u64,
    window: u64,
) -> Result<Vec<VariationSeries>, WindError> {
    if steps < 2 {
        return Err(WindError::TooShort(steps));
    }
    (0..points)
        .map(|n| {
            let mut rng = substream(seed, "wind-reference", window, n as u64);
            let sigma = psi.draw(&mut rng);
            let mut values = vec![0.0; steps];
            if sigma > 0.0 {
                let normal = Normal::new(0.0, sigma)
                    .map_err(|e| WindError::InvalidInput(format!("variation scale {sigma}: {e}")))?;
                for s in 1..steps {
                    values[s] = values[s - 1] + normal.sample(&mut rng);
                }
            }
            Ok(VariationSeries { owner: VariationOwner::Reference(n), values })
        })
        .collect()
}

/// Correlation-weighted mean of the reference paths for every farm.
pub fn farm_variations(
    lattice: &ReferenceLattice,
    references: &[VariationSeries],
) -> Result<Vec<VariationSeries>, WindError> {
    if references.len() != lattice.points.len() {
        return Err(WindError::InvalidInput(format!(
            "{} reference series for {} lattice points",
            references.len(),
            lattice.points.len()
        )));
    }
    let steps = references.first().map_or(0, |r| r.values.len());
    if references.iter().any(|r| r.values.len() != steps) {
        return Err(WindError::InvalidInput("reference series differ in length".into()));
    }
    Ok(lattice
        .farm_ids
        .iter()
        .enumerate()
        .map(|(e, &id)| {
            let mut values = vec![0.0; steps];
            for (pi, r) in lattice.weights[e].iter().zip(references) {
                if *pi > 0.0 {
                    for (v, w) in values.iter_mut().zip(&r.values) {
                        *v += pi * w;
                    }
                }
            }
            for v in values.iter_mut() {
                *v /= lattice.omega[e];
            }
            VariationSeries { owner: VariationOwner::Farm(id), values }
        })
        .collect())
}

/// Straight line between the 5-minute speeds plus the farm variation.
/// Endpoints are the inputs exactly; interior speeds are floored at 0.
pub fn combine_speed(v_start: f64, v_end: f64, variation: &[f64]) -> Result<Vec<f64>, WindError> {
    let n = variation.len();
    if n < 2 {
        return Err(WindError::TooShort(n));
    }
    if !(v_start >= 0.0 && v_end >= 0.0) || !v_start.is_finite() || !v_end.is_finite() {
        return Err(WindError::InvalidInput(format!("5-minute speeds must be >= 0, got {v_start}, {v_end}")));
    }
    let mut out: Vec<f64> =
        variation.iter().enumerate().map(|(s, dv)| (endpoint_line(v_start, v_end, n, s) + dv).max(0.0)).collect();
    out[0] = v_start;
    out[n - 1] = v_end;
    Ok(out)
}
