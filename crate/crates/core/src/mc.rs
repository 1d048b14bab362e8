//! Partitioned Monte Carlo over channel states.
//!
//! A run of `n` samples is split into a fixed number of partitions; partition
//! `k` draws from substream `k` of the master seed. Partitions are evaluated
//! in parallel and reduced in index order, so an estimate depends only on
//! `(seed, n, partitions)` and never on the thread count.

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::fading::{ChannelState, FadingParams, SampleStream};

pub const DEFAULT_PARTITIONS: usize = 8;
/// Smallest run accepted by the fresh-sample Monte Carlo entry points.
pub const MIN_SAMPLES: usize = 10_000;

pub(crate) fn check_min_samples(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(domain(format!(
            "need at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    Ok(())
}

/// Sample mean with its standard error. Rates are in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl RateEstimate {
    /// `sqrt(se_a² + se_b²)`, the standard error of a difference of two
    /// independent estimates.
    pub fn combined_std_error(&self, other: &RateEstimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / count as f64;
        Moments {
            count,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * w,
        }
    }
}

/// A materialized, reproducible set of channel states.
///
/// Keeping the states in memory lets calibration reuse the exact same draws
/// for every multiplier it tries (common random numbers).
#[derive(Debug, Clone)]
pub struct SampleSet {
    params: FadingParams,
    seed: u64,
    partitions: Vec<Vec<ChannelState>>,
}

impl SampleSet {
    pub fn generate(
        params: &FadingParams,
        n_samples: usize,
        seed: u64,
        partitions: usize,
    ) -> Result<Self> {
        params.validate()?;
        if n_samples == 0 {
            return Err(domain("sample count must be positive"));
        }
        if partitions == 0 {
            return Err(domain("partition count must be positive"));
        }
        let base = n_samples / partitions;
        let extra = n_samples % partitions;
        let partitions = (0..partitions)
            .into_par_iter()
            .map(|k| {
                let len = base + usize::from(k < extra);
                let mut stream = SampleStream::new(seed, k as u64);
                (0..len)
                    .map(|_| stream.sample_state(params))
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(Self {
            params: *params,
            seed,
            partitions,
        })
    }

    pub fn params(&self) -> &FadingParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.partitions.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn partition_count(&self) -> usize {
        self.partitions.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ChannelState> {
        self.partitions.iter().flatten()
    }

    /// Mean and standard error of `f` over all states.
    pub fn estimate<F>(&self, f: F) -> Result<RateEstimate>
    where
        F: Fn(&ChannelState) -> Result<f64> + Sync,
    {
        let parts: Vec<Moments> = self
            .partitions
            .par_iter()
            .map(|part| {
                let mut m = Moments::default();
                for s in part {
                    m.push(f(s)?);
                }
                Ok(m)
            })
            .collect::<Result<_>>()?;
        let total = parts.into_iter().fold(Moments::default(), Moments::merge);
        let n = total.count;
        let std_error = if n > 1 {
            (total.m2 / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(RateEstimate {
            mean: total.mean,
            std_error,
            n_samples: n,
        })
    }

    /// Applies `f` to every state, preserving order.
    pub fn map<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&ChannelState) -> Result<T> + Sync,
    {
        let parts: Vec<Vec<T>> = self
            .partitions
            .par_iter()
            .map(|part| part.iter().map(&f).collect::<Result<Vec<T>>>())
            .collect::<Result<_>>()?;
        Ok(parts.into_iter().flatten().collect())
    }
}
