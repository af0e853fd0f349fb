use serde::Serialize;

use super::LtiError;

/// Uniformly sampled signal `x_0 .. x_N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Signal {
    samples: Vec<f64>,
    sample_time: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_time: f64) -> Result<Self, LtiError> {
        if samples.is_empty() {
            return Err(LtiError::EmptySignal);
        }
        if !(sample_time > 0.0 && sample_time.is_finite()) {
            return Err(LtiError::InvalidSampleTime(sample_time));
        }
        Ok(Self { samples, sample_time })
    }

    /// Unit step of `len` samples starting at k = 0.
    pub fn step(len: usize, sample_time: f64) -> Result<Self, LtiError> {
        Self::new(vec![1.0; len], sample_time)
    }

    /// Kronecker delta of `len` samples.
    pub fn impulse(len: usize, sample_time: f64) -> Result<Self, LtiError> {
        let mut v = vec![0.0; len];
        if let Some(first) = v.first_mut() {
            *first = 1.0;
        }
        Self::new(v, sample_time)
    }

    pub(crate) fn from_parts(samples: Vec<f64>, sample_time: f64) -> Self {
        debug_assert!(!samples.is_empty() && sample_time > 0.0);
        Self { samples, sample_time }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; a signal holds at least one sample.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Horizon index `N` (the last sample index).
    pub fn horizon(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn l1_norm(&self) -> f64 {
        self.samples.iter().map(|x| x.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.samples.iter().all(|x| x.is_finite())
    }

    /// Sample times `k * Ts`.
    pub fn times(&self) -> Vec<f64> {
        (0..self.samples.len()).map(|k| k as f64 * self.sample_time).collect()
    }
}

pub(crate) fn same_sample_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}
