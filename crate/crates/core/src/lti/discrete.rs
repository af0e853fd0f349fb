use num_complex::Complex64;
use serde::Serialize;

use super::block::{Block, Stepper};
use super::polynomial::Polynomial;
use super::signal::same_sample_time;
use super::LtiError;

/// Discrete-time SISO transfer function in `z` with an explicit pure delay
/// `z^-delay_samples`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteTf {
    block: Block,
    sample_time: f64,
    delay_samples: usize,
}

impl DiscreteTf {
    /// `num(z) / den(z)`, coefficients highest power first.
    pub fn new(num: Vec<f64>, den: Vec<f64>, sample_time: f64) -> Result<Self, LtiError> {
        let num = Polynomial::new(num)?;
        let den = Polynomial::new(den)?;
        Self::from_polys(num, den, sample_time)
    }

    pub fn from_polys(num: Polynomial, den: Polynomial, sample_time: f64) -> Result<Self, LtiError> {
        check_sample_time(sample_time)?;
        if den.is_zero() {
            return Err(LtiError::ZeroDenominator);
        }
        if num.degree() > den.degree() {
            return Err(LtiError::Improper);
        }
        Ok(Self { block: Block::rational(num, den), sample_time, delay_samples: 0 })
    }

    pub fn gain(k: f64, sample_time: f64) -> Result<Self, LtiError> {
        check_sample_time(sample_time)?;
        Ok(Self { block: Block::gain(k), sample_time, delay_samples: 0 })
    }

    /// Pure delay `z^-d`.
    pub fn pure_delay(d: usize, sample_time: f64) -> Result<Self, LtiError> {
        Ok(Self::gain(1.0, sample_time)?.with_delay(d))
    }

    pub fn with_delay(mut self, delay_samples: usize) -> Self {
        self.delay_samples = delay_samples;
        self
    }

    pub(crate) fn from_block(block: Block, sample_time: f64, delay_samples: usize) -> Self {
        debug_assert!(block.is_proper());
        Self { block, sample_time, delay_samples }
    }

    pub fn block(&self) -> &Block {
        &self.block
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn delay_samples(&self) -> usize {
        self.delay_samples
    }

    /// Multiplied-out numerator and monic denominator, delay excluded.
    ///
    /// High-order structured systems lose accuracy when expanded; simulation
    /// and pole computation never go through this.
    pub fn num_den(&self) -> (Polynomial, Polynomial) {
        self.block.expand()
    }

    pub fn num(&self) -> Polynomial {
        self.num_den().0
    }

    pub fn den(&self) -> Polynomial {
        self.num_den().1
    }

    /// Direct feedthrough `G(z = inf)`; zero whenever a delay is present.
    pub fn feedthrough(&self) -> f64 {
        if self.delay_samples > 0 {
            0.0
        } else {
            self.block.feedthrough()
        }
    }

    pub fn order(&self) -> usize {
        self.block.order() + self.delay_samples
    }

    /// Evaluates `G(z)` including the delay.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.block.eval(z) * z.powi(-(self.delay_samples as i32))
    }

    /// DC gain `G(1)`.
    pub fn dc_gain(&self) -> f64 {
        self.eval(Complex64::new(1.0, 0.0)).re
    }

    /// Frequency response at `omega` rad/s.
    pub fn freq_response(&self, omega: f64) -> Complex64 {
        self.eval(Complex64::from_polar(1.0, omega * self.sample_time))
    }

    /// The block with the delay folded in as an explicit `1 / z^d` leaf.
    pub(crate) fn folded_block(&self) -> Block {
        if self.delay_samples == 0 {
            self.block.clone()
        } else {
            Block::series(vec![self.block.clone(), Block::delay(self.delay_samples)])
        }
    }

    pub(crate) fn stepper(&self) -> Stepper {
        self.folded_block().stepper()
    }

    pub fn series(&self, other: &DiscreteTf) -> Result<DiscreteTf, LtiError> {
        self.check_same_rate(other)?;
        Ok(DiscreteTf {
            block: Block::series(vec![self.block.clone(), other.block.clone()]),
            sample_time: self.sample_time,
            delay_samples: self.delay_samples + other.delay_samples,
        })
    }

    pub fn parallel(&self, other: &DiscreteTf) -> Result<DiscreteTf, LtiError> {
        self.check_same_rate(other)?;
        let common = self.delay_samples.min(other.delay_samples);
        let shift = |g: &DiscreteTf| {
            let extra = g.delay_samples - common;
            if extra == 0 {
                g.block.clone()
            } else {
                Block::series(vec![g.block.clone(), Block::delay(extra)])
            }
        };
        Ok(DiscreteTf {
            block: Block::parallel(vec![shift(self), shift(other)]),
            sample_time: self.sample_time,
            delay_samples: common,
        })
    }

    pub fn scale(&self, k: f64) -> DiscreteTf {
        DiscreteTf {
            block: Block::series(vec![Block::gain(k), self.block.clone()]),
            sample_time: self.sample_time,
            delay_samples: self.delay_samples,
        }
    }

    pub(crate) fn check_same_rate(&self, other: &DiscreteTf) -> Result<(), LtiError> {
        if same_sample_time(self.sample_time, other.sample_time) {
            Ok(())
        } else {
            Err(LtiError::SampleTimeMismatch(self.sample_time, other.sample_time))
        }
    }
}

pub(crate) fn check_sample_time(ts: f64) -> Result<(), LtiError> {
    if ts > 0.0 && ts.is_finite() {
        Ok(())
    } else {
        Err(LtiError::InvalidSampleTime(ts))
    }
}
