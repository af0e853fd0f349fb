use num_complex::Complex64;
use serde::Serialize;

use super::block::Block;
use super::polynomial::Polynomial;
use super::LtiError;

/// Continuous-time SISO transfer function in `s`, with optional dead time.
///
/// Built from user coefficients the function must be proper. Internally built
/// operators (pure derivatives, Oustaloup filters with an integer part above
/// one) may be improper; [`super::tustin`] maps those to proper discrete
/// systems all the same.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousTf {
    block: Block,
    dead_time: f64,
}

impl ContinuousTf {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self, LtiError> {
        let num = Polynomial::new(num)?;
        let den = Polynomial::new(den)?;
        if den.is_zero() {
            return Err(LtiError::ZeroDenominator);
        }
        if num.degree() > den.degree() {
            return Err(LtiError::Improper);
        }
        Ok(Self { block: Block::rational(num, den), dead_time: 0.0 })
    }

    pub fn with_dead_time(mut self, dead_time: f64) -> Result<Self, LtiError> {
        if !(dead_time >= 0.0 && dead_time.is_finite()) {
            return Err(LtiError::InvalidDeadTime(dead_time));
        }
        self.dead_time = dead_time;
        Ok(self)
    }

    pub fn gain(k: f64) -> Self {
        Self::from_block(Block::gain(k))
    }

    /// `s^n` for any integer `n`; exact monomial.
    pub fn s_power(n: i32) -> Self {
        let m = Polynomial::monomial(n.unsigned_abs() as usize);
        let block = if n >= 0 {
            Block::rational(m, Polynomial::one())
        } else {
            Block::rational(Polynomial::one(), m)
        };
        Self::from_block(block)
    }

    pub(crate) fn from_block(block: Block) -> Self {
        Self { block, dead_time: 0.0 }
    }

    pub fn block(&self) -> &Block {
        &self.block
    }

    pub fn dead_time(&self) -> f64 {
        self.dead_time
    }

    /// Numerator and denominator of the multiplied-out rational function.
    pub fn num_den(&self) -> (Polynomial, Polynomial) {
        self.block.expand()
    }

    pub fn is_proper(&self) -> bool {
        let (n, d) = self.block.expand();
        n.degree() <= d.degree()
    }

    /// Rational part evaluated at `s` (dead time excluded).
    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.block.eval(s)
    }

    /// Frequency response at `omega` rad/s, dead time included.
    pub fn freq_response(&self, omega: f64) -> Complex64 {
        let g = self.block.eval(Complex64::new(0.0, omega));
        g * Complex64::from_polar(1.0, -omega * self.dead_time)
    }

    pub fn series(&self, other: &ContinuousTf) -> ContinuousTf {
        ContinuousTf {
            block: Block::series(vec![self.block.clone(), other.block.clone()]),
            dead_time: self.dead_time + other.dead_time,
        }
    }

    pub fn scale(&self, k: f64) -> ContinuousTf {
        ContinuousTf {
            block: Block::series(vec![Block::gain(k), self.block.clone()]),
            dead_time: self.dead_time,
        }
    }

    /// Sum of delay-free transfer functions.
    pub fn sum(terms: &[ContinuousTf]) -> ContinuousTf {
        debug_assert!(terms.iter().all(|t| t.dead_time == 0.0));
        ContinuousTf::from_block(Block::parallel(terms.iter().map(|t| t.block.clone()).collect()))
    }

    /// `1 / G` for a delay-free `G`.
    pub fn reciprocal(&self) -> ContinuousTf {
        debug_assert_eq!(self.dead_time, 0.0);
        ContinuousTf::from_block(self.block.reciprocal())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_improper_user_input() {
        assert!(matches!(ContinuousTf::new(vec![1.0, 0.0], vec![1.0]), Err(LtiError::Improper)));
        assert!(matches!(ContinuousTf::new(vec![1.0], vec![0.0]), Err(LtiError::ZeroDenominator)));
        assert!(ContinuousTf::new(vec![1.0], vec![1.0, 1.0]).unwrap().with_dead_time(-1.0).is_err());
    }

    #[test]
    fn s_powers_are_exact_monomials() {
        let (n, d) = ContinuousTf::s_power(2).num_den();
        assert_eq!(n.coeffs(), &[1.0, 0.0, 0.0]);
        assert_eq!(d.coeffs(), &[1.0]);
        let (n, d) = ContinuousTf::s_power(-1).num_den();
        assert_eq!(n.coeffs(), &[1.0]);
        assert_eq!(d.coeffs(), &[1.0, 0.0]);
    }

    #[test]
    fn dead_time_rotates_phase() {
        let g = ContinuousTf::gain(1.0).with_dead_time(2.0).unwrap();
        let h = g.freq_response(0.5);
        assert!((h.norm() - 1.0).abs() < 1e-15);
        assert!((h.arg() + 1.0).abs() < 1e-15);
    }
}
