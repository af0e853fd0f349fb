use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::LtiError;

/// Real polynomial with coefficients stored highest degree first.
///
/// Leading coefficients that are exactly `0.0` are stripped on construction,
/// so the leading coefficient is nonzero unless the polynomial is the zero
/// polynomial, which is stored as `[0.0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, LtiError> {
        if coeffs.is_empty() {
            return Err(LtiError::EmptyPolynomial);
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(LtiError::NonFiniteCoefficient);
        }
        Ok(Self::from_vec(coeffs))
    }

    /// Trusted constructor for internal arithmetic; only strips leading zeros.
    pub(crate) fn from_vec(mut coeffs: Vec<f64>) -> Self {
        let first = coeffs.iter().position(|&c| c != 0.0);
        match first {
            Some(0) => {}
            Some(i) => {
                coeffs.drain(..i);
            }
            None => coeffs = vec![0.0],
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_vec(vec![c])
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// `x^degree`.
    pub fn monomial(degree: usize) -> Self {
        let mut c = vec![0.0; degree + 1];
        c[0] = 1.0;
        Self { coeffs: c }
    }

    /// Monic polynomial with the given real roots.
    pub fn from_roots(roots: &[f64]) -> Self {
        roots.iter().fold(Self::one(), |acc, &r| acc.mul(&Self::from_vec(vec![1.0, -r])))
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[0]
    }

    /// Coefficient of `x^0`.
    pub fn constant_term(&self) -> f64 {
        self.coeffs[self.coeffs.len() - 1]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    /// Coefficient of `x^power` (zero beyond the degree).
    pub fn coeff_of(&self, power: usize) -> f64 {
        if power > self.degree() {
            0.0
        } else {
            self.coeffs[self.degree() - power]
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, x: Complex64) -> Complex64 {
        self.coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::from_vec(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, c) in self.coeffs.iter().rev().enumerate() {
            out[n - 1 - i] += c;
        }
        for (i, c) in other.coeffs.iter().rev().enumerate() {
            out[n - 1 - i] += c;
        }
        Self::from_vec(out)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::from_vec(out)
    }

    /// Integer power.
    pub fn pow(&self, n: usize) -> Self {
        (0..n).fold(Self::one(), |acc, _| acc.mul(self))
    }

    /// Divides every coefficient by the leading one.
    pub fn monic(&self) -> Self {
        let lead = self.leading();
        if lead == 0.0 {
            return self.clone();
        }
        self.scale(1.0 / lead)
    }

    /// Roots as eigenvalues of the companion matrix of the monic polynomial.
    /// A constant polynomial has no roots.
    pub fn roots(&self) -> Vec<Complex64> {
        let n = self.degree();
        if n == 0 {
            return Vec::new();
        }
        let monic = self.monic();
        let c = monic.coeffs();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            m[(0, j)] = -c[j + 1];
        }
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        eigenvalues(m)
    }
}

pub(crate) fn eigenvalues(m: DMatrix<f64>) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let eig = m.complex_eigenvalues();
    eig.iter().copied().collect()
}

impl TryFrom<Vec<f64>> for Polynomial {
    type Error = LtiError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| format!("{c}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_exact_leading_zeros_only() {
        let p = Polynomial::new(vec![0.0, 0.0, 1e-300, 2.0]).unwrap();
        assert_eq!(p.coeffs(), &[1e-300, 2.0]);
        assert_eq!(Polynomial::new(vec![0.0, 0.0]).unwrap(), Polynomial::zero());
        assert!(Polynomial::new(vec![]).is_err());
        assert!(Polynomial::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn arithmetic_aligns_constant_terms() {
        let a = Polynomial::new(vec![1.0, 2.0, 3.0]).unwrap();
        let b = Polynomial::new(vec![1.0, -1.0]).unwrap();
        assert_eq!(a.add(&b).coeffs(), &[1.0, 3.0, 2.0]);
        assert_eq!(a.mul(&b).coeffs(), &[1.0, 1.0, 1.0, -3.0]);
        assert_eq!(a.sub(&a), Polynomial::zero());
        assert_eq!(b.pow(2).coeffs(), &[1.0, -2.0, 1.0]);
        assert_eq!(a.eval(2.0), 11.0);
        assert_eq!(a.coeff_of(0), 3.0);
        assert_eq!(a.coeff_of(5), 0.0);
    }

    #[test]
    fn linear_root() {
        let r = Polynomial::new(vec![1.0, -0.5]).unwrap().roots();
        assert_eq!(r.len(), 1);
        assert!((r[0] - Complex64::new(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn imaginary_pair() {
        // z^2 + 0.25 = 0  =>  z = ±0.5i
        let mut r = Polynomial::new(vec![1.0, 0.0, 0.25]).unwrap().roots();
        r.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((r[0] - Complex64::new(0.0, -0.5)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(0.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn constant_has_no_roots() {
        assert!(Polynomial::constant(3.0).roots().is_empty());
    }

    #[test]
    fn serde_is_a_plain_array() {
        let p = Polynomial::new(vec![1.0, 0.5]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[1.0,0.5]");
        let back: Polynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Polynomial>("[]").is_err());
    }
}
