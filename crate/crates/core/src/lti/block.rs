//! Structured rational transfer functions.
//!
//! A [`Block`] is a tree of low-order rational leaves combined in series, in
//! parallel, through unity negative feedback, or by inversion. Evaluation,
//! simulation and pole computation walk the tree instead of multiplying the
//! leaves out, which keeps high-order controllers (tens of geometrically
//! spaced poles and zeros) well conditioned. [`Block::expand`] still produces
//! the single rational function when one is wanted.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::polynomial::Polynomial;

/// Feedthrough magnitude below which a block is treated as strictly proper.
pub const FEEDTHROUGH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    /// `num / den`, denominator monic.
    Rational {
        num: Polynomial,
        den: Polynomial,
    },
    /// Applied left to right: the output of each stage feeds the next.
    Series(Vec<Block>),
    Parallel(Vec<Block>),
    /// Unity negative feedback around the inner block: `G / (1 + G)`.
    Feedback(Box<Block>),
    /// `1 / G`.
    Inverse(Box<Block>),
}

impl Block {
    /// Rational leaf. The denominator must be nonzero; it is made monic.
    pub(crate) fn rational(num: Polynomial, den: Polynomial) -> Self {
        debug_assert!(!den.is_zero());
        let lead = den.leading();
        if lead == 1.0 {
            Block::Rational { num, den }
        } else {
            Block::Rational { num: num.scale(1.0 / lead), den: den.scale(1.0 / lead) }
        }
    }

    pub(crate) fn gain(k: f64) -> Self {
        Block::Rational { num: Polynomial::constant(k), den: Polynomial::one() }
    }

    /// `z^-d` written as `1 / z^d`.
    pub(crate) fn delay(d: usize) -> Self {
        Block::Rational { num: Polynomial::one(), den: Polynomial::monomial(d) }
    }

    /// Series composition that flattens nested series and drops unit gains.
    pub(crate) fn series(blocks: Vec<Block>) -> Self {
        let mut flat = Vec::with_capacity(blocks.len());
        for b in blocks {
            match b {
                Block::Series(inner) => flat.extend(inner),
                b if b.is_unit_gain() => {}
                b => flat.push(b),
            }
        }
        match flat.len() {
            0 => Block::gain(1.0),
            1 => flat.pop().unwrap(),
            _ => Block::Series(flat),
        }
    }

    pub(crate) fn parallel(blocks: Vec<Block>) -> Self {
        let mut flat = Vec::with_capacity(blocks.len());
        for b in blocks {
            match b {
                Block::Parallel(inner) => flat.extend(inner),
                b => flat.push(b),
            }
        }
        match flat.len() {
            0 => Block::gain(0.0),
            1 => flat.pop().unwrap(),
            _ => Block::Parallel(flat),
        }
    }

    fn is_unit_gain(&self) -> bool {
        matches!(self, Block::Rational { num, den }
            if num.degree() == 0 && den.degree() == 0 && num.leading() == 1.0 && den.leading() == 1.0)
    }

    /// Reciprocal, keeping factored structure where it exists.
    pub(crate) fn reciprocal(&self) -> Self {
        match self {
            Block::Rational { num, den } => Block::rational(den.clone(), num.clone()),
            Block::Series(stages) => Block::Series(stages.iter().map(Block::reciprocal).collect()),
            Block::Inverse(inner) => (**inner).clone(),
            other => Block::Inverse(Box::new(other.clone())),
        }
    }

    /// Multiplies everything out into a single `num / den` with a monic denominator.
    pub fn expand(&self) -> (Polynomial, Polynomial) {
        let (n, d) = self.expand_raw();
        let lead = d.leading();
        if lead == 0.0 || lead == 1.0 {
            (n, d)
        } else {
            (n.scale(1.0 / lead), d.scale(1.0 / lead))
        }
    }

    fn expand_raw(&self) -> (Polynomial, Polynomial) {
        match self {
            Block::Rational { num, den } => (num.clone(), den.clone()),
            Block::Series(stages) => {
                stages.iter().fold((Polynomial::one(), Polynomial::one()), |(n, d), b| {
                    let (bn, bd) = b.expand_raw();
                    (n.mul(&bn), d.mul(&bd))
                })
            }
            Block::Parallel(terms) => {
                let mut it = terms.iter().map(Block::expand_raw);
                let first = it.next().unwrap_or((Polynomial::zero(), Polynomial::one()));
                it.fold(first, |(n, d), (bn, bd)| (n.mul(&bd).add(&bn.mul(&d)), d.mul(&bd)))
            }
            Block::Feedback(inner) => {
                let (n, d) = inner.expand_raw();
                let den = d.add(&n);
                (n, den)
            }
            Block::Inverse(inner) => {
                let (n, d) = inner.expand_raw();
                (d, n)
            }
        }
    }

    /// Evaluates the transfer function at a complex point.
    pub fn eval(&self, x: Complex64) -> Complex64 {
        match self {
            Block::Rational { num, den } => num.eval_complex(x) / den.eval_complex(x),
            Block::Series(stages) => stages.iter().map(|b| b.eval(x)).product(),
            Block::Parallel(terms) => terms.iter().map(|b| b.eval(x)).sum(),
            Block::Feedback(inner) => {
                let g = inner.eval(x);
                g / (1.0 + g)
            }
            Block::Inverse(inner) => 1.0 / inner.eval(x),
        }
    }

    /// Value at infinity (the direct feedthrough of a discrete-time system).
    pub fn feedthrough(&self) -> f64 {
        match self {
            Block::Rational { num, den } => leaf_feedthrough(num, den),
            Block::Series(stages) => stages.iter().map(Block::feedthrough).product(),
            Block::Parallel(terms) => terms.iter().map(Block::feedthrough).sum(),
            Block::Feedback(inner) => {
                let d = inner.feedthrough();
                d / (1.0 + d)
            }
            Block::Inverse(inner) => 1.0 / inner.feedthrough(),
        }
    }

    /// True when every leaf is proper and every feedback or inverse is well posed.
    pub fn is_proper(&self) -> bool {
        match self {
            Block::Rational { num, den } => num.degree() <= den.degree(),
            Block::Series(b) | Block::Parallel(b) => b.iter().all(Block::is_proper),
            Block::Feedback(inner) => {
                inner.is_proper() && (1.0 + inner.feedthrough()).abs() > FEEDTHROUGH_TOL
            }
            Block::Inverse(inner) => inner.is_proper() && inner.feedthrough().abs() >= FEEDTHROUGH_TOL,
        }
    }

    /// Number of states in the realization.
    pub fn order(&self) -> usize {
        match self {
            Block::Rational { den, .. } => den.degree(),
            Block::Series(b) | Block::Parallel(b) => b.iter().map(Block::order).sum(),
            Block::Feedback(inner) | Block::Inverse(inner) => inner.order(),
        }
    }

    /// Rebuilds the tree with every rational leaf replaced by `f(num, den)`.
    pub(crate) fn try_map_leaves<E>(
        &self,
        f: &mut impl FnMut(&Polynomial, &Polynomial) -> Result<Block, E>,
    ) -> Result<Block, E> {
        Ok(match self {
            Block::Rational { num, den } => f(num, den)?,
            Block::Series(b) => {
                Block::Series(b.iter().map(|c| c.try_map_leaves(f)).collect::<Result<_, _>>()?)
            }
            Block::Parallel(b) => {
                Block::Parallel(b.iter().map(|c| c.try_map_leaves(f)).collect::<Result<_, _>>()?)
            }
            Block::Feedback(inner) => Block::Feedback(Box::new(inner.try_map_leaves(f)?)),
            Block::Inverse(inner) => Block::Inverse(Box::new(inner.try_map_leaves(f)?)),
        })
    }

    /// Zero-state time stepper. The block must be proper.
    pub(crate) fn stepper(&self) -> Stepper {
        match self {
            Block::Rational { num, den } => {
                let n = den.degree();
                let mut b = vec![0.0; n + 1];
                for p in 0..=num.degree() {
                    b[n - p] = num.coeff_of(p);
                }
                let a = den.coeffs().to_vec();
                Stepper::Direct { d: b[0], b, a, state: vec![0.0; n] }
            }
            Block::Series(stages) => {
                let stages: Vec<Stepper> = stages.iter().map(Block::stepper).collect();
                let d = stages.iter().map(Stepper::feedthrough).product();
                Stepper::Series { stages, d }
            }
            Block::Parallel(terms) => {
                let terms: Vec<Stepper> = terms.iter().map(Block::stepper).collect();
                let d = terms.iter().map(Stepper::feedthrough).sum();
                Stepper::Parallel { terms, d }
            }
            Block::Feedback(inner) => {
                let inner = Box::new(inner.stepper());
                let gd = inner.feedthrough();
                Stepper::Feedback { inner, gd }
            }
            Block::Inverse(inner) => {
                let inner = Box::new(inner.stepper());
                let gd = inner.feedthrough();
                Stepper::Inverse { inner, gd }
            }
        }
    }

    /// State-space realization `x' = A x + B u`, `y = C x + D u`.
    pub fn state_space(&self) -> StateSpace {
        match self {
            Block::Rational { num, den } => {
                // observer canonical form, the state of the transposed direct form II
                let n = den.degree();
                let a = den.coeffs();
                let mut b = vec![0.0; n + 1];
                for p in 0..=num.degree() {
                    b[n - p] = num.coeff_of(p);
                }
                let d = b[0];
                let mut am = DMatrix::zeros(n, n);
                let mut bm = DVector::zeros(n);
                let mut cm = DVector::zeros(n);
                for i in 0..n {
                    am[(i, 0)] = -a[i + 1];
                    if i + 1 < n {
                        am[(i, i + 1)] = 1.0;
                    }
                    bm[i] = b[i + 1] - a[i + 1] * d;
                }
                if n > 0 {
                    cm[0] = 1.0;
                }
                StateSpace { a: am, b: bm, c: cm, d }
            }
            Block::Series(stages) => {
                let mut it = stages.iter().map(Block::state_space);
                let first = it.next().unwrap_or_else(StateSpace::unit);
                it.fold(first, |acc, next| acc.then(&next))
            }
            Block::Parallel(terms) => {
                let mut it = terms.iter().map(Block::state_space);
                let first = it.next().unwrap_or_else(|| StateSpace::static_gain(0.0));
                it.fold(first, |acc, next| acc.plus(&next))
            }
            Block::Feedback(inner) => inner.state_space().closed_loop(),
            Block::Inverse(inner) => inner.state_space().inverse(),
        }
    }
}

fn leaf_feedthrough(num: &Polynomial, den: &Polynomial) -> f64 {
    use std::cmp::Ordering;
    match num.degree().cmp(&den.degree()) {
        Ordering::Less => 0.0,
        Ordering::Equal => num.leading() / den.leading(),
        Ordering::Greater => f64::INFINITY,
    }
}

/// Dense single-input single-output state-space model.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl StateSpace {
    fn static_gain(d: f64) -> Self {
        StateSpace { a: DMatrix::zeros(0, 0), b: DVector::zeros(0), c: DVector::zeros(0), d }
    }

    fn unit() -> Self {
        Self::static_gain(1.0)
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `self` followed by `next`.
    fn then(&self, next: &StateSpace) -> StateSpace {
        let (n1, n2) = (self.order(), next.order());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&next.a);
        a.view_mut((n1, 0), (n2, n1)).copy_from(&(&next.b * self.c.transpose()));
        let mut b = DVector::zeros(n1 + n2);
        b.rows_mut(0, n1).copy_from(&self.b);
        b.rows_mut(n1, n2).copy_from(&(&next.b * self.d));
        let mut c = DVector::zeros(n1 + n2);
        c.rows_mut(0, n1).copy_from(&(&self.c * next.d));
        c.rows_mut(n1, n2).copy_from(&next.c);
        StateSpace { a, b, c, d: self.d * next.d }
    }

    fn plus(&self, other: &StateSpace) -> StateSpace {
        let (n1, n2) = (self.order(), other.order());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = DVector::zeros(n1 + n2);
        b.rows_mut(0, n1).copy_from(&self.b);
        b.rows_mut(n1, n2).copy_from(&other.b);
        let mut c = DVector::zeros(n1 + n2);
        c.rows_mut(0, n1).copy_from(&self.c);
        c.rows_mut(n1, n2).copy_from(&other.c);
        StateSpace { a, b, c, d: self.d + other.d }
    }

    fn closed_loop(&self) -> StateSpace {
        let k = 1.0 / (1.0 + self.d);
        let a = &self.a - (&self.b * self.c.transpose()) * k;
        StateSpace { a, b: &self.b * k, c: &self.c * k, d: self.d * k }
    }

    fn inverse(&self) -> StateSpace {
        let k = 1.0 / self.d;
        let a = &self.a - (&self.b * self.c.transpose()) * k;
        StateSpace { a, b: &self.b * k, c: &self.c * (-k), d: k }
    }
}

/// Zero-initial-state simulator mirroring a [`Block`] tree.
///
/// Each node knows its feedthrough `d` and its free response (the output it
/// would produce now for a zero input), so the current output for input `u`
/// is `d * u + free()`. Feedback and inversion resolve their algebraic
/// constraint from these two numbers before committing the state update.
#[derive(Debug, Clone)]
pub(crate) enum Stepper {
    Direct { b: Vec<f64>, a: Vec<f64>, state: Vec<f64>, d: f64 },
    Series { stages: Vec<Stepper>, d: f64 },
    Parallel { terms: Vec<Stepper>, d: f64 },
    Feedback { inner: Box<Stepper>, gd: f64 },
    Inverse { inner: Box<Stepper>, gd: f64 },
}

impl Stepper {
    pub(crate) fn feedthrough(&self) -> f64 {
        match self {
            Stepper::Direct { d, .. } | Stepper::Series { d, .. } | Stepper::Parallel { d, .. } => *d,
            Stepper::Feedback { gd, .. } => gd / (1.0 + gd),
            Stepper::Inverse { gd, .. } => 1.0 / gd,
        }
    }

    pub(crate) fn free(&self) -> f64 {
        match self {
            Stepper::Direct { state, .. } => state.first().copied().unwrap_or(0.0),
            Stepper::Series { stages, .. } => {
                stages.iter().fold(0.0, |acc, s| s.feedthrough() * acc + s.free())
            }
            Stepper::Parallel { terms, .. } => terms.iter().map(Stepper::free).sum(),
            Stepper::Feedback { inner, gd } => inner.free() / (1.0 + gd),
            Stepper::Inverse { inner, gd } => -inner.free() / gd,
        }
    }

    /// Produces the output for input `u` and advances the state.
    pub(crate) fn step(&mut self, u: f64) -> f64 {
        match self {
            Stepper::Direct { b, a, state, .. } => {
                let n = state.len();
                let y = b[0] * u + state.first().copied().unwrap_or(0.0);
                for i in 0..n {
                    let next = if i + 1 < n { state[i + 1] } else { 0.0 };
                    state[i] = next + b[i + 1] * u - a[i + 1] * y;
                }
                y
            }
            Stepper::Series { stages, .. } => stages.iter_mut().fold(u, |x, s| s.step(x)),
            Stepper::Parallel { terms, .. } => terms.iter_mut().map(|s| s.step(u)).sum(),
            Stepper::Feedback { inner, gd } => {
                let y = (*gd * u + inner.free()) / (1.0 + *gd);
                inner.step(u - y);
                y
            }
            Stepper::Inverse { inner, gd } => {
                let e = (u - inner.free()) / *gd;
                inner.step(e);
                e
            }
        }
    }
}
