//! Box-constrained global-best particle swarm minimization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwarmError {
    #[error("bounds have {lower} lower and {upper} upper entries")]
    BoundsDimension { lower: usize, upper: usize },
    #[error("bounds must be finite with lower <= upper (coordinate {0})")]
    InvalidBounds(usize),
    #[error("bounds are empty")]
    EmptyBounds,
    #[error("initial point has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("initial point lies outside the bounds")]
    InitialOutOfBounds,
    #[error("invalid swarm configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub inertia_range: (f64, f64),
    pub cognitive_coeff: f64,
    pub social_coeff: f64,
    pub seed: u64,
    /// Iterations without a relative improvement above `tolerance` before stopping.
    pub stall_iterations: usize,
    pub tolerance: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 50,
            max_iterations: 200,
            inertia_range: (0.4, 0.9),
            cognitive_coeff: 1.49,
            social_coeff: 1.49,
            seed: 1,
            stall_iterations: 40,
            tolerance: 1e-8,
        }
    }
}

impl PsoConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SwarmError> {
        let (lo, hi) = self.inertia_range;
        if self.swarm_size < 2 {
            return Err(SwarmError::InvalidConfig("swarm_size must be at least 2"));
        }
        if self.max_iterations < 1 {
            return Err(SwarmError::InvalidConfig("max_iterations must be at least 1"));
        }
        if !(self.cognitive_coeff > 0.0 && self.social_coeff > 0.0) {
            return Err(SwarmError::InvalidConfig("coefficients must be positive"));
        }
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(SwarmError::InvalidConfig("inertia_range must satisfy 0 < low <= high"));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(SwarmError::InvalidConfig("tolerance must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBounds")]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct RawBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawBounds> for Bounds {
    type Error = SwarmError;

    fn try_from(raw: RawBounds) -> Result<Self, Self::Error> {
        Bounds::new(raw.lower, raw.upper)
    }
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SwarmError> {
        if lower.len() != upper.len() {
            return Err(SwarmError::BoundsDimension { lower: lower.len(), upper: upper.len() });
        }
        if lower.is_empty() {
            return Err(SwarmError::EmptyBounds);
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(SwarmError::InvalidBounds(i));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Same interval on every coordinate.
    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self, SwarmError> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.lower).zip(&self.upper).all(|((v, l), u)| l <= v && v <= u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub best_theta: Vec<f64>,
    pub best_value: f64,
    /// Global best after initialization (iteration 0) and after each iteration.
    pub trace: Vec<(usize, f64)>,
    pub evaluations: usize,
}

/// Minimizes `objective` over the box.
pub fn minimize<F>(objective: F, bounds: &Bounds, cfg: &PsoConfig) -> Result<OptimResult, SwarmError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    minimize_from(objective, bounds, cfg, &[])
}

/// Like [`minimize`], with `initial` points taking the first particle slots.
/// Extra points beyond the swarm size are ignored.
pub fn minimize_from<F>(
    objective: F,
    bounds: &Bounds,
    cfg: &PsoConfig,
    initial: &[Vec<f64>],
) -> Result<OptimResult, SwarmError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let dim = bounds.dim();
    for p in initial {
        if p.len() != dim {
            return Err(SwarmError::DimensionMismatch { expected: dim, got: p.len() });
        }
        if !bounds.contains(p) {
            return Err(SwarmError::InitialOutOfBounds);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.swarm_size;
    let range: Vec<f64> = bounds.upper.iter().zip(&bounds.lower).map(|(u, l)| u - l).collect();

    let mut x: Vec<Vec<f64>> = (0..n)
        .map(|i| match initial.get(i) {
            Some(p) => p.clone(),
            None => (0..dim).map(|j| bounds.lower[j] + range[j] * rng.random::<f64>()).collect(),
        })
        .collect();
    let mut v: Vec<Vec<f64>> =
        (0..n).map(|_| (0..dim).map(|j| range[j] * (2.0 * rng.random::<f64>() - 1.0)).collect()).collect();

    let mut f = evaluate_all(&objective, &x);
    let mut evaluations = n;
    let mut pbest = x.clone();
    let mut pbest_f = f.clone();
    let mut g = argmin(&f);
    let mut gbest = x[g].clone();
    let mut gbest_f = f[g];
    let mut trace = vec![(0, gbest_f)];

    let (w_min, w_max) = cfg.inertia_range;
    let mut w = w_max;
    let mut counter = 0usize;
    let mut stall = 0usize;
    let mut reference_f = gbest_f;

    for iter in 1..=cfg.max_iterations {
        for i in 0..n {
            for j in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                v[i][j] = w * v[i][j]
                    + cfg.cognitive_coeff * r1 * (pbest[i][j] - x[i][j])
                    + cfg.social_coeff * r2 * (gbest[j] - x[i][j]);
                let next = x[i][j] + v[i][j];
                if next < bounds.lower[j] {
                    x[i][j] = bounds.lower[j];
                    v[i][j] = 0.0;
                } else if next > bounds.upper[j] {
                    x[i][j] = bounds.upper[j];
                    v[i][j] = 0.0;
                } else {
                    x[i][j] = next;
                }
            }
        }

        f = evaluate_all(&objective, &x);
        evaluations += n;
        for i in 0..n {
            if f[i] < pbest_f[i] {
                pbest_f[i] = f[i];
                pbest[i].clone_from(&x[i]);
            }
        }
        g = argmin(&pbest_f);
        let improved = pbest_f[g] < gbest_f;
        if improved {
            gbest_f = pbest_f[g];
            gbest.clone_from(&pbest[g]);
            counter = counter.saturating_sub(1);
            if counter < 2 {
                w *= 2.0;
            } else if counter > 5 {
                w *= 0.5;
            }
            w = w.clamp(w_min, w_max);
        } else {
            counter += 1;
        }
        trace.push((iter, gbest_f));

        if relative_gain(reference_f, gbest_f) > cfg.tolerance {
            reference_f = gbest_f;
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.stall_iterations {
                break;
            }
        }
    }

    Ok(OptimResult { best_theta: gbest, best_value: gbest_f, trace, evaluations })
}

fn relative_gain(from: f64, to: f64) -> f64 {
    if !from.is_finite() {
        return if to.is_finite() { f64::INFINITY } else { 0.0 };
    }
    (from - to) / from.abs().max(1.0)
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &fv) in values.iter().enumerate() {
        if fv < values[best] {
            best = i;
        }
    }
    best
}

// NaN never wins a comparison; map it to +inf so ordering stays total.
fn sanitize(value: f64) -> f64 {
    if value.is_nan() {
        f64::INFINITY
    } else {
        value
    }
}

#[cfg(feature = "parallel")]
fn evaluate_all<F>(objective: &F, xs: &[Vec<f64>]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    use rayon::prelude::*;
    xs.par_iter().map(|x| sanitize(objective(x))).collect()
}

#[cfg(not(feature = "parallel"))]
fn evaluate_all<F>(objective: &F, xs: &[Vec<f64>]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    xs.iter().map(|x| sanitize(objective(x))).collect()
}
