//! One-shot tuning: minimize the data-driven loss over the parameter box and
//! keep count of how the stability bound behaved along the way.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Serialize;

use crate::idfrit::{LossEvaluator, PENALTY};
use crate::swarm::{self, Bounds, OptimResult, PsoConfig, SwarmError};

/// Bound bookkeeping over every loss evaluation of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BoundTally {
    pub evaluations: usize,
    pub penalized: usize,
    /// Non-penalized evaluations violating the max-entry bound.
    pub violations: usize,
    /// Non-penalized evaluations violating the induced-norm bound.
    pub induced_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneOutcome {
    pub seed: u64,
    pub theta0_loss: f64,
    pub result: OptimResult,
    pub bound_tally: BoundTally,
}

#[derive(Default)]
struct Counters {
    evaluations: AtomicUsize,
    penalized: AtomicUsize,
    violations: AtomicUsize,
    induced_violations: AtomicUsize,
}

impl Counters {
    fn snapshot(&self) -> BoundTally {
        BoundTally {
            evaluations: self.evaluations.load(Ordering::Relaxed),
            penalized: self.penalized.load(Ordering::Relaxed),
            violations: self.violations.load(Ordering::Relaxed),
            induced_violations: self.induced_violations.load(Ordering::Relaxed),
        }
    }
}

/// Minimizes `J` with `theta0` injected as one initial particle.
pub fn tune(
    evaluator: &LossEvaluator,
    bounds: &Bounds,
    theta0: &[f64],
    cfg: &PsoConfig,
) -> Result<TuneOutcome, SwarmError> {
    let expected = evaluator.template().dimension();
    if bounds.dim() != expected {
        return Err(SwarmError::DimensionMismatch { expected, got: bounds.dim() });
    }
    let counters = Counters::default();
    let objective = |theta: &[f64]| {
        counters.evaluations.fetch_add(1, Ordering::Relaxed);
        match evaluator.evaluate(theta) {
            Ok(eval) => match eval.bound {
                Some(b) => {
                    if !b.satisfied {
                        counters.violations.fetch_add(1, Ordering::Relaxed);
                    }
                    if !b.induced_satisfied {
                        counters.induced_violations.fetch_add(1, Ordering::Relaxed);
                    }
                    eval.breakdown.j
                }
                None => {
                    counters.penalized.fetch_add(1, Ordering::Relaxed);
                    eval.breakdown.j
                }
            },
            Err(_) => {
                counters.penalized.fetch_add(1, Ordering::Relaxed);
                PENALTY
            }
        }
    };
    let initial = if bounds.contains(theta0) { vec![theta0.to_vec()] } else { Vec::new() };
    let result = swarm::minimize_from(objective, bounds, cfg, &initial)?;
    Ok(TuneOutcome {
        seed: cfg.seed,
        theta0_loss: evaluator.loss(theta0),
        result,
        bound_tally: counters.snapshot(),
    })
}

/// Runs [`tune`] once per seed, in seed order.
pub fn tune_seeds(
    evaluator: &LossEvaluator,
    bounds: &Bounds,
    theta0: &[f64],
    cfg: &PsoConfig,
    seeds: &[u64],
) -> Result<Vec<TuneOutcome>, SwarmError> {
    seeds.iter().map(|&s| tune(evaluator, bounds, theta0, &cfg.clone().with_seed(s))).collect()
}

/// Index of the lowest final loss; ties go to the earlier run.
pub fn best_run(runs: &[TuneOutcome]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in runs.iter().enumerate() {
        if best.is_none_or(|b| r.result.best_value < runs[b].result.best_value) {
            best = Some(i);
        }
    }
    best
}
