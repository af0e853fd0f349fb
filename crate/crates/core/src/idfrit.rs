//! Fictitious-reference model matching with an l1 loss.
//!
//! From a single closed-loop record `(r0, u0, y0)` collected with some
//! controller, the closed-loop output that *any* candidate controller would
//! produce under `r0` is reconstructed without a plant model:
//!
//! 1. fictitious reference `r~ = C^-1 u0 + y0`,
//! 2. closed-loop impulse response `t` from the lower-triangular Toeplitz
//!    system `y0 = R~ t`,
//! 3. predicted output `y = R0 t`,
//!
//! and compared against the reference model response `R0 m_D` in the l1 norm.
//! An unstable candidate shows up as a huge (or non-finite) loss.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::folib::{ControllerTemplate, FolibError};
use crate::lti::{self, same_sample_time, DiscreteTf, LtiError, Signal};

/// Loss assigned to candidates that cannot be evaluated.
pub const PENALTY: f64 = 1e12;
/// Magnitude past which an intermediate signal counts as diverged.
pub const OVERFLOW_GUARD: f64 = 1e30;
/// Smallest admissible `|r~_0|`.
pub const HEAD_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdfritError {
    #[error("signals must have equal length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("sample time mismatch: {0} vs {1}")]
    SampleTimeMismatch(f64, f64),
    #[error("reference head must be nonzero")]
    ReferenceHeadZero,
    #[error("non-finite value in {0}")]
    NonFiniteData(&'static str),
    #[error("non-invertible controller")]
    NonInvertibleController,
    #[error("fictitious reference head is zero")]
    FictitiousHeadZero,
    #[error("reference model is not BIBO stable")]
    UnstableReferenceModel,
    #[error("reference model is not proper")]
    ImproperReferenceModel,
    #[error("parameter vector has {got} entries, template expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Lti(#[from] LtiError),
}

/// One-shot closed-loop experiment data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    r0: Signal,
    u0: Signal,
    y0: Signal,
}

impl ExperimentRecord {
    pub fn new(r0: Signal, u0: Signal, y0: Signal) -> Result<Self, IdfritError> {
        for s in [&u0, &y0] {
            if s.len() != r0.len() {
                return Err(IdfritError::LengthMismatch(r0.len(), s.len()));
            }
            if !same_sample_time(s.sample_time(), r0.sample_time()) {
                return Err(IdfritError::SampleTimeMismatch(r0.sample_time(), s.sample_time()));
            }
        }
        if !r0.all_finite() {
            return Err(IdfritError::NonFiniteData("r0"));
        }
        if r0.samples()[0] == 0.0 {
            return Err(IdfritError::ReferenceHeadZero);
        }
        if !u0.all_finite() {
            return Err(IdfritError::NonFiniteData("u0"));
        }
        if !y0.all_finite() {
            return Err(IdfritError::NonFiniteData("y0"));
        }
        Ok(Self { r0, u0, y0 })
    }

    pub fn r0(&self) -> &Signal {
        &self.r0
    }

    pub fn u0(&self) -> &Signal {
        &self.u0
    }

    pub fn y0(&self) -> &Signal {
        &self.y0
    }

    pub fn len(&self) -> usize {
        self.r0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_time(&self) -> f64 {
        self.r0.sample_time()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyReason {
    None,
    NonInvertibleController,
    FictitiousHeadZero,
    NonfiniteSignal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub j: f64,
    pub epsilon_l1: f64,
    pub t_l1: f64,
    pub penalized: bool,
    pub penalty_reason: PenaltyReason,
}

impl LossBreakdown {
    fn penalty(reason: PenaltyReason) -> Self {
        Self { j: PENALTY, epsilon_l1: f64::NAN, t_l1: f64::NAN, penalized: true, penalty_reason: reason }
    }
}

/// Finite-horizon check of `||t||_1 <= |gamma| ||eps||_1 + ||m_D||_1`, where
/// `gamma` is the largest-magnitude entry of `R0^-1`.
///
/// Alongside it, the same inequality with the induced l1 norm of `R0^-1`
/// (the l1 norm of its generating column) in place of `gamma`; that version
/// holds for every evaluation by the triangle inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityBoundReport {
    pub gamma_r0: f64,
    pub md_l1: f64,
    pub bound: f64,
    pub t_l1: f64,
    pub satisfied: bool,
    pub r0_inverse_l1: f64,
    pub induced_bound: f64,
    pub induced_satisfied: bool,
}

/// `r~ = C^-1 u0 + y0`.
pub fn fictitious_reference(c: &DiscreteTf, data: &ExperimentRecord) -> Result<Signal, IdfritError> {
    let inv = lti::invert(c).map_err(|_| IdfritError::NonInvertibleController)?;
    let v = lti::simulate(&inv, data.u0())?;
    let rt = v.samples().iter().zip(data.y0().samples()).map(|(a, b)| a + b).collect();
    Ok(Signal::new(rt, data.sample_time())?)
}

/// Solves `R~ t = y0` for the lower-triangular Toeplitz `R~` generated by
/// `rt`, by forward substitution.
pub fn toeplitz_solve(rt: &Signal, y0: &Signal) -> Result<Signal, IdfritError> {
    if rt.len() != y0.len() {
        return Err(IdfritError::LengthMismatch(rt.len(), y0.len()));
    }
    let t = forward_substitute(rt.samples(), y0.samples())?;
    Ok(Signal::new(t, rt.sample_time())?)
}

fn forward_substitute(col: &[f64], rhs: &[f64]) -> Result<Vec<f64>, IdfritError> {
    let head = col[0];
    if head.is_nan() || head.abs() < HEAD_TOL {
        return Err(IdfritError::FictitiousHeadZero);
    }
    let mut t = Vec::with_capacity(rhs.len());
    for (k, &yk) in rhs.iter().enumerate() {
        let acc: f64 = col[1..=k].iter().zip(t.iter().rev()).map(|(a, b)| a * b).sum();
        t.push((yk - acc) / head);
    }
    Ok(t)
}

/// Causal convolution of two equal-length sequences truncated at the horizon,
/// i.e. the lower-triangular Toeplitz product generated by `a` applied to `b`.
fn truncated_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len()).map(|k| a[..=k].iter().zip(b[..=k].iter().rev()).map(|(x, y)| x * y).sum()).collect()
}

/// `y = R0 t`.
pub fn reconstruct_output(r0: &Signal, t: &Signal) -> Result<Signal, IdfritError> {
    if r0.len() != t.len() {
        return Err(IdfritError::LengthMismatch(r0.len(), t.len()));
    }
    Ok(Signal::new(truncated_convolution(r0.samples(), t.samples()), r0.sample_time())?)
}

/// Generating (first) column of `R0^-1`, itself lower-triangular Toeplitz.
pub fn toeplitz_inverse_column(r0: &Signal) -> Result<Vec<f64>, IdfritError> {
    let mut delta = vec![0.0; r0.len()];
    delta[0] = 1.0;
    forward_substitute(r0.samples(), &delta).map_err(|_| IdfritError::ReferenceHeadZero)
}

/// Bound report for the impulse response `t` and model error `eps` of one
/// evaluation.
pub fn stability_bound_report(
    data: &ExperimentRecord,
    md: &DiscreteTf,
    t: &Signal,
    eps: &Signal,
) -> Result<StabilityBoundReport, IdfritError> {
    let inv_col = toeplitz_inverse_column(data.r0())?;
    let md_l1 = lti::impulse_response(md, data.len() - 1).l1_norm();
    Ok(bound_report(&inv_col, md_l1, t.l1_norm(), eps.l1_norm()))
}

fn bound_report(inv_col: &[f64], md_l1: f64, t_l1: f64, eps_l1: f64) -> StabilityBoundReport {
    let gamma_r0 = inv_col.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    let r0_inverse_l1: f64 = inv_col.iter().map(|x| x.abs()).sum();
    let bound = gamma_r0 * eps_l1 + md_l1;
    let induced_bound = r0_inverse_l1 * eps_l1 + md_l1;
    // relative slack for round-off in the equality case t = m_D
    let slack = 1e-9 * (1.0 + t_l1);
    StabilityBoundReport {
        gamma_r0,
        md_l1,
        bound,
        t_l1,
        satisfied: t_l1 <= bound + slack,
        r0_inverse_l1,
        induced_bound,
        induced_satisfied: t_l1 <= induced_bound + slack,
    }
}

/// Intermediate signals of one non-penalized evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSignals {
    pub fictitious_reference: Vec<f64>,
    pub impulse_response: Vec<f64>,
    pub output: Vec<f64>,
    pub error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub breakdown: LossBreakdown,
    /// Present exactly when the evaluation is not penalized.
    pub bound: Option<StabilityBoundReport>,
    pub signals: Option<PipelineSignals>,
}

impl Evaluation {
    fn penalty(reason: PenaltyReason) -> Self {
        Self { breakdown: LossBreakdown::penalty(reason), bound: None, signals: None }
    }
}

/// Loss evaluator with everything that does not depend on the parameters
/// precomputed: `m_D`, `R0 m_D`, `||m_D||_1` and the first column of `R0^-1`.
#[derive(Debug, Clone)]
pub struct LossEvaluator {
    template: ControllerTemplate,
    data: ExperimentRecord,
    model_response: Vec<f64>,
    md_l1: f64,
    r0_inverse_column: Vec<f64>,
}

impl LossEvaluator {
    pub fn new(
        template: ControllerTemplate,
        data: ExperimentRecord,
        md: &DiscreteTf,
    ) -> Result<Self, IdfritError> {
        if !same_sample_time(md.sample_time(), data.sample_time()) {
            return Err(IdfritError::SampleTimeMismatch(md.sample_time(), data.sample_time()));
        }
        if !same_sample_time(template.sample_time, data.sample_time()) {
            return Err(IdfritError::SampleTimeMismatch(template.sample_time, data.sample_time()));
        }
        if !md.block().is_proper() {
            return Err(IdfritError::ImproperReferenceModel);
        }
        if !lti::is_bibo_stable(md, 0.0).stable {
            return Err(IdfritError::UnstableReferenceModel);
        }
        let n = data.len() - 1;
        let md_impulse = lti::impulse_response(md, n);
        let model_response = truncated_convolution(data.r0().samples(), md_impulse.samples());
        let r0_inverse_column = toeplitz_inverse_column(data.r0())?;
        Ok(Self { template, data, model_response, md_l1: md_impulse.l1_norm(), r0_inverse_column })
    }

    pub fn data(&self) -> &ExperimentRecord {
        &self.data
    }

    pub fn template(&self) -> &ControllerTemplate {
        &self.template
    }

    /// `R0 m_D`, the reference model's response to `r0`.
    pub fn model_response(&self) -> &[f64] {
        &self.model_response
    }

    pub fn md_l1(&self) -> f64 {
        self.md_l1
    }

    /// Loss value only; penalties included. Suitable as an optimizer objective.
    pub fn loss(&self, theta: &[f64]) -> f64 {
        self.evaluate(theta).map(|e| e.breakdown.j).unwrap_or(PENALTY)
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<Evaluation, IdfritError> {
        self.run(theta, false)
    }

    /// Like [`Self::evaluate`], also returning the pipeline signals.
    pub fn evaluate_with_signals(&self, theta: &[f64]) -> Result<Evaluation, IdfritError> {
        self.run(theta, true)
    }

    fn run(&self, theta: &[f64], keep: bool) -> Result<Evaluation, IdfritError> {
        let expected = self.template.dimension();
        if theta.len() != expected {
            return Err(IdfritError::DimensionMismatch { expected, got: theta.len() });
        }
        let controller = match self.template.realize(theta) {
            Ok(c) => c,
            Err(FolibError::NonFiniteParameter) => {
                return Ok(Evaluation::penalty(PenaltyReason::NonfiniteSignal))
            }
            Err(_) => return Ok(Evaluation::penalty(PenaltyReason::NonInvertibleController)),
        };
        let rt = match fictitious_reference(&controller, &self.data) {
            Ok(rt) => rt.into_samples(),
            Err(_) => return Ok(Evaluation::penalty(PenaltyReason::NonInvertibleController)),
        };
        if diverged(&rt) {
            return Ok(Evaluation::penalty(PenaltyReason::NonfiniteSignal));
        }
        let t = match forward_substitute(&rt, self.data.y0().samples()) {
            Ok(t) => t,
            Err(_) => return Ok(Evaluation::penalty(PenaltyReason::FictitiousHeadZero)),
        };
        if diverged(&t) {
            return Ok(Evaluation::penalty(PenaltyReason::NonfiniteSignal));
        }
        let y = truncated_convolution(self.data.r0().samples(), &t);
        if diverged(&y) {
            return Ok(Evaluation::penalty(PenaltyReason::NonfiniteSignal));
        }
        let eps: Vec<f64> = y.iter().zip(&self.model_response).map(|(a, b)| a - b).collect();
        let eps_l1: f64 = eps.iter().map(|x| x.abs()).sum();
        let t_l1: f64 = t.iter().map(|x| x.abs()).sum();
        if !eps_l1.is_finite() || !t_l1.is_finite() {
            return Ok(Evaluation::penalty(PenaltyReason::NonfiniteSignal));
        }
        let breakdown = LossBreakdown {
            j: eps_l1,
            epsilon_l1: eps_l1,
            t_l1,
            penalized: false,
            penalty_reason: PenaltyReason::None,
        };
        let bound = bound_report(&self.r0_inverse_column, self.md_l1, t_l1, eps_l1);
        let signals = keep.then_some(PipelineSignals {
            fictitious_reference: rt,
            impulse_response: t,
            output: y,
            error: eps,
        });
        Ok(Evaluation { breakdown, bound: Some(bound), signals })
    }
}

fn diverged(x: &[f64]) -> bool {
    x.iter().any(|v| v.is_nan() || v.abs() > OVERFLOW_GUARD)
}

/// `J(theta)` with its breakdown for one parameter vector.
pub fn evaluate_loss(
    theta: &[f64],
    template: &ControllerTemplate,
    data: &ExperimentRecord,
    md: &DiscreteTf,
) -> Result<LossBreakdown, IdfritError> {
    let eval = LossEvaluator::new(*template, data.clone(), md)?;
    Ok(eval.evaluate(theta)?.breakdown)
}
