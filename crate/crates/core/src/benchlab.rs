//! Benchmark problems, synthetic data collection and validation against the
//! true plant.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::folib::{ControllerKind, ControllerTemplate, FolibError, OustaloupConfig};
use crate::idfrit::{ExperimentRecord, IdfritError, LossEvaluator};
use crate::lti::{self, ContinuousTf, DiscreteTf, LtiError, Signal};
use crate::swarm::{Bounds, SwarmError};

pub const CASE_NAMES: [&str; 4] = ["example1", "example2", "example3_io", "example3_fo"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("unknown example '{0}' (valid: {names})", names = CASE_NAMES.join(", "))]
    UnknownCase(String),
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Folib(#[from] FolibError),
    #[error(transparent)]
    Idfrit(#[from] IdfritError),
    #[error(transparent)]
    Swarm(#[from] SwarmError),
}

/// A plant or reference model in whichever domain it is specified.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Continuous(ContinuousTf),
    Discrete(DiscreteTf),
}

impl Model {
    /// Tustin for continuous models; discrete ones must already run at `ts`.
    pub fn discretize(&self, ts: f64) -> Result<DiscreteTf, LtiError> {
        match self {
            Model::Continuous(g) => lti::tustin(g, ts),
            Model::Discrete(g) => {
                if lti::same_sample_time(g.sample_time(), ts) {
                    Ok(g.clone())
                } else {
                    Err(LtiError::SampleTimeMismatch(g.sample_time(), ts))
                }
            }
        }
    }
}

/// Published results for a case, used for comparison in reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnownResults {
    pub j_theta0: f64,
    pub j_tuned: f64,
    pub theta_tuned: Vec<f64>,
}

/// Pass window for the tuned loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossTarget {
    pub max: f64,
    pub min: Option<f64>,
}

impl LossTarget {
    pub fn accepts(&self, j: f64) -> bool {
        j <= self.max && self.min.is_none_or(|m| j >= m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkCase {
    pub name: String,
    pub plant: Model,
    pub reference_model: Model,
    pub sample_time: f64,
    pub sim_time: f64,
    pub theta0: Vec<f64>,
    pub bounds: Bounds,
    pub template: ControllerTemplate,
    pub known: KnownResults,
    pub target: LossTarget,
}

impl BenchmarkCase {
    /// `round(sim_time / ts) + 1` samples, `k = 0` included.
    pub fn samples(&self) -> usize {
        (self.sim_time / self.sample_time).round() as usize + 1
    }

    /// Unit step starting at `k = 0`.
    pub fn reference_signal(&self) -> Signal {
        Signal::step(self.samples(), self.sample_time).expect("validated sample time")
    }

    pub fn plant_discrete(&self) -> Result<DiscreteTf, LtiError> {
        self.plant.discretize(self.sample_time)
    }

    pub fn reference_model_discrete(&self) -> Result<DiscreteTf, LtiError> {
        self.reference_model.discretize(self.sample_time)
    }

    /// Loss evaluator on freshly collected data.
    pub fn evaluator(&self) -> Result<LossEvaluator, BenchError> {
        self.evaluator_for(collect_data(self)?)
    }

    pub fn evaluator_for(&self, data: ExperimentRecord) -> Result<LossEvaluator, BenchError> {
        Ok(LossEvaluator::new(self.template, data, &self.reference_model_discrete()?)?)
    }
}

fn process_plant() -> ContinuousTf {
    ContinuousTf::new(vec![12.0, 8.0], vec![20.0, 113.0, 147.0, 62.0, 8.0]).expect("valid plant")
}

fn second_order_lag() -> ContinuousTf {
    ContinuousTf::new(vec![1.0], vec![1.0, 2.0, 1.0]).expect("valid model")
}

pub fn builtin_case(name: &str) -> Result<BenchmarkCase, BenchError> {
    let fopid_bounds =
        |gain: f64| Bounds::new(vec![0.0; 5], vec![gain, gain, 2.0, gain, 2.0]).expect("static bounds");
    let case = match name {
        "example1" | "example2" => {
            let delayed = name == "example2";
            let plant = if delayed {
                process_plant().with_dead_time(5.0).expect("static dead time")
            } else {
                process_plant()
            };
            let known = if delayed {
                KnownResults {
                    j_theta0: 508.6346,
                    j_tuned: 53.3317,
                    theta_tuned: vec![1.4675, 0.1368, 1.0147, 5.0724, 1.3177],
                }
            } else {
                KnownResults {
                    j_theta0: 496.1250,
                    j_tuned: 0.3805,
                    theta_tuned: vec![2.7563, 0.5105, 0.9966, 2.6412, 0.8482],
                }
            };
            let target = if delayed {
                LossTarget { max: 60.0, min: Some(10.0) }
            } else {
                LossTarget { max: 0.6, min: None }
            };
            BenchmarkCase {
                name: name.to_string(),
                plant: Model::Continuous(plant),
                reference_model: Model::Continuous(second_order_lag()),
                sample_time: 0.1,
                sim_time: 100.0,
                theta0: vec![1.0, 0.0, 1.0, 0.0, 1.0],
                bounds: fopid_bounds(10.0),
                template: ControllerTemplate::fopid(OustaloupConfig::default(), 0.1),
                known,
                target,
            }
        }
        "example3_io" | "example3_fo" => {
            let ts = 0.05;
            // z^-3 (0.28261 + 0.50666 z^-1) / (1 - 1.41833 z^-1 + ...), written in z
            let plant = DiscreteTf::new(
                vec![0.28261, 0.50666, 0.0, 0.0, 0.0],
                vec![1.0, -1.41833, 1.58939, -1.31608, 0.88642],
                ts,
            )
            .expect("valid plant")
            .with_delay(3);
            let alpha = (-0.05f64 * 10.0).exp();
            let md = DiscreteTf::new(
                vec![(1.0 - alpha).powi(2), 0.0, 0.0],
                vec![1.0, -2.0 * alpha, alpha * alpha],
                ts,
            )
            .expect("valid model")
            .with_delay(3);
            let (theta0, bounds, template, known, target) = if name == "example3_fo" {
                (
                    vec![0.1, 0.5, 1.0, 0.0, 1.0],
                    fopid_bounds(5.0),
                    ControllerTemplate::fopid(OustaloupConfig::default(), ts),
                    KnownResults {
                        j_theta0: 28.6451,
                        j_tuned: 0.8087,
                        theta_tuned: vec![1.0894e-9, 3.3490, 1.0018, 0.0242, 0.9448],
                    },
                    LossTarget { max: 1.2, min: None },
                )
            } else {
                (
                    vec![0.1, 0.5, 0.0],
                    Bounds::uniform(3, 0.0, 5.0).expect("static bounds"),
                    ControllerTemplate::iopid(ts),
                    KnownResults {
                        j_theta0: 28.6451,
                        j_tuned: 1.1129,
                        theta_tuned: vec![0.0214, 3.3025, 0.0209],
                    },
                    LossTarget { max: 1.5, min: None },
                )
            };
            BenchmarkCase {
                name: name.to_string(),
                plant: Model::Discrete(plant),
                reference_model: Model::Discrete(md),
                sample_time: ts,
                sim_time: 4.0,
                theta0,
                bounds,
                template,
                known,
                target,
            }
        }
        other => return Err(BenchError::UnknownCase(other.to_string())),
    };
    Ok(case)
}

/// Closed-loop experiment with `C(z; theta0)` under the unit step.
pub fn collect_data(case: &BenchmarkCase) -> Result<ExperimentRecord, BenchError> {
    let plant = case.plant_discrete()?;
    let controller = case.template.realize(&case.theta0)?;
    let r0 = case.reference_signal();
    let trace = lti::cosimulate_loop(&plant, &controller, &r0)?;
    Ok(ExperimentRecord::new(r0, trace.u, trace.y)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepTraces {
    pub time: Vec<f64>,
    pub r: Vec<f64>,
    pub y_model: Vec<f64>,
    pub y_closed_loop: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Poles of `T(z; theta)`.
    pub closed_loop_poles: Vec<Complex64>,
    /// Exactly cancelled modes on or outside the unit circle; they do not
    /// appear in `T` but do in the loop's internal signals.
    pub hidden_modes: Vec<Complex64>,
    pub stable: bool,
    pub max_pole_magnitude: f64,
    /// `||T r0 - M_D r0||_1` over the case horizon.
    pub tracking_error_l1: f64,
    pub max_abs_input: f64,
    pub input_l1: f64,
    pub step_traces: StepTraces,
}

/// Closes the loop around the true plant with `C(z; theta)`.
pub fn validate(case: &BenchmarkCase, theta: &[f64]) -> Result<ValidationReport, BenchError> {
    let plant = case.plant_discrete()?;
    let md = case.reference_model_discrete()?;
    validate_with(&plant, &md, &case.template, theta, &case.reference_signal())
}

/// [`validate`] for an arbitrary plant, reference model and reference signal.
pub fn validate_with(
    plant: &DiscreteTf,
    md: &DiscreteTf,
    template: &ControllerTemplate,
    theta: &[f64],
    r: &Signal,
) -> Result<ValidationReport, BenchError> {
    let controller = template.realize(theta)?;
    let closed = lti::feedback_unity(plant, &controller)?;
    let modes = lti::transfer_poles(&closed);
    let max_pole_magnitude = modes.poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let trace = lti::cosimulate_loop(plant, &controller, r)?;
    let y_model = lti::simulate(md, r)?;
    let y = trace.y.into_samples();
    let u = trace.u.into_samples();
    let tracking_error_l1 = y.iter().zip(y_model.samples()).map(|(a, b)| (a - b).abs()).sum();
    Ok(ValidationReport {
        stable: max_pole_magnitude < 1.0,
        max_pole_magnitude,
        closed_loop_poles: modes.poles,
        hidden_modes: modes.hidden,
        tracking_error_l1,
        max_abs_input: u.iter().fold(0.0, |m: f64, x| m.max(x.abs())),
        input_l1: u.iter().map(|x| x.abs()).sum(),
        step_traces: StepTraces {
            time: r.times(),
            r: r.samples().to_vec(),
            y_model: y_model.into_samples(),
            y_closed_loop: y,
            u,
        },
    })
}

/// A tuned controller on one case.
#[derive(Debug, Clone, Copy)]
pub struct Tuned<'a> {
    pub case: &'a BenchmarkCase,
    pub theta: &'a [f64],
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerMetrics {
    pub kind: ControllerKind,
    pub theta: Vec<f64>,
    pub loss: f64,
    pub tracking_error_l1: f64,
    pub max_abs_input: f64,
    pub input_l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTraces {
    pub time: Vec<f64>,
    pub r: Vec<f64>,
    pub y_model: Vec<f64>,
    pub y_fo: Vec<f64>,
    pub y_io: Vec<f64>,
    pub abs_error_fo: Vec<f64>,
    pub abs_error_io: Vec<f64>,
    pub u_fo: Vec<f64>,
    pub u_io: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub fo: ControllerMetrics,
    pub io: ControllerMetrics,
    pub fo_lower_loss: bool,
    pub fo_lower_tracking_error: bool,
    pub fo_lower_max_input: bool,
    pub traces: ComparisonTraces,
}

/// Side-by-side metrics and plot data for a fractional and an integer
/// controller tuned on the same plant.
pub fn compare_fo_io(fo: Tuned<'_>, io: Tuned<'_>) -> Result<Comparison, BenchError> {
    let vf = validate(fo.case, fo.theta)?;
    let vi = validate(io.case, io.theta)?;
    let metrics = |t: &Tuned<'_>, v: &ValidationReport| ControllerMetrics {
        kind: t.case.template.kind,
        theta: t.theta.to_vec(),
        loss: t.loss,
        tracking_error_l1: v.tracking_error_l1,
        max_abs_input: v.max_abs_input,
        input_l1: v.input_l1,
    };
    let abs_err = |v: &ValidationReport| -> Vec<f64> {
        let s = &v.step_traces;
        s.y_closed_loop.iter().zip(&s.y_model).map(|(a, b)| (a - b).abs()).collect()
    };
    let fo_m = metrics(&fo, &vf);
    let io_m = metrics(&io, &vi);
    Ok(Comparison {
        fo_lower_loss: fo_m.loss < io_m.loss,
        fo_lower_tracking_error: fo_m.tracking_error_l1 <= io_m.tracking_error_l1,
        fo_lower_max_input: fo_m.max_abs_input <= io_m.max_abs_input,
        traces: ComparisonTraces {
            abs_error_fo: abs_err(&vf),
            abs_error_io: abs_err(&vi),
            time: vf.step_traces.time,
            r: vf.step_traces.r,
            y_model: vf.step_traces.y_model,
            y_fo: vf.step_traces.y_closed_loop,
            y_io: vi.step_traces.y_closed_loop,
            u_fo: vf.step_traces.u,
            u_io: vi.step_traces.u,
        },
        fo: fo_m,
        io: io_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn case_shapes() {
        let c = builtin_case("example1").unwrap();
        assert_eq!(c.theta0, vec![1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(c.bounds.upper(), &[10.0, 10.0, 2.0, 10.0, 2.0]);
        assert_eq!(c.samples(), 1001);
        let c = builtin_case("example3_io").unwrap();
        assert_eq!(c.theta0, vec![0.1, 0.5, 0.0]);
        assert_eq!(c.bounds.upper(), &[5.0, 5.0, 5.0]);
        assert_eq!(c.samples(), 81);
        let c = builtin_case("example2").unwrap();
        assert_eq!(c.plant_discrete().unwrap().delay_samples(), 50);
        for name in CASE_NAMES {
            let c = builtin_case(name).unwrap();
            assert!(c.bounds.contains(&c.theta0));
            assert_eq!(c.bounds.dim(), c.template.dimension());
        }
    }

    #[test]
    fn unknown_case_lists_names() {
        let msg = builtin_case("bogus").unwrap_err().to_string();
        for name in CASE_NAMES {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn initial_losses_match_known_values() {
        for name in ["example1", "example2", "example3_io", "example3_fo"] {
            let c = builtin_case(name).unwrap();
            let j = c.evaluator().unwrap().loss(&c.theta0);
            assert!(rel(j, c.known.j_theta0) < 1e-3, "{name}: {j}");
        }
    }

    #[test]
    fn collected_output_matches_closed_loop_simulation() {
        for name in ["example1", "example3_io"] {
            let c = builtin_case(name).unwrap();
            let data = collect_data(&c).unwrap();
            let closed =
                lti::feedback_unity(&c.plant_discrete().unwrap(), &c.template.realize(&c.theta0).unwrap())
                    .unwrap();
            let y = lti::simulate(&closed, data.r0()).unwrap();
            for (a, b) in y.samples().iter().zip(data.y0().samples()) {
                assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn validation_at_theta0_equals_initial_loss() {
        for name in CASE_NAMES {
            let c = builtin_case(name).unwrap();
            let j = c.evaluator().unwrap().loss(&c.theta0);
            let v = validate(&c, &c.theta0).unwrap();
            assert!((v.tracking_error_l1 - j).abs() <= 1e-6 * (1.0 + j), "{name}");
        }
    }

    #[test]
    fn known_tuned_parameters_validate() {
        let c = builtin_case("example1").unwrap();
        let ev = c.evaluator().unwrap();
        let v = validate(&c, &c.known.theta_tuned).unwrap();
        assert!(v.stable);
        let j = ev.loss(&c.known.theta_tuned);
        assert!(rel(j, c.known.j_tuned) < 0.02, "{j}");
        assert!((v.tracking_error_l1 - j).abs() <= 1e-6 * (1.0 + j));
    }

    #[test]
    fn derivative_pole_cancels_against_plant_zeros() {
        let c = builtin_case("example2").unwrap();
        let v = validate(&c, &c.known.theta_tuned).unwrap();
        assert!(v.stable, "{}", v.max_pole_magnitude);
        assert_eq!(v.hidden_modes.len(), 1);
        assert!((v.hidden_modes[0] + 1.0).norm() < 1e-6);
    }

    #[test]
    fn high_gain_destabilizes_delayed_plant() {
        let c = builtin_case("example2").unwrap();
        let v = validate(&c, &[10.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(!v.stable);
        assert!(v.max_pole_magnitude > 1.0);
    }

    #[test]
    fn identical_controllers_compare_equal() {
        let fo = builtin_case("example3_fo").unwrap();
        let io = builtin_case("example3_io").unwrap();
        let cmp = compare_fo_io(
            Tuned { case: &fo, theta: &[0.2, 1.0, 1.0, 0.01, 1.0], loss: 1.0 },
            Tuned { case: &io, theta: &[0.2, 1.0, 0.01], loss: 1.0 },
        )
        .unwrap();
        assert!((cmp.fo.tracking_error_l1 - cmp.io.tracking_error_l1).abs() < 1e-9);
        assert!((cmp.fo.max_abs_input - cmp.io.max_abs_input).abs() < 1e-9);
        assert!(!cmp.fo_lower_loss);
    }
}
