//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every exported function returns a JSON string; errors come back as a JS
//! exception carrying the message. The `*_json` functions hold the logic and
//! are callable natively.

use frit::benchlab::{self, builtin_case, CASE_NAMES};
use frit::folib::{oustaloup, OustaloupConfig};
use frit::swarm::PsoConfig;
use frit::tuning;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Bode {
    pub omega: Vec<f64>,
    pub mag_db: Vec<f64>,
    pub phase_deg: Vec<f64>,
    pub exact_mag_db: Vec<f64>,
    pub exact_phase_deg: Vec<f64>,
    /// Zero/pole pairs in the filter.
    pub pairs: usize,
}

#[derive(Debug, Serialize)]
pub struct StepView {
    pub example: String,
    pub theta: Vec<f64>,
    pub loss: f64,
    pub stable: bool,
    pub max_pole_magnitude: f64,
    pub tracking_error_l1: f64,
    pub time: Vec<f64>,
    pub r: Vec<f64>,
    pub y_model: Vec<f64>,
    pub y_initial: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct TuneView {
    pub example: String,
    pub seed: u64,
    pub theta0_loss: f64,
    pub theta: Vec<f64>,
    pub loss: f64,
    pub iterations: Vec<usize>,
    pub best_values: Vec<f64>,
    pub evaluations: usize,
}

fn to_json(v: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Bode data of the Oustaloup approximation of `s^alpha` next to the exact
/// operator, at `points` log-spaced frequencies spanning the band.
pub fn oustaloup_bode_json(
    alpha: f64,
    order: usize,
    w_b: f64,
    w_h: f64,
    points: usize,
) -> Result<String, String> {
    let cfg = OustaloupConfig::new(order, w_b, w_h).map_err(|e| e.to_string())?;
    if !alpha.is_finite() {
        return Err("alpha must be finite".into());
    }
    let points = points.clamp(2, 2000);
    let g = oustaloup(alpha, &cfg);
    let (lo, hi) = ((w_b / 10.0).log10(), (w_h * 10.0).log10());
    let mut out = Bode {
        omega: Vec::with_capacity(points),
        mag_db: Vec::with_capacity(points),
        phase_deg: Vec::with_capacity(points),
        exact_mag_db: Vec::with_capacity(points),
        exact_phase_deg: Vec::with_capacity(points),
        pairs: cfg.pairs(),
    };
    for i in 0..points {
        let w = 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64);
        let h = g.freq_response(w);
        out.omega.push(w);
        out.mag_db.push(20.0 * h.norm().log10());
        out.phase_deg.push(h.arg().to_degrees());
        out.exact_mag_db.push(20.0 * alpha * w.log10());
        out.exact_phase_deg.push(90.0 * alpha);
    }
    to_json(&out)
}

/// Closed-loop step of a builtin example under `theta`, with the loss the
/// tuner would assign it and the response of the initial controller.
pub fn step_response_json(example: &str, theta: &[f64]) -> Result<String, String> {
    let case = builtin_case(example).map_err(|e| e.to_string())?;
    let eval = case.evaluator().map_err(|e| e.to_string())?;
    let loss = eval.evaluate(theta).map_err(|e| e.to_string())?.breakdown.j;
    let report = benchlab::validate(&case, theta).map_err(|e| e.to_string())?;
    let s = report.step_traces;
    let y_initial = eval.data().y0().samples().to_vec();
    to_json(&StepView {
        example: case.name.to_string(),
        theta: theta.to_vec(),
        loss,
        stable: report.stable,
        max_pole_magnitude: report.max_pole_magnitude,
        tracking_error_l1: report.tracking_error_l1,
        time: s.time,
        r: s.r,
        y_model: s.y_model,
        y_initial,
        y: s.y_closed_loop,
        u: s.u,
    })
}

/// One PSO run on a builtin example's initial experiment data.
pub fn tune_json(example: &str, seed: u64, swarm_size: usize, iterations: usize) -> Result<String, String> {
    let case = builtin_case(example).map_err(|e| e.to_string())?;
    let eval = case.evaluator().map_err(|e| e.to_string())?;
    let cfg = PsoConfig { swarm_size, max_iterations: iterations, ..PsoConfig::default() }.with_seed(seed);
    cfg.validate().map_err(|e| e.to_string())?;
    let out = tuning::tune(&eval, &case.bounds, &case.theta0, &cfg).map_err(|e| e.to_string())?;
    let (iterations, best_values) = out.result.trace.iter().copied().unzip();
    to_json(&TuneView {
        example: case.name.to_string(),
        seed,
        theta0_loss: out.theta0_loss,
        theta: out.result.best_theta,
        loss: out.result.best_value,
        iterations,
        best_values,
        evaluations: out.result.evaluations,
    })
}

/// Builtin example names with their initial parameters and bounds.
pub fn examples_json() -> Result<String, String> {
    #[derive(Serialize)]
    struct Entry {
        name: &'static str,
        theta0: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        theta_known: Vec<f64>,
        sample_time: f64,
    }
    let entries = CASE_NAMES
        .iter()
        .map(|name| {
            let c = builtin_case(name).map_err(|e| e.to_string())?;
            Ok(Entry {
                name,
                theta0: c.theta0.clone(),
                lower: c.bounds.lower().to_vec(),
                upper: c.bounds.upper().to_vec(),
                theta_known: c.known.theta_tuned.clone(),
                sample_time: c.sample_time,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    to_json(&entries)
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = oustaloupBode)]
pub fn oustaloup_bode(
    alpha: f64,
    order: usize,
    w_b: f64,
    w_h: f64,
    points: usize,
) -> Result<String, JsError> {
    js(oustaloup_bode_json(alpha, order, w_b, w_h, points))
}

#[wasm_bindgen(js_name = stepResponse)]
pub fn step_response(example: &str, theta: Vec<f64>) -> Result<String, JsError> {
    js(step_response_json(example, &theta))
}

#[wasm_bindgen]
pub fn tune(example: &str, seed: u64, swarm_size: usize, iterations: usize) -> Result<String, JsError> {
    js(tune_json(example, seed, swarm_size, iterations))
}

#[wasm_bindgen]
pub fn examples() -> Result<String, JsError> {
    js(examples_json())
}
