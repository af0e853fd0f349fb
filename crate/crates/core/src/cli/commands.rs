use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::benchlab::{self, BenchmarkCase, KnownResults, LossTarget, Tuned, ValidationReport};
use crate::folib::{ControllerKind, ControllerTemplate};
use crate::idfrit::{LossBreakdown, LossEvaluator, StabilityBoundReport};
use crate::lti::{Block, DiscreteTf, Signal};
use crate::swarm::PsoConfig;
use crate::tuning::{self, BoundTally, TuneOutcome};

use super::config::{parse_seeds, RunConfig};
use super::io::{fmt_f64, read_data, write_columns, write_data, write_json, write_rows};
use super::{CliError, Command, RunOpts};

/// Poles closer to the unit circle than this fail the margin check.
const POLE_MARGIN: f64 = 1e-6;
const DEFAULT_OUT: &str = "results";

pub(super) fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Reproduce { example, opts } => reproduce(&example, &opts),
        Command::Tune { config, data, opts } => tune(&config, data.as_deref(), &opts),
        Command::Validate { config, example, theta, out_dir } => {
            validate(config.as_deref(), example.as_deref(), &theta, out_dir.as_deref())
        }
        Command::Collect { example, out_dir } => collect(&example, out_dir.as_deref()),
    }
}

fn env_seeds() -> Result<Option<Vec<u64>>, CliError> {
    match std::env::var("FRIT_SEED") {
        Ok(v) if !v.trim().is_empty() => {
            parse_seeds(&v).map(Some).map_err(|e| CliError::Usage(format!("FRIT_SEED: {e}")))
        }
        _ => Ok(None),
    }
}

fn resolve_seeds(opts: &RunOpts, configured: Option<&[u64]>, fallback: &[u64]) -> Result<Vec<u64>, CliError> {
    if let Some(text) = &opts.seeds {
        return parse_seeds(text).map_err(|e| CliError::Usage(format!("--seeds: {e}")));
    }
    if let Some(s) = configured {
        return Ok(s.to_vec());
    }
    Ok(env_seeds()?.unwrap_or_else(|| fallback.to_vec()))
}

fn apply_overrides(mut pso: PsoConfig, opts: &RunOpts) -> Result<PsoConfig, CliError> {
    if let Some(n) = opts.swarm_size {
        pso.swarm_size = n;
    }
    if let Some(n) = opts.iterations {
        pso.max_iterations = n;
    }
    pso.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(pso)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn parse_theta(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|p| {
            let v: f64 =
                p.trim().parse().map_err(|_| CliError::Usage(format!("--theta: bad value '{p}'")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Usage(format!("--theta: non-finite value '{p}'")))
            }
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct SeedSummary {
    seed: u64,
    j_tuned: f64,
    theta: Vec<f64>,
    iterations: usize,
    evaluations: usize,
    bound_tally: BoundTally,
}

impl SeedSummary {
    fn from_outcome(o: &TuneOutcome) -> Self {
        Self {
            seed: o.seed,
            j_tuned: o.result.best_value,
            theta: o.result.best_theta.clone(),
            iterations: o.result.trace.last().map_or(0, |t| t.0),
            evaluations: o.result.evaluations,
            bound_tally: o.bound_tally,
        }
    }
}

#[derive(Debug, Serialize)]
struct Best {
    seed: u64,
    j_tuned: f64,
    theta: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct ValidationSummary {
    stable: bool,
    max_pole_magnitude: f64,
    pole_margin: f64,
    hidden_modes: usize,
    tracking_error_l1: f64,
    max_abs_input: f64,
    input_l1: f64,
}

impl ValidationSummary {
    fn from_report(v: &ValidationReport) -> Self {
        Self {
            stable: v.stable,
            max_pole_magnitude: v.max_pole_magnitude,
            pole_margin: 1.0 - v.max_pole_magnitude,
            hidden_modes: v.hidden_modes.len(),
            tracking_error_l1: v.tracking_error_l1,
            max_abs_input: v.max_abs_input,
            input_l1: v.input_l1,
        }
    }
}

#[derive(Debug, Serialize)]
struct Checks {
    initial_loss_within_1pct: bool,
    tuned_loss_target: LossTarget,
    tuned_loss_within_target: bool,
    stable: bool,
    poles_within_margin: bool,
    bound_violations: usize,
    induced_bound_violations: usize,
}

#[derive(Debug, Serialize)]
struct ReproduceSummary {
    example: String,
    status: &'static str,
    samples: usize,
    sample_time: f64,
    seeds: Vec<u64>,
    pso: PsoConfig,
    j_theta0: f64,
    known: KnownResults,
    best: Best,
    runs: Vec<SeedSummary>,
    validation: ValidationSummary,
    checks: Checks,
}

fn write_trace(path: &Path, runs: &[TuneOutcome]) -> Result<(), CliError> {
    let rows = runs.iter().flat_map(|r| {
        r.result.trace.iter().map(move |(it, v)| vec![r.seed.to_string(), it.to_string(), fmt_f64(*v)])
    });
    write_rows(path, &["seed", "iteration", "best_value"], rows)
}

fn write_step_response(path: &Path, v: &ValidationReport) -> Result<(), CliError> {
    let s = &v.step_traces;
    write_columns(
        path,
        &["t", "r", "y_model", "y_tuned", "u"],
        &[&s.time, &s.r, &s.y_model, &s.y_closed_loop, &s.u],
    )
}

fn best_of(runs: &[TuneOutcome]) -> Result<&TuneOutcome, CliError> {
    tuning::best_run(runs).map(|i| &runs[i]).ok_or_else(|| CliError::Usage("no seeds to run".into()))
}

fn reproduce(example: &str, opts: &RunOpts) -> Result<(), CliError> {
    let case = benchlab::builtin_case(example)?;
    let seeds = resolve_seeds(opts, None, &[1, 2, 3, 4, 5])?;
    let pso = apply_overrides(PsoConfig::default(), opts)?;
    let root = opts.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let dir = root.join(&case.name);
    ensure_dir(&dir)?;

    let data = benchlab::collect_data(&case)?;
    write_data(&dir.join("data.csv"), &data)?;
    write_json(&dir.join("run_config.json"), &RunConfig::for_case(&case, &pso, &seeds))?;
    let evaluator = case.evaluator_for(data)?;
    let j_theta0 = evaluator.loss(&case.theta0);

    let runs = tuning::tune_seeds(&evaluator, &case.bounds, &case.theta0, &pso, &seeds)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    for r in &runs {
        println!("{} seed {}: J(theta*) = {:.6}", case.name, r.seed, r.result.best_value);
    }
    let best = best_of(&runs)?;
    let validation = benchlab::validate(&case, &best.result.best_theta)?;

    let checks = Checks {
        initial_loss_within_1pct: (j_theta0 - case.known.j_theta0).abs() <= 0.01 * case.known.j_theta0,
        tuned_loss_target: case.target,
        tuned_loss_within_target: case.target.accepts(best.result.best_value),
        stable: validation.stable,
        poles_within_margin: validation.max_pole_magnitude < 1.0 - POLE_MARGIN,
        bound_violations: runs.iter().map(|r| r.bound_tally.violations).sum(),
        induced_bound_violations: runs.iter().map(|r| r.bound_tally.induced_violations).sum(),
    };
    let pass = checks.initial_loss_within_1pct && checks.tuned_loss_within_target && checks.stable;
    let summary = ReproduceSummary {
        example: case.name.clone(),
        status: if pass { "PASS" } else { "FAIL" },
        samples: case.samples(),
        sample_time: case.sample_time,
        seeds,
        pso,
        j_theta0,
        known: case.known.clone(),
        best: Best {
            seed: best.seed,
            j_tuned: best.result.best_value,
            theta: best.result.best_theta.clone(),
        },
        runs: runs.iter().map(SeedSummary::from_outcome).collect(),
        validation: ValidationSummary::from_report(&validation),
        checks,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write_trace(&dir.join("trace.csv"), &runs)?;
    write_step_response(&dir.join("step_response.csv"), &validation)?;
    println!(
        "{}: J(theta0) = {:.4}, best J(theta*) = {:.6} (seed {}), stable = {}, {}",
        case.name, j_theta0, best.result.best_value, best.seed, validation.stable, summary.status
    );

    if let Some(other) = match case.name.as_str() {
        "example3_fo" => Some("example3_io"),
        "example3_io" => Some("example3_fo"),
        _ => None,
    } {
        let sibling = root.join(other).join("summary.json");
        if sibling.exists() {
            write_comparison(&root, &case, &summary.best, &sibling, other)?;
        }
    }
    Ok(())
}

fn read_best(path: &Path) -> Result<(Vec<f64>, f64), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let best = &v["best"];
    let theta: Option<Vec<f64>> =
        best["theta"].as_array().and_then(|a| a.iter().map(|x| x.as_f64()).collect());
    match (theta, best["j_tuned"].as_f64()) {
        (Some(t), Some(j)) => Ok((t, j)),
        _ => Err(CliError::Data(format!("{}: missing best.theta / best.j_tuned", path.display()))),
    }
}

fn write_comparison(
    root: &Path,
    case: &BenchmarkCase,
    best: &Best,
    sibling: &Path,
    other: &str,
) -> Result<(), CliError> {
    let other_case = benchlab::builtin_case(other)?;
    let (other_theta, other_j) = read_best(sibling)?;
    let this = Tuned { case, theta: &best.theta, loss: best.j_tuned };
    let that = Tuned { case: &other_case, theta: &other_theta, loss: other_j };
    let (fo, io) = if case.template.kind == ControllerKind::Fopid { (this, that) } else { (that, this) };
    let cmp = benchlab::compare_fo_io(fo, io)?;
    #[derive(Serialize)]
    struct Report<'a> {
        fo: &'a benchlab::ControllerMetrics,
        io: &'a benchlab::ControllerMetrics,
        fo_lower_loss: bool,
        fo_lower_tracking_error: bool,
        fo_lower_max_input: bool,
    }
    write_json(
        &root.join("example3_comparison.json"),
        &Report {
            fo: &cmp.fo,
            io: &cmp.io,
            fo_lower_loss: cmp.fo_lower_loss,
            fo_lower_tracking_error: cmp.fo_lower_tracking_error,
            fo_lower_max_input: cmp.fo_lower_max_input,
        },
    )?;
    let t = &cmp.traces;
    write_columns(
        &root.join("example3_comparison.csv"),
        &["t", "r", "y_model", "y_fo", "y_io", "abs_error_fo", "abs_error_io", "u_fo", "u_io"],
        &[&t.time, &t.r, &t.y_model, &t.y_fo, &t.y_io, &t.abs_error_fo, &t.abs_error_io, &t.u_fo, &t.u_io],
    )?;
    println!(
        "example3: FOPID J = {:.6}, IOPID J = {:.6}, FOPID lower: {}",
        cmp.fo.loss, cmp.io.loss, cmp.fo_lower_loss
    );
    Ok(())
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    RunConfig::parse(&text)
}

/// Discrete controller as emitted by `tune`.
#[derive(Debug, Serialize)]
struct ControllerReport {
    kind: ControllerKind,
    theta: Vec<f64>,
    sample_time: f64,
    /// Multiplied-out coefficients, highest power of `z` first. High-order
    /// fractional controllers are better implemented from `structure`.
    num: Vec<f64>,
    den: Vec<f64>,
    structure: Block,
}

impl ControllerReport {
    fn new(template: &ControllerTemplate, theta: &[f64], c: &DiscreteTf) -> Self {
        let (num, den) = c.num_den();
        Self {
            kind: template.kind,
            theta: theta.to_vec(),
            sample_time: c.sample_time(),
            num: num.coeffs().to_vec(),
            den: den.coeffs().to_vec(),
            structure: c.block().clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct TuneSummary {
    data: String,
    samples: usize,
    seeds: Vec<u64>,
    pso: PsoConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    j_theta0: Option<f64>,
    best: Best,
    runs: Vec<SeedSummary>,
    loss: LossBreakdown,
    stability_bound: Option<StabilityBoundReport>,
    controller: ControllerReport,
}

fn tune(config_path: &Path, data: Option<&Path>, opts: &RunOpts) -> Result<(), CliError> {
    let cfg = load_config(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let data_path = match (data, &cfg.data) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(rel)) => base.join(rel),
        (None, None) => {
            return Err(CliError::Usage("no data file: pass --data or set `data` in the config".into()))
        }
    };
    let seeds = resolve_seeds(opts, cfg.seeds.as_deref(), &[1])?;
    let pso = apply_overrides(cfg.pso.clone(), opts)?;
    let out = opts
        .out_dir
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(|d| base.join(d)))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT).join("tune"));

    let record = read_data(&data_path, cfg.sample_time)?;
    let template = cfg.template();
    let md = cfg.reference_model_discrete()?;
    let evaluator = LossEvaluator::new(template, record, &md)?;
    let theta0 = cfg.theta0.clone().unwrap_or_default();
    if !theta0.is_empty() && !cfg.bounds.contains(&theta0) {
        eprintln!("warning: theta0 lies outside the bounds and is not injected");
    }
    let runs = tuning::tune_seeds(&evaluator, &cfg.bounds, &theta0, &pso, &seeds)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let best = best_of(&runs)?;
    let theta = &best.result.best_theta;
    let eval = evaluator.evaluate(theta)?;
    let controller = template.realize(theta).map_err(|e| CliError::Numerical(e.to_string()))?;

    ensure_dir(&out)?;
    let summary = TuneSummary {
        data: data_path.display().to_string(),
        samples: evaluator.data().len(),
        seeds,
        pso,
        j_theta0: cfg.theta0.as_ref().map(|t| evaluator.loss(t)),
        best: Best { seed: best.seed, j_tuned: best.result.best_value, theta: theta.clone() },
        runs: runs.iter().map(SeedSummary::from_outcome).collect(),
        loss: eval.breakdown,
        stability_bound: eval.bound,
        controller: ControllerReport::new(&template, theta, &controller),
    };
    write_json(&out.join("tune_summary.json"), &summary)?;
    write_trace(&out.join("trace.csv"), &runs)?;
    println!("best J(theta*) = {:.6} (seed {}), theta* = {:?}", best.result.best_value, best.seed, theta);
    Ok(())
}

fn validate(
    config: Option<&Path>,
    example: Option<&str>,
    theta: &str,
    out_dir: Option<&Path>,
) -> Result<(), CliError> {
    let theta = parse_theta(theta)?;
    let (plant, md, template, bounds, r, label) = match (config, example) {
        (_, Some(name)) => {
            let case = benchlab::builtin_case(name)?;
            (
                case.plant_discrete().map_err(|e| CliError::Numerical(e.to_string()))?,
                case.reference_model_discrete().map_err(|e| CliError::Numerical(e.to_string()))?,
                case.template,
                case.bounds.clone(),
                case.reference_signal(),
                case.name.clone(),
            )
        }
        (Some(path), None) => {
            let cfg = load_config(path)?;
            let plant = cfg
                .plant_discrete()?
                .ok_or_else(|| CliError::Usage("validate needs a `plant` entry in the config".into()))?;
            // horizon: the data file's length when present, else 10 s
            let base = path.parent().unwrap_or(Path::new("."));
            let n = match &cfg.data {
                Some(rel) if base.join(rel).exists() => read_data(&base.join(rel), cfg.sample_time)?.len(),
                _ => (10.0 / cfg.sample_time).round() as usize + 1,
            };
            let r = Signal::step(n, cfg.sample_time).map_err(|e| CliError::Data(e.to_string()))?;
            (
                plant,
                cfg.reference_model_discrete()?,
                cfg.template(),
                cfg.bounds.clone(),
                r,
                "validate".to_string(),
            )
        }
        (None, None) => return Err(CliError::Usage("pass --config or --example".into())),
    };
    if theta.len() != template.dimension() {
        return Err(CliError::Usage(format!(
            "--theta has {} values, controller needs {}",
            theta.len(),
            template.dimension()
        )));
    }
    if !bounds.contains(&theta) {
        eprintln!("warning: theta lies outside the configured bounds");
    }
    let report = benchlab::validate_with(&plant, &md, &template, &theta, &r)
        .map_err(|e| CliError::Numerical(format!("cannot validate theta: {e}")))?;
    let out = out_dir.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT).join(&label));
    ensure_dir(&out)?;
    write_json(&out.join("validation.json"), &report)?;
    write_step_response(&out.join("step_response.csv"), &report)?;
    println!(
        "stable = {}, max |pole| = {:.9}, tracking error l1 = {:.6}, final y = {:.6}",
        report.stable,
        report.max_pole_magnitude,
        report.tracking_error_l1,
        report.step_traces.y_closed_loop.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn collect(example: &str, out_dir: Option<&Path>) -> Result<(), CliError> {
    let case = benchlab::builtin_case(example)?;
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT).join(&case.name));
    ensure_dir(&dir)?;
    let data = benchlab::collect_data(&case)?;
    write_data(&dir.join("data.csv"), &data)?;
    write_json(&dir.join("run_config.json"), &RunConfig::for_case(&case, &PsoConfig::default(), &[1]))?;
    println!("wrote {} samples to {}", data.len(), dir.join("data.csv").display());
    Ok(())
}
