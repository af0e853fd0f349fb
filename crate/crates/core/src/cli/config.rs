use serde::{Deserialize, Serialize};

use crate::benchlab::{BenchmarkCase, Model};
use crate::folib::{ControllerKind, ControllerTemplate, OustaloupConfig};
use crate::lti::{ContinuousTf, DiscreteTf, LtiError};
use crate::swarm::{Bounds, PsoConfig};

use super::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discretization {
    #[default]
    Tustin,
}

/// A plant or reference model as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Continuous {
        num: Vec<f64>,
        den: Vec<f64>,
        #[serde(default)]
        dead_time: f64,
        #[serde(default)]
        method: Discretization,
    },
    Discrete {
        num: Vec<f64>,
        den: Vec<f64>,
        #[serde(default)]
        delay: usize,
        /// Defaults to the config's sample time.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample_time: Option<f64>,
    },
}

impl ModelSpec {
    pub fn from_model(model: &Model) -> Self {
        match model {
            Model::Continuous(g) => {
                let (num, den) = g.num_den();
                ModelSpec::Continuous {
                    num: num.coeffs().to_vec(),
                    den: den.coeffs().to_vec(),
                    dead_time: g.dead_time(),
                    method: Discretization::Tustin,
                }
            }
            Model::Discrete(g) => {
                let (num, den) = g.num_den();
                ModelSpec::Discrete {
                    num: num.coeffs().to_vec(),
                    den: den.coeffs().to_vec(),
                    delay: g.delay_samples(),
                    sample_time: None,
                }
            }
        }
    }

    pub fn to_model(&self, ts: f64) -> Result<Model, LtiError> {
        Ok(match self {
            ModelSpec::Continuous { num, den, dead_time, .. } => {
                Model::Continuous(ContinuousTf::new(num.clone(), den.clone())?.with_dead_time(*dead_time)?)
            }
            ModelSpec::Discrete { num, den, delay, sample_time } => Model::Discrete(
                DiscreteTf::new(num.clone(), den.clone(), sample_time.unwrap_or(ts))?.with_delay(*delay),
            ),
        })
    }
}

/// Everything needed to tune from a data file, and optionally validate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub controller: ControllerKind,
    #[serde(default)]
    pub oustaloup: OustaloupConfig,
    pub sample_time: f64,
    pub reference_model: ModelSpec,
    pub bounds: Bounds,
    /// Parameters of the data-collection controller, injected into the swarm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    #[serde(default)]
    pub pso: PsoConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    /// Data CSV, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    /// True plant, used only by `validate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<ModelSpec>,
}

impl RunConfig {
    /// Config mirroring a builtin case, pointing at `data.csv` beside it.
    pub fn for_case(case: &BenchmarkCase, pso: &PsoConfig, seeds: &[u64]) -> Self {
        Self {
            controller: case.template.kind,
            oustaloup: case.template.oustaloup,
            sample_time: case.sample_time,
            reference_model: ModelSpec::from_model(&case.reference_model),
            bounds: case.bounds.clone(),
            theta0: Some(case.theta0.clone()),
            pso: pso.clone(),
            seeds: Some(seeds.to_vec()),
            data: Some("data.csv".into()),
            out_dir: None,
            plant: Some(ModelSpec::from_model(&case.plant)),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Data(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CliError> {
        let dim = self.controller.dimension();
        if self.bounds.dim() != dim {
            return Err(CliError::Data(format!(
                "config: bounds have dimension {}, {:?} needs {dim}",
                self.bounds.dim(),
                self.controller
            )));
        }
        if let Some(t0) = &self.theta0 {
            if t0.len() != dim {
                return Err(CliError::Data(format!(
                    "config: theta0 has {} entries, expected {dim}",
                    t0.len()
                )));
            }
        }
        if !(self.sample_time > 0.0 && self.sample_time.is_finite()) {
            return Err(CliError::Data(format!("config: invalid sample_time {}", self.sample_time)));
        }
        if self.controller == ControllerKind::Fopid {
            self.oustaloup.validate().map_err(|e| CliError::Data(format!("config: {e}")))?;
        }
        if self.seeds.as_ref().is_some_and(|s| s.is_empty()) {
            return Err(CliError::Data("config: seeds must not be empty".into()));
        }
        self.pso.validate().map_err(|e| CliError::Data(format!("config: {e}")))?;
        Ok(())
    }

    pub fn template(&self) -> ControllerTemplate {
        match self.controller {
            ControllerKind::Fopid => ControllerTemplate::fopid(self.oustaloup, self.sample_time),
            ControllerKind::Iopid => ControllerTemplate::iopid(self.sample_time),
        }
    }

    pub fn reference_model_discrete(&self) -> Result<DiscreteTf, CliError> {
        discretize(&self.reference_model, self.sample_time, "reference model")
    }

    pub fn plant_discrete(&self) -> Result<Option<DiscreteTf>, CliError> {
        self.plant.as_ref().map(|p| discretize(p, self.sample_time, "plant")).transpose()
    }
}

fn discretize(spec: &ModelSpec, ts: f64, what: &str) -> Result<DiscreteTf, CliError> {
    let model = spec.to_model(ts).map_err(|e| CliError::Data(format!("config: {what}: {e}")))?;
    model.discretize(ts).map_err(|e| match e {
        LtiError::SampleTimeMismatch(a, b) => {
            CliError::SampleTime(format!("{what} runs at {a} s, config sample_time is {b} s"))
        }
        other => CliError::Numerical(format!("{what}: {other}")),
    })
}

/// Parses `1..5`, `1,3,7` or mixes like `1..3,9`; ranges are inclusive.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range '{part}'"))?;
            let b: u64 =
                b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad seed range '{part}'"))?;
            if a > b {
                return Err(format!("empty seed range '{part}'"));
            }
            seeds.extend(a..=b);
        } else {
            seeds.push(part.parse().map_err(|_| format!("bad seed '{part}'"))?);
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(seeds)
}
