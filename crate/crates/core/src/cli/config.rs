use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::boost::{AssumptionProfile, BoostFamily, BoostMap};
use crate::density::{Grid, SolverSettings};
use crate::error::{Error, Result};
use crate::flow::{FlowFamily, FlowModel};
use crate::model::{ModelSpec, PhaseSpace};
use crate::stability::FoguelSettings;
use crate::trajectory::InitialDistribution;

/// Everything a run needs; one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub classify: FoguelSettings,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub flow: FlowFamily,
    pub boost: BoostFamily,
    pub lambda: f64,
    /// Defaults to the phase space implied by the boost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_space: Option<PhaseSpace>,
    /// Defaults to A on the half-line, B on an interval, B' with a plateau.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<AssumptionProfile>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            flow: FlowFamily::LinearDecay { a: 1.0 },
            boost: BoostFamily::AdditiveBoost { l: 1.0 },
            lambda: 1.0,
            phase_space: None,
            profile: None,
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec> {
        let profile = self.profile.unwrap_or(match &self.boost {
            BoostFamily::PlateauBoost { .. } => AssumptionProfile::BPrime,
            BoostFamily::SaturatingBoost { .. } => AssumptionProfile::B,
            _ => AssumptionProfile::A,
        });
        let mut boost = BoostMap::new(self.boost.clone(), profile)?;
        if self.profile.is_none() && boost.phase_space() != PhaseSpace::HalfLine && profile == AssumptionProfile::A {
            boost = BoostMap::new(self.boost.clone(), AssumptionProfile::B)?;
        }
        let space = boost.phase_space();
        if let Some(declared) = self.phase_space {
            if declared != space {
                return Err(Error::Config(format!(
                    "phase_space {declared:?} does not match the boost's {space:?}"
                )));
            }
        }
        let flow = FlowModel::new(self.flow.clone(), space);
        let model = ModelSpec::new(flow, boost, self.lambda)?;
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Ignored on an interval, where the grid spans `[0, M]`.
    pub x_max: f64,
    pub n_cells: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { x_max: 8.0, n_cells: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub t_end: f64,
    /// Output times; empty means `[0, t_end]`.
    pub checkpoints: Vec<f64>,
    pub initial: InitialDistribution,
    /// Evolved alongside `initial` for the contraction series.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_initial: Option<InitialDistribution>,
    /// Number of full skeletons written to `paths.csv`.
    pub paths_saved: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            seed: 42,
            t_end: 2.0,
            checkpoints: Vec::new(),
            initial: InitialDistribution::Uniform { a: 0.0, b: 1.0 },
            second_initial: None,
            paths_saved: 10,
        }
    }
}

impl SimConfig {
    pub fn times(&self) -> Vec<f64> {
        if self.checkpoints.is_empty() {
            vec![0.0, self.t_end]
        } else {
            self.checkpoints.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

/// A scalar, an explicit list, or `start..=stop` in steps of `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamRange {
    Value(f64),
    List(Vec<f64>),
    Span { start: f64, stop: f64, step: f64 },
}

impl ParamRange {
    pub fn values(&self) -> Result<Vec<f64>> {
        let out = match self {
            ParamRange::Value(v) => vec![*v],
            ParamRange::List(v) => v.clone(),
            ParamRange::Span { start, stop, step } => {
                if !(start.is_finite() && stop.is_finite() && *step > 0.0 && step.is_finite() && stop >= start) {
                    return Err(Error::Config(format!(
                        "malformed range start={start} stop={stop} step={step}"
                    )));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                if n > 1_000_000 {
                    return Err(Error::Config(format!("range has {n} points")));
                }
                (0..=n).map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12).collect()
            }
        };
        if out.is_empty() || out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("range must contain finite values".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub a: ParamRange,
    pub b: ParamRange,
    pub lambda: ParamRange,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    crate::stability::DEFAULT_TOL
}

/// Parameters of the formula-verification battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Random `(τ, t, x)` triples for the `∂r/∂τ` check.
    pub n_samples: usize,
    pub n_paths: usize,
    pub minorization_x0: Vec<f64>,
    pub minorization_t: f64,
    pub minorization_radius: f64,
    pub transition_cases: usize,
    pub dyson_lambda_t: Vec<f64>,
    pub resolvent_cells: usize,
    pub resolvent_lambdas: Vec<f64>,
    /// Plateau model used for the resolvent check when the run model has none.
    pub bounded_model: ModelConfig,
    /// Test hook: perturbs the computed flow Jacobian.
    pub corrupt_jacobian: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_samples: 200,
            n_paths: 20_000,
            minorization_x0: vec![0.5, 1.0, 5.0],
            minorization_t: 2.0,
            minorization_radius: 0.1,
            transition_cases: 5,
            dyson_lambda_t: vec![0.5, 1.0, 2.0],
            resolvent_cells: 400,
            resolvent_lambdas: vec![0.5, 1.0, 5.0],
            bounded_model: ModelConfig {
                flow: FlowFamily::LinearDecay { a: 1.0 },
                boost: BoostFamily::PlateauBoost {
                    k: 6.0,
                    m: 10.0,
                    inner: crate::expr::Expr::parse("(x + 10)/2").expect("valid expression"),
                },
                lambda: 1.0,
                phase_space: None,
                profile: None,
            },
            corrupt_jacobian: false,
        }
    }
}

impl RunConfig {
    /// Parses a JSON document after applying dotted overrides such as `sim.seed=7`.
    pub fn from_json(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut tree: Value = if text.trim().is_empty() {
            Value::Object(Default::default())
        } else {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?
        };
        for (path, raw) in overrides {
            set_path(&mut tree, path, raw)?;
        }
        let cfg: RunConfig = serde_json::from_value(tree).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let s = &self.sim;
        if s.n_paths == 0 {
            return Err(Error::Config("sim.n_paths must be >= 1".into()));
        }
        if !(s.t_end > 0.0 && s.t_end.is_finite()) {
            return Err(Error::Config(format!("sim.t_end must be > 0, got {}", s.t_end)));
        }
        let times = s.times();
        if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sim.checkpoints must be nonnegative and strictly increasing".into()));
        }
        if !(self.grid.x_max > 0.0 && self.grid.x_max.is_finite()) || self.grid.n_cells < 2 {
            return Err(Error::Config("grid needs x_max > 0 and n_cells >= 2".into()));
        }
        if !(self.model.lambda > 0.0 && self.model.lambda.is_finite()) {
            return Err(Error::Config(format!("model.lambda must be > 0, got {}", self.model.lambda)));
        }
        Ok(())
    }

    /// The model, or a configuration error.
    pub fn model(&self) -> Result<ModelSpec> {
        self.model.build().map_err(as_config)
    }

    /// The grid: `[0, M]` on an interval, `[0, x_max]` on the half-line.
    pub fn grid(&self, model: &ModelSpec) -> Result<Grid> {
        let x_max = model.phase_space().upper().unwrap_or(self.grid.x_max);
        Grid::new(x_max, self.grid.n_cells).map_err(as_config)
    }

    /// SHA-256 of the canonical serialization (sorted keys, defaults filled in),
    /// leaving out the output section, which does not affect results.
    pub fn hash(&self) -> String {
        let mut canonical = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = canonical.as_object_mut() {
            map.remove("output");
        }
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }
}

pub(crate) fn as_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn set_path(tree: &mut Value, path: &str, raw: &str) -> Result<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = tree;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("malformed override key '{path}'")));
    }
    for key in &keys[..keys.len() - 1] {
        let map = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override '{path}': '{key}' is not a section")))?;
        node = map.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let map = node
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("override '{path}' does not name a field")))?;
    map.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
