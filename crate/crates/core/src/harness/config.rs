use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::driver::{Method, RunOptions};
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::models::{ConstantModel, EllipticFluxModel, EllipticParams, SyntheticNormalModel};
use crate::refinement::Guard;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// Reference probability with its standard error (zero when exact).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub probability: f64,
    pub std_error: f64,
}

/// JSON experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub y: f64,
    pub gamma: f64,
    pub q: f64,
    #[serde(rename = "N")]
    pub n: u64,
    pub k: f64,
    pub epsilons: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub skip_redundant: bool,
    #[serde(default)]
    pub guard: Guard,
    #[serde(default = "default_l_max")]
    pub l_max: usize,
    /// Needed for RMSE when the model has no analytic probability.
    #[serde(default)]
    pub reference: Option<Reference>,
}

fn default_l_max() -> usize {
    RunOptions::default().l_max
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::Config("epsilons must not be empty".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("epsilon must be positive, got {e}")));
        }
        if self.runs < 1 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.l_max < 2 {
            return Err(Error::Config("l_max must be at least 2".into()));
        }
        self.estimator(self.epsilons[0])
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn estimator(&self, epsilon: f64) -> Result<EstimatorConfig> {
        EstimatorConfig::new(self.y, epsilon, self.gamma, self.q, self.n, self.k)
    }
}

/// One of the shipped models, built from a `ModelSpec`.
#[derive(Clone, Debug)]
pub enum ShippedModel {
    Synthetic(SyntheticNormalModel),
    Elliptic(EllipticFluxModel),
    Constant(ConstantModel),
}

fn take(params: &mut BTreeMap<String, f64>, key: &str) -> Option<f64> {
    params.remove(key)
}

/// `q` is the experiment's cost exponent; the synthetic model charges
/// `h^-q` per solve.
pub fn build_model(spec: &ModelSpec, q: f64) -> Result<ShippedModel> {
    let mut params = spec.params.clone();
    let model = match spec.name.as_str() {
        "synthetic-normal" => {
            let b = take(&mut params, "b").unwrap_or(0.1);
            ShippedModel::Synthetic(SyntheticNormalModel::new(b, q)?)
        }
        "elliptic-flux-1d" => {
            let d = EllipticParams::default();
            let cells = take(&mut params, "master_cells").unwrap_or(d.master_cells as f64);
            if cells.fract() != 0.0 || cells < 1.0 {
                return Err(Error::Config(format!(
                    "master_cells must be an integer, got {cells}"
                )));
            }
            let p = EllipticParams {
                master_cells: cells as usize,
                sigma: take(&mut params, "sigma").unwrap_or(d.sigma),
                rho: take(&mut params, "rho").unwrap_or(d.rho),
            };
            ShippedModel::Elliptic(EllipticFluxModel::new(p)?)
        }
        "constant" => {
            let value = take(&mut params, "value")
                .ok_or_else(|| Error::Config("constant model needs params.value".into()))?;
            ShippedModel::Constant(ConstantModel { value })
        }
        other => return Err(Error::Config(format!("unknown model '{other}'"))),
    };
    if let Some(extra) = params.keys().next() {
        return Err(Error::Config(format!(
            "unknown parameter '{extra}' for model '{}'",
            spec.name
        )));
    }
    Ok(model)
}
