//! Config file loading: a key-value tree with sections [arrivals],
//! [service.b1], [service.b2], [costs], [damage], [control], plus
//! `--set key.path=value` overrides applied before any invariant check.

use damq_core::{BatchDistribution, CostProfile, DamModel, ServiceDistribution};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub arrivals: ArrivalsCfg,
    pub service: ServicesCfg,
    pub costs: CostsCfg,
    pub damage: DamageCfg,
    pub control: ControlCfg,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalsCfg {
    /// Poisson rate λ of batch arrival epochs.
    pub rate: f64,
    /// Batch-size pmf r_1.. (must sum to 1).
    pub batch: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServicesCfg {
    pub b1: ServiceCfg,
    pub b2: ServiceCfg,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ServiceCfg {
    Exponential { rate: f64 },
    Erlang { shape: u32, rate: f64 },
    Deterministic { duration: f64 },
    Hyperexponential { weights: Vec<f64>, rates: Vec<f64> },
}

impl ServiceCfg {
    fn build(&self) -> ServiceDistribution {
        match self {
            ServiceCfg::Exponential { rate } => ServiceDistribution::Exponential { rate: *rate },
            ServiceCfg::Erlang { shape, rate } => {
                ServiceDistribution::Erlang { shape: *shape, rate: *rate }
            }
            ServiceCfg::Deterministic { duration } => {
                ServiceDistribution::Deterministic { duration: *duration }
            }
            ServiceCfg::Hyperexponential { weights, rates } => {
                ServiceDistribution::HyperExponential {
                    weights: weights.clone(),
                    rates: rates.clone(),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CostsCfg {
    Constant { c: f64 },
    Linear { c_high: f64, c_low: f64 },
    Table { values: Vec<f64> },
}

impl CostsCfg {
    fn build(&self) -> CostProfile {
        match self {
            CostsCfg::Constant { c } => CostProfile::Constant { c: *c },
            CostsCfg::Linear { c_high, c_low } => {
                CostProfile::Linear { c_high: *c_high, c_low: *c_low }
            }
            CostsCfg::Table { values } => CostProfile::Table { values: values.clone() },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DamageCfg {
    pub j1: f64,
    pub j2: f64,
}

fn default_c_min() -> f64 {
    -10.0
}
fn default_c_max() -> f64 {
    10.0
}
fn default_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlCfg {
    /// Threshold level L.
    pub level: usize,
    /// Optimizer bracket and tolerance for `optimize`/`sweep`.
    #[serde(default = "default_c_min")]
    pub c_min: f64,
    #[serde(default = "default_c_max")]
    pub c_max: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl FileConfig {
    pub fn build_model(&self) -> Result<DamModel, CliError> {
        let batches = BatchDistribution::new(self.arrivals.batch.clone())
            .map_err(|e| CliError::config(format!("[arrivals] batch: {e}")))?;
        DamModel::new(
            self.arrivals.rate,
            batches,
            self.service.b1.build(),
            self.service.b2.build(),
            self.control.level,
            (self.damage.j1, self.damage.j2),
            self.costs.build(),
        )
        .map_err(|e| CliError::config(format!("model invariant: {e}")))
    }
}

/// Parse the file, apply overrides onto the raw value tree, then
/// deserialize — so an override participates in every invariant check.
pub fn load_config(path: &str, overrides: &[String]) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {path}: {e}")))?;
    let mut tree: toml::Value = toml::from_str(&text)
        .map_err(|e| CliError::config(format!("{path}: {e}")))?;
    for item in overrides {
        apply_override(&mut tree, item)?;
    }
    tree.try_into()
        .map_err(|e| CliError::config(format!("{path}: {e}")))
}

fn apply_override(tree: &mut toml::Value, item: &str) -> Result<(), CliError> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override '{item}' is not key.path=value")))?;
    // Reuse the TOML value grammar for the right-hand side; bare words
    // that fail to parse (e.g. family names) fall back to strings.
    let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .map(|mut t| t.remove("v").unwrap())
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    let mut node = tree;
    for key in &keys[..keys.len() - 1] {
        node = node
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("override '{path}': '{key}' is not a table")))?
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    node.as_table_mut()
        .ok_or_else(|| CliError::config(format!("override '{path}': parent is not a table")))?
        .insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
