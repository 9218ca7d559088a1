//! Scenario configuration: JSON loading with defaults, validation, scale
//! presets and content hashes.
//!
//! A configuration file is an overlay: every key is optional and missing keys
//! keep their defaults. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dp::GridSpec;
use crate::error::{Error, Result};
use crate::fiscal::FiscalRules;
use crate::model::{Employment, Env, ModelParams};
use crate::rl::TrainConfig;

/// One policy-map panel to emit: the optimal actions over the
/// (pension, wage) grid at a fixed age and employment state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Panel {
    pub age: u32,
    pub employment: Employment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub runs: usize,
    pub agents: usize,
    pub seed: u64,
    /// Worker threads for agent-level parallelism; 0 uses all cores.
    pub workers: usize,
    /// Population size person-year counts are rescaled to.
    pub scale_to: usize,
    pub panels: Vec<Panel>,
    pub reference_prev_wage_knot: usize,
    pub reference_tis_knot: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let panels = [30, 40, 55, 60, 62, 64]
            .into_iter()
            .flat_map(|age| {
                [Employment::Employed, Employment::Unemployed]
                    .into_iter()
                    .map(move |employment| Panel { age, employment })
            })
            .collect();
        SimulationConfig {
            runs: 3,
            agents: 10_000,
            seed: 2020,
            workers: 0,
            scale_to: 100_000,
            panels,
            reference_prev_wage_knot: 4,
            reference_tis_knot: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Full,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            other => Err(Error::config("scale", format!("unknown preset `{other}` (desk|full)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelParams,
    pub fiscal: FiscalRules,
    pub grid: GridSpec,
    pub train: TrainConfig,
    pub simulation: SimulationConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "baseline".to_string(),
            model: ModelParams::default(),
            fiscal: FiscalRules::default(),
            grid: GridSpec::default(),
            train: TrainConfig::default(),
            simulation: SimulationConfig::default(),
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl ScenarioConfig {
    pub fn preset(scale: Scale) -> Self {
        let mut cfg = ScenarioConfig::default();
        match scale {
            Scale::Desk => {
                cfg.grid = GridSpec::desk();
                cfg.train.total_env_steps = 3_000_000;
                cfg.simulation.runs = 3;
                cfg.simulation.agents = 10_000;
            }
            Scale::Full => {
                cfg.train.total_env_steps = 10_000_000;
                cfg.simulation.runs = 10;
                cfg.simulation.agents = 50_000;
            }
        }
        cfg
    }

    pub fn env(&self) -> Env<'_> {
        Env::new(&self.model, &self.fiscal)
    }

    /// Parses a JSON overlay on top of `base`.
    pub fn from_json_with_base(text: &str, base: &ScenarioConfig) -> Result<Self> {
        let overlay: Value = if text.trim().is_empty() {
            Value::Object(Default::default())
        } else {
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?
        };
        if !overlay.is_object() {
            return Err(Error::Parse("top level must be a JSON object".into()));
        }
        let mut merged = serde_json::to_value(base).map_err(|e| Error::Parse(e.to_string()))?;
        merge(&mut merged, overlay);
        let cfg: ScenarioConfig = serde_json::from_value(merged).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_with_base(text, &ScenarioConfig::default())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.fiscal.validate()?;
        self.grid.validate()?;
        self.train.validate()?;
        let s = &self.simulation;
        if s.runs < 1 {
            return Err(Error::config("simulation.runs", "must be >= 1"));
        }
        if s.agents < 1 {
            return Err(Error::config("simulation.agents", "must be >= 1"));
        }
        if s.reference_prev_wage_knot >= self.grid.n_prev_wage {
            return Err(Error::config("simulation.reference_prev_wage_knot", "outside the prev_wage grid"));
        }
        if s.reference_tis_knot >= self.grid.n_tis {
            return Err(Error::config("simulation.reference_tis_knot", "outside the tis grid"));
        }
        for p in &s.panels {
            if p.age < self.model.first_age || p.age > self.model.last_age {
                return Err(Error::config("simulation.panels", format!("age {} outside the horizon", p.age)));
            }
        }
        // the wage grid must start at or below the wage floor; offers above the
        // top knot are clamped by the interpolator
        if self.grid.wage_knots()[0] > self.model.wage.wage_floor + 1e-9 {
            return Err(Error::config("grid.wage_origin", "wage grid must start at or below model.wage.wage_floor"));
        }
        Ok(())
    }

    /// Hash of the whole configuration.
    pub fn content_hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    /// Hash of the decision process (model parameters and fiscal rules).
    /// Solver artifacts carry this hash.
    pub fn model_hash(&self) -> String {
        let v = serde_json::json!({ "model": self.model, "fiscal": self.fiscal });
        sha256_hex(&serde_json::to_vec(&v).expect("config serializes"))
    }

    /// Model hash with the reform fields reset to their defaults. Two runs are
    /// comparable when this hash agrees.
    pub fn reform_neutral_hash(&self) -> String {
        let mut model = self.model.clone();
        let mut fiscal = self.fiscal.clone();
        let (dm, df) = (ModelParams::default(), FiscalRules::default());
        model.min_retirement_age = dm.min_retirement_age;
        fiscal.ubi_enabled = df.ubi_enabled;
        fiscal.ubi_amount = df.ubi_amount;
        fiscal.flat_tax_rate = df.flat_tax_rate;
        fiscal.ubi_keeps_net_floor = df.ubi_keeps_net_floor;
        let v = serde_json::json!({ "model": model, "fiscal": fiscal });
        sha256_hex(&serde_json::to_vec(&v).expect("config serializes"))
    }
}

/// Reads and validates a configuration file on top of the defaults.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    load_config_with_base(path, &ScenarioConfig::default())
}

pub fn load_config_with_base(path: impl AsRef<Path>, base: &ScenarioConfig) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScenarioConfig::from_json_with_base(&text, base)
}
