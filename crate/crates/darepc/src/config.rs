//! Experiment configuration: a TOML file resolved against per-plant defaults.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantKind {
    Autoland,
    Dronerace,
}

/// A named box from the plant, or explicit `[lo, hi]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoxSpec {
    Preset(String),
    Bounds(Vec<[f64; 2]>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub bounds: Option<Vec<[f64; 2]>>,
    pub resolution: Option<usize>,
    pub nominal: Option<Vec<f64>>,
}

/// AutoLand uses the corridor pairs, DroneRace the half-width.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequirementSection {
    pub x: Option<[f64; 2]>,
    pub y: Option<[f64; 2]>,
    pub z: Option<[f64; 2]>,
    pub half_width: Option<f64>,
    pub horizon: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSection {
    pub pr: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub feature_map: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarepcSection {
    pub removal_threshold: Option<f64>,
    pub max_state_depth: Option<usize>,
    pub max_env_shrinks: Option<usize>,
    pub probe_budget: Option<usize>,
    pub generator_factor: Option<usize>,
    /// Blowup cap as a multiple of the initial requirement width; 0 disables it.
    pub width_cap_factor: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    /// Perturbation radii of the along-reference sampler (DroneRace).
    pub tube_radius: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    pub n_sims: Option<usize>,
    /// Simulations from removed cells after a safe outcome.
    pub n_outside: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub x0: Option<Vec<f64>>,
    pub env: Option<Vec<f64>>,
    pub horizon: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub resolution: Option<usize>,
    pub n_per_cell: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantKind,
    pub seed: u64,
    pub initial_set: Option<BoxSpec>,
    #[serde(default)]
    pub env: EnvSection,
    #[serde(default)]
    pub requirement: RequirementSection,
    #[serde(default)]
    pub contract: ContractSection,
    #[serde(default)]
    pub darepc: DarepcSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub sweep: SweepSection,
    /// Overrides of the plant parameter struct, key by key.
    pub plant_params: Option<toml::Table>,
    /// Overrides of the observer parameter struct, key by key.
    pub observer: Option<toml::Table>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow!("config: {}", e.message()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// SHA-256 of the canonical serialization with the seed left out, so
    /// `--seed` overrides keep the hash; first 16 hex digits.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        let text = toml::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Applies `overrides` to the serialized `base`, rejecting unknown keys.
pub fn overlay<T: Serialize + DeserializeOwned>(base: &T, overrides: Option<&toml::Table>, what: &str) -> Result<T> {
    let Some(over) = overrides else {
        return Ok(toml::Value::try_from(base)?.try_into()?);
    };
    let mut v = toml::Value::try_from(base)?;
    merge(&mut v, over, what)?;
    v.try_into().map_err(|e: toml::de::Error| anyhow!("{what}: {}", e.message()))
}

fn merge(into: &mut toml::Value, over: &toml::Table, path: &str) -> Result<()> {
    let table = into.as_table_mut().ok_or_else(|| anyhow!("{path} is not a table"))?;
    for (k, v) in over {
        let here = format!("{path}.{k}");
        match (table.get_mut(k), v) {
            (None, _) => bail!("unknown key {here}"),
            (Some(dst @ toml::Value::Table(_)), toml::Value::Table(sub)) => merge(dst, sub, &here)?,
            (Some(dst), v) => *dst = v.clone(),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::parse("plant = \"autoland\"\nseed = 3\ninitial_set = \"x01\"\n").unwrap();
        assert_eq!(c.plant, PlantKind::Autoland);
        assert_eq!(c.initial_set, Some(BoxSpec::Preset("x01".into())));
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(ExperimentConfig::parse("plant = \"autoland\"\n").is_err());
    }

    #[test]
    fn unknown_sections_are_rejected() {
        assert!(ExperimentConfig::parse("plant = \"autoland\"\nseed = 0\n[contract]\nrp = 0.9\n").is_err());
    }

    #[test]
    fn hash_ignores_seed_only() {
        let a = ExperimentConfig::parse("plant = \"autoland\"\nseed = 0\n").unwrap();
        let b = ExperimentConfig::parse("plant = \"autoland\"\nseed = 9\n").unwrap();
        let c = ExperimentConfig::parse("plant = \"autoland\"\nseed = 0\n[contract]\npr = 0.8\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn overlay_replaces_and_rejects() {
        #[derive(Serialize, Deserialize, PartialEq, Debug)]
        struct P {
            a: f64,
            b: [f64; 2],
        }
        let base = P { a: 1.0, b: [2.0, 3.0] };
        let t: toml::Table = toml::from_str("b = [4.0, 5.0]").unwrap();
        assert_eq!(overlay(&base, Some(&t), "p").unwrap(), P { a: 1.0, b: [4.0, 5.0] });
        let bad: toml::Table = toml::from_str("c = 1").unwrap();
        assert!(overlay(&base, Some(&bad), "p").is_err());
    }
}
