//! Experiment configuration: one TOML file plus `key=value` overrides.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use motorlab_core::losses::{LossConfig, LossProfile};
use motorlab_core::plant::PlantConfig;
use motorlab_core::tasks::{TaskConfig, TaskKind};
use motorlab_core::training::{Environment, LossMode, TrainConfig};
use motorlab_core::{ArchitectureConfig, ArchitectureKind};

use crate::Error;

/// The seven trained model variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "Uni-B")]
    UniB,
    #[serde(rename = "Uni-DL")]
    UniDl,
    #[serde(rename = "Uni-NDL")]
    UniNdl,
    #[serde(rename = "Bi-NS")]
    BiNs,
    #[serde(rename = "Bi-S")]
    BiS,
    #[serde(rename = "CC-NS")]
    CcNs,
    #[serde(rename = "CC-S")]
    CcS,
}

impl Model {
    pub const ALL: [Model; 7] = [Model::UniB, Model::UniDl, Model::UniNdl, Model::BiNs, Model::BiS, Model::CcNs, Model::CcS];

    pub fn name(self) -> &'static str {
        match self {
            Model::UniB => "Uni-B",
            Model::UniDl => "Uni-DL",
            Model::UniNdl => "Uni-NDL",
            Model::BiNs => "Bi-NS",
            Model::BiS => "Bi-S",
            Model::CcNs => "CC-NS",
            Model::CcS => "CC-S",
        }
    }

    pub fn from_name(s: &str) -> Option<Model> {
        Model::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s))
    }

    pub fn kind(self) -> ArchitectureKind {
        match self {
            Model::UniB | Model::UniDl | Model::UniNdl => ArchitectureKind::Unilateral,
            Model::BiNs | Model::BiS => ArchitectureKind::Bilateral,
            Model::CcNs | Model::CcS => ArchitectureKind::BilateralCC,
        }
    }

    pub fn mode(self) -> LossMode {
        match self {
            Model::UniDl => LossMode::Profile(LossProfile::Dominant),
            Model::UniNdl => LossMode::Profile(LossProfile::NonDominant),
            Model::BiS | Model::CcS => LossMode::Specialised,
            Model::UniB | Model::BiNs | Model::CcNs => LossMode::Profile(LossProfile::Combined),
        }
    }

    pub fn specialised(self) -> bool {
        self.mode() == LossMode::Specialised
    }

    pub fn is_bilateral(self) -> bool {
        self.kind().is_bilateral()
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn task_name(task: TaskKind) -> &'static str {
    task.name()
}

pub fn parse_task(s: &str) -> Option<TaskKind> {
    TaskKind::ALL.into_iter().find(|t| t.name().eq_ignore_ascii_case(s))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub models: Vec<Model>,
    pub tasks: Vec<TaskKind>,
    pub seeds: Vec<u64>,
    /// Worker threads; 0 uses one per available core.
    pub threads: usize,
    /// Held-out trials per task.
    pub test_trials: usize,
    /// Run the lesion suite for bilateral models.
    pub lesions: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            models: Model::ALL.to_vec(),
            tasks: TaskKind::ALL.to_vec(),
            seeds: (1..=10).collect(),
            threads: 0,
            test_trials: motorlab_core::eval::TEST_TRIALS,
            lesions: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub units: usize,
    pub layers: usize,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection { units: 10, layers: 2 }
    }
}

/// Everything an experiment depends on.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentSection,
    pub network: NetworkSection,
    pub train: TrainConfig,
    pub plant: PlantConfig,
    pub task: TaskConfig,
    pub losses: LossConfig,
}

impl Config {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Config, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text, overrides)
    }

    /// Parses TOML text and applies `key.path=value` overrides in order.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Config, Error> {
        let file: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut table: toml::Table = Config::default().to_toml().parse().expect("defaults parse");
        merge(&mut table, file);
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Config = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<(), Error> {
        let e = &self.experiment;
        if e.models.is_empty() || e.tasks.is_empty() || e.seeds.is_empty() {
            return Err(Error::Config("experiment needs at least one model, task and seed".into()));
        }
        if e.test_trials == 0 {
            return Err(Error::Config("test_trials must be positive".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        if !e.seeds.iter().all(|s| seen.insert(*s)) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        for m in &e.models {
            self.architecture(*m).validate()?;
        }
        self.train.validate()?;
        self.environment().validate()?;
        Ok(())
    }

    pub fn architecture(&self, model: Model) -> ArchitectureConfig {
        ArchitectureConfig::new(model.kind(), self.network.units, self.network.layers)
    }

    pub fn environment(&self) -> Environment {
        Environment { plant: self.plant.clone(), task: self.task.clone(), losses: self.losses.clone() }
    }

    /// Models in canonical order, deduplicated.
    pub fn models(&self) -> Vec<Model> {
        Model::ALL.into_iter().filter(|m| self.experiment.models.contains(m)).collect()
    }

    /// Tasks in canonical order, deduplicated.
    pub fn tasks(&self) -> Vec<TaskKind> {
        TaskKind::ALL.into_iter().filter(|t| self.experiment.tasks.contains(t)).collect()
    }
}

/// Recursively overlays `top` onto `base`; non-table values replace.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Sets `a.b.c = value`; the value is read as a TOML literal, falling back
/// to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), Error> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("single key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(Config::parse("", &[]).unwrap(), Config::default());
    }

    #[test]
    fn default_round_trips_through_toml() {
        let c = Config::default();
        assert_eq!(Config::parse(&c.to_toml(), &[]).unwrap(), c);
    }

    #[test]
    fn overrides_reach_nested_constants() {
        let c = Config::parse(
            "[train]\nlr = 0.01\n",
            &[
                "train.lr=0.002".into(),
                "plant.arm.dt=0.005".into(),
                "losses.dominant.cart2=4".into(),
                "experiment.models=[\"Uni-B\",\"CC-S\"]".into(),
                "experiment.tasks=[\"Hold\"]".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.train.lr, 0.002);
        assert_eq!(c.plant.arm.dt, 0.005);
        assert_eq!(c.losses.dominant.cart2, 4.0);
        assert_eq!(c.models(), vec![Model::UniB, Model::CcS]);
        assert_eq!(c.tasks(), vec![TaskKind::Hold]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::parse("[train]\nlearning_rate = 0.1\n", &[]).is_err());
        assert!(Config::parse("", &["plant.arm.length=1".into()]).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(Config::parse("", &["network.units=9".into()]).is_err());
        assert!(Config::parse("", &["experiment.seeds=[1,1]".into()]).is_err());
    }

    #[test]
    fn model_properties() {
        assert_eq!(Model::from_name("bi-s"), Some(Model::BiS));
        assert!(Model::CcS.specialised() && !Model::CcNs.specialised());
        assert_eq!(Model::UniNdl.mode(), LossMode::Profile(LossProfile::NonDominant));
        assert!(!Model::UniB.is_bilateral());
    }
}
