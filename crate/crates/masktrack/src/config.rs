//! Run configuration: one versioned TOML file covering every command.

use std::path::{Path, PathBuf};

use masktrack_core::eval::ResetProtocol;
use masktrack_core::model::ModelConfig;
use masktrack_core::mot::{DetectorNoise, MotConfig};
use masktrack_core::track::TrackOptions;
use masktrack_core::train::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

/// Environment variables that may replace entries of `[paths]`.
pub const ENV_DATA: &str = "MASKTRACK_DATA";
pub const ENV_CHECKPOINT: &str = "MASKTRACK_CHECKPOINT";
pub const ENV_RESULTS: &str = "MASKTRACK_RESULTS";
pub const ENV_OUT: &str = "MASKTRACK_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// One moving, slowly rotating object per sequence.
    Single,
    /// One elongated object spinning at a constant rate.
    Rotating,
    /// `objects` objects confined to disjoint vertical bands.
    Separated,
}

/// What `gen-data` produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub kind: SceneKind,
    pub sequences: usize,
    pub frames: usize,
    /// Canvas side (single, rotating) or band width (separated).
    pub size: usize,
    pub objects: usize,
    /// Sequences containing any of these class tags are marked unseen.
    pub unseen_tags: Vec<u32>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            kind: SceneKind::Single,
            sequences: 8,
            frames: 30,
            size: 128,
            objects: 3,
            unseen_tags: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// IoU thresholds of the success rates.
    pub thresholds: Vec<f64>,
    pub reset: ResetProtocol,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            thresholds: vec![0.5, 0.7],
            reset: ResetProtocol::default(),
        }
    }
}

/// Locations only; excluded from the config hash so that relocating a run does not
/// change its identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub results: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Paths {
    /// Applies `MASKTRACK_*` variables from `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        for (key, slot) in [
            (ENV_DATA, &mut self.data),
            (ENV_CHECKPOINT, &mut self.checkpoint),
            (ENV_RESULTS, &mut self.results),
            (ENV_OUT, &mut self.out),
        ] {
            if let Some(v) = lookup(key).filter(|v| !v.is_empty()) {
                *slot = Some(PathBuf::from(v));
            }
        }
    }

    /// Overrides entries that are `Some` in `other`.
    pub fn merge(&mut self, other: &Paths) {
        for (slot, v) in [
            (&mut self.data, &other.data),
            (&mut self.checkpoint, &other.checkpoint),
            (&mut self.results, &other.results),
            (&mut self.out, &other.out),
        ] {
            if v.is_some() {
                slot.clone_from(v);
            }
        }
    }

    fn require<'a>(slot: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        slot.as_deref().ok_or_else(|| {
            Error::Usage(format!(
                "no {what} path (set it in [paths], the environment or on the command line)"
            ))
        })
    }

    pub fn data(&self) -> Result<&Path> {
        Self::require(&self.data, "data")
    }

    pub fn checkpoint(&self) -> Result<&Path> {
        Self::require(&self.checkpoint, "checkpoint")
    }

    pub fn results(&self) -> Result<&Path> {
        Self::require(&self.results, "results")
    }

    pub fn out(&self) -> Result<&Path> {
        Self::require(&self.out, "out")
    }
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub track: TrackOptions,
    #[serde(default)]
    pub mot: MotConfig,
    #[serde(default)]
    pub detector: DetectorNoise,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: default_version(),
            seed: 0,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            track: TrackOptions::default(),
            mot: MotConfig::default(),
            detector: DetectorNoise::default(),
            eval: EvalConfig::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is TOML-representable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let section = |name: &str, r: masktrack_core::Result<()>| r.map_err(|e| Error::Config(format!("[{name}] {e}")));
        section("model", self.model.validate())?;
        section("train", self.train.validate())?;
        section("track", self.track.validate())?;
        section("mot", self.mot.validate())?;
        let d = &self.data;
        if d.sequences == 0 || d.frames == 0 || d.size == 0 || d.objects == 0 {
            return Err(Error::Config(
                "data: sequences, frames, size and objects must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.detector.dropout) {
            return Err(Error::Config("detector.dropout must lie in [0, 1]".into()));
        }
        if self.eval.thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Config("eval.thresholds must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML of everything except `[paths]`.
    pub fn hash(&self) -> String {
        let portable = RunConfig {
            paths: Paths::default(),
            ..self.clone()
        };
        hex::encode(Sha256::digest(portable.to_toml().as_bytes()))
    }
}
