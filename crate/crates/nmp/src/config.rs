//! One TOML-serializable configuration covering generation, training, and
//! evaluation, so a run is fully determined by (config, dataset).

use crate::bev::RoiSpec;
use crate::model::detect::DetectConfig;
use crate::model::loss::LossConfig;
use crate::model::ModelConfig;
use crate::sampler::SamplerConfig;
use crate::scenario::PointCloudConfig;
use crate::scenario_gen::GenConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed config {path}: {source}")]
    Malformed {
        path: String,
        source: toml::de::Error,
    },
    #[error("config serialization: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("inconsistent config: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    /// SGD only; Adam uses its fixed (0.9, 0.999) moments.
    pub momentum: f64,
    /// Seeds parameter init and the per-scenario negative draws.
    pub seed: u64,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            optimizer: OptimizerKind::Adam,
            lr: 1e-3,
            momentum: 0.9,
            seed: 0,
            log_every: 25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct EvalConfig {
    /// Metric horizons in seconds.
    pub horizons: Vec<f64>,
    /// Manual baseline reads actor ground truth instead of detections.
    pub manual_use_ground_truth: bool,
    /// IoU for counting a detection as a true positive in the AP metric.
    pub detection_iou: f64,
    /// Seeds the per-scenario candidate draws.
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            horizons: crate::planner::HORIZONS.to_vec(),
            manual_use_ground_truth: false,
            detection_iou: 0.5,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(default)]
pub struct RunConfig {
    pub roi: RoiSpec,
    pub model: ModelConfig,
    pub sampler: SamplerConfig,
    pub loss: LossConfig,
    pub detect: DetectConfig,
    pub gen: GenConfig,
    pub cloud: PointCloudConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn desk() -> Self {
        RunConfig::default()
    }

    /// Cross-field checks; the per-section validators still run where the
    /// sections are consumed.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError::Inconsistent(m));
        if self.model.t_steps != self.gen.t_steps {
            return err(format!(
                "model.t_steps {} != gen.t_steps {}",
                self.model.t_steps, self.gen.t_steps
            ));
        }
        if (self.model.dt - self.gen.dt).abs() > 1e-12 {
            return err(format!("model.dt {} != gen.dt {}", self.model.dt, self.gen.dt));
        }
        if self.roi != self.gen.roi {
            return err("roi differs from gen.roi".to_string());
        }
        self.roi
            .validate()
            .map_err(|e| ConfigError::Inconsistent(e.to_string()))?;
        self.sampler
            .validate()
            .map_err(|e| ConfigError::Inconsistent(e.to_string()))?;
        Ok(())
    }

    /// Network input channel count implied by the raster layout.
    pub fn input_channels(&self) -> usize {
        self.roi.t_prime * self.roi.z_slices() + 4
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|source| ConfigError::Malformed {
            path: path.display().to_string(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// FNV-1a over the canonical TOML form; stable across runs and builds.
    pub fn hash(&self) -> u64 {
        fnv1a(self.to_toml().expect("config serializes").as_bytes())
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Deterministic per-item seed derived from a run seed (splitmix64).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E3779B97F4A7C15)
        .wrapping_add(index.wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
