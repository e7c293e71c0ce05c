//! Experiment configuration files.
//!
//! Files are TOML: `key = value` lines grouped under `[section]` headers.
//! Every key is optional and falls back to the defaults below; unknown keys
//! are rejected. A complete file:
//!
//! ```toml
//! [experiment]
//! phantom = "occlusion"        # or "scatterers"
//! operator = "separable"       # or "dense"
//! noise_std = [0.02, 0.08]
//! num_seeds = 9                # speckle realizations per noise level
//! base_seed = 0
//! samples = 10                 # ensemble size C
//! dynamic_range_db = 60.0
//! output_dir = "out"
//!
//! [grid]
//! width_px = 256
//! depth_px = 256
//! x_min_mm = -18.0
//! x_max_mm = 18.0
//! z_min_mm = 10.0
//! z_max_mm = 46.0
//!
//! [psf]
//! lateral_sigma_mm = 0.17
//!
//! [sampler]
//! eta = 0.85
//! eta_b = 1.0
//! num_steps = 50
//!
//! [denoiser]
//! threshold_scale = 1.75
//!
//! [variance]
//! beta = 0.5
//!
//! [regions]
//! inside_fraction = 0.9
//! outside_inner = 1.25
//! outside_outer = 1.6
//!
//! [probe]                      # used by the dense operator and RF tools
//! num_elements = 128
//! # ...
//!
//! [apodization]
//! tukey_alpha = 0.25
//! f_number = 1.4
//! ```
//!
//! Custom phantoms go in `[occlusion]` (`background_level` plus a
//! `[[occlusion.disks]]` array) or `[scatterers]` (`background_level` plus
//! `[[scatterers.points]]`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoustic::{ApodizationConfig, ProbeConfig};
use crate::grid::{GridError, ImageGrid};
use crate::metrics::RegionSpec;
use crate::phantom::{OcclusionSpec, ScattererSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhantomKind {
    Occlusion,
    Scatterers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Separable,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub width_px: usize,
    pub depth_px: usize,
    pub x_min_mm: f64,
    pub x_max_mm: f64,
    pub z_min_mm: f64,
    pub z_max_mm: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { width_px: 256, depth_px: 256, x_min_mm: -18.0, x_max_mm: 18.0, z_min_mm: 10.0, z_max_mm: 46.0 }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<ImageGrid, GridError> {
        ImageGrid::new(self.width_px, self.depth_px, (self.x_min_mm, self.x_max_mm), (self.z_min_mm, self.z_max_mm))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsfConfig {
    pub lateral_sigma_mm: f64,
}

impl Default for PsfConfig {
    fn default() -> Self {
        Self { lateral_sigma_mm: 0.17 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub eta: f64,
    pub eta_b: f64,
    pub num_steps: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self { eta: 0.85, eta_b: 1.0, num_steps: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserSection {
    pub threshold_scale: f64,
}

impl Default for DenoiserSection {
    fn default() -> Self {
        Self { threshold_scale: DEFAULT_THRESHOLD_SCALE }
    }
}

/// Default soft-threshold multiplier of the shrinkage denoiser.
pub const DEFAULT_THRESHOLD_SCALE: f64 = 1.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarianceSection {
    pub beta: f64,
}

impl Default for VarianceSection {
    fn default() -> Self {
        Self { beta: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub phantom: PhantomKind,
    pub operator: OperatorKind,
    pub noise_std: Vec<f64>,
    pub num_seeds: usize,
    pub base_seed: u64,
    pub samples: usize,
    pub dynamic_range_db: f64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            phantom: PhantomKind::Occlusion,
            operator: OperatorKind::Separable,
            noise_std: vec![0.02, 0.08],
            num_seeds: 9,
            base_seed: 0,
            samples: 10,
            dynamic_range_db: 60.0,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub grid: GridConfig,
    pub psf: PsfConfig,
    pub sampler: SamplerSection,
    pub denoiser: DenoiserSection,
    pub variance: VarianceSection,
    pub regions: RegionSpec,
    pub probe: ProbeConfig,
    pub apodization: ApodizationConfig,
    pub occlusion: Option<OcclusionSpec>,
    pub scatterers: Option<ScattererSpec>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn occlusion_spec(&self) -> OcclusionSpec {
        self.occlusion.clone().unwrap_or_default()
    }

    pub fn scatterer_spec(&self) -> ScattererSpec {
        self.scatterers.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let e = &self.experiment;
        if e.noise_std.is_empty() {
            return invalid("noise_std list is empty".into());
        }
        if let Some(v) = e.noise_std.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return invalid(format!("noise_std entry {v} must be finite and nonnegative"));
        }
        if e.num_seeds == 0 {
            return invalid("num_seeds must be at least 1".into());
        }
        if e.samples < 2 {
            return invalid(format!("samples = {} but the variance estimate needs at least 2", e.samples));
        }
        if !(e.dynamic_range_db > 0.0) {
            return invalid("dynamic_range_db must be positive".into());
        }
        let grid = self.grid.build()?;
        if !(self.psf.lateral_sigma_mm > 0.0) {
            return invalid("psf.lateral_sigma_mm must be positive".into());
        }
        let s = &self.sampler;
        if !((0.0..=1.0).contains(&s.eta) && (0.0..=1.0).contains(&s.eta_b) && s.num_steps >= 1) {
            return invalid("sampler needs eta, eta_b in [0, 1] and num_steps >= 1".into());
        }
        if !(self.denoiser.threshold_scale > 0.0 && self.denoiser.threshold_scale.is_finite()) {
            return invalid("denoiser.threshold_scale must be positive".into());
        }
        if !(self.variance.beta > 0.0 && self.variance.beta.is_finite()) {
            return invalid("variance.beta must be positive".into());
        }
        self.regions.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.probe.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.apodization.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        match e.phantom {
            PhantomKind::Occlusion => self.occlusion_spec().validate(&grid),
            PhantomKind::Scatterers => self.scatterer_spec().validate(&grid),
        }
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.sampler.num_steps, 50);
        assert_eq!(cfg.experiment.samples, 10);
        assert_eq!(cfg.grid.build().unwrap(), ImageGrid::standard());
    }

    #[test]
    fn round_trip_and_overrides() {
        let text = "[experiment]\nphantom = \"scatterers\"\nnoise_std = [0.018, 0.1]\n[grid]\nwidth_px = 64\ndepth_px = 64\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.experiment.phantom, PhantomKind::Scatterers);
        assert_eq!(cfg.grid.width_px, 64);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn validation_failures() {
        assert!(matches!(ExperimentConfig::from_toml("[experiment]\nnoise_std = []\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(ExperimentConfig::from_toml("[experiment]\nnoise_std = [-1.0]\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(ExperimentConfig::from_toml("[experiment]\nsamples = 1\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(ExperimentConfig::from_toml("[grid]\nwidth_px = 1\n"), Err(ConfigError::Grid(_))));
        assert!(matches!(ExperimentConfig::from_toml("[bogus]\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(ExperimentConfig::from_toml("[sampler]\neta = 2.0\n"), Err(ConfigError::Invalid(_))));
        let custom = "[occlusion]\nbackground_level = 1.0\n[[occlusion.disks]]\ncenter_x_mm = 0.0\ncenter_z_mm = 45.0\nradius_mm = 3.0\ninside_level = 0.0\n";
        assert!(matches!(ExperimentConfig::from_toml(custom), Err(ConfigError::Invalid(_))));
    }
}
