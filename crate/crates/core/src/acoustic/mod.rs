//! Linear acquisition model for single 0° plane-wave imaging.
//!
//! Distances are millimeters, times seconds, rates hertz. The sound speed is
//! configured in m/s and converted once in [`ProbeConfig::sound_speed_mm_per_s`].

mod beamformer;
mod operator;
mod pulse;
mod separable;
mod system;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use beamformer::{apodization_weights, build_beamformer, das_beamform, tukey, BeamformerReport};
pub use operator::{DenseOperator, LinearOperator};
pub use pulse::{build_pulse, PulseKernel};
pub use separable::{build_separable_psf, conv_matrix, SeparableOperator};
pub use system::{build_system_matrix, simulate_rf, simulate_rf_with};

use crate::grid::GridError;

#[derive(Debug, Error)]
pub enum AcousticError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("operator build failed: {0}")]
    Build(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Linear-array probe and acquisition timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub num_elements: usize,
    pub element_pitch_mm: f64,
    pub center_frequency_hz: f64,
    pub sampling_rate_hz: f64,
    pub bandwidth_ratio: f64,
    pub sound_speed_m_per_s: f64,
    pub num_time_samples: usize,
    pub acquisition_start_time_s: f64,
}

impl Default for ProbeConfig {
    /// 128-element L11-4v style linear array, 5.208 MHz, 67 % bandwidth,
    /// 20.8 MHz sampling; 1536 samples cover the standard field of view.
    fn default() -> Self {
        Self {
            num_elements: 128,
            element_pitch_mm: 0.3,
            center_frequency_hz: 5.208e6,
            sampling_rate_hz: 20.8e6,
            bandwidth_ratio: 0.67,
            sound_speed_m_per_s: 1540.0,
            num_time_samples: 1536,
            acquisition_start_time_s: 0.0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<(), AcousticError> {
        let bad = |what: &str| Err(AcousticError::Config(what.to_string()));
        if self.num_elements == 0 {
            return bad("num_elements must be at least 1");
        }
        if !(self.element_pitch_mm > 0.0 && self.element_pitch_mm.is_finite()) {
            return bad("element_pitch_mm must be positive");
        }
        if !(self.center_frequency_hz > 0.0 && self.sampling_rate_hz > 0.0 && self.sound_speed_m_per_s > 0.0) {
            return bad("frequencies and sound speed must be positive");
        }
        if !(self.bandwidth_ratio > 0.0 && self.bandwidth_ratio < 1.0) {
            return bad("bandwidth_ratio must lie in (0, 1)");
        }
        if self.num_time_samples == 0 {
            return bad("num_time_samples must be at least 1");
        }
        if !self.acquisition_start_time_s.is_finite() {
            return bad("acquisition_start_time_s must be finite");
        }
        Ok(())
    }

    pub fn sound_speed_mm_per_s(&self) -> f64 {
        self.sound_speed_m_per_s * 1e3
    }

    /// Lateral position of element `j`, array centered on x = 0.
    pub fn element_x_mm(&self, j: usize) -> f64 {
        (j as f64 - (self.num_elements as f64 - 1.0) / 2.0) * self.element_pitch_mm
    }

    pub fn sample_time_s(&self, k: usize) -> f64 {
        self.acquisition_start_time_s + k as f64 / self.sampling_rate_hz
    }

    /// Two-way travel time for a 0° plane wave: transmit straight down to
    /// depth `z`, receive back at element `j`.
    pub fn delay_s(&self, j: usize, x_mm: f64, z_mm: f64) -> f64 {
        let dx = x_mm - self.element_x_mm(j);
        (z_mm + (dx * dx + z_mm * z_mm).sqrt()) / self.sound_speed_mm_per_s()
    }
}

/// Receive apodization: Tukey window over an f-number-limited aperture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApodizationConfig {
    pub tukey_alpha: f64,
    pub f_number: f64,
}

impl Default for ApodizationConfig {
    fn default() -> Self {
        Self { tukey_alpha: 0.25, f_number: 1.4 }
    }
}

impl ApodizationConfig {
    pub fn validate(&self) -> Result<(), AcousticError> {
        if !(0.0..=1.0).contains(&self.tukey_alpha) {
            return Err(AcousticError::Config(format!("tukey alpha {} outside [0, 1]", self.tukey_alpha)));
        }
        if !(self.f_number > 0.0 && self.f_number.is_finite()) {
            return Err(AcousticError::Config(format!("f-number {} must be positive", self.f_number)));
        }
        Ok(())
    }
}
