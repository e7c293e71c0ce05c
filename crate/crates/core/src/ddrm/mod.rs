//! Spectral diffusion restoration sampler.
//!
//! The sampler runs in the right-singular basis of the degradation operator.
//! Each update mixes the current state, the spectral measurement `ȳ`, the
//! denoiser prediction and fresh noise with the weights from
//! [`compute_coefficients`]. The denoiser sees image-space inputs: the state
//! goes through `V` before each call and the prediction back through `Vᵀ`.
//!
//! Noise is σ-parameterized (variance exploding): the state at level σ is a
//! clean image plus white noise of standard deviation σ, with no rescaling.

mod coefficients;
mod denoiser;
mod schedule;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coefficients::{branch_of, compute_coefficients, Branch, StepCoefficients, IDENTITY_TOLERANCE};
pub use denoiser::{
    gaussian_prior_denoiser, haar_forward, haar_inverse, patchwise_shrinkage_denoiser, DenoiseError, Denoiser,
    GaussianPriorDenoiser, ImageShape, ShrinkageDenoiser,
};
pub use schedule::{make_schedule, DiffusionSchedule};

use crate::grid::{ImageGrid, ReflectivityMap};
use crate::rng;
use crate::spectral::{SpectralError, SpectralVector, SvdFactorization};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("coefficient identity violated: {0}")]
    Inconsistent(String),
    #[error("denoiser contract violated: {0}")]
    Contract(String),
    #[error(transparent)]
    Denoise(#[from] DenoiseError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Default number of timesteps in the underlying ladder.
pub const DEFAULT_TIMESTEPS: usize = 1000;
/// Floor of the default ladder.
pub const DEFAULT_SIGMA_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub eta: f64,
    pub eta_b: f64,
    pub num_steps: usize,
    pub measurement_noise_std: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { eta: 0.85, eta_b: 1.0, num_steps: 50, measurement_noise_std: 0.0, seed: 0 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(0.0..=1.0).contains(&self.eta) || !(0.0..=1.0).contains(&self.eta_b) {
            return Err(SamplerError::Config(format!("eta {} and eta_b {} must lie in [0, 1]", self.eta, self.eta_b)));
        }
        if self.num_steps == 0 {
            return Err(SamplerError::Config("num_steps must be at least 1".into()));
        }
        if !(self.measurement_noise_std >= 0.0 && self.measurement_noise_std.is_finite()) {
            return Err(SamplerError::Config("measurement noise std must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Geometric ladder from `2·max|ȳ|` over observed components down to 1e-3,
/// visited in `num_steps` updates.
pub fn default_schedule(ybar: &SpectralVector, num_steps: usize) -> Result<DiffusionSchedule, SamplerError> {
    let peak = ybar
        .coefficients
        .iter()
        .zip(&ybar.observed)
        .filter(|(_, o)| **o)
        .map(|(c, _)| c.abs())
        .fold(0.0, f64::max);
    let sigma_max = (2.0 * peak).max(10.0 * DEFAULT_SIGMA_MIN);
    make_schedule(DEFAULT_TIMESTEPS.max(num_steps), sigma_max, DEFAULT_SIGMA_MIN, num_steps)
}

/// Diagnostics for one update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub sigma_t: f64,
    pub sigma_next: f64,
    pub max_signal_residual: f64,
    pub max_noise_residual: f64,
    pub unobserved: usize,
    pub measurement_dominant: usize,
    pub prediction_dominant: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SamplerTrace {
    pub steps: Vec<StepTrace>,
}

impl SamplerTrace {
    /// Tab-separated dump, one line per step after a header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "step\tsigma_t\tsigma_next\tsignal_residual\tnoise_residual\tunobserved\tmeasurement_dominant\tprediction_dominant\n",
        );
        for (i, s) in self.steps.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i}\t{:.9e}\t{:.9e}\t{:.3e}\t{:.3e}\t{}\t{}\t{}",
                s.sigma_t,
                s.sigma_next,
                s.max_signal_residual,
                s.max_noise_residual,
                s.unobserved,
                s.measurement_dominant,
                s.prediction_dominant
            );
        }
        out
    }
}

/// A configured restoration problem that can be sampled repeatedly.
/// Shareable across threads; each call owns its noise stream.
pub struct Sampler<'a> {
    factorization: &'a SvdFactorization,
    denoiser: &'a dyn Denoiser,
    schedule: &'a DiffusionSchedule,
    config: SamplerConfig,
    grid: ImageGrid,
    /// Per-component singular value, 0 where unobserved.
    s_eff: Vec<f64>,
}

impl<'a> Sampler<'a> {
    pub fn new(
        factorization: &'a SvdFactorization,
        denoiser: &'a dyn Denoiser,
        schedule: &'a DiffusionSchedule,
        config: SamplerConfig,
        grid: ImageGrid,
    ) -> Result<Self, SamplerError> {
        config.validate()?;
        if factorization.num_components() != grid.len() {
            return Err(SamplerError::Config(format!(
                "factorization has {} components, grid has {} pixels",
                factorization.num_components(),
                grid.len()
            )));
        }
        let s_eff = factorization
            .singular_values()
            .iter()
            .zip(factorization.observed())
            .map(|(s, o)| if *o { *s } else { 0.0 })
            .collect();
        Ok(Self { factorization, denoiser, schedule, config, grid, s_eff })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// One restored image from `seed`.
    pub fn run(&self, ybar: &SpectralVector, seed: u64) -> Result<ReflectivityMap, SamplerError> {
        self.run_inner(ybar, seed, None)
    }

    pub fn run_traced(&self, ybar: &SpectralVector, seed: u64) -> Result<(ReflectivityMap, SamplerTrace), SamplerError> {
        let mut trace = SamplerTrace::default();
        let map = self.run_inner(ybar, seed, Some(&mut trace))?;
        Ok((map, trace))
    }

    fn run_inner(
        &self,
        ybar: &SpectralVector,
        seed: u64,
        mut trace: Option<&mut SamplerTrace>,
    ) -> Result<ReflectivityMap, SamplerError> {
        let n = self.grid.len();
        if ybar.coefficients.len() != n || ybar.observed.len() != n {
            return Err(SamplerError::Config(format!("spectral measurement has {} components, need {n}", ybar.coefficients.len())));
        }
        let shape = ImageShape { depth: self.grid.depth_px(), width: self.grid.width_px() };
        let sigma_d = self.config.measurement_noise_std;
        let (eta, eta_b) = (self.config.eta, self.config.eta_b);
        let mut stream = rng::stream(seed);

        let sigma_top = self.schedule.sigma_max();
        let mut state: Vec<f64> = (0..n)
            .map(|i| {
                let s = self.s_eff[i];
                let xi = rng::normal(&mut stream);
                if s > 0.0 && sigma_d / s <= sigma_top {
                    let u = sigma_d / s;
                    ybar.coefficients[i] + (sigma_top * sigma_top - u * u).max(0.0).sqrt() * xi
                } else {
                    sigma_top * xi
                }
            })
            .collect();

        for (sigma_t, sigma_next) in self.schedule.transitions() {
            let image = self.factorization.v_apply(&state)?;
            let predicted = self.denoiser.denoise(&image, shape, sigma_t)?;
            if predicted.len() != n {
                return Err(SamplerError::Contract(format!("denoiser returned {} values for {n} pixels", predicted.len())));
            }
            let predicted = self.factorization.vt_apply(&predicted)?;
            let mut step = StepTrace {
                sigma_t,
                sigma_next,
                max_signal_residual: 0.0,
                max_noise_residual: 0.0,
                unobserved: 0,
                measurement_dominant: 0,
                prediction_dominant: 0,
            };
            for i in 0..n {
                let s = self.s_eff[i];
                let w = compute_coefficients(sigma_t, sigma_next, sigma_d, s, eta, eta_b)?;
                let xi = rng::normal(&mut stream);
                state[i] = w.a * state[i] + w.b * ybar.coefficients[i] + w.c * predicted[i] + w.d * xi;
                if trace.is_some() {
                    let (sig, noise) = w.residuals(sigma_t, sigma_next, sigma_d, s);
                    step.max_signal_residual = step.max_signal_residual.max(sig);
                    step.max_noise_residual = step.max_noise_residual.max(noise);
                    match branch_of(sigma_next, sigma_d, s) {
                        Branch::Unobserved => step.unobserved += 1,
                        Branch::MeasurementDominant => step.measurement_dominant += 1,
                        Branch::PredictionDominant => step.prediction_dominant += 1,
                    }
                }
            }
            if let Some(t) = trace.as_deref_mut() {
                t.steps.push(step);
            }
        }
        let values = self.factorization.v_apply(&state)?;
        Ok(ReflectivityMap::new(self.grid, values).expect("grid-sized output"))
    }
}

/// One-shot convenience wrapper around [`Sampler`]; uses `cfg.seed`.
pub fn sample(
    ybar: &SpectralVector,
    factorization: &SvdFactorization,
    denoiser: &dyn Denoiser,
    schedule: &DiffusionSchedule,
    cfg: &SamplerConfig,
    grid: &ImageGrid,
) -> Result<ReflectivityMap, SamplerError> {
    Sampler::new(factorization, denoiser, schedule, *cfg, *grid)?.run(ybar, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::{build_separable_psf, LinearOperator, SeparableOperator};
    use crate::spectral::svd_separable;

    struct Identity;
    impl Denoiser for Identity {
        fn denoise(&self, noisy: &[f64], _: ImageShape, _: f64) -> Result<Vec<f64>, DenoiseError> {
            Ok(noisy.to_vec())
        }
    }

    struct Truncating;
    impl Denoiser for Truncating {
        fn denoise(&self, noisy: &[f64], _: ImageShape, _: f64) -> Result<Vec<f64>, DenoiseError> {
            Ok(noisy[1..].to_vec())
        }
    }

    #[test]
    fn noiseless_identity_returns_measurement() {
        let grid = ImageGrid::with_size(8, 8);
        let f = svd_separable(&SeparableOperator::identity(grid)).unwrap();
        let y = rng::normals(1, grid.len());
        let ybar = f.to_spectral(&y).unwrap();
        let schedule = make_schedule(100, 5.0, 0.01, 10).unwrap();
        let cfg = SamplerConfig { measurement_noise_std: 0.0, seed: 3, ..Default::default() };
        let out = sample(&ybar, &f, &Identity, &schedule, &cfg, &grid).unwrap();
        assert!(out.values().iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        let grid = ImageGrid::with_size(16, 16);
        let op = build_separable_psf(&grid, 2.0, 5.208e6, 1540.0).unwrap();
        let f = svd_separable(&op).unwrap();
        let y = op.apply(&rng::normals(2, grid.len())).unwrap();
        let ybar = f.to_spectral(&y).unwrap();
        let denoiser = patchwise_shrinkage_denoiser(1.0).unwrap();
        let schedule = default_schedule(&ybar, 20).unwrap();
        let cfg = SamplerConfig { measurement_noise_std: 0.05, num_steps: 20, ..Default::default() };
        let sampler = Sampler::new(&f, &denoiser, &schedule, cfg, grid).unwrap();
        let a = sampler.run(&ybar, 10).unwrap();
        let b = sampler.run(&ybar, 10).unwrap();
        let c = sampler.run(&ybar, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn measurement_consistency_without_noise() {
        let grid = ImageGrid::with_size(16, 16);
        let op = SeparableOperator::new(vec![0.3, 1.0, 0.3], vec![0.5, 1.0, 0.5], grid).unwrap();
        let f = svd_separable(&op).unwrap();
        let y = op.apply(&rng::normals(4, grid.len())).unwrap();
        let ybar = f.to_spectral(&y).unwrap();
        let denoiser = patchwise_shrinkage_denoiser(2.0).unwrap();
        let schedule = default_schedule(&ybar, 15).unwrap();
        let cfg = SamplerConfig { measurement_noise_std: 0.0, num_steps: 15, ..Default::default() };
        let sampler = Sampler::new(&f, &denoiser, &schedule, cfg, grid).unwrap();
        let (out, trace) = sampler.run_traced(&ybar, 1).unwrap();
        let xbar = f.vt_apply(out.values()).unwrap();
        for i in 0..grid.len() {
            if ybar.observed[i] {
                assert!((xbar[i] - ybar.coefficients[i]).abs() < 1e-9 * (1.0 + ybar.coefficients[i].abs()));
            }
        }
        assert_eq!(trace.steps.len(), 15);
        assert!(trace.steps.windows(2).all(|w| w[1].sigma_t < w[0].sigma_t));
        assert_eq!(trace.steps.last().unwrap().sigma_next, 0.0);
        assert!(trace.steps.iter().all(|s| s.max_signal_residual <= 1e-12));
        assert!(trace.to_tsv().lines().count() == 16);
    }

    #[test]
    fn denoiser_contract_is_enforced() {
        let grid = ImageGrid::with_size(4, 4);
        let f = svd_separable(&SeparableOperator::identity(grid)).unwrap();
        let ybar = f.to_spectral(&[0.0; 16]).unwrap();
        let schedule = make_schedule(10, 1.0, 0.1, 5).unwrap();
        let err = sample(&ybar, &f, &Truncating, &schedule, &SamplerConfig::default(), &grid).unwrap_err();
        assert!(matches!(err, SamplerError::Contract(_)));
        let bad = SamplerConfig { eta: 1.5, ..Default::default() };
        assert!(Sampler::new(&f, &Truncating, &schedule, bad, grid).is_err());
    }
}
