//! Phantom sweeps: simulate, restore, estimate and score over a grid of
//! noise levels and speckle realizations.
//!
//! Each `(noise level, speckle seed)` cell runs independently. A cell that
//! fails is recorded in the report and the remaining cells still run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::acoustic::{
    build_beamformer, build_pulse, build_separable_psf, build_system_matrix, simulate_rf_with, AcousticError,
    DenseOperator, LinearOperator, SeparableOperator,
};
use crate::ddrm::{default_schedule, patchwise_shrinkage_denoiser, DenoiseError, Sampler, SamplerConfig, SamplerError};
use crate::grid::{EchogenicityMap, GridError, ReflectivityMap};
use crate::io::{render_png, write_container, ConfigError, Container, ContainerError, ExperimentConfig, OperatorKind, PhantomKind, RenderError};
use crate::metrics::{occlusion_metrics, scatterer_metrics, MetricReport, DEFAULT_GCNR_BINS};
use crate::phantom::{apply_multiplicative_noise, make_occlusion_phantom, make_scatterer_phantom, PhantomError};
use crate::rng;
use crate::spectral::{svd_dense, svd_separable, SpectralError, SvdFactorization};
use crate::variance::{drus_mean, drus_var, SampleEnsemble, VarianceError, VarianceModelParams};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "DRUS_WORKERS";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Phantom(#[from] PhantomError),
    #[error(transparent)]
    Acoustic(#[from] AcousticError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Denoise(#[from] DenoiseError),
    #[error(transparent)]
    Variance(#[from] VarianceError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("invalid worker count in {WORKERS_ENV}: {0}")]
    Workers(String),
}

/// The three compared reconstructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    /// The measurement mapped to the image grid (`B·y`).
    Baseline,
    DrusMean,
    DrusVar,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Baseline, Estimator::DrusMean, Estimator::DrusVar];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Baseline => "baseline",
            Estimator::DrusMean => "drus_mean",
            Estimator::DrusVar => "drus_var",
        }
    }
}

/// Degradation operator and its SVD, built once per sweep.
pub enum ForwardModel {
    /// Image-domain PSF blur; the measurement is `A·o + n`.
    Separable { operator: SeparableOperator, svd: SvdFactorization },
    /// RF model; the measurement is `B·(H·o + n)` and the restoration
    /// operator is `B·H`.
    Dense { h: DenseOperator, b: DenseOperator, svd: SvdFactorization, noise_gain: f64 },
}

impl ForwardModel {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let grid = cfg.grid.build()?;
        match cfg.experiment.operator {
            OperatorKind::Separable => {
                let operator = build_separable_psf(
                    &grid,
                    cfg.psf.lateral_sigma_mm,
                    cfg.probe.center_frequency_hz,
                    cfg.probe.sound_speed_m_per_s,
                )?;
                let svd = svd_separable(&operator)?;
                Ok(Self::Separable { operator, svd })
            }
            OperatorKind::Dense => {
                let pulse = build_pulse(&cfg.probe);
                let h = build_system_matrix(&cfg.probe, &grid, &pulse)?;
                let (b, _) = build_beamformer(&h, &cfg.probe, &grid, &cfg.apodization)?;
                let bh = b.compose(&h)?;
                let svd = svd_dense(&bh)?;
                let energy: f64 = b.entries().iter().map(|v| v * v).sum();
                let noise_gain = (energy / grid.len() as f64).sqrt();
                Ok(Self::Dense { h, b, svd, noise_gain })
            }
        }
    }

    pub fn svd(&self) -> &SvdFactorization {
        match self {
            Self::Separable { svd, .. } | Self::Dense { svd, .. } => svd,
        }
    }

    /// Noise level seen by the sampler for additive noise `noise_std` on
    /// the raw measurement.
    pub fn effective_noise(&self, noise_std: f64) -> f64 {
        match self {
            Self::Separable { .. } => noise_std,
            Self::Dense { noise_gain, .. } => noise_std * noise_gain,
        }
    }

    /// Image-domain measurement and its effective noise level.
    pub fn measure(&self, o: &[f64], noise_std: f64, seed: u64) -> Result<(Vec<f64>, f64), ExperimentError> {
        match self {
            Self::Separable { operator, .. } => {
                Ok((simulate_rf_with(operator, o, noise_std, seed)?, self.effective_noise(noise_std)))
            }
            Self::Dense { h, b, .. } => {
                let y = simulate_rf_with(h, o, noise_std, seed)?;
                Ok((b.apply(&y)?, self.effective_noise(noise_std)))
            }
        }
    }
}

/// Every image produced for one cell.
#[derive(Debug, Clone)]
pub struct CellImages {
    pub echogenicity: EchogenicityMap,
    pub reflectivity: ReflectivityMap,
    pub baseline: ReflectivityMap,
    pub samples: Vec<ReflectivityMap>,
    pub mean: ReflectivityMap,
    pub variance: EchogenicityMap,
}

impl CellImages {
    pub fn estimate(&self, e: Estimator) -> &[f64] {
        match e {
            Estimator::Baseline => self.baseline.values(),
            Estimator::DrusMean => self.mean.values(),
            Estimator::DrusVar => self.variance.values(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellMetrics {
    pub estimator: Estimator,
    pub reports: Vec<MetricReport>,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub noise_std: f64,
    pub seed_index: usize,
    pub speckle_seed: u64,
    pub result: Result<Vec<CellMetrics>, String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub cells: Vec<CellOutcome>,
}

impl ExperimentReport {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.result.is_err()).count()
    }

    /// `noise_std seed estimator metric mean std n failures`, tab-separated.
    pub fn metrics_table(&self) -> String {
        let mut out = String::from("noise_std\tseed\testimator\tmetric\tmean\tstd\tn\tfailures\n");
        for cell in &self.cells {
            let Ok(metrics) = &cell.result else { continue };
            for m in metrics {
                for r in &m.reports {
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
                        cell.noise_std,
                        cell.seed_index,
                        m.estimator.name(),
                        r.name,
                        r.mean,
                        r.std,
                        r.values.len(),
                        r.failures
                    );
                }
            }
        }
        out
    }

    /// Per (noise level, estimator, metric): mean and std of the per-seed
    /// means, as `key = value` lines.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let mut levels: Vec<f64> = self.cells.iter().map(|c| c.noise_std).collect();
        levels.dedup();
        let _ = writeln!(out, "cells = {}\nfailed_cells = {}", self.cells.len(), self.failures());
        for &level in &levels {
            for est in Estimator::ALL {
                let mut by_metric: Vec<(String, Vec<f64>)> = Vec::new();
                for cell in self.cells.iter().filter(|c| c.noise_std == level) {
                    let Ok(ms) = &cell.result else { continue };
                    for r in ms.iter().filter(|m| m.estimator == est).flat_map(|m| &m.reports) {
                        match by_metric.iter_mut().find(|(n, _)| *n == r.name) {
                            Some((_, v)) => v.push(r.mean),
                            None => by_metric.push((r.name.clone(), vec![r.mean])),
                        }
                    }
                }
                for (name, vals) in by_metric {
                    let (m, s) = crate::metrics::mean_std(&vals);
                    let _ = writeln!(out, "noise_{level}.{}.{name}.mean = {m:.6}", est.name());
                    let _ = writeln!(out, "noise_{level}.{}.{name}.std = {s:.6}", est.name());
                }
            }
        }
        for cell in self.cells.iter().filter(|c| c.result.is_err()) {
            if let Err(msg) = &cell.result {
                let _ = writeln!(out, "failed.noise_{}.seed_{} = {msg}", cell.noise_std, cell.seed_index);
            }
        }
        out
    }
}

/// Speckle seed of sweep column `seed_index`; shared by all noise levels.
pub fn speckle_seed(base_seed: u64, seed_index: usize) -> u64 {
    rng::derive_seed(base_seed, rng::TAG_SPECKLE, seed_index as u64)
}

/// Simulates, restores and estimates one cell. Pure apart from logging.
pub fn run_cell(
    cfg: &ExperimentConfig,
    model: &ForwardModel,
    noise_index: usize,
    seed_index: usize,
) -> Result<CellImages, ExperimentError> {
    let grid = cfg.grid.build()?;
    let noise_std = cfg.experiment.noise_std[noise_index];
    let s_seed = speckle_seed(cfg.experiment.base_seed, seed_index);
    let n_seed = rng::derive_seed(s_seed, rng::TAG_NOISE, noise_index as u64);

    let echogenicity = match cfg.experiment.phantom {
        PhantomKind::Occlusion => make_occlusion_phantom(&grid, &cfg.occlusion_spec())?,
        PhantomKind::Scatterers => make_scatterer_phantom(&grid, &cfg.scatterer_spec())?,
    };
    let reflectivity = apply_multiplicative_noise(&echogenicity, s_seed);
    let (measurement, sigma_d) = model.measure(reflectivity.values(), noise_std, n_seed)?;
    let baseline = ReflectivityMap::new(grid, measurement)?;

    let svd = model.svd();
    let ybar = svd.to_spectral(baseline.values())?;
    let schedule = default_schedule(&ybar, cfg.sampler.num_steps)?;
    let denoiser = patchwise_shrinkage_denoiser(cfg.denoiser.threshold_scale)?;
    let sampler_cfg = SamplerConfig {
        eta: cfg.sampler.eta,
        eta_b: cfg.sampler.eta_b,
        num_steps: cfg.sampler.num_steps,
        measurement_noise_std: sigma_d,
        seed: n_seed,
    };
    let sampler = Sampler::new(svd, &denoiser, &schedule, sampler_cfg, grid)?;
    let samples = (0..cfg.experiment.samples)
        .into_par_iter()
        .map(|c| sampler.run(&ybar, rng::derive_seed(n_seed, rng::TAG_SAMPLE, c as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let ensemble = SampleEnsemble::new(samples)?;
    let mean = drus_mean(&ensemble)?;
    let variance = drus_var(&ensemble, VarianceModelParams::new(cfg.variance.beta)?)?;
    Ok(CellImages { echogenicity, reflectivity, baseline, samples: ensemble.into_samples(), mean, variance })
}

/// Metrics of every estimator for one cell's images.
pub fn score_cell(cfg: &ExperimentConfig, images: &CellImages) -> Result<Vec<CellMetrics>, ExperimentError> {
    let grid = cfg.grid.build()?;
    Ok(Estimator::ALL
        .iter()
        .map(|&estimator| {
            let img = images.estimate(estimator);
            let (a, b) = match cfg.experiment.phantom {
                PhantomKind::Occlusion => {
                    occlusion_metrics(img, &grid, &cfg.occlusion_spec(), &cfg.regions, DEFAULT_GCNR_BINS)
                }
                PhantomKind::Scatterers => scatterer_metrics(img, &grid, &cfg.scatterer_spec()),
            };
            CellMetrics { estimator, reports: vec![a, b] }
        })
        .collect())
}

fn write_cell(dir: &Path, tag: &str, cfg: &ExperimentConfig, images: &CellImages) -> Result<(), ExperimentError> {
    let grid = cfg.grid.build()?;
    let dr = cfg.experiment.dynamic_range_db;
    let image = |name: &str, values: &[f64]| -> Result<(), ExperimentError> {
        write_container(dir.join(format!("{tag}_{name}.usir")), &Container::image_values(&grid, values.to_vec()))?;
        render_png(values, &grid, dr, dir.join(format!("{tag}_{name}.png")))?;
        Ok(())
    };
    image("echogenicity", images.echogenicity.values())?;
    image("reflectivity", images.reflectivity.values())?;
    image("baseline", images.baseline.values())?;
    image("drus_mean", images.mean.values())?;
    image("drus_var", images.variance.values())?;
    write_container(dir.join(format!("{tag}_ensemble.usir")), &Container::from_ensemble(&images.samples)?)?;
    Ok(())
}

/// Worker count from [`WORKERS_ENV`], or the available parallelism.
pub fn worker_count() -> Result<usize, ExperimentError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(ExperimentError::Workers(v)),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Runs the full sweep and writes images, containers, `metrics.tsv` and
/// `summary.txt` into the configured output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let dir = cfg.experiment.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .map_err(|e| ExperimentError::Workers(e.to_string()))?;
    let model = ForwardModel::build(cfg)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.experiment.noise_std.len())
        .flat_map(|n| (0..cfg.experiment.num_seeds).map(move |s| (n, s)))
        .collect();
    let cells = pool.install(|| {
        jobs.par_iter()
            .map(|&(ni, si)| {
                let noise_std = cfg.experiment.noise_std[ni];
                let tag = format!("n{ni}_s{si}");
                let result = run_cell(cfg, &model, ni, si)
                    .and_then(|images| {
                        write_cell(&dir, &tag, cfg, &images)?;
                        score_cell(cfg, &images)
                    })
                    .map_err(|e| {
                        log::error!("cell noise {noise_std} seed {si} failed: {e}");
                        e.to_string()
                    });
                CellOutcome { noise_std, seed_index: si, speckle_seed: speckle_seed(cfg.experiment.base_seed, si), result }
            })
            .collect::<Vec<_>>()
    });
    let report = ExperimentReport { output_dir: dir.clone(), cells };
    fs::write(dir.join("metrics.tsv"), report.metrics_table())?;
    fs::write(dir.join("summary.txt"), report.summary())?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    Ok(report)
}
