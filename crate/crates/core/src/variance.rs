//! Ensemble statistics over restored samples.
//!
//! [`drus_mean`] averages samples; [`drus_var`] turns the unbiased per-pixel
//! sample variance into an echogenicity estimate through the power
//! `1/(2β)`. [`EmpiricalModel`] generates samples `ô_c = m⊙p + p^β⊙G_c`
//! whose moments are known in closed form, which makes it an oracle for the
//! estimators. [`VarianceAccumulator`] computes the same statistics in one
//! streaming pass for very large ensembles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{EchogenicityMap, ImageGrid, ReflectivityMap};
use crate::phantom::apply_multiplicative_noise;
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VarianceError {
    #[error("ensemble is empty")]
    Empty,
    #[error("variance needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {index} lies on a different grid than the first sample")]
    GridMismatch { index: usize },
    #[error("beta must be positive and finite, got {0}")]
    BadBeta(f64),
    #[error("dynamic range must be positive, got {0}")]
    BadDynamicRange(f64),
}

/// Default ensemble size.
pub const DEFAULT_ENSEMBLE_SIZE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarianceModelParams {
    pub beta: f64,
}

impl Default for VarianceModelParams {
    fn default() -> Self {
        Self { beta: 0.5 }
    }
}

impl VarianceModelParams {
    pub fn new(beta: f64) -> Result<Self, VarianceError> {
        let p = Self { beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), VarianceError> {
        if self.beta > 0.0 && self.beta.is_finite() {
            Ok(())
        } else {
            Err(VarianceError::BadBeta(self.beta))
        }
    }
}

/// `C` restored samples sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEnsemble {
    grid: ImageGrid,
    samples: Vec<ReflectivityMap>,
}

impl SampleEnsemble {
    pub fn new(samples: Vec<ReflectivityMap>) -> Result<Self, VarianceError> {
        let grid = *samples.first().ok_or(VarianceError::Empty)?.grid();
        if let Some(index) = samples.iter().position(|s| *s.grid() != grid) {
            return Err(VarianceError::GridMismatch { index });
        }
        Ok(Self { grid, samples })
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[ReflectivityMap] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<ReflectivityMap> {
        self.samples
    }
}

pub fn drus_mean(ens: &SampleEnsemble) -> Result<ReflectivityMap, VarianceError> {
    if ens.is_empty() {
        return Err(VarianceError::Empty);
    }
    let mut acc = VarianceAccumulator::new(ens.grid);
    for s in ens.samples() {
        acc.push(s.values());
    }
    Ok(acc.mean())
}

pub fn drus_var(ens: &SampleEnsemble, params: VarianceModelParams) -> Result<EchogenicityMap, VarianceError> {
    params.validate()?;
    let mut acc = VarianceAccumulator::new(ens.grid);
    for s in ens.samples() {
        acc.push(s.values());
    }
    acc.drus_var(params)
}

/// Streaming per-pixel mean and sum of squared deviations (Welford), with a
/// parallel merge so large ensembles can be reduced in chunks.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceAccumulator {
    grid: ImageGrid,
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl VarianceAccumulator {
    pub fn new(grid: ImageGrid) -> Self {
        Self { grid, count: 0, mean: vec![0.0; grid.len()], m2: vec![0.0; grid.len()] }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds one sample. Panics if its length differs from the grid.
    pub fn push(&mut self, sample: &[f64]) {
        assert_eq!(sample.len(), self.mean.len(), "sample length does not match grid");
        self.count += 1;
        let n = self.count as f64;
        for ((m, q), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(sample) {
            let delta = x - *m;
            *m += delta / n;
            *q += delta * (x - *m);
        }
    }

    /// Combines two partial reductions over disjoint sample sets.
    pub fn merge(mut self, other: Self) -> Self {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
        self
    }

    pub fn mean(&self) -> ReflectivityMap {
        ReflectivityMap::new(self.grid, self.mean.clone()).expect("accumulator matches grid")
    }

    /// Unbiased per-pixel variance.
    pub fn variance(&self) -> Result<Vec<f64>, VarianceError> {
        match self.count {
            0 => Err(VarianceError::Empty),
            1 => Err(VarianceError::TooFewSamples(1)),
            c => Ok(self.m2.iter().map(|q| q.max(0.0) / (c - 1) as f64).collect()),
        }
    }

    pub fn drus_var(&self, params: VarianceModelParams) -> Result<EchogenicityMap, VarianceError> {
        params.validate()?;
        let exponent = 1.0 / (2.0 * params.beta);
        let values = self.variance()?.into_iter().map(|v| v.powf(exponent)).collect();
        Ok(EchogenicityMap::new(self.grid, values).expect("nonnegative by construction"))
    }
}

/// Fixed speckle `m⊙p` plus the per-pixel spread `p^β` of the
/// generative-stochasticity term.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    grid: ImageGrid,
    reflectivity: Vec<f64>,
    spread: Vec<f64>,
}

impl EmpiricalModel {
    pub fn new(p: &EchogenicityMap, m_seed: u64, params: VarianceModelParams) -> Result<Self, VarianceError> {
        params.validate()?;
        let reflectivity = apply_multiplicative_noise(p, m_seed).into_values();
        let spread = p.values().iter().map(|&v| if v > 0.0 { v.powf(params.beta) } else { 0.0 }).collect();
        Ok(Self { grid: *p.grid(), reflectivity, spread })
    }

    /// `m⊙p`, the per-pixel mean of every sample.
    pub fn reflectivity(&self) -> &[f64] {
        &self.reflectivity
    }

    /// `p^β`, the per-pixel standard deviation of every sample.
    pub fn spread(&self) -> &[f64] {
        &self.spread
    }

    pub fn sample(&self, c_seed: u64) -> ReflectivityMap {
        let mut s = rng::stream(c_seed);
        let values = self
            .reflectivity
            .iter()
            .zip(&self.spread)
            .map(|(o, sd)| {
                let g = rng::normal(&mut s);
                o + sd * g
            })
            .collect();
        ReflectivityMap::new(self.grid, values).expect("grid-sized")
    }

    /// Streams `count` samples seeded by `derive_seed(base_seed, TAG_SAMPLE, c)`
    /// into an accumulator, in parallel chunks. The result does not depend on
    /// the number of worker threads.
    pub fn accumulate(&self, base_seed: u64, count: usize) -> VarianceAccumulator {
        const CHUNK: usize = 64;
        let chunks: Vec<VarianceAccumulator> = (0..count.div_ceil(CHUNK))
            .into_par_iter()
            .map(|k| {
                let mut acc = VarianceAccumulator::new(self.grid);
                for c in k * CHUNK..((k + 1) * CHUNK).min(count) {
                    acc.push(self.sample(rng::derive_seed(base_seed, rng::TAG_SAMPLE, c as u64)).values());
                }
                acc
            })
            .collect();
        chunks.into_iter().fold(VarianceAccumulator::new(self.grid), VarianceAccumulator::merge)
    }
}

/// One sample of the empirical stochasticity model.
pub fn empirical_sample(
    p: &EchogenicityMap,
    m_seed: u64,
    params: VarianceModelParams,
    c_seed: u64,
) -> Result<ReflectivityMap, VarianceError> {
    Ok(EmpiricalModel::new(p, m_seed, params)?.sample(c_seed))
}

/// `20·log10(|v|/max|v|)` clipped to `[−dynamic_range_db, 0]`.
pub fn db_compress(values: &[f64], dynamic_range_db: f64) -> Result<Vec<f64>, VarianceError> {
    if !(dynamic_range_db > 0.0 && dynamic_range_db.is_finite()) {
        return Err(VarianceError::BadDynamicRange(dynamic_range_db));
    }
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(vec![-dynamic_range_db; values.len()]);
    }
    Ok(values
        .iter()
        .map(|v| {
            let db = 20.0 * (v.abs() / peak).log10();
            db.clamp(-dynamic_range_db, 0.0)
        })
        .collect())
}
