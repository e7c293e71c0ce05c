use super::SamplerError;

/// Noise ladder `σ_1 < … < σ_T` with `σ_0 = 0`, and the subsequence of
/// timesteps actually visited.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    /// `sigmas[t]` is σ_t; `sigmas[0] = 0`.
    sigmas: Vec<f64>,
    /// Visited timesteps, from `T` down to `0`.
    step_indices: Vec<usize>,
}

impl DiffusionSchedule {
    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn step_indices(&self) -> &[usize] {
        &self.step_indices
    }

    pub fn num_timesteps(&self) -> usize {
        self.sigmas.len() - 1
    }

    /// Number of updates `N_it`.
    pub fn num_steps(&self) -> usize {
        self.step_indices.len() - 1
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigmas[self.step_indices[0]]
    }

    /// `(σ_t, σ_{t−k})` for each update in traversal order.
    pub fn transitions(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.step_indices.windows(2).map(|w| (self.sigmas[w[0]], self.sigmas[w[1]]))
    }

    /// Skip sizes `k` per update.
    pub fn skips(&self) -> Vec<usize> {
        self.step_indices.windows(2).map(|w| w[0] - w[1]).collect()
    }
}

/// Geometric ladder from `sigma_min` (t = 1) to `sigma_max` (t = T), visited
/// at `num_steps` evenly spaced timesteps `T … 1` and then `0`.
pub fn make_schedule(
    timesteps: usize,
    sigma_max: f64,
    sigma_min: f64,
    num_steps: usize,
) -> Result<DiffusionSchedule, SamplerError> {
    if num_steps == 0 || timesteps < num_steps {
        return Err(SamplerError::Config(format!(
            "need T >= num_steps >= 1, got T = {timesteps}, num_steps = {num_steps}"
        )));
    }
    if !(sigma_min > 0.0 && sigma_max > sigma_min && sigma_max.is_finite()) {
        return Err(SamplerError::Config(format!("need sigma_max > sigma_min > 0, got {sigma_max}, {sigma_min}")));
    }
    let mut sigmas = Vec::with_capacity(timesteps + 1);
    sigmas.push(0.0);
    if timesteps == 1 {
        sigmas.push(sigma_max);
    } else {
        let log_ratio = (sigma_max / sigma_min).ln();
        for t in 1..=timesteps {
            let frac = (t - 1) as f64 / (timesteps - 1) as f64;
            sigmas.push(sigma_min * (frac * log_ratio).exp());
        }
        sigmas[timesteps] = sigma_max;
    }
    let mut step_indices: Vec<usize> = if num_steps == 1 {
        vec![timesteps]
    } else {
        let span = (timesteps - 1) as f64 / (num_steps - 1) as f64;
        (0..num_steps)
            .map(|i| (timesteps as f64 - i as f64 * span).round() as usize)
            .collect()
    };
    step_indices.push(0);
    debug_assert!(step_indices.windows(2).all(|w| w[0] > w[1]));
    Ok(DiffusionSchedule { sigmas, step_indices })
}
