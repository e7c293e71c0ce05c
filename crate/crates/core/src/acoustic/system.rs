use super::operator::check_len;
use super::{AcousticError, DenseOperator, LinearOperator, ProbeConfig, PulseKernel};
use crate::grid::{ImageGrid, ReflectivityMap, RfChannelData};
use crate::rng;

/// Plane-wave system matrix `H` of shape `(K·L) × N`.
///
/// Row `j*K + k` holds element `j`, time sample `k`; column `i` is the echo
/// of a unit reflector at pixel `i`: `H[(j,k), i] = h(t_k − τ_j(r_i))`.
/// Dense storage is `K·L·N` doubles, so keep grids at desk scale
/// (≤ 128×128 with a few dozen elements).
pub fn build_system_matrix(
    probe: &ProbeConfig,
    grid: &ImageGrid,
    pulse: &PulseKernel,
) -> Result<DenseOperator, AcousticError> {
    probe.validate()?;
    let l = probe.num_elements;
    let k_len = probe.num_time_samples;
    let n = grid.len();
    let fs = probe.sampling_rate_hz;
    let t0 = probe.acquisition_start_time_s;
    let t_end = probe.sample_time_s(k_len - 1);
    let support = pulse.half_support_s();

    let mut entries = vec![0.0; l * k_len * n];
    let mut truncated = 0usize;
    let mut any = false;
    for i in 0..n {
        let (x, z) = grid.pixel_position(i)?;
        for j in 0..l {
            let tau = probe.delay_s(j, x, z);
            if tau - support < t0 || tau + support > t_end {
                truncated += 1;
            }
            let k_lo = ((tau - support - t0) * fs).ceil().max(0.0) as usize;
            let k_hi = ((tau + support - t0) * fs).floor();
            if k_hi < 0.0 {
                continue;
            }
            let k_hi = (k_hi as usize).min(k_len - 1);
            for k in k_lo..=k_hi {
                let v = pulse.eval(probe.sample_time_s(k) - tau);
                if v != 0.0 {
                    entries[(j * k_len + k) * n + i] = v;
                    any = true;
                }
            }
        }
    }
    if !any {
        return Err(AcousticError::Build("time window does not overlap any pixel echo".into()));
    }
    if truncated > 0 {
        log::warn!("{truncated} pixel/element echoes are cut by the acquisition window");
    }
    DenseOperator::new(l * k_len, n, entries)
}

/// `y = H·o + n`, `n ~ N(0, noise_std²)` i.i.d. from `seed`.
pub fn simulate_rf(
    h: &DenseOperator,
    probe: &ProbeConfig,
    o: &ReflectivityMap,
    noise_std: f64,
    seed: u64,
) -> Result<RfChannelData, AcousticError> {
    let values = simulate_rf_with(h, o.values(), noise_std, seed)?;
    check_len(probe.num_elements * probe.num_time_samples, values.len())?;
    Ok(RfChannelData::new(probe.num_elements, probe.num_time_samples, probe.sampling_rate_hz, values)?)
}

/// Operator-agnostic `A·x + n`.
pub fn simulate_rf_with(
    op: &dyn LinearOperator,
    x: &[f64],
    noise_std: f64,
    seed: u64,
) -> Result<Vec<f64>, AcousticError> {
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(AcousticError::Config(format!("noise std {noise_std} must be nonnegative")));
    }
    let mut y = op.apply(x)?;
    if noise_std > 0.0 {
        let mut stream = rng::stream(seed);
        y.iter_mut().for_each(|v| *v += noise_std * rng::normal(&mut stream));
    }
    Ok(y)
}
