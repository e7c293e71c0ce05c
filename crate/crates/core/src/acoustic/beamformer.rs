use super::operator::check_len;
use super::{AcousticError, ApodizationConfig, DenseOperator, LinearOperator, ProbeConfig};
use crate::grid::{ImageGrid, ReflectivityMap, RfChannelData};

/// Tukey window at normalized position `s ∈ [0, 1]`; zero outside.
pub fn tukey(alpha: f64, s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        return 0.0;
    }
    if alpha <= 0.0 {
        return 1.0;
    }
    let pi = std::f64::consts::PI;
    if s < alpha / 2.0 {
        0.5 * (1.0 + (pi * (2.0 * s / alpha - 1.0)).cos())
    } else if s > 1.0 - alpha / 2.0 {
        0.5 * (1.0 + (pi * (2.0 * s / alpha - 2.0 / alpha + 1.0)).cos())
    } else {
        1.0
    }
}

/// Receive weights, `N × L` row-major. Pixel `i` at depth `z` uses elements
/// within `z / (2·f#)` of its lateral position, Tukey-weighted across that
/// aperture, normalized to unit sum. Rows with no active element stay zero.
pub fn apodization_weights(
    probe: &ProbeConfig,
    grid: &ImageGrid,
    apod: &ApodizationConfig,
) -> Result<Vec<f64>, AcousticError> {
    probe.validate()?;
    apod.validate()?;
    let l = probe.num_elements;
    let mut weights = vec![0.0; grid.len() * l];
    for (i, row) in weights.chunks_mut(l).enumerate() {
        let (x, z) = grid.pixel_position(i)?;
        let half_width = z / (2.0 * apod.f_number);
        if half_width <= 0.0 {
            continue;
        }
        for (j, w) in row.iter_mut().enumerate() {
            let u = (probe.element_x_mm(j) - x) / half_width;
            *w = tukey(apod.tukey_alpha, (u + 1.0) / 2.0);
        }
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|w| *w /= sum);
        }
    }
    Ok(weights)
}

/// Pixels whose aperture held no active element.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BeamformerReport {
    pub empty_rows: Vec<usize>,
}

/// Weighted matched filter `B = W ∘ Hᵀ`, shape `N × (K·L)`.
pub fn build_beamformer(
    h: &DenseOperator,
    probe: &ProbeConfig,
    grid: &ImageGrid,
    apod: &ApodizationConfig,
) -> Result<(DenseOperator, BeamformerReport), AcousticError> {
    let l = probe.num_elements;
    let k_len = probe.num_time_samples;
    check_len(l * k_len, h.rows())?;
    check_len(grid.len(), h.cols())?;
    let weights = apodization_weights(probe, grid, apod)?;
    let n = grid.len();
    let mut entries = vec![0.0; n * l * k_len];
    let mut report = BeamformerReport::default();
    for i in 0..n {
        let w = &weights[i * l..(i + 1) * l];
        if w.iter().all(|&v| v == 0.0) {
            report.empty_rows.push(i);
            continue;
        }
        let row = &mut entries[i * l * k_len..(i + 1) * l * k_len];
        for (j, &wj) in w.iter().enumerate() {
            if wj == 0.0 {
                continue;
            }
            for k in 0..k_len {
                row[j * k_len + k] = wj * h.get(j * k_len + k, i);
            }
        }
    }
    if !report.empty_rows.is_empty() {
        log::warn!("{} beamformer rows have an empty aperture", report.empty_rows.len());
    }
    Ok((DenseOperator::new(n, l * k_len, entries)?, report))
}

/// Delay-and-sum: apodized sum of each channel read at the pixel's two-way
/// delay, linearly interpolated in time. Delays outside the record add zero.
pub fn das_beamform(
    y: &RfChannelData,
    probe: &ProbeConfig,
    grid: &ImageGrid,
    apod: &ApodizationConfig,
) -> Result<ReflectivityMap, AcousticError> {
    check_len(probe.num_elements, y.num_elements())?;
    check_len(probe.num_time_samples, y.num_time_samples())?;
    let l = probe.num_elements;
    let weights = apodization_weights(probe, grid, apod)?;
    let fs = y.sampling_rate_hz();
    let t0 = probe.acquisition_start_time_s;
    let mut image = vec![0.0; grid.len()];
    for (i, px) in image.iter_mut().enumerate() {
        let (x, z) = grid.pixel_position(i)?;
        let mut acc = 0.0;
        for j in 0..l {
            let w = weights[i * l + j];
            if w == 0.0 {
                continue;
            }
            let pos = (probe.delay_s(j, x, z) - t0) * fs;
            let channel = y.channel(j);
            if pos < 0.0 || pos > (channel.len() - 1) as f64 {
                continue;
            }
            let k = pos.floor() as usize;
            let frac = pos - k as f64;
            let next = channel.get(k + 1).copied().unwrap_or(0.0);
            acc += w * ((1.0 - frac) * channel[k] + frac * next);
        }
        *px = acc;
    }
    Ok(ReflectivityMap::new(*grid, image)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::{build_pulse, build_system_matrix, simulate_rf};
    use crate::rng;

    fn setup() -> (ProbeConfig, ImageGrid) {
        let probe = ProbeConfig {
            num_elements: 16,
            num_time_samples: 200,
            acquisition_start_time_s: 2.0 * 9.0 / 1.54e6,
            ..ProbeConfig::default()
        };
        (probe, ImageGrid::new(12, 10, (-1.5, 1.5), (10.0, 13.0)).unwrap())
    }

    #[test]
    fn tukey_shape() {
        assert_eq!(tukey(0.0, 0.0), 1.0);
        assert_eq!(tukey(0.25, 0.5), 1.0);
        assert!(tukey(0.25, 0.0).abs() < 1e-15);
        assert!((tukey(0.25, 0.0625) - 0.5).abs() < 1e-12);
        assert_eq!(tukey(0.25, 1.2), 0.0);
        assert!((tukey(1.0, 0.25) - tukey(1.0, 0.75)).abs() < 1e-15);
    }

    #[test]
    fn aperture_width_at_28mm() {
        // z / (2·f#) = 28 / 2.8 = 10 mm
        let probe = ProbeConfig::default();
        let grid = ImageGrid::new(2, 2, (0.0, 1.0), (28.0, 29.0)).unwrap();
        let apod = ApodizationConfig { tukey_alpha: 0.0, f_number: 1.4 };
        let w = apodization_weights(&probe, &grid, &apod).unwrap();
        let l = probe.num_elements;
        for j in 0..l {
            let active = w[j] > 0.0;
            assert_eq!(active, probe.element_x_mm(j).abs() <= 10.0, "element {j}");
        }
        let sum: f64 = w[..l].iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matched_filter_limit() {
        let (probe, grid) = setup();
        let h = build_system_matrix(&probe, &grid, &build_pulse(&probe)).unwrap();
        let apod = ApodizationConfig { tukey_alpha: 0.0, f_number: 1e-9 };
        let (b, report) = build_beamformer(&h, &probe, &grid, &apod).unwrap();
        assert!(report.empty_rows.is_empty());
        let ht = h.transpose();
        let scale = 1.0 / probe.num_elements as f64;
        for (bv, hv) in b.entries().iter().zip(ht.entries()) {
            assert!((bv - scale * hv).abs() < 1e-15);
        }
    }

    #[test]
    fn bh_peaks_at_the_reflector() {
        let (probe, grid) = setup();
        let h = build_system_matrix(&probe, &grid, &build_pulse(&probe)).unwrap();
        let (b, _) = build_beamformer(&h, &probe, &grid, &ApodizationConfig::default()).unwrap();
        let mut stream = rng::stream(5);
        for _ in 0..10 {
            let i = (rng::normal(&mut stream).abs() * 1e6) as usize % grid.len();
            let mut e = vec![0.0; grid.len()];
            e[i] = 1.0;
            let img = b.apply(&h.apply(&e).unwrap()).unwrap();
            let argmax = (0..img.len()).max_by(|&a, &c| img[a].total_cmp(&img[c])).unwrap();
            assert_eq!(argmax, i);
        }
    }

    #[test]
    fn das_zero_and_point() {
        let (probe, grid) = setup();
        let apod = ApodizationConfig::default();
        let zero = RfChannelData::new(16, 200, probe.sampling_rate_hz, vec![0.0; 3200]).unwrap();
        assert!(das_beamform(&zero, &probe, &grid, &apod).unwrap().values().iter().all(|&v| v == 0.0));

        let h = build_system_matrix(&probe, &grid, &build_pulse(&probe)).unwrap();
        let target = grid.index(4, 7);
        let mut o = ReflectivityMap::zeros(grid);
        o.values_mut()[target] = 1.0;
        let y = simulate_rf(&h, &probe, &o, 0.0, 0).unwrap();
        let img = das_beamform(&y, &probe, &grid, &apod).unwrap();
        let v = img.values();
        let argmax = (0..v.len()).max_by(|&a, &c| v[a].total_cmp(&v[c])).unwrap();
        assert_eq!(argmax, target);
    }
}
