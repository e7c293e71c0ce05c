//! Simulates a single point scatterer with the plane-wave system matrix and
//! compares delay-and-sum with the matched-filter matrix `B·y`.

use drus::acoustic::{
    build_beamformer, build_pulse, build_system_matrix, das_beamform, simulate_rf, ApodizationConfig, LinearOperator,
    ProbeConfig,
};
use drus::{ImageGrid, ReflectivityMap};

fn peak(values: &[f64]) -> usize {
    values.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).map(|(i, _)| i).unwrap_or(0)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = ImageGrid::new(48, 48, (-3.0, 3.0), (10.0, 16.0))?;
    let probe = ProbeConfig { num_elements: 32, num_time_samples: 216, acquisition_start_time_s: 12.3e-6, ..Default::default() };
    let apod = ApodizationConfig::default();

    let pulse = build_pulse(&probe);
    let h = build_system_matrix(&probe, &grid, &pulse)?;
    println!("H is {} x {} ({} pulse samples)", h.rows(), h.cols(), pulse.samples().len());

    let target = grid.index(30, 12);
    let mut o = ReflectivityMap::zeros(grid);
    o.values_mut()[target] = 1.0;
    let rf = simulate_rf(&h, &probe, &o, 0.01, 1)?;

    let das = das_beamform(&rf, &probe, &grid, &apod)?;
    let (b, report) = build_beamformer(&h, &probe, &grid, &apod)?;
    let by = b.apply(rf.values())?;

    let (x, z) = grid.pixel_position(target)?;
    println!("scatterer at ({x:.3}, {z:.3}) mm, pixel {target}");
    println!("DAS peak pixel {}, B·y peak pixel {}", peak(das.values()), peak(&by));
    println!("beamformer rows with empty aperture: {}", report.empty_rows.len());
    Ok(())
}
