//! gCNR, SNR and FWHM on synthetic images with known answers.

use drus::metrics::{fwhm, gcnr_values, occlusion_metrics, snr_values, Axis, RegionSpec, DEFAULT_GCNR_BINS};
use drus::phantom::{apply_multiplicative_noise, make_occlusion_phantom, OcclusionSpec};
use drus::rng;
use drus::ImageGrid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 200_000;
    let rayleigh: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (rng::normals(2 * i, 1)[0], rng::normals(2 * i + 1, 1)[0]);
            a.hypot(b)
        })
        .collect();
    println!("SNR of Rayleigh speckle: {:.3} (theory 1.913)", snr_values(&rayleigh)?);

    let shifted: Vec<f64> = rayleigh.iter().map(|v| v + 1.0).collect();
    println!("gCNR of Rayleigh vs Rayleigh+1: {:.3}", gcnr_values(&rayleigh, &shifted, DEFAULT_GCNR_BINS));

    let grid = ImageGrid::standard();
    let centre = (grid.x_of_col(100), grid.z_of_row(60));
    let sigma = 0.17;
    let img: Vec<f64> = (0..grid.len())
        .map(|i| {
            let (x, z) = grid.pixel_position(i).unwrap();
            (-((x - centre.0).powi(2) + (z - centre.1).powi(2)) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    println!(
        "Gaussian blob sigma {sigma} mm: lateral FWHM {:.4} mm (theory {:.4})",
        fwhm(&img, &grid, centre, Axis::Lateral)?,
        2.0 * (2.0 * 2f64.ln()).sqrt() * sigma
    );

    let spec = OcclusionSpec::default();
    let speckle = apply_multiplicative_noise(&make_occlusion_phantom(&grid, &spec)?, 3);
    let (g, s) = occlusion_metrics(speckle.values(), &grid, &spec, &RegionSpec::default(), DEFAULT_GCNR_BINS);
    println!("raw speckle, per-disk: {g}; {s}");
    Ok(())
}
