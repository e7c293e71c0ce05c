//! Synthetic echogenicity phantoms and multiplicative speckle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{EchogenicityMap, GridError, ImageGrid, ReflectivityMap};
use crate::rng;

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("disk {index} at ({x}, {z}) mm with radius {radius} mm does not fit inside the grid")]
    DiskOutside { index: usize, x: f64, z: f64, radius: f64 },
    #[error("disk {index} has non-positive radius {radius}")]
    BadRadius { index: usize, radius: f64 },
    #[error("scatterer {index} at ({x}, {z}) mm lies outside the grid")]
    PointOutside { index: usize, x: f64, z: f64 },
    #[error("scatterer {index} has non-positive amplitude {amplitude}")]
    BadAmplitude { index: usize, amplitude: f64 },
    #[error("invalid level {0}")]
    BadLevel(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center_x_mm: f64,
    pub center_z_mm: f64,
    pub radius_mm: f64,
    pub inside_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionSpec {
    pub disks: Vec<Disk>,
    pub background_level: f64,
}

impl Default for OcclusionSpec {
    /// 3×3 anechoic disks of radius 2 mm, evenly spread over the standard
    /// field of view, on a unit background.
    fn default() -> Self {
        let disks = [16.0, 28.0, 40.0]
            .iter()
            .flat_map(|&z| {
                [-12.0, 0.0, 12.0].map(|x| Disk { center_x_mm: x, center_z_mm: z, radius_mm: 2.0, inside_level: 0.0 })
            })
            .collect();
        Self { disks, background_level: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub x_mm: f64,
    pub z_mm: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScattererSpec {
    pub points: Vec<Scatterer>,
    pub background_level: f64,
}

impl Default for ScattererSpec {
    /// 5×5 lattice of unit scatterers, 6 mm apart, on an empty background.
    fn default() -> Self {
        let points = [16.0, 22.0, 28.0, 34.0, 40.0]
            .iter()
            .flat_map(|&z| [-12.0, -6.0, 0.0, 6.0, 12.0].map(|x| Scatterer { x_mm: x, z_mm: z, amplitude: 1.0 }))
            .collect();
        Self { points, background_level: 0.0 }
    }
}

fn check_level(level: f64) -> Result<(), PhantomError> {
    if level >= 0.0 && level.is_finite() {
        Ok(())
    } else {
        Err(PhantomError::BadLevel(level))
    }
}

impl OcclusionSpec {
    pub fn validate(&self, grid: &ImageGrid) -> Result<(), PhantomError> {
        check_level(self.background_level)?;
        let (x0, x1) = grid.x_range_mm();
        let (z0, z1) = grid.z_range_mm();
        for (index, d) in self.disks.iter().enumerate() {
            if !(d.radius_mm > 0.0 && d.radius_mm.is_finite()) {
                return Err(PhantomError::BadRadius { index, radius: d.radius_mm });
            }
            check_level(d.inside_level)?;
            let fits = d.center_x_mm - d.radius_mm >= x0
                && d.center_x_mm + d.radius_mm <= x1
                && d.center_z_mm - d.radius_mm >= z0
                && d.center_z_mm + d.radius_mm <= z1;
            if !fits {
                return Err(PhantomError::DiskOutside {
                    index,
                    x: d.center_x_mm,
                    z: d.center_z_mm,
                    radius: d.radius_mm,
                });
            }
        }
        Ok(())
    }
}

impl ScattererSpec {
    pub fn validate(&self, grid: &ImageGrid) -> Result<(), PhantomError> {
        check_level(self.background_level)?;
        for (index, p) in self.points.iter().enumerate() {
            if !(p.amplitude > 0.0 && p.amplitude.is_finite()) {
                return Err(PhantomError::BadAmplitude { index, amplitude: p.amplitude });
            }
            if !grid.contains(p.x_mm, p.z_mm) {
                return Err(PhantomError::PointOutside { index, x: p.x_mm, z: p.z_mm });
            }
        }
        Ok(())
    }
}

/// Piecewise-constant map: each pixel takes the level of the first disk
/// containing its center, else the background.
pub fn make_occlusion_phantom(grid: &ImageGrid, spec: &OcclusionSpec) -> Result<EchogenicityMap, PhantomError> {
    spec.validate(grid)?;
    let values = (0..grid.len())
        .map(|i| {
            let (x, z) = grid.pixel_position(i).expect("index in range");
            spec.disks
                .iter()
                .find(|d| (x - d.center_x_mm).powi(2) + (z - d.center_z_mm).powi(2) <= d.radius_mm * d.radius_mm)
                .map_or(spec.background_level, |d| d.inside_level)
        })
        .collect();
    Ok(EchogenicityMap::new(*grid, values)?)
}

/// Background plus point targets rasterized to their nearest pixel; pixel
/// collisions keep the larger amplitude.
pub fn make_scatterer_phantom(grid: &ImageGrid, spec: &ScattererSpec) -> Result<EchogenicityMap, PhantomError> {
    spec.validate(grid)?;
    let mut values = vec![spec.background_level; grid.len()];
    let mut hit = vec![false; grid.len()];
    for (index, p) in spec.points.iter().enumerate() {
        let i = grid
            .nearest_index(p.x_mm, p.z_mm)
            .ok_or(PhantomError::PointOutside { index, x: p.x_mm, z: p.z_mm })?;
        values[i] = if hit[i] { values[i].max(p.amplitude) } else { p.amplitude };
        hit[i] = true;
    }
    Ok(EchogenicityMap::new(*grid, values)?)
}

/// `o = m ⊙ p` with `m` i.i.d. standard normal from `seed`.
pub fn apply_multiplicative_noise(p: &EchogenicityMap, seed: u64) -> ReflectivityMap {
    let m = rng::normals(seed, p.values().len());
    let values = p.values().iter().zip(&m).map(|(p, m)| p * m).collect();
    ReflectivityMap::new(*p.grid(), values).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_occlusion_has_two_levels() {
        let g = ImageGrid::with_size(128, 128);
        let p = make_occlusion_phantom(&g, &OcclusionSpec::default()).unwrap();
        assert_eq!(OcclusionSpec::default().disks.len(), 9);
        assert!(p.values().iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(p.values().contains(&0.0) && p.values().contains(&1.0));
    }

    #[test]
    fn no_disks_gives_uniform_map() {
        let g = ImageGrid::with_size(16, 16);
        let spec = OcclusionSpec { disks: vec![], background_level: 1.0 };
        let p = make_occlusion_phantom(&g, &spec).unwrap();
        assert!(p.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn disk_area_matches_brute_force_count() {
        // square pitch h = 0.1 mm
        let g = ImageGrid::new(201, 201, (-10.0, 10.0), (0.0, 20.0)).unwrap();
        let h = g.lateral_pitch_mm();
        let r = 3.3;
        let disk = Disk { center_x_mm: 0.37, center_z_mm: 9.81, radius_mm: r, inside_level: 0.0 };
        let spec = OcclusionSpec { disks: vec![disk], background_level: 1.0 };
        let p = make_occlusion_phantom(&g, &spec).unwrap();
        let zeros = p.values().iter().filter(|&&v| v == 0.0).count() as f64;
        let mut brute = 0usize;
        for row in 0..g.depth_px() {
            for col in 0..g.width_px() {
                let (x, z) = (g.x_of_col(col), g.z_of_row(row));
                if (x - 0.37).hypot(z - 9.81) <= r {
                    brute += 1;
                }
            }
        }
        assert_eq!(zeros as usize, brute);
        let area = std::f64::consts::PI * r * r / (h * h);
        let perimeter = 2.0 * std::f64::consts::PI * r / h;
        assert!((zeros - area).abs() <= perimeter, "{zeros} vs {area}");
    }

    #[test]
    fn disk_outside_is_rejected() {
        let g = ImageGrid::standard();
        let disk = Disk { center_x_mm: 17.0, center_z_mm: 20.0, radius_mm: 2.0, inside_level: 0.0 };
        let spec = OcclusionSpec { disks: vec![disk], background_level: 1.0 };
        assert!(matches!(make_occlusion_phantom(&g, &spec), Err(PhantomError::DiskOutside { .. })));
    }

    #[test]
    fn scatterer_lattice_and_collisions() {
        let g = ImageGrid::with_size(128, 128);
        let p = make_scatterer_phantom(&g, &ScattererSpec::default()).unwrap();
        assert_eq!(p.values().iter().filter(|&&v| v == 1.0).count(), 25);
        assert_eq!(p.values().iter().filter(|&&v| v == 0.0).count(), g.len() - 25);

        let pts = vec![
            Scatterer { x_mm: 0.0, z_mm: 20.0, amplitude: 0.5 },
            Scatterer { x_mm: 0.01, z_mm: 20.01, amplitude: 1.0 },
        ];
        let p = make_scatterer_phantom(&g, &ScattererSpec { points: pts, background_level: 0.0 }).unwrap();
        assert_eq!(p.values().iter().filter(|&&v| v != 0.0).count(), 1);
        assert_eq!(p.values().iter().cloned().fold(0.0, f64::max), 1.0);

        let empty = make_scatterer_phantom(&g, &ScattererSpec { points: vec![], background_level: 0.3 }).unwrap();
        assert!(empty.values().iter().all(|&v| v == 0.3));
        let outside = ScattererSpec { points: vec![Scatterer { x_mm: 30.0, z_mm: 20.0, amplitude: 1.0 }], background_level: 0.0 };
        assert!(matches!(make_scatterer_phantom(&g, &outside), Err(PhantomError::PointOutside { .. })));
    }

    #[test]
    fn speckle_zero_set_and_determinism() {
        let g = ImageGrid::with_size(32, 32);
        let zero = EchogenicityMap::filled(g, 0.0).unwrap();
        assert!(apply_multiplicative_noise(&zero, 3).values().iter().all(|&v| v == 0.0));
        let p = make_occlusion_phantom(&g, &OcclusionSpec { disks: vec![Disk { center_x_mm: 0.0, center_z_mm: 28.0, radius_mm: 5.0, inside_level: 0.0 }], background_level: 2.0 }).unwrap();
        let a = apply_multiplicative_noise(&p, 11);
        let b = apply_multiplicative_noise(&p, 11);
        assert_eq!(a, b);
        assert!(a.values().iter().zip(p.values()).all(|(o, p)| *p != 0.0 || *o == 0.0));
    }

    #[test]
    fn speckle_moments_on_unit_map() {
        let g = ImageGrid::standard();
        let p = EchogenicityMap::filled(g, 1.0).unwrap();
        let o = apply_multiplicative_noise(&p, 2024);
        let n = o.values().len() as f64;
        let mean = o.values().iter().sum::<f64>() / n;
        let var = o.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn speckle_pixel_moments_over_seeds() {
        let g = ImageGrid::with_size(4, 4);
        let p = EchogenicityMap::new(g, (0..16).map(|i| 0.25 * i as f64).collect()).unwrap();
        let seeds = 10_000;
        let mut sum = [0.0; 16];
        let mut sq = [0.0; 16];
        for s in 0..seeds {
            let o = apply_multiplicative_noise(&p, s);
            for (i, v) in o.values().iter().enumerate() {
                sum[i] += v;
                sq[i] += v * v;
            }
        }
        let n = seeds as f64;
        for i in [1usize, 5, 15] {
            let pi = p.values()[i];
            let mean = sum[i] / n;
            let var = sq[i] / n - mean * mean;
            assert!(mean.abs() < 3.0 * pi / n.sqrt());
            // sample variance of a normal has std σ²·sqrt(2/n)
            assert!((var - pi * pi).abs() < 3.0 * pi * pi * (2.0 / n).sqrt());
        }
    }
}
