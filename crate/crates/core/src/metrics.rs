//! Image-quality metrics on linear-amplitude images.
//!
//! All functions here read `|img|`, so signed reflectivity and echogenicity
//! maps can be passed directly.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{ImageGrid, RegionMask};
use crate::phantom::{Disk, OcclusionSpec, ScattererSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("region mask is empty")]
    EmptyMask,
    #[error("inside and outside masks overlap")]
    OverlappingMasks,
    #[error("need at least {needed} bins/pixels, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("image has {actual} pixels, mask grid has {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error("no local maximum within the search window around ({x_mm}, {z_mm}) mm")]
    NoPeak { x_mm: f64, z_mm: f64 },
    #[error("peak at ({x_mm}, {z_mm}) mm does not fall below half maximum on both sides")]
    Unresolved { x_mm: f64, z_mm: f64 },
}

/// Default number of histogram bins for gCNR.
pub const DEFAULT_GCNR_BINS: usize = 256;
/// Default half-width of the FWHM peak search window, mm.
pub const DEFAULT_PEAK_SEARCH_MM: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Axial,
    Lateral,
}

fn check(img: &[f64], mask: &RegionMask) -> Result<(), MetricError> {
    if img.len() != mask.grid().len() {
        return Err(MetricError::LengthMismatch { expected: mask.grid().len(), actual: img.len() });
    }
    if mask.is_empty() {
        return Err(MetricError::EmptyMask);
    }
    Ok(())
}

/// `1 − Σ min(g_in, g_out)` over `num_bins` histogram bins spanning the
/// joint value range of both regions.
pub fn gcnr(img: &[f64], inside: &RegionMask, outside: &RegionMask, num_bins: usize) -> Result<f64, MetricError> {
    check(img, inside)?;
    check(img, outside)?;
    if num_bins < 2 {
        return Err(MetricError::TooFew { needed: 2, got: num_bins });
    }
    if inside.overlaps(outside) {
        return Err(MetricError::OverlappingMasks);
    }
    let vin: Vec<f64> = inside.select(img).map(f64::abs).collect();
    let vout: Vec<f64> = outside.select(img).map(f64::abs).collect();
    Ok(gcnr_values(&vin, &vout, num_bins))
}

/// gCNR of two raw value sets (both nonempty).
pub fn gcnr_values(inside: &[f64], outside: &[f64], num_bins: usize) -> f64 {
    let (lo, hi) = inside
        .iter()
        .chain(outside)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi <= lo {
        return 0.0;
    }
    let width = (hi - lo) / num_bins as f64;
    let hist = |vals: &[f64]| {
        let mut h = vec![0.0; num_bins];
        for &v in vals {
            let b = (((v - lo) / width) as usize).min(num_bins - 1);
            h[b] += 1.0;
        }
        let n = vals.len() as f64;
        h.iter_mut().for_each(|c| *c /= n);
        h
    };
    let (hin, hout) = (hist(inside), hist(outside));
    let overlap: f64 = hin.iter().zip(&hout).map(|(a, b)| a.min(*b)).sum();
    (1.0 - overlap).clamp(0.0, 1.0)
}

/// Mean over population standard deviation inside `roi`.
pub fn snr(img: &[f64], roi: &RegionMask) -> Result<f64, MetricError> {
    check(img, roi)?;
    let vals: Vec<f64> = roi.select(img).map(f64::abs).collect();
    snr_values(&vals)
}

pub fn snr_values(vals: &[f64]) -> Result<f64, MetricError> {
    if vals.len() < 2 {
        return Err(MetricError::TooFew { needed: 2, got: vals.len() });
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(MetricError::Undefined("zero standard deviation in region"));
    }
    Ok(mean / var.sqrt())
}

/// −6 dB width (mm) of the peak nearest `peak_hint` along `axis`.
///
/// The peak is the largest `|img|` within ±1 mm of the hint and must be a
/// local maximum of its profile.
pub fn fwhm(img: &[f64], grid: &ImageGrid, peak_hint: (f64, f64), axis: Axis) -> Result<f64, MetricError> {
    fwhm_with_window(img, grid, peak_hint, axis, DEFAULT_PEAK_SEARCH_MM)
}

pub fn fwhm_with_window(
    img: &[f64],
    grid: &ImageGrid,
    peak_hint: (f64, f64),
    axis: Axis,
    window_mm: f64,
) -> Result<f64, MetricError> {
    if img.len() != grid.len() {
        return Err(MetricError::LengthMismatch { expected: grid.len(), actual: img.len() });
    }
    let (hx, hz) = peak_hint;
    let no_peak = MetricError::NoPeak { x_mm: hx, z_mm: hz };
    let mut best: Option<(usize, f64)> = None;
    for row in 0..grid.depth_px() {
        if (grid.z_of_row(row) - hz).abs() > window_mm {
            continue;
        }
        for col in 0..grid.width_px() {
            if (grid.x_of_col(col) - hx).abs() > window_mm {
                continue;
            }
            let i = grid.index(row, col);
            let v = img[i].abs();
            if v.is_finite() && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    let (peak_idx, peak) = best.ok_or(no_peak.clone())?;
    if !(peak > 0.0) {
        return Err(no_peak);
    }
    let (row, col) = grid.row_col(peak_idx);
    let (profile, pitch, centre): (Vec<f64>, f64, usize) = match axis {
        Axis::Lateral => (
            (0..grid.width_px()).map(|c| img[grid.index(row, c)].abs()).collect(),
            grid.lateral_pitch_mm(),
            col,
        ),
        Axis::Axial => (
            (0..grid.depth_px()).map(|r| img[grid.index(r, col)].abs()).collect(),
            grid.axial_pitch_mm(),
            row,
        ),
    };
    let neighbours = [centre.checked_sub(1), Some(centre + 1)];
    if neighbours.iter().flatten().any(|&i| profile.get(i).is_some_and(|&v| v > peak)) {
        return Err(no_peak);
    }
    let unresolved = MetricError::Unresolved { x_mm: grid.x_of_col(col), z_mm: grid.z_of_row(row) };
    let width = profile_fwhm(&profile, centre).ok_or(unresolved)?;
    Ok(width * pitch)
}

/// Width in samples between the half-maximum crossings on either side of
/// `centre`, by linear interpolation. `None` if either side never drops
/// below half.
pub fn profile_fwhm(profile: &[f64], centre: usize) -> Option<f64> {
    let half = profile[centre] / 2.0;
    let mut right = None;
    for i in centre..profile.len() - 1 {
        let (a, b) = (profile[i], profile[i + 1]);
        if a >= half && b < half {
            right = Some(i as f64 + (a - half) / (a - b));
            break;
        }
    }
    let mut left = None;
    for i in (1..=centre).rev() {
        let (a, b) = (profile[i], profile[i - 1]);
        if a >= half && b < half {
            left = Some(i as f64 - (a - half) / (a - b));
            break;
        }
    }
    Some(right? - left?)
}

/// Per-region values of one metric with their mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Regions whose metric could not be evaluated.
    pub failures: usize,
}

impl MetricReport {
    /// Mean and population standard deviation over the finite entries.
    pub fn from_results(name: impl Into<String>, results: impl IntoIterator<Item = Result<f64, MetricError>>) -> Self {
        let mut values = Vec::new();
        let mut failures = 0;
        for r in results {
            match r {
                Ok(v) if v.is_finite() => values.push(v),
                _ => failures += 1,
            }
        }
        let (mean, std) = mean_std(&values);
        Self { name: name.into(), values, mean, std, failures }
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {:.4} ± {:.4} (n = {}", self.name, self.mean, self.std, self.values.len())?;
        if self.failures > 0 {
            write!(f, ", {} failed", self.failures)?;
        }
        write!(f, ")")
    }
}

/// Mean and population standard deviation; NaN for an empty slice.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Radii, as fractions of the disk radius, bounding the comparison regions
/// around an occlusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionSpec {
    pub inside_fraction: f64,
    pub outside_inner: f64,
    pub outside_outer: f64,
}

impl Default for RegionSpec {
    fn default() -> Self {
        Self { inside_fraction: 0.9, outside_inner: 1.25, outside_outer: 1.6 }
    }
}

impl RegionSpec {
    pub fn validate(&self) -> Result<(), MetricError> {
        let ok = self.inside_fraction > 0.0
            && self.inside_fraction < self.outside_inner
            && self.outside_inner < self.outside_outer
            && self.outside_outer.is_finite();
        if ok {
            Ok(())
        } else {
            Err(MetricError::Undefined("region radii must satisfy 0 < inside < outside_inner < outside_outer"))
        }
    }
}

/// The "in" disk and "out" annulus around one occlusion.
pub fn occlusion_regions(grid: &ImageGrid, disk: &Disk, spec: &RegionSpec) -> (RegionMask, RegionMask) {
    let r = disk.radius_mm;
    let d = |x: f64, z: f64| ((x - disk.center_x_mm).powi(2) + (z - disk.center_z_mm).powi(2)).sqrt();
    let inside = RegionMask::from_fn(*grid, |x, z| d(x, z) <= spec.inside_fraction * r);
    let outside = RegionMask::from_fn(*grid, |x, z| {
        let dist = d(x, z);
        dist >= spec.outside_inner * r && dist <= spec.outside_outer * r
    });
    (inside, outside)
}

/// gCNR and SNR over every occlusion of a phantom. SNR is evaluated on the
/// background annulus of each occlusion.
pub fn occlusion_metrics(
    img: &[f64],
    grid: &ImageGrid,
    phantom: &OcclusionSpec,
    regions: &RegionSpec,
    num_bins: usize,
) -> (MetricReport, MetricReport) {
    let masks: Vec<_> = phantom.disks.iter().map(|d| occlusion_regions(grid, d, regions)).collect();
    let g = MetricReport::from_results("gcnr", masks.iter().map(|(i, o)| gcnr(img, i, o, num_bins)));
    let s = MetricReport::from_results("snr", masks.iter().map(|(_, o)| snr(img, o)));
    (g, s)
}

/// Lateral and axial FWHM at every scatterer of a phantom.
pub fn scatterer_metrics(img: &[f64], grid: &ImageGrid, phantom: &ScattererSpec) -> (MetricReport, MetricReport) {
    let lat = MetricReport::from_results(
        "fwhm_lateral_mm",
        phantom.points.iter().map(|p| fwhm(img, grid, (p.x_mm, p.z_mm), Axis::Lateral)),
    );
    let ax = MetricReport::from_results(
        "fwhm_axial_mm",
        phantom.points.iter().map(|p| fwhm(img, grid, (p.x_mm, p.z_mm), Axis::Axial)),
    );
    (lat, ax)
}
