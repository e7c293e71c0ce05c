//! Image grid and the array-bearing map types shared by every stage.
//!
//! Pixels are stored row-major with the axial (depth) index varying slowest:
//! `index = row * width_px + col`. Grid pitch is endpoint-inclusive, so the
//! first and last pixel centers sit exactly on the stated extents.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 2 pixels per axis, got {width}x{depth}")]
    TooSmall { width: usize, depth: usize },
    #[error("invalid extent on {axis} axis: [{min}, {max}]")]
    BadExtent { axis: &'static str, min: f64, max: f64 },
    #[error("pixel index {index} out of range for {len} pixels")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("negative or non-finite echogenicity {value} at pixel {index}")]
    NegativeEchogenicity { index: usize, value: f64 },
    #[error("invalid RF data: {0}")]
    BadRf(String),
    #[error("grids differ")]
    GridMismatch,
}

/// A rectangular sampling of the imaged region, in millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGrid {
    width_px: usize,
    depth_px: usize,
    x_min_mm: f64,
    x_max_mm: f64,
    z_min_mm: f64,
    z_max_mm: f64,
}

impl ImageGrid {
    pub fn new(
        width_px: usize,
        depth_px: usize,
        (x_min_mm, x_max_mm): (f64, f64),
        (z_min_mm, z_max_mm): (f64, f64),
    ) -> Result<Self, GridError> {
        if width_px < 2 || depth_px < 2 {
            return Err(GridError::TooSmall { width: width_px, depth: depth_px });
        }
        if !(x_min_mm.is_finite() && x_max_mm.is_finite() && x_max_mm > x_min_mm) {
            return Err(GridError::BadExtent { axis: "lateral", min: x_min_mm, max: x_max_mm });
        }
        if !(z_min_mm.is_finite() && z_max_mm.is_finite() && z_max_mm > z_min_mm) {
            return Err(GridError::BadExtent { axis: "axial", min: z_min_mm, max: z_max_mm });
        }
        Ok(Self { width_px, depth_px, x_min_mm, x_max_mm, z_min_mm, z_max_mm })
    }

    /// The 256×256 grid spanning x ∈ [−18, 18] mm, z ∈ [10, 46] mm.
    pub fn standard() -> Self {
        Self::with_size(256, 256)
    }

    /// Standard field of view resampled to `width_px × depth_px`.
    pub fn with_size(width_px: usize, depth_px: usize) -> Self {
        Self::new(width_px, depth_px, (-18.0, 18.0), (10.0, 46.0))
            .expect("standard field of view is valid")
    }

    pub fn width_px(&self) -> usize {
        self.width_px
    }

    pub fn depth_px(&self) -> usize {
        self.depth_px
    }

    pub fn x_range_mm(&self) -> (f64, f64) {
        (self.x_min_mm, self.x_max_mm)
    }

    pub fn z_range_mm(&self) -> (f64, f64) {
        (self.z_min_mm, self.z_max_mm)
    }

    /// Total pixel count N.
    pub fn len(&self) -> usize {
        self.width_px * self.depth_px
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lateral_pitch_mm(&self) -> f64 {
        (self.x_max_mm - self.x_min_mm) / (self.width_px - 1) as f64
    }

    pub fn axial_pitch_mm(&self) -> f64 {
        (self.z_max_mm - self.z_min_mm) / (self.depth_px - 1) as f64
    }

    pub fn x_of_col(&self, col: usize) -> f64 {
        self.x_min_mm + col as f64 * self.lateral_pitch_mm()
    }

    pub fn z_of_row(&self, row: usize) -> f64 {
        self.z_min_mm + row as f64 * self.axial_pitch_mm()
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width_px + col
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.width_px, index % self.width_px)
    }

    /// Physical center `(x_mm, z_mm)` of pixel `index`.
    pub fn pixel_position(&self, index: usize) -> Result<(f64, f64), GridError> {
        if index >= self.len() {
            return Err(GridError::IndexOutOfRange { index, len: self.len() });
        }
        let (row, col) = self.row_col(index);
        Ok((self.x_of_col(col), self.z_of_row(row)))
    }

    /// Nearest pixel to a physical position, or `None` outside the extent
    /// (half a pixel of slack on each side).
    pub fn nearest_index(&self, x_mm: f64, z_mm: f64) -> Option<usize> {
        let col = ((x_mm - self.x_min_mm) / self.lateral_pitch_mm()).round();
        let row = ((z_mm - self.z_min_mm) / self.axial_pitch_mm()).round();
        if !(0.0..self.width_px as f64).contains(&col) || !(0.0..self.depth_px as f64).contains(&row) {
            return None;
        }
        Some(self.index(row as usize, col as usize))
    }

    pub fn contains(&self, x_mm: f64, z_mm: f64) -> bool {
        (self.x_min_mm..=self.x_max_mm).contains(&x_mm) && (self.z_min_mm..=self.z_max_mm).contains(&z_mm)
    }

    fn check_len(&self, len: usize) -> Result<(), GridError> {
        if len != self.len() {
            return Err(GridError::LengthMismatch { expected: self.len(), actual: len });
        }
        Ok(())
    }
}

/// Nonnegative tissue echogenicity `p` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EchogenicityMap {
    grid: ImageGrid,
    values: Vec<f64>,
}

impl EchogenicityMap {
    pub fn new(grid: ImageGrid, values: Vec<f64>) -> Result<Self, GridError> {
        grid.check_len(values.len())?;
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(GridError::NegativeEchogenicity { index, value });
        }
        Ok(Self { grid, values })
    }

    pub fn filled(grid: ImageGrid, level: f64) -> Result<Self, GridError> {
        Self::new(grid, vec![level; grid.len()])
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Signed reflectivity `o = m ⊙ p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectivityMap {
    grid: ImageGrid,
    values: Vec<f64>,
}

impl ReflectivityMap {
    pub fn new(grid: ImageGrid, values: Vec<f64>) -> Result<Self, GridError> {
        grid.check_len(values.len())?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: ImageGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Per-element RF samples, element-major: element `j` owns
/// `values[j*K..(j+1)*K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RfChannelData {
    num_elements: usize,
    num_time_samples: usize,
    sampling_rate_hz: f64,
    values: Vec<f64>,
}

impl RfChannelData {
    pub fn new(
        num_elements: usize,
        num_time_samples: usize,
        sampling_rate_hz: f64,
        values: Vec<f64>,
    ) -> Result<Self, GridError> {
        if !(sampling_rate_hz > 0.0 && sampling_rate_hz.is_finite()) {
            return Err(GridError::BadRf(format!("sampling rate {sampling_rate_hz} Hz")));
        }
        if num_elements == 0 || num_time_samples == 0 {
            return Err(GridError::BadRf("empty channel layout".into()));
        }
        let expected = num_elements * num_time_samples;
        if values.len() != expected {
            return Err(GridError::LengthMismatch { expected, actual: values.len() });
        }
        Ok(Self { num_elements, num_time_samples, sampling_rate_hz, values })
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn num_time_samples(&self) -> usize {
        self.num_time_samples
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self, element: usize) -> &[f64] {
        let k = self.num_time_samples;
        &self.values[element * k..(element + 1) * k]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Boolean pixel membership on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    grid: ImageGrid,
    member: Vec<bool>,
}

impl RegionMask {
    pub fn new(grid: ImageGrid, member: Vec<bool>) -> Result<Self, GridError> {
        grid.check_len(member.len())?;
        Ok(Self { grid, member })
    }

    pub fn from_fn(grid: ImageGrid, f: impl Fn(f64, f64) -> bool) -> Self {
        let member = (0..grid.len())
            .map(|i| {
                let (row, col) = grid.row_col(i);
                f(grid.x_of_col(col), grid.z_of_row(row))
            })
            .collect();
        Self { grid, member }
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn member(&self) -> &[bool] {
        &self.member
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn overlaps(&self, other: &RegionMask) -> bool {
        self.member.iter().zip(&other.member).any(|(a, b)| *a && *b)
    }

    /// Values of `img` at member pixels, in index order.
    pub fn select<'a>(&'a self, img: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        self.member.iter().zip(img).filter(|(m, _)| **m).map(|(_, v)| *v)
    }
}
