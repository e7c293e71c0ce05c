use nalgebra::DMatrix;

use super::operator::check_len;
use super::{AcousticError, DenseOperator, LinearOperator};
use crate::grid::ImageGrid;

/// Zero-padded 2-D convolution with an axial ⊗ lateral kernel pair.
///
/// With row-major depth-major pixels this is `A_ax ⊗ A_lat`, i.e.
/// `Y = A_ax · X · A_latᵀ` on the `depth × width` image.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableOperator {
    axial_kernel: Vec<f64>,
    lateral_kernel: Vec<f64>,
    grid: ImageGrid,
}

fn check_kernel(name: &str, k: &[f64]) -> Result<(), AcousticError> {
    if k.len().is_multiple_of(2) {
        return Err(AcousticError::Config(format!("{name} kernel length {} must be odd", k.len())));
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(AcousticError::Config(format!("{name} kernel has non-finite taps")));
    }
    Ok(())
}

impl SeparableOperator {
    pub fn new(axial_kernel: Vec<f64>, lateral_kernel: Vec<f64>, grid: ImageGrid) -> Result<Self, AcousticError> {
        check_kernel("axial", &axial_kernel)?;
        check_kernel("lateral", &lateral_kernel)?;
        Ok(Self { axial_kernel, lateral_kernel, grid })
    }

    /// Identity: both kernels `[1]`.
    pub fn identity(grid: ImageGrid) -> Self {
        Self { axial_kernel: vec![1.0], lateral_kernel: vec![1.0], grid }
    }

    pub fn axial_kernel(&self) -> &[f64] {
        &self.axial_kernel
    }

    pub fn lateral_kernel(&self) -> &[f64] {
        &self.lateral_kernel
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn axial_matrix(&self) -> DMatrix<f64> {
        conv_matrix(&self.axial_kernel, self.grid.depth_px())
    }

    pub fn lateral_matrix(&self) -> DMatrix<f64> {
        conv_matrix(&self.lateral_kernel, self.grid.width_px())
    }

    /// Dense `N × N` Kronecker materialization.
    pub fn materialize(&self) -> DenseOperator {
        let ax = self.axial_matrix();
        let lat = self.lateral_matrix();
        DenseOperator::from_matrix(&ax.kronecker(&lat))
    }

    fn convolve(&self, v: &[f64], adjoint: bool) -> Vec<f64> {
        let (d, w) = (self.grid.depth_px(), self.grid.width_px());
        let ca = (self.axial_kernel.len() / 2) as isize;
        let cl = (self.lateral_kernel.len() / 2) as isize;
        // out[r] = Σ_a k[a] in[r + c − a]; the adjoint flips the offset sign
        let sign: isize = if adjoint { -1 } else { 1 };
        let mut tmp = vec![0.0; d * w];
        for r in 0..d {
            for (b, &kb) in self.lateral_kernel.iter().enumerate() {
                let shift = sign * (cl - b as isize);
                for c in 0..w {
                    let src = c as isize + shift;
                    if (0..w as isize).contains(&src) {
                        tmp[r * w + c] += kb * v[r * w + src as usize];
                    }
                }
            }
        }
        let mut out = vec![0.0; d * w];
        for r in 0..d {
            for (a, &ka) in self.axial_kernel.iter().enumerate() {
                let src = r as isize + sign * (ca - a as isize);
                if !(0..d as isize).contains(&src) {
                    continue;
                }
                let src = src as usize;
                for c in 0..w {
                    out[r * w + c] += ka * tmp[src * w + c];
                }
            }
        }
        out
    }
}

impl LinearOperator for SeparableOperator {
    fn rows(&self) -> usize {
        self.grid.len()
    }

    fn cols(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>, AcousticError> {
        check_len(self.grid.len(), v.len())?;
        Ok(self.convolve(v, false))
    }

    fn adjoint_apply(&self, w: &[f64]) -> Result<Vec<f64>, AcousticError> {
        check_len(self.grid.len(), w.len())?;
        Ok(self.convolve(w, true))
    }
}

/// `n × n` zero-padded "same" convolution matrix of an odd kernel.
pub fn conv_matrix(kernel: &[f64], n: usize) -> DMatrix<f64> {
    let c = (kernel.len() / 2) as isize;
    DMatrix::from_fn(n, n, |r, s| {
        let tap = r as isize - s as isize + c;
        if (0..kernel.len() as isize).contains(&tap) {
            kernel[tap as usize]
        } else {
            0.0
        }
    })
}

fn gaussian_taps(sigma_mm: f64, pitch_mm: f64) -> Vec<f64> {
    let half = (sigma_mm * (-2.0 * 1e-4f64.ln()).sqrt() / pitch_mm).ceil() as isize;
    (-half..=half).map(|i| i as f64 * pitch_mm).collect()
}

/// Separable point-spread surrogate: Gaussian lateral kernel (unit sum) and
/// cosine-modulated Gaussian axial kernel (unit L2 norm) with the pulse-echo
/// spatial frequency `2·carrier/c`. Taps extend until the Gaussian falls
/// below 1e-4.
pub fn build_separable_psf(
    grid: &ImageGrid,
    sigma_mm: f64,
    carrier_hz: f64,
    sound_speed_m_per_s: f64,
) -> Result<SeparableOperator, AcousticError> {
    if !(sigma_mm > 0.0 && sigma_mm.is_finite()) {
        return Err(AcousticError::Config(format!("kernel sigma {sigma_mm} must be positive")));
    }
    if !(carrier_hz > 0.0 && sound_speed_m_per_s > 0.0) {
        return Err(AcousticError::Config("carrier and sound speed must be positive".into()));
    }
    let (pz, px) = (grid.axial_pitch_mm(), grid.lateral_pitch_mm());
    if sigma_mm < pz.max(px) / 2.0 {
        log::warn!("kernel sigma {sigma_mm} mm is under half the grid pitch");
    }
    let envelope = |u: f64| (-u * u / (2.0 * sigma_mm * sigma_mm)).exp();

    let mut lateral: Vec<f64> = gaussian_taps(sigma_mm, px).into_iter().map(envelope).collect();
    let sum: f64 = lateral.iter().sum();
    lateral.iter_mut().for_each(|v| *v /= sum);

    let spatial_freq = 2.0 * carrier_hz / (sound_speed_m_per_s * 1e3); // cycles per mm
    let mut axial: Vec<f64> = gaussian_taps(sigma_mm, pz)
        .into_iter()
        .map(|z| (2.0 * std::f64::consts::PI * spatial_freq * z).cos() * envelope(z))
        .collect();
    let norm = axial.iter().map(|v| v * v).sum::<f64>().sqrt();
    axial.iter_mut().for_each(|v| *v /= norm);

    SeparableOperator::new(axial, lateral, *grid)
}
