use std::f64::consts::FRAC_1_SQRT_2;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DenoiseError {
    #[error("unsupported image size {depth}x{width}: {reason}")]
    UnsupportedSize { depth: usize, width: usize, reason: &'static str },
    #[error("input length {actual} does not match {depth}x{width}")]
    LengthMismatch { depth: usize, width: usize, actual: usize },
}

/// Image dimensions handed to a denoiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageShape {
    pub depth: usize,
    pub width: usize,
}

impl ImageShape {
    pub fn len(&self) -> usize {
        self.depth * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Predicts the clean image from an image corrupted by white Gaussian noise
/// of standard deviation `sigma`. Must be deterministic in its inputs and
/// return an image of the same size.
pub trait Denoiser: Send + Sync {
    fn denoise(&self, noisy: &[f64], shape: ImageShape, sigma: f64) -> Result<Vec<f64>, DenoiseError>;
}

fn check_shape(noisy: &[f64], shape: ImageShape) -> Result<(), DenoiseError> {
    if noisy.len() != shape.len() {
        return Err(DenoiseError::LengthMismatch { depth: shape.depth, width: shape.width, actual: noisy.len() });
    }
    Ok(())
}

/// MMSE denoiser for an i.i.d. zero-mean Gaussian prior of variance `v`:
/// `x̂ = x · v / (v + σ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPriorDenoiser {
    prior_variance: f64,
}

pub fn gaussian_prior_denoiser(prior_variance: f64) -> Result<GaussianPriorDenoiser, DenoiseError> {
    if !(prior_variance > 0.0) {
        return Err(DenoiseError::UnsupportedSize { depth: 0, width: 0, reason: "prior variance must be positive" });
    }
    Ok(GaussianPriorDenoiser { prior_variance })
}

impl Denoiser for GaussianPriorDenoiser {
    fn denoise(&self, noisy: &[f64], shape: ImageShape, sigma: f64) -> Result<Vec<f64>, DenoiseError> {
        check_shape(noisy, shape)?;
        let v = self.prior_variance;
        let gain = if v.is_infinite() { 1.0 } else { v / (v + sigma * sigma) };
        Ok(noisy.iter().map(|x| x * gain).collect())
    }
}

/// Soft-thresholding in an orthonormal multiscale Haar basis. Every detail
/// coefficient shrinks by `threshold_scale · σ`; the single coarsest
/// coefficient (the scaled image mean) is left untouched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageDenoiser {
    threshold_scale: f64,
}

pub fn patchwise_shrinkage_denoiser(threshold_scale: f64) -> Result<ShrinkageDenoiser, DenoiseError> {
    if !(threshold_scale > 0.0 && threshold_scale.is_finite()) {
        return Err(DenoiseError::UnsupportedSize { depth: 0, width: 0, reason: "threshold scale must be positive" });
    }
    Ok(ShrinkageDenoiser { threshold_scale })
}

impl ShrinkageDenoiser {
    pub fn threshold_scale(&self) -> f64 {
        self.threshold_scale
    }
}

fn check_dyadic(shape: ImageShape) -> Result<usize, DenoiseError> {
    let ImageShape { depth, width } = shape;
    if depth != width {
        return Err(DenoiseError::UnsupportedSize { depth, width, reason: "grid must be square" });
    }
    if !depth.is_power_of_two() {
        return Err(DenoiseError::UnsupportedSize { depth, width, reason: "side must be a power of two" });
    }
    Ok(depth)
}

fn haar_1d(buf: &mut [f64], scratch: &mut [f64], inverse: bool) {
    let half = buf.len() / 2;
    if inverse {
        for i in 0..half {
            let (s, d) = (buf[i], buf[half + i]);
            scratch[2 * i] = (s + d) * FRAC_1_SQRT_2;
            scratch[2 * i + 1] = (s - d) * FRAC_1_SQRT_2;
        }
    } else {
        for i in 0..half {
            let (a, b) = (buf[2 * i], buf[2 * i + 1]);
            scratch[i] = (a + b) * FRAC_1_SQRT_2;
            scratch[half + i] = (a - b) * FRAC_1_SQRT_2;
        }
    }
    buf.copy_from_slice(&scratch[..buf.len()]);
}

/// One level on the top-left `size × size` block of an `n × n` image.
fn haar_level(img: &mut [f64], n: usize, size: usize, inverse: bool) {
    let mut line = vec![0.0; size];
    let mut scratch = vec![0.0; size];
    let rows = |img: &mut [f64], line: &mut [f64], scratch: &mut [f64]| {
        for r in 0..size {
            line.copy_from_slice(&img[r * n..r * n + size]);
            haar_1d(line, scratch, inverse);
            img[r * n..r * n + size].copy_from_slice(line);
        }
    };
    let cols = |img: &mut [f64], line: &mut [f64], scratch: &mut [f64]| {
        for c in 0..size {
            for r in 0..size {
                line[r] = img[r * n + c];
            }
            haar_1d(line, scratch, inverse);
            for r in 0..size {
                img[r * n + c] = line[r];
            }
        }
    };
    if inverse {
        cols(img, &mut line, &mut scratch);
        rows(img, &mut line, &mut scratch);
    } else {
        rows(img, &mut line, &mut scratch);
        cols(img, &mut line, &mut scratch);
    }
}

/// Full-depth orthonormal 2-D Haar analysis of a square dyadic image.
pub fn haar_forward(img: &[f64], shape: ImageShape) -> Result<Vec<f64>, DenoiseError> {
    check_shape(img, shape)?;
    let n = check_dyadic(shape)?;
    let mut out = img.to_vec();
    let mut size = n;
    while size > 1 {
        haar_level(&mut out, n, size, false);
        size /= 2;
    }
    Ok(out)
}

/// Inverse of [`haar_forward`].
pub fn haar_inverse(coeffs: &[f64], shape: ImageShape) -> Result<Vec<f64>, DenoiseError> {
    check_shape(coeffs, shape)?;
    let n = check_dyadic(shape)?;
    let mut out = coeffs.to_vec();
    let mut size = 2;
    while size <= n {
        haar_level(&mut out, n, size, true);
        size *= 2;
    }
    Ok(out)
}

impl Denoiser for ShrinkageDenoiser {
    fn denoise(&self, noisy: &[f64], shape: ImageShape, sigma: f64) -> Result<Vec<f64>, DenoiseError> {
        let mut coeffs = haar_forward(noisy, shape)?;
        let threshold = self.threshold_scale * sigma.max(0.0);
        if threshold > 0.0 {
            for c in coeffs.iter_mut().skip(1) {
                *c = c.signum() * (c.abs() - threshold).max(0.0);
            }
        }
        haar_inverse(&coeffs, shape)
    }
}
