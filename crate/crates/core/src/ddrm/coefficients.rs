//! Per-component update weights for one skipped step.
//!
//! The update is `x̄' = A·x̄_t + B·ȳ + C·x̄_θ + D·ξ` and every weight set obeys
//!
//! * signal: `A + B + C = 1`
//! * noise:  `(A·σ_t)² + (B·σ_d/s)² + D² = σ'²`
//!
//! where `σ'` is the next noise level. Writing `u = σ_d/s` for the
//! component's measurement noise, the three cases are:
//!
//! * unobserved (`s = 0`): `B = 0`, `A = √(1−η²)·σ'/σ_t`, `D = η·σ'`.
//!   DDIM-style step driven by the prediction alone.
//! * measurement-dominant (`u ≤ σ'`): `A = 0`, `B = η_b`, `C = 1 − η_b`,
//!   `D = √(σ'² − η_b²u²)`. The measurement is already cleaner than the
//!   target level, so fresh noise tops it up to `σ'`.
//! * prediction-dominant (`u > σ'`): `B = (σ'/u)²`, the Brownian-bridge
//!   weight of a point at level `σ'` between the clean image (level 0) and
//!   the measurement (level `u`). The bridge leaves `V = σ'²(1 − B)` of
//!   variance, split as `D = η·√V` fresh noise and `A·σ_t = √(1−η²)·√V`
//!   carried from the current state.
//!
//! At `η = 1` the prediction-dominant case is the exact bridge, which keeps
//! the conditional mean of a conjugate Gaussian problem unbiased.

use super::SamplerError;

/// Absolute tolerance (scaled by `max(1, σ_t², σ'²)`) for both identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Unobserved,
    MeasurementDominant,
    PredictionDominant,
}

impl StepCoefficients {
    /// `(|A+B+C−1|, |(Aσ_t)² + (Bσ_d/s)² + D² − σ'²|)`; the noise residual
    /// drops the `B` term when `s = 0` (where `B = 0`).
    pub fn residuals(&self, sigma_t: f64, sigma_next: f64, sigma_d: f64, s: f64) -> (f64, f64) {
        let signal = (self.a + self.b + self.c - 1.0).abs();
        let meas = if s > 0.0 { self.b * sigma_d / s } else { 0.0 };
        let noise = ((self.a * sigma_t).powi(2) + meas * meas + self.d * self.d - sigma_next * sigma_next).abs();
        (signal, noise)
    }
}

pub fn branch_of(sigma_next: f64, sigma_d: f64, s: f64) -> Branch {
    if s <= 0.0 {
        Branch::Unobserved
    } else if sigma_d / s <= sigma_next {
        Branch::MeasurementDominant
    } else {
        Branch::PredictionDominant
    }
}

/// Weights for one component; `s = 0` marks an unobserved component.
pub fn compute_coefficients(
    sigma_t: f64,
    sigma_next: f64,
    sigma_d: f64,
    s: f64,
    eta: f64,
    eta_b: f64,
) -> Result<StepCoefficients, SamplerError> {
    if !(sigma_t > sigma_next && sigma_next >= 0.0) || !(s >= 0.0) || !(sigma_d >= 0.0) {
        return Err(SamplerError::Config(format!(
            "coefficient inputs out of range: sigma_t {sigma_t}, sigma_next {sigma_next}, sigma_d {sigma_d}, s {s}"
        )));
    }
    let keep = (1.0 - eta * eta).max(0.0).sqrt();
    let coeffs = match branch_of(sigma_next, sigma_d, s) {
        Branch::Unobserved => {
            let a = keep * sigma_next / sigma_t;
            StepCoefficients { a, b: 0.0, c: 1.0 - a, d: eta * sigma_next }
        }
        Branch::MeasurementDominant => {
            let u = sigma_d / s;
            let d = (sigma_next * sigma_next - eta_b * eta_b * u * u).max(0.0).sqrt();
            StepCoefficients { a: 0.0, b: eta_b, c: 1.0 - eta_b, d }
        }
        Branch::PredictionDominant => {
            let u = sigma_d / s;
            let ratio = sigma_next / u;
            let b = ratio * ratio;
            let spare = (sigma_next * sigma_next * (1.0 - b)).max(0.0).sqrt();
            let a = keep * spare / sigma_t;
            StepCoefficients { a, b, c: 1.0 - a - b, d: eta * spare }
        }
    };
    let (signal, noise) = coeffs.residuals(sigma_t, sigma_next, sigma_d, s);
    let scale = 1.0f64.max(sigma_t * sigma_t).max(sigma_next * sigma_next);
    if signal > IDENTITY_TOLERANCE || noise > IDENTITY_TOLERANCE * scale || coeffs.d < 0.0 {
        return Err(SamplerError::Inconsistent(format!(
            "signal residual {signal:e}, noise residual {noise:e} at sigma_t {sigma_t}, sigma_next {sigma_next}, sigma_d {sigma_d}, s {s}"
        )));
    }
    Ok(coeffs)
}
