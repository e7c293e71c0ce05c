//! Plane-wave ultrasound reconstruction with a spectral diffusion
//! restoration sampler and variance-of-samples echogenicity imaging.
//!
//! The pipeline, stage by stage:
//!
//! * [`phantom`]: synthetic echogenicity maps `p` and speckle `o = m ⊙ p`.
//! * [`acoustic`]: the plane-wave system matrix `H`, the apodized matched
//!   filter `B`, a separable PSF surrogate, RF simulation and DAS.
//! * [`spectral`]: dense and Kronecker SVDs with the `Uᵀ`, `V`, `Vᵀ`
//!   transforms the sampler needs.
//! * [`ddrm`]: noise ladders, per-component update weights, denoisers and
//!   the sampler itself.
//! * [`variance`]: ensemble mean and the variance-based echogenicity
//!   estimator, plus the empirical sample generator used as an oracle.
//! * [`metrics`]: gCNR, SNR and −6 dB FWHM with region masks.
//! * [`io`] and [`experiment`]: the `USIR` container format, configuration
//!   files, PNG rendering and the phantom sweep runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod acoustic;
pub mod ddrm;
pub mod experiment;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod rng;
pub mod spectral;
pub mod variance;

pub use grid::{EchogenicityMap, ImageGrid, ReflectivityMap, RegionMask, RfChannelData};
