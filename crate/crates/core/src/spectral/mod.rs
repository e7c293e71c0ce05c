//! SVD factorizations of degradation operators and the spectral transforms
//! used by the restoration sampler.
//!
//! For an operator `A = U S Vᵀ` with `N` image pixels there are always `N`
//! spectral components. Measurements map to `ȳ = S†Uᵀy`; images map to
//! `x̄ = Vᵀx` and back with `x = V x̄`. Components whose singular value falls
//! below `1e-10 · s_max` are *unobserved*: they carry no measurement.

mod jacobi;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::acoustic::{DenseOperator, LinearOperator, SeparableOperator};

/// Relative singular-value floor below which a component is unobserved.
pub const UNOBSERVED_RELATIVE_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("SVD did not converge: {0}")]
    NoConvergence(String),
    #[error("operator too large for dense SVD: {rows}x{cols} (limit {limit} entries)")]
    TooLarge { rows: usize, cols: usize, limit: usize },
}

fn check_len(expected: usize, actual: usize) -> Result<(), SpectralError> {
    if expected != actual {
        return Err(SpectralError::LengthMismatch { expected, actual });
    }
    Ok(())
}

/// Largest dense operator (in entries) accepted by [`svd_dense`].
pub const DENSE_SVD_LIMIT: usize = 6000 * 6000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdKind {
    Dense,
    SeparableKronecker,
}

/// One square factor of a Kronecker factorization.
#[derive(Debug, Clone)]
struct Factor {
    u: DMatrix<f64>,
    s: Vec<f64>,
    v: DMatrix<f64>,
    identity: bool,
}

impl Factor {
    fn from_matrix(a: &DMatrix<f64>) -> Result<Self, SpectralError> {
        let n = a.nrows();
        if *a == DMatrix::<f64>::identity(n, n) {
            return Ok(Self {
                u: a.clone(),
                s: vec![1.0; n],
                v: a.clone(),
                identity: true,
            });
        }
        let svd = jacobi::jacobi_svd(a)
            .ok_or_else(|| SpectralError::NoConvergence(format!("{n}x{n} Jacobi sweeps exhausted")))?;
        let (mut u, mut v) = (svd.u, svd.v);
        fix_signs(&mut u, &mut v);
        Ok(Self { u, s: svd.s, v, identity: false })
    }
}

/// Flip each (u_k, v_k) pair so the first non-negligible entry of v_k is
/// nonnegative.
fn fix_signs(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    for k in 0..v.ncols() {
        let col = v.column(k);
        let scale = col.amax();
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
            if *first < 0.0 {
                v.column_mut(k).neg_mut();
                if k < u.ncols() {
                    u.column_mut(k).neg_mut();
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Dense {
        /// `rows' × N` where `rows' = max(rows, N)`; extra rows are padding.
        u: DMatrix<f64>,
        v: DMatrix<f64>,
    },
    Kronecker {
        axial: Factor,
        lateral: Factor,
        depth: usize,
        width: usize,
    },
}

/// `A = U S Vᵀ` with handles for the four transforms.
#[derive(Debug, Clone)]
pub struct SvdFactorization {
    rows: usize,
    cols: usize,
    singular_values: Vec<f64>,
    observed: Vec<bool>,
    inner: Inner,
}

/// Spectral-domain coefficients with per-component observation flags.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVector {
    pub coefficients: Vec<f64>,
    pub observed: Vec<bool>,
}

fn observed_mask(s: &[f64]) -> Vec<bool> {
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    s.iter().map(|&v| s_max > 0.0 && v >= UNOBSERVED_RELATIVE_THRESHOLD * s_max).collect()
}

/// Full SVD of a dense operator, components sorted by decreasing `s`.
/// Wide operators are zero-padded to square so `V` is always `N × N`.
pub fn svd_dense(op: &DenseOperator) -> Result<SvdFactorization, SpectralError> {
    let (rows, cols) = (op.rows(), op.cols());
    if rows * cols > DENSE_SVD_LIMIT || cols * cols > DENSE_SVD_LIMIT {
        return Err(SpectralError::TooLarge { rows, cols, limit: DENSE_SVD_LIMIT });
    }
    let mut a = op.to_matrix();
    if rows < cols {
        a = a.resize_vertically(cols, 0.0);
    }
    let svd = nalgebra::linalg::SVD::try_new(a, true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| SpectralError::NoConvergence(format!("dense SVD of {rows}x{cols}")))?;
    let u_raw = svd.u.expect("requested U");
    let vt_raw = svd.v_t.expect("requested Vᵀ");
    let s_raw = svd.singular_values;
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| s_raw[j].total_cmp(&s_raw[i]));
    let mut u = DMatrix::<f64>::zeros(u_raw.nrows(), cols);
    let mut v = DMatrix::<f64>::zeros(cols, cols);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &u_raw.column(src));
        v.set_column(dst, &vt_raw.row(src).transpose());
    }
    fix_signs(&mut u, &mut v);
    let singular_values: Vec<f64> = order.iter().map(|&i| s_raw[i]).collect();
    if singular_values.iter().any(|s| !s.is_finite()) {
        return Err(SpectralError::NoConvergence("non-finite singular value".into()));
    }
    Ok(SvdFactorization {
        rows,
        cols,
        observed: observed_mask(&singular_values),
        singular_values,
        inner: Inner::Dense { u, v },
    })
}

/// Kronecker SVD of a separable operator built from the two 1-D factor SVDs;
/// component `a·width + b` has `s = s_a^ax · s_b^lat`. Nothing `N × N` is
/// ever formed.
pub fn svd_separable(op: &SeparableOperator) -> Result<SvdFactorization, SpectralError> {
    let grid = op.grid();
    let (depth, width) = (grid.depth_px(), grid.width_px());
    let axial = Factor::from_matrix(&op.axial_matrix())?;
    let lateral = Factor::from_matrix(&op.lateral_matrix())?;
    let singular_values: Vec<f64> = axial
        .s
        .iter()
        .flat_map(|sa| lateral.s.iter().map(move |sb| sa * sb))
        .collect();
    Ok(SvdFactorization {
        rows: depth * width,
        cols: depth * width,
        observed: observed_mask(&singular_values),
        singular_values,
        inner: Inner::Kronecker { axial, lateral, depth, width },
    })
}

/// `L · X · Rᵀ` on a row-major `depth × width` image, skipping identity sides.
fn sandwich(x: &[f64], depth: usize, width: usize, left: Option<&DMatrix<f64>>, right: Option<&DMatrix<f64>>) -> Vec<f64> {
    if left.is_none() && right.is_none() {
        return x.to_vec();
    }
    // row-major depth×width read as column-major width×depth is Xᵀ
    let mut xt = DMatrix::from_column_slice(width, depth, x);
    if let Some(r) = right {
        xt = r * xt;
    }
    if let Some(l) = left {
        xt *= l.transpose();
    }
    xt.as_slice().to_vec()
}

impl SvdFactorization {
    pub fn kind(&self) -> SvdKind {
        match self.inner {
            Inner::Dense { .. } => SvdKind::Dense,
            Inner::Kronecker { .. } => SvdKind::SeparableKronecker,
        }
    }

    /// Operator row count (measurement length).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Operator column count = number of spectral components.
    pub fn num_components(&self) -> usize {
        self.cols
    }

    /// Singular values in component order (sorted for dense, natural
    /// Kronecker order `a·width + b` for separable).
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    /// Component indices by decreasing singular value.
    pub fn sorted_components(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.cols).collect();
        order.sort_by(|&i, &j| self.singular_values[j].total_cmp(&self.singular_values[i]).then(i.cmp(&j)));
        order
    }

    /// Maps component index to its (axial, lateral) factor indices.
    pub fn kronecker_pair(&self, component: usize) -> Option<(usize, usize)> {
        match &self.inner {
            Inner::Kronecker { width, .. } => Some((component / width, component % width)),
            Inner::Dense { .. } => None,
        }
    }

    /// `Vᵀ x`
    pub fn vt_apply(&self, x: &[f64]) -> Result<Vec<f64>, SpectralError> {
        check_len(self.cols, x.len())?;
        Ok(match &self.inner {
            Inner::Dense { v, .. } => (v.transpose() * DVector::from_column_slice(x)).as_slice().to_vec(),
            Inner::Kronecker { axial, lateral, depth, width } => {
                let l = (!axial.identity).then(|| axial.v.transpose());
                let r = (!lateral.identity).then(|| lateral.v.transpose());
                sandwich(x, *depth, *width, l.as_ref(), r.as_ref())
            }
        })
    }

    /// `V x̄`
    pub fn v_apply(&self, xbar: &[f64]) -> Result<Vec<f64>, SpectralError> {
        check_len(self.cols, xbar.len())?;
        Ok(match &self.inner {
            Inner::Dense { v, .. } => (v * DVector::from_column_slice(xbar)).as_slice().to_vec(),
            Inner::Kronecker { axial, lateral, depth, width } => sandwich(
                xbar,
                *depth,
                *width,
                (!axial.identity).then_some(&axial.v),
                (!lateral.identity).then_some(&lateral.v),
            ),
        })
    }

    /// `Uᵀ y`, length `N`.
    pub fn ut_apply(&self, y: &[f64]) -> Result<Vec<f64>, SpectralError> {
        check_len(self.rows, y.len())?;
        Ok(match &self.inner {
            Inner::Dense { u, .. } => {
                let mut padded = DVector::<f64>::zeros(u.nrows());
                padded.rows_mut(0, y.len()).copy_from_slice(y);
                (u.transpose() * padded).as_slice().to_vec()
            }
            Inner::Kronecker { axial, lateral, depth, width } => {
                let l = (!axial.identity).then(|| axial.u.transpose());
                let r = (!lateral.identity).then(|| lateral.u.transpose());
                sandwich(y, *depth, *width, l.as_ref(), r.as_ref())
            }
        })
    }

    /// `U z`, length `rows`.
    pub fn u_apply(&self, z: &[f64]) -> Result<Vec<f64>, SpectralError> {
        check_len(self.cols, z.len())?;
        Ok(match &self.inner {
            Inner::Dense { u, .. } => {
                let full = u * DVector::from_column_slice(z);
                full.as_slice()[..self.rows].to_vec()
            }
            Inner::Kronecker { axial, lateral, depth, width } => sandwich(
                z,
                *depth,
                *width,
                (!axial.identity).then_some(&axial.u),
                (!lateral.identity).then_some(&lateral.u),
            ),
        })
    }

    /// `U S Vᵀ x`: the factored operator applied to an image.
    pub fn reconstruct_apply(&self, x: &[f64]) -> Result<Vec<f64>, SpectralError> {
        let mut z = self.vt_apply(x)?;
        z.iter_mut().zip(&self.singular_values).for_each(|(c, s)| *c *= s);
        self.u_apply(&z)
    }

    /// `ȳ = S†Uᵀy`; unobserved components hold 0 and are flagged.
    pub fn to_spectral(&self, y: &[f64]) -> Result<SpectralVector, SpectralError> {
        let uty = self.ut_apply(y)?;
        let coefficients = uty
            .iter()
            .zip(&self.singular_values)
            .zip(&self.observed)
            .map(|((c, s), obs)| if *obs { c / s } else { 0.0 })
            .collect();
        Ok(SpectralVector { coefficients, observed: self.observed.clone() })
    }

    /// Image-side transform `Vᵀx`, every component flagged observed.
    pub fn to_spectral_image(&self, x: &[f64]) -> Result<SpectralVector, SpectralError> {
        Ok(SpectralVector { coefficients: self.vt_apply(x)?, observed: vec![true; self.cols] })
    }

    /// `V x̄`
    pub fn from_spectral(&self, xbar: &SpectralVector) -> Result<Vec<f64>, SpectralError> {
        self.v_apply(&xbar.coefficients)
    }
}
