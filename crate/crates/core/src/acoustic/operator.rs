use rayon::prelude::*;

use super::AcousticError;

/// A real linear map with an explicit adjoint.
pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// `A·v`
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>, AcousticError>;

    /// `Aᵀ·w`
    fn adjoint_apply(&self, w: &[f64]) -> Result<Vec<f64>, AcousticError>;
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<(), AcousticError> {
    if expected != actual {
        return Err(AcousticError::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseOperator {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self, AcousticError> {
        if rows == 0 || cols == 0 {
            return Err(AcousticError::Build(format!("empty operator {rows}x{cols}")));
        }
        check_len(rows * cols, entries.len())?;
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(AcousticError::Build("non-finite operator entry".into()));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { rows: n, cols: n, entries }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut entries = vec![0.0; self.entries.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                entries[c * self.rows + r] = self.entries[r * self.cols + c];
            }
        }
        Self { rows: self.cols, cols: self.rows, entries }
    }

    /// `self · other`
    pub fn compose(&self, other: &DenseOperator) -> Result<DenseOperator, AcousticError> {
        check_len(self.cols, other.rows)?;
        let a = self.to_matrix();
        let b = other.to_matrix();
        Ok(Self::from_matrix(&(a * b)))
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.entries)
    }

    pub fn from_matrix(m: &nalgebra::DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            entries.extend(m.row(r).iter());
        }
        Self { rows, cols, entries }
    }
}

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>, AcousticError> {
        check_len(self.cols, v.len())?;
        Ok(self
            .entries
            .par_chunks(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    fn adjoint_apply(&self, w: &[f64]) -> Result<Vec<f64>, AcousticError> {
        check_len(self.rows, w.len())?;
        let cols = self.cols;
        let out = self
            .entries
            .par_chunks(cols)
            .zip(w.par_iter())
            .fold(
                || vec![0.0; cols],
                |mut acc, (row, &wr)| {
                    if wr != 0.0 {
                        acc.iter_mut().zip(row).for_each(|(a, r)| *a += r * wr);
                    }
                    acc
                },
            )
            .reduce(
                || vec![0.0; cols],
                |mut a, b| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        Ok(out)
    }
}
