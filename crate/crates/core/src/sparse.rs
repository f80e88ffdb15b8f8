//! Fixed-pattern sparse storage for Jacobian blocks.
//!
//! The entry list is laid down once during assembly and never changes; each
//! evaluation only rewrites the value array. Duplicate coordinates are legal
//! and sum on scatter, which is the usual stamping semantics.

use nalgebra::DMatrix;

/// Coordinate-format sparse matrix with an immutable pattern.
#[derive(Debug, Clone)]
pub struct SparseMatrixHandle {
    rows: usize,
    cols: usize,
    pattern: Vec<(u32, u32)>,
    values: Vec<f64>,
}

impl SparseMatrixHandle {
    pub(crate) fn new(rows: usize, cols: usize, pattern: Vec<(u32, u32)>) -> Self {
        let values = vec![0.0; pattern.len()];
        Self {
            rows,
            cols,
            pattern,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.pattern.len()
    }

    pub fn pattern(&self) -> &[(u32, u32)] {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn clear_values(&mut self) {
        self.values.fill(0.0);
    }

    /// `out[row + row_offset][col + col_offset] += scale * value` over all entries.
    pub fn scatter_add(&self, out: &mut DMatrix<f64>, scale: f64, row_offset: usize, col_offset: usize) {
        for (&(r, c), &v) in self.pattern.iter().zip(&self.values) {
            out[(r as usize + row_offset, c as usize + col_offset)] += scale * v;
        }
    }

    /// Dense copy of the block (entries summed), mainly for tests.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        self.scatter_add(&mut out, 1.0, 0, 0);
        out
    }

    /// Divide every entry of row `r` by `scale[r]`.
    pub fn scale_rows_by_inverse(&mut self, scale: &[f64]) {
        for (&(r, _), v) in self.pattern.iter().zip(self.values.iter_mut()) {
            *v /= scale[r as usize];
        }
    }

    /// Index of the first non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.pattern
            .iter()
            .zip(&self.values)
            .find(|(_, v)| !v.is_finite())
            .map(|(&(r, c), _)| (r as usize, c as usize))
    }
}
