//! Dense row-major parameter matrix.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major matrix of embedding rows (rows = ids, columns = dimensions).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Real> EmbeddingTable<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        EmbeddingTable {
            rows,
            cols,
            data: vec![S::ZERO; rows * cols],
        }
    }

    pub fn from_data(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "embedding table data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(EmbeddingTable { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn try_row(&self, table: &'static str, i: usize) -> Result<&[S]> {
        if i >= self.rows {
            return Err(Error::IdOutOfRange {
                table,
                id: i,
                len: self.rows,
            });
        }
        Ok(self.row(i))
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// Iterator over rows in id order.
    pub fn iter_rows(&self) -> impl Iterator<Item = &[S]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copy with every entry converted through f64 (used for precision
    /// changes at checkpoint boundaries).
    pub fn convert<T: Real>(&self) -> EmbeddingTable<T> {
        EmbeddingTable {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| T::from_f64(v.to_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_access_and_bounds() {
        let t = EmbeddingTable::from_data(2, 3, vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.row(1), &[4.0, 5.0, 6.0]);
        assert!(t.try_row("test", 2).is_err());
    }

    #[test]
    fn mismatched_data_len_rejected() {
        assert!(EmbeddingTable::from_data(2, 3, vec![0.0f32; 5]).is_err());
    }
}
