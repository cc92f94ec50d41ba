use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `users x edges` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<V> {
    rows: usize,
    cols: usize,
    data: Vec<V>,
}

impl<V: Clone> Matrix<V> {
    pub fn filled(rows: usize, cols: usize, value: V) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }
}

impl<V> Matrix<V> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> V) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for u in 0..rows {
            for n in 0..cols {
                data.push(f(u, n));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<V>>) -> Result<Self> {
        let n_rows = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Contract("ragged matrix rows".into()));
        }
        Ok(Matrix {
            rows: n_rows,
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, u: usize) -> &[V] {
        &self.data[u * self.cols..(u + 1) * self.cols]
    }

    pub fn row_mut(&mut self, u: usize) -> &mut [V] {
        &mut self.data[u * self.cols..(u + 1) * self.cols]
    }

    pub fn iter(&self) -> impl Iterator<Item = &V> {
        self.data.iter()
    }

    /// Iterates `((user, edge), value)`.
    pub fn indexed(&self) -> impl Iterator<Item = ((usize, usize), &V)> {
        let cols = self.cols;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| ((i / cols, i % cols), v))
    }

    pub fn map<W>(&self, f: impl FnMut(&V) -> W) -> Matrix<W> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub(crate) fn ensure_shape(&self, shape: (usize, usize), what: &str) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::Contract(format!(
                "{what} has shape {:?}, expected {:?}",
                self.shape(),
                shape
            )));
        }
        Ok(())
    }
}

impl<V> Index<(usize, usize)> for Matrix<V> {
    type Output = V;

    fn index(&self, (u, n): (usize, usize)) -> &V {
        assert!(u < self.rows && n < self.cols, "matrix index out of bounds");
        &self.data[u * self.cols + n]
    }
}

impl<V> IndexMut<(usize, usize)> for Matrix<V> {
    fn index_mut(&mut self, (u, n): (usize, usize)) -> &mut V {
        assert!(u < self.rows && n < self.cols, "matrix index out of bounds");
        &mut self.data[u * self.cols + n]
    }
}
