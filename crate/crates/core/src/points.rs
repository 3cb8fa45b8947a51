//! Row-major point sets.
//!
//! Every block of the transition sample (states, actions, next states) is a
//! `Points` value: `len()` rows of `dim()` coordinates each. Zero-width rows
//! are allowed so that uncontrolled systems can carry an empty action block.

use serde::{Deserialize, Serialize};

use crate::error::{PikeError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Points {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn from_flat(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(PikeError::invalid(format!(
                "flat buffer of length {} cannot hold {rows}x{dim} points",
                data.len()
            )));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(PikeError::invalid(format!(
                    "row {i} has dimension {}, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            dim,
            data,
        })
    }

    /// `rows` points of dimension zero.
    pub fn empty_rows(rows: usize) -> Self {
        Self {
            rows,
            dim: 0,
            data: Vec::new(),
        }
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if self.rows > 0 && row.len() != self.dim {
            return Err(PikeError::invalid(format!(
                "pushed row has dimension {}, expected {}",
                row.len(),
                self.dim
            )));
        }
        if self.rows == 0 {
            self.dim = row.len();
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// New point set with rows reordered so that row `k` is `self.row(order[k])`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for &i in order {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: order.len(),
            dim: self.dim,
            data,
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }
}
