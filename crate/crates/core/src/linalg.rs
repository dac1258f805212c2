//! Dense row-major point storage and the handful of vector kernels shared by
//! every model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n × d` matrix stored row-major, one point per row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Points {
    n_cols: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if n_cols == 0 {
            return Err(Error::InvalidParameter("points need at least one column".into()));
        }
        if !data.len().is_multiple_of(n_cols) {
            return Err(Error::InvalidParameter(format!(
                "buffer of length {} is not a multiple of {} columns",
                data.len(),
                n_cols
            )));
        }
        Ok(Self { n_cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has {} entries, expected {n_cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(n_cols, data)
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.n_cols
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.n_cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Points {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Points {
            n_cols: self.n_cols,
            data,
        }
    }

    /// New matrix keeping only the given columns.
    pub fn select_columns(&self, cols: &[usize]) -> Points {
        let mut data = Vec::with_capacity(self.n_rows() * cols.len());
        for r in self.rows() {
            data.extend(cols.iter().map(|&c| r[c]));
        }
        Points {
            n_cols: cols.len(),
            data,
        }
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.n_cols];
        for r in self.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        let n = self.n_rows().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Population standard deviation of each column.
    pub fn column_stds(&self) -> Vec<f64> {
        let mean = self.column_means();
        let mut var = vec![0.0; self.n_cols];
        for r in self.rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let n = self.n_rows().max(1) as f64;
        var.into_iter().map(|s| (s / n).sqrt()).collect()
    }

    pub fn sq_norms(&self) -> Vec<f64> {
        self.rows().map(sq_norm).collect()
    }

    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Points> {
        let rows: Vec<Vec<f64>> = self.rows().map(&mut f).collect();
        if rows.is_empty() {
            return Ok(Points {
                n_cols: self.n_cols,
                data: Vec::new(),
            });
        }
        Points::from_rows(&rows)
    }
}

impl TryFrom<Vec<Vec<f64>>> for Points {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Points::from_rows(&rows)
    }
}

impl From<Points> for Vec<Vec<f64>> {
    fn from(p: Points) -> Self {
        p.rows().map(<[f64]>::to_vec).collect()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sq_norm(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Direct `‖a − b‖²`, used by oracles and where no norm cache exists.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `2xᵀu − ‖u‖²`, i.e. `‖x‖² − ‖x − u‖²`. Larger means closer to `x`.
///
/// Every ranking of training points by distance goes through this one
/// function so that the classifier and its neural counterpart agree bit for
/// bit on the neighbor order.
#[inline]
pub fn affinity(x: &[f64], u: &[f64], u_sq: f64) -> f64 {
    2.0 * dot(x, u) - u_sq
}

/// Squared distance in expanded form `‖x‖² − 2xᵀu + ‖u‖²`, clamped at zero.
#[inline]
pub fn sq_dist_expanded(x: &[f64], x_sq: f64, u: &[f64], u_sq: f64) -> f64 {
    (x_sq - affinity(x, u, u_sq)).max(0.0)
}

/// Median of a slice (mean of the two central values for even length).
/// Reorders the slice. Returns NaN when empty.
pub fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    let mid = n / 2;
    let (lo, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}
