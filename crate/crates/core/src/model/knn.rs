use std::cmp::Ordering;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{affinity, Points};

use super::Class;

/// Majority-vote k-nearest-neighbor classifier with odd `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnModel {
    points: Points,
    labels: Vec<Class>,
    k: usize,
    sq_norms: Vec<f64>,
}

impl KnnModel {
    /// Requires odd `k ≤ n` and at least `q = (k+1)/2` points of each class,
    /// so that the ranked pools of the neural counterpart are defined.
    pub fn new(points: Points, labels: Vec<Class>, k: usize) -> Result<Self> {
        let n = points.n_rows();
        if labels.len() != n {
            return Err(Error::InvalidModel(format!(
                "{n} points but {} labels",
                labels.len()
            )));
        }
        if k == 0 || k.is_multiple_of(2) {
            return Err(Error::InvalidModel(format!("k must be odd and positive, got {k}")));
        }
        if k > n {
            return Err(Error::InvalidModel(format!("k = {k} exceeds {n} training points")));
        }
        let q = k.div_ceil(2);
        for class in [Class::Positive, Class::Negative] {
            let count = labels.iter().filter(|&&c| c == class).count();
            if count < q {
                return Err(Error::InvalidModel(format!(
                    "class {:+} has {count} points, fewer than q = {q}",
                    class.sign()
                )));
            }
        }
        let sq_norms = points.sq_norms();
        Ok(Self {
            points,
            labels,
            k,
            sq_norms,
        })
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn labels(&self) -> &[Class] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> usize {
        self.k.div_ceil(2)
    }

    pub fn dim(&self) -> usize {
        self.points.n_cols()
    }

    pub(crate) fn sq_norms(&self) -> &[f64] {
        &self.sq_norms
    }

    /// Indices of the `k` nearest training points, nearest first. Distance
    /// ties are broken by ascending training index.
    pub fn neighbors(&self, x: &[f64]) -> Result<Vec<usize>> {
        check_dim(self.dim(), x.len())?;
        let scores: Vec<f64> = self
            .points
            .rows()
            .zip(&self.sq_norms)
            .map(|(u, &u_sq)| affinity(x, u, u_sq))
            .collect();
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        let cmp = |a: &usize, b: &usize| rank_desc(&scores, *a, *b);
        if self.k < idx.len() {
            idx.select_nth_unstable_by(self.k - 1, cmp);
            idx.truncate(self.k);
        }
        idx.sort_unstable_by(cmp);
        Ok(idx)
    }

    /// Signed vote count over the `k` nearest neighbors; always odd.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        Ok(self
            .neighbors(x)?
            .into_iter()
            .map(|i| self.labels[i].sign())
            .sum())
    }
}

/// Descending by score, ascending by index on ties.
pub(crate) fn rank_desc(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}
