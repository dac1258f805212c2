//! Sequential minimal optimization for the C-SVM dual with a Gaussian kernel.
//!
//! Working sets of size two are chosen with second-order information (the
//! maximal-gain pair among violating indices). The kernel matrix is computed
//! once and kept in memory, which bounds the trainer to desk-scale data.

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Points};

use super::{check_gamma, Class, SvmModel};

const TAU: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SmoConfig {
    /// Stop once the maximal KKT violation `m(α) − M(α)` drops below this.
    pub tolerance: f64,
    /// Iteration cap per training point.
    pub max_iter_per_point: usize,
    /// Duals at or below this are pruned from the returned model.
    pub sv_threshold: f64,
}

impl Default for SmoConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_iter_per_point: 100_000,
            sv_threshold: 1e-8,
        }
    }
}

/// Trains a Gaussian-kernel C-SVM with default solver settings.
pub fn train_svm(data: &Points, labels: &[Class], gamma: f64, c: f64) -> Result<SvmModel> {
    train_svm_with(data, labels, gamma, c, &SmoConfig::default())
}

pub fn train_svm_with(
    data: &Points,
    labels: &[Class],
    gamma: f64,
    c: f64,
    config: &SmoConfig,
) -> Result<SvmModel> {
    check_gamma(gamma)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    let n = data.n_rows();
    if labels.len() != n {
        return Err(Error::InvalidParameter(format!("{n} points but {} labels", labels.len())));
    }
    if !labels.contains(&Class::Positive) || !labels.contains(&Class::Negative) {
        return Err(Error::SingleClass("SVM training needs both classes".into()));
    }

    let y: Vec<f64> = labels.iter().map(|c| c.sign()).collect();
    let kernel = KernelMatrix::new(data, gamma);
    let solution = Solver::new(&kernel, &y, c).run(config)?;

    let keep: Vec<usize> = (0..n)
        .filter(|&i| solution.alpha[i] > config.sv_threshold)
        .collect();
    SvmModel::new(
        data.select(&keep),
        keep.iter().map(|&i| solution.alpha[i]).collect(),
        keep.iter().map(|&i| labels[i]).collect(),
        gamma,
        -solution.rho,
    )
}

struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    fn new(data: &Points, gamma: f64) -> Self {
        let n = data.n_rows();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in 0..i {
                let k = (-gamma * sq_dist(data.row(i), data.row(j))).exp();
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        Self { n, values }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
}

struct Solver<'a> {
    kernel: &'a KernelMatrix,
    y: &'a [f64],
    c: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(kernel: &'a KernelMatrix, y: &'a [f64], c: f64) -> Self {
        let n = y.len();
        Self {
            kernel,
            y,
            c,
            alpha: vec![0.0; n],
            grad: vec![-1.0; n],
        }
    }

    fn in_up(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.alpha[t] < self.c
        } else {
            self.alpha[t] > 0.0
        }
    }

    fn in_low(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.alpha[t] > 0.0
        } else {
            self.alpha[t] < self.c
        }
    }

    /// Returns the working pair, or `None` with the current violation once
    /// the KKT conditions hold to tolerance.
    fn select(&self, tol: f64) -> std::result::Result<(usize, usize), f64> {
        let n = self.y.len();
        let mut gmax = f64::NEG_INFINITY;
        let mut best_i = None;
        for t in 0..n {
            if self.in_up(t) {
                let v = -self.y[t] * self.grad[t];
                if v >= gmax {
                    gmax = v;
                    best_i = Some(t);
                }
            }
        }
        let Some(i) = best_i else {
            return Err(0.0);
        };
        let k_i = self.kernel.row(i);
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best_j = None;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            if !self.in_low(t) {
                continue;
            }
            let v = self.y[t] * self.grad[t];
            gmax2 = gmax2.max(v);
            let b = gmax + v;
            if b > 0.0 {
                let quad = (2.0 - 2.0 * k_i[t]).max(TAU);
                let obj = -(b * b) / quad;
                if obj <= best_obj {
                    best_obj = obj;
                    best_j = Some(t);
                }
            }
        }
        let violation = gmax + gmax2;
        match best_j {
            Some(j) if violation >= tol => Ok((i, j)),
            _ => Err(violation.max(0.0)),
        }
    }

    fn update(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (yi, yj) = (self.y[i], self.y[j]);
        let k_ij = self.kernel.row(i)[j];
        let quad = (2.0 - 2.0 * k_ij).max(TAU);
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);

        if yi != yj {
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;

        let (di, dj) = (ai - old_i, aj - old_j);
        let (k_i, k_j) = (self.kernel.row(i), self.kernel.row(j));
        for t in 0..self.y.len() {
            self.grad[t] += self.y[t] * (yi * k_i[t] * di + yj * k_j[t] * dj);
        }
    }

    fn rho(&self) -> f64 {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut free_sum = 0.0;
        let mut free = 0usize;
        for t in 0..self.y.len() {
            let yg = self.y[t] * self.grad[t];
            let a = self.alpha[t];
            if a >= self.c {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if a <= 0.0 {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                free_sum += yg;
            }
        }
        if free > 0 {
            free_sum / free as f64
        } else {
            0.5 * (ub + lb)
        }
    }

    fn run(mut self, config: &SmoConfig) -> Result<Solution> {
        let cap = config.max_iter_per_point.saturating_mul(self.y.len());
        let mut iterations = 0usize;
        loop {
            match self.select(config.tolerance) {
                Ok((i, j)) => {
                    if iterations >= cap {
                        let residual = self.select(f64::INFINITY).err().unwrap_or(f64::NAN);
                        return Err(Error::NotConverged {
                            iterations,
                            residual,
                        });
                    }
                    self.update(i, j);
                    iterations += 1;
                }
                Err(_) => break,
            }
        }
        let rho = self.rho();
        Ok(Solution {
            alpha: self.alpha,
            rho,
        })
    }
}
