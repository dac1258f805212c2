use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{sq_dist, sq_dist_expanded, sq_norm, Points};

use super::check_gamma;

/// Gaussian kernel regression `f(x) = Σ α_ℓ exp(−γ‖x − x_ℓ‖²)` with signed
/// coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct KrrModel {
    points: Points,
    coeffs: Vec<f64>,
    gamma: f64,
    ridge: f64,
    sq_norms: Vec<f64>,
}

impl KrrModel {
    pub fn new(points: Points, coeffs: Vec<f64>, gamma: f64, ridge: f64) -> Result<Self> {
        if coeffs.len() != points.n_rows() {
            return Err(Error::InvalidModel(format!(
                "{} points but {} coefficients",
                points.n_rows(),
                coeffs.len()
            )));
        }
        check_gamma(gamma)?;
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::InvalidModel(format!("ridge must be nonnegative, got {ridge}")));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel("coefficients must be finite".into()));
        }
        let sq_norms = points.sq_norms();
        Ok(Self {
            points,
            coeffs,
            gamma,
            ridge,
            sq_norms,
        })
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn dim(&self) -> usize {
        self.points.n_cols()
    }

    fn kernel_terms<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        let x_sq = sq_norm(x);
        self.points
            .rows()
            .zip(&self.sq_norms)
            .zip(&self.coeffs)
            .map(move |((u, &u_sq), &a)| a * (-self.gamma * sq_dist_expanded(x, x_sq, u, u_sq)).exp())
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.kernel_terms(x).sum())
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut grad = vec![0.0; x.len()];
        for (term, u) in self.kernel_terms(x).zip(self.points.rows()) {
            let s = -2.0 * self.gamma * term;
            for ((g, xi), ui) in grad.iter_mut().zip(x).zip(u) {
                *g += s * (xi - ui);
            }
        }
        Ok(grad)
    }
}

/// Solves `(K + λI)α = y` for the Gaussian kernel matrix `K`.
///
/// Uses a Cholesky factorization and falls back to LU when the system is not
/// numerically positive definite (possible at `λ = 0`).
pub fn train_krr(data: &Points, targets: &[f64], gamma: f64, ridge: f64) -> Result<KrrModel> {
    check_gamma(gamma)?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidParameter(format!("ridge must be nonnegative, got {ridge}")));
    }
    let n = data.n_rows();
    if n == 0 || targets.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{n} points but {} targets",
            targets.len()
        )));
    }
    let system = DMatrix::from_fn(n, n, |i, j| {
        let k = (-gamma * sq_dist(data.row(i), data.row(j))).exp();
        if i == j {
            k + ridge
        } else {
            k
        }
    });
    let rhs = DVector::from_column_slice(targets);
    let solution = match system.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => system
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("kernel system has no unique solution".into()))?,
    };
    let residual = (&system * &solution - &rhs).amax();
    if !(residual < 1e-8) {
        return Err(Error::Singular(format!(
            "solve residual {residual:.3e} exceeds 1e-8; increase the ridge"
        )));
    }
    KrrModel::new(data.clone(), solution.iter().copied().collect(), gamma, ridge)
}
