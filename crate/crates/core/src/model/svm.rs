use crate::error::{check_dim, Error, Result};
use crate::linalg::{sq_dist_expanded, sq_norm, Points};

use super::{check_gamma, Class, KrrModel};

/// Gaussian-kernel SVM `f(x) = Σ y_ℓ α_ℓ exp(−γ‖x − u_ℓ‖²) + θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    support_vectors: Points,
    dual_coeffs: Vec<f64>,
    labels: Vec<Class>,
    gamma: f64,
    bias: f64,
    sq_norms: Vec<f64>,
}

impl SvmModel {
    /// Validates the model. Both classes must be represented among the
    /// support vectors, otherwise no pair of opposite-class units exists.
    pub fn new(
        support_vectors: Points,
        dual_coeffs: Vec<f64>,
        labels: Vec<Class>,
        gamma: f64,
        bias: f64,
    ) -> Result<Self> {
        let n = support_vectors.n_rows();
        if dual_coeffs.len() != n || labels.len() != n {
            return Err(Error::InvalidModel(format!(
                "{n} support vectors but {} coefficients and {} labels",
                dual_coeffs.len(),
                labels.len()
            )));
        }
        check_gamma(gamma)?;
        if !bias.is_finite() {
            return Err(Error::InvalidModel("bias must be finite".into()));
        }
        if let Some(a) = dual_coeffs.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidModel(format!(
                "dual coefficients must be positive, got {a}"
            )));
        }
        if !labels.contains(&Class::Positive) || !labels.contains(&Class::Negative) {
            return Err(Error::InvalidModel(
                "at least one support vector of each class is required".into(),
            ));
        }
        let sq_norms = support_vectors.sq_norms();
        Ok(Self {
            support_vectors,
            dual_coeffs,
            labels,
            gamma,
            bias,
            sq_norms,
        })
    }

    pub fn support_vectors(&self) -> &Points {
        &self.support_vectors
    }

    pub fn dual_coeffs(&self) -> &[f64] {
        &self.dual_coeffs
    }

    pub fn labels(&self) -> &[Class] {
        &self.labels
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn dim(&self) -> usize {
        self.support_vectors.n_cols()
    }

    pub fn n_support(&self) -> usize {
        self.dual_coeffs.len()
    }

    pub(crate) fn sq_norms(&self) -> &[f64] {
        &self.sq_norms
    }

    /// Same model with a different offset.
    pub fn with_bias(mut self, bias: f64) -> Self {
        self.bias = bias;
        self
    }

    fn kernel_terms<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        let x_sq = sq_norm(x);
        self.support_vectors
            .rows()
            .zip(&self.sq_norms)
            .zip(self.dual_coeffs.iter().zip(&self.labels))
            .map(move |((u, &u_sq), (&a, y))| {
                y.sign() * a * (-self.gamma * sq_dist_expanded(x, x_sq, u, u_sq)).exp()
            })
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.kernel_terms(x).sum::<f64>() + self.bias)
    }

    /// `∇f(x) = Σ y α exp(−γ‖x−u‖²)·(−2γ)(x − u)`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut grad = vec![0.0; x.len()];
        for (term, u) in self.kernel_terms(x).zip(self.support_vectors.rows()) {
            let s = -2.0 * self.gamma * term;
            for ((g, xi), ui) in grad.iter_mut().zip(x).zip(u) {
                *g += s * (xi - ui);
            }
        }
        Ok(grad)
    }

}

impl KrrModel {
    /// Rewrites the regression function in SVM form by moving each
    /// coefficient's sign into a class label. Zero coefficients are dropped.
    pub fn to_svm(&self) -> Result<SvmModel> {
        let keep: Vec<usize> = (0..self.coeffs().len())
            .filter(|&i| self.coeffs()[i] != 0.0)
            .collect();
        let labels: Vec<Class> = keep.iter().map(|&i| Class::of(self.coeffs()[i])).collect();
        if !labels.contains(&Class::Positive) || !labels.contains(&Class::Negative) {
            return Err(Error::InvalidModel(
                "all nonzero coefficients share one sign; no opposite-class pool exists".into(),
            ));
        }
        let coeffs = keep.iter().map(|&i| self.coeffs()[i].abs()).collect();
        SvmModel::new(self.points().select(&keep), coeffs, labels, self.gamma(), 0.0)
    }
}
