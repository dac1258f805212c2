//! Model-agnostic comparison explainers: gradient × input, integrated
//! gradients, squared-gradient sensitivity, occlusion and Shapley value
//! sampling.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::Model;
use crate::neuralize::NeuralizedNet;
use crate::seed::rng_for;

/// A scalar function of the input.
pub trait Function: Sync {
    fn value(&self, x: &[f64]) -> Result<f64>;
}

/// A scalar function with an analytic input gradient.
pub trait Differentiable: Function {
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl Function for Model {
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.decision(x)
    }
}

impl Differentiable for Model {
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Model::gradient(self, x)
    }
}

impl Function for NeuralizedNet {
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.output(x)
    }
}

impl Differentiable for NeuralizedNet {
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        NeuralizedNet::gradient(self, x)
    }
}

impl<F> Function for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self(x))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub ig_steps: usize,
    pub shap_permutations: usize,
    /// Replacement value per feature for occlusion and Shapley sampling.
    pub occlusion_fill: Vec<f64>,
    pub rng_seed: u64,
}

impl BaselineConfig {
    pub fn new(occlusion_fill: Vec<f64>, rng_seed: u64) -> Self {
        Self {
            ig_steps: 10,
            shap_permutations: 10,
            occlusion_fill,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ig_steps == 0 {
            return Err(Error::InvalidParameter("ig_steps must be at least 1".into()));
        }
        if self.shap_permutations == 0 {
            return Err(Error::InvalidParameter(
                "shap_permutations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// `x ⊙ ∇f(x)`.
pub fn gradient_x_input(f: &dyn Differentiable, x: &[f64]) -> Result<Vec<f64>> {
    let g = f.gradient(x)?;
    check_dim(x.len(), g.len())?;
    Ok(x.iter().zip(&g).map(|(a, b)| a * b).collect())
}

/// Integrated gradients from the origin, midpoint rule with
/// `config.ig_steps` nodes `s = (t − ½)/steps`.
pub fn integrated_gradients(
    f: &dyn Differentiable,
    x: &[f64],
    config: &BaselineConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    let steps = config.ig_steps;
    let mut mean_grad = vec![0.0; x.len()];
    let mut point = vec![0.0; x.len()];
    for t in 1..=steps {
        let s = (t as f64 - 0.5) / steps as f64;
        for (p, v) in point.iter_mut().zip(x) {
            *p = s * v;
        }
        let g = f.gradient(&point)?;
        // running mean stays exact when the gradient is constant
        for (m, gv) in mean_grad.iter_mut().zip(&g) {
            *m += (gv - *m) / t as f64;
        }
    }
    Ok(x.iter().zip(&mean_grad).map(|(v, g)| v * g).collect())
}

/// `(∂f/∂x_k)²`.
pub fn sensitivity(f: &dyn Differentiable, x: &[f64]) -> Result<Vec<f64>> {
    Ok(f.gradient(x)?.into_iter().map(|g| g * g).collect())
}

/// `f(x) − f(x with feature k set to its fill value)` for each `k`.
pub fn occlusion(f: &dyn Function, x: &[f64], config: &BaselineConfig) -> Result<Vec<f64>> {
    check_dim(x.len(), config.occlusion_fill.len())?;
    let base = f.value(x)?;
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        probe[k] = config.occlusion_fill[k];
        out.push(base - f.value(&probe)?);
        probe[k] = x[k];
    }
    Ok(out)
}

/// Permutation-sampling Shapley values with the fill vector as the absent
/// state. Features are removed one at a time along each permutation and each
/// marginal drop in `f` is credited to the feature just removed.
///
/// When `d!` does not exceed the permutation budget every ordering is used
/// once and the result is the exact Shapley value.
pub fn shapley_sampling(f: &dyn Function, x: &[f64], config: &BaselineConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let d = x.len();
    check_dim(d, config.occlusion_fill.len())?;
    let orders = permutations_for(d, config.shap_permutations, config.rng_seed);
    let mut total = vec![0.0; d];
    let f_x = f.value(x)?;
    let mut probe = x.to_vec();
    for order in &orders {
        probe.copy_from_slice(x);
        let mut prev = f_x;
        for &k in order {
            probe[k] = config.occlusion_fill[k];
            let cur = f.value(&probe)?;
            total[k] += prev - cur;
            prev = cur;
        }
    }
    let n = orders.len() as f64;
    Ok(total.into_iter().map(|v| v / n).collect())
}

fn permutations_for(d: usize, budget: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut count = 1usize;
    let mut enumerable = true;
    for m in 2..=d {
        match count.checked_mul(m) {
            Some(c) if c <= budget => count = c,
            _ => {
                enumerable = false;
                break;
            }
        }
    }
    if enumerable {
        return all_permutations(d);
    }
    let mut rng = rng_for(seed, &[0x5348_4150]);
    (0..budget)
        .map(|_| {
            let mut p: Vec<usize> = (0..d).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect()
}

fn all_permutations(d: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..d).collect();
    let mut out = vec![current.clone()];
    // lexicographic successor
    loop {
        let Some(i) = (1..d).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..d).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Points;
    use crate::model::{Class, KnnModel, SvmModel};

    struct Linear(Vec<f64>);

    impl Function for Linear {
        fn value(&self, x: &[f64]) -> Result<f64> {
            Ok(self.0.iter().zip(x).map(|(a, b)| a * b).sum())
        }
    }

    impl Differentiable for Linear {
        fn gradient(&self, _: &[f64]) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    struct FixedGrad(Vec<f64>);

    impl Function for FixedGrad {
        fn value(&self, _: &[f64]) -> Result<f64> {
            Ok(0.0)
        }
    }

    impl Differentiable for FixedGrad {
        fn gradient(&self, _: &[f64]) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    fn knn() -> Model {
        Model::Knn(
            KnnModel::new(
                Points::from_rows(&[vec![1.0], vec![2.0], vec![-1.0], vec![-2.0]]).unwrap(),
                vec![Class::Positive, Class::Positive, Class::Negative, Class::Negative],
                1,
            )
            .unwrap(),
        )
    }

    fn two_sv() -> Model {
        Model::Svm(
            SvmModel::new(
                Points::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap(),
                vec![1.0, 1.0],
                vec![Class::Positive, Class::Negative],
                1.0,
                0.0,
            )
            .unwrap(),
        )
    }

    #[test]
    fn gradient_times_input() {
        let f = FixedGrad(vec![2.0, 0.0]);
        assert_eq!(gradient_x_input(&f, &[3.0, 5.0]).unwrap(), vec![6.0, 0.0]);
        assert_eq!(gradient_x_input(&f, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn sensitivity_squares() {
        let f = FixedGrad(vec![2.0, -3.0]);
        assert_eq!(sensitivity(&f, &[1.0, 1.0]).unwrap(), vec![4.0, 9.0]);
    }

    #[test]
    fn gradient_methods_reject_knn() {
        let m = knn();
        let cfg = BaselineConfig::new(vec![0.0], 0);
        for r in [
            gradient_x_input(&m, &[0.5]),
            integrated_gradients(&m, &[0.5], &cfg),
            sensitivity(&m, &[0.5]),
        ] {
            let err = r.unwrap_err();
            assert!(matches!(err, Error::GradientInapplicable("knn")));
            assert!(err.to_string().contains("gradient-based explanations are inapplicable"));
        }
    }

    #[test]
    fn ig_on_linear_is_exact_for_any_steps() {
        let f = Linear(vec![0.5, -2.0, 3.0]);
        let x = [1.0, 2.0, -0.5];
        let expected = vec![0.5, -4.0, -1.5];
        for steps in [1, 10, 100] {
            let cfg = BaselineConfig {
                ig_steps: steps,
                ..BaselineConfig::new(vec![0.0; 3], 0)
            };
            assert_eq!(integrated_gradients(&f, &x, &cfg).unwrap(), expected);
        }
    }

    #[test]
    fn ig_completeness_on_svm() {
        let m = two_sv();
        let x = [0.7, -0.3];
        let cfg = BaselineConfig {
            ig_steps: 2000,
            ..BaselineConfig::new(vec![0.0; 2], 0)
        };
        let a = integrated_gradients(&m, &x, &cfg).unwrap();
        let gap = a.iter().sum::<f64>() - (m.decision(&x).unwrap() - m.decision(&[0.0, 0.0]).unwrap());
        assert!(gap.abs() < 1e-3);
    }

    #[test]
    fn occlusion_cases() {
        let cfg = BaselineConfig::new(vec![0.0; 2], 0);
        let constant = |_: &[f64]| 3.0;
        assert_eq!(occlusion(&constant, &[1.0, 2.0], &cfg).unwrap(), vec![0.0, 0.0]);
        let lin = Linear(vec![2.0, -1.0]);
        assert_eq!(occlusion(&lin, &[1.5, 4.0], &cfg).unwrap(), vec![3.0, -4.0]);
        let cfg1 = BaselineConfig::new(vec![0.0], 0);
        assert_eq!(occlusion(&knn(), &[0.5], &cfg1).unwrap(), vec![0.0]);
    }

    #[test]
    fn shapley_single_feature_equals_occlusion() {
        let cfg = BaselineConfig::new(vec![-0.3], 9);
        let f = |x: &[f64]| (3.0 * x[0]).sin();
        assert_eq!(
            shapley_sampling(&f, &[0.8], &cfg).unwrap(),
            occlusion(&f, &[0.8], &cfg).unwrap()
        );
    }

    #[test]
    fn shapley_on_additive_model() {
        let f = |x: &[f64]| x[0].powi(2) + (x[1]).sin() + 3.0 * x[2] - x[3].exp();
        let x = [0.4, -1.2, 2.0, 0.3];
        let fill = vec![0.1, 0.2, -0.3, 0.0];
        for seed in [0, 1, 77] {
            let cfg = BaselineConfig::new(fill.clone(), seed);
            let a = shapley_sampling(&f, &x, &cfg).unwrap();
            let expect = [
                x[0].powi(2) - fill[0].powi(2),
                x[1].sin() - fill[1].sin(),
                3.0 * (x[2] - fill[2]),
                -(x[3].exp() - fill[3].exp()),
            ];
            for (a, e) in a.iter().zip(expect) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shapley_efficiency_and_determinism() {
        let f = |x: &[f64]| x[0] * x[1] + (x[2] * x[3]).cos() + x[4];
        let x = [0.4, -1.2, 2.0, 0.3, 1.0];
        let fill = vec![0.0; 5];
        for seed in 0..5 {
            let cfg = BaselineConfig::new(fill.clone(), seed);
            let a = shapley_sampling(&f, &x, &cfg).unwrap();
            let total: f64 = a.iter().sum();
            assert!((total - (f(&x) - f(&fill))).abs() < 1e-10);
            assert_eq!(a, shapley_sampling(&f, &x, &cfg).unwrap());
        }
    }

    #[test]
    fn small_dimensions_enumerate_all_orders() {
        assert_eq!(permutations_for(3, 10, 0).len(), 6);
        assert_eq!(permutations_for(3, 5, 0).len(), 5);
        assert_eq!(permutations_for(4, 10, 0).len(), 10);
        let all = all_permutations(3);
        assert_eq!(all[0], vec![0, 1, 2]);
        assert_eq!(all[5], vec![2, 1, 0]);
    }
}
