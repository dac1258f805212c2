//! Layer-wise relevance propagation through a neuralized model.
//!
//! The output `g(x)` is split over pairs of pool members with probabilities
//! `p_i p_j` (softargmax/softargmin for smooth pools, uniform rank bands for
//! ranked pools). Each pair's share is then attributed to the input features
//! by a first-order expansion of its detection unit at a reference point on
//! the segment `[0, m_ij]`:
//!
//! ```text
//! E_η(x) = Σ_i Σ_j (x − η m_ij) ⊙ w_ij p_i p_j
//! ```
//!
//! Because the probabilities factor over `i` and `j`, the double sum reduces
//! to probability-weighted means of the points and of their squares in each
//! pool, so an explanation costs about as much as two model evaluations.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::Model;
use crate::neuralize::{
    softmax, ForwardTrace, NeuralizedNet, PoolSide, Pooling, Unit,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrpHyperparams {
    /// Position of the reference point on `[0, m_ij]`, in `[0, 1]`.
    pub eta: f64,
    /// Stiffness of the smooth-pool redistribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Half-width of the rank band for ranked pools.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<usize>,
}

impl LrpHyperparams {
    pub fn svm(eta: f64, beta: f64) -> Self {
        Self {
            eta,
            beta: Some(beta),
            kappa: None,
        }
    }

    pub fn knn(eta: f64, kappa: usize) -> Self {
        Self {
            eta,
            beta: None,
            kappa: Some(kappa),
        }
    }

    pub fn with_eta(self, eta: f64) -> Self {
        Self { eta, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!(
                "eta must lie in [0, 1], got {}",
                self.eta
            )));
        }
        if let Some(beta) = self.beta {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "beta must be positive, got {beta}"
                )));
            }
        }
        Ok(())
    }

    fn validate_for(&self, pooling: Pooling) -> Result<()> {
        self.validate()?;
        match pooling {
            Pooling::Smooth { .. } if self.beta.is_none() => Err(Error::InvalidParameter(
                "smooth pooling needs beta".into(),
            )),
            Pooling::Ranked { .. } if self.kappa.is_none() => Err(Error::InvalidParameter(
                "ranked pooling needs kappa".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Default hyperparameters derived from the model's own scale parameter.
///
/// Kernel models (inputs normalized to unit median pairwise distance):
/// `η = median{0, 0.4·log₁₀γ + 0.4, 1}`, `β = γ`. KNN: `η = 0.8`,
/// `κ = (k−1)/2`.
pub fn heuristic_params(model: &Model) -> LrpHyperparams {
    match model {
        Model::Knn(m) => LrpHyperparams::knn(0.8, (m.k() - 1) / 2),
        Model::Svm(_) | Model::Krr(_) => {
            let gamma = model.gamma().expect("kernel model");
            let eta = (0.4 * gamma.log10() + 0.4).clamp(0.0, 1.0);
            LrpHyperparams::svm(eta, gamma)
        }
    }
}

/// Redistribution weights over the members of each pool, in trace order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoolingProbabilities {
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Explanation {
    pub relevance: Vec<f64>,
    pub g_value: f64,
    pub probabilities: PoolingProbabilities,
    pub hyperparams: LrpHyperparams,
}

/// `p_i ∝ exp(β a_i)` over `𝒞₊` and `p_j ∝ exp(−β h_j)` over `𝒞₋`.
///
/// `exp(β z_ij)` normalized over `i` does not depend on `j` since
/// `z_ij = a_i − a_j`, so `p_i` is computed once from the unit scores.
pub fn pooling_probabilities_svm(trace: &ForwardTrace, beta: f64) -> PoolingProbabilities {
    PoolingProbabilities {
        positive: softmax(&trace.positive_scores, beta),
        negative: softmax(&trace.pooled, -beta),
    }
}

/// Uniform weights over rank bands `[q−κ, q+κ]` around the units that
/// decided the ranked pools.
///
/// The negative band ranks `h_j` ascending; the positive band ranks
/// `z_{i j*}` descending, `j*` being the negative unit chosen at rank `q`.
/// Members tied with a band boundary are always included.
pub fn pooling_probabilities_knn(
    trace: &ForwardTrace,
    q: usize,
    kappa: usize,
) -> PoolingProbabilities {
    let (_, j_sel) = trace.selected.expect("ranked trace");
    let z: Vec<f64> = trace
        .positive_scores
        .iter()
        .map(|a| a - trace.negative_scores[j_sel])
        .collect();
    PoolingProbabilities {
        positive: band(&z, q, kappa, |x, y| y.total_cmp(x)),
        negative: band(&trace.pooled, q, kappa, f64::total_cmp),
    }
}

fn band(values: &[f64], q: usize, kappa: usize, by: impl Fn(&f64, &f64) -> Ordering) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| by(&values[a], &values[b]).then(a.cmp(&b)));
    let lo = q.saturating_sub(kappa).max(1);
    let hi = (q + kappa).min(n);
    let v_lo = values[order[lo - 1]];
    let v_hi = values[order[hi - 1]];
    let mut members = vec![false; n];
    for (r, &pos) in order.iter().enumerate() {
        let rank = r + 1;
        let v = values[pos];
        members[pos] = (lo..=hi).contains(&rank) || v == v_lo || v == v_hi;
    }
    let count = members.iter().filter(|&&m| m).count() as f64;
    members
        .into_iter()
        .map(|m| if m { 1.0 / count } else { 0.0 })
        .collect()
}

pub fn pooling_probabilities(
    net: &NeuralizedNet,
    trace: &ForwardTrace,
    params: &LrpHyperparams,
) -> Result<PoolingProbabilities> {
    params.validate_for(net.pooling())?;
    Ok(match net.pooling() {
        Pooling::Smooth { .. } => pooling_probabilities_svm(trace, params.beta.unwrap()),
        Pooling::Ranked { q } => pooling_probabilities_knn(trace, q, params.kappa.unwrap()),
    })
}

/// Relevance of each input feature for the network output at `x`.
///
/// The bias unit has no weight vector and contributes no feature relevance.
pub fn explain(net: &NeuralizedNet, x: &[f64], params: &LrpHyperparams) -> Result<Explanation> {
    params.validate_for(net.pooling())?;
    let trace = net.forward(x)?;
    let probabilities = pooling_probabilities(net, &trace, params)?;
    let relevance = explain_fast_path(net, x, &probabilities, params.eta)?;
    Ok(Explanation {
        relevance,
        g_value: trace.output,
        probabilities,
        hyperparams: *params,
    })
}

/// Probability mass, first moment and elementwise second moment of the
/// training points of one pool.
struct PoolMoments {
    mass: f64,
    mean: Vec<f64>,
    sq_mean: Vec<f64>,
}

fn pool_moments(net: &NeuralizedNet, side: PoolSide, probs: &[f64]) -> PoolMoments {
    let d = net.dim();
    let mut m = PoolMoments {
        mass: 0.0,
        mean: vec![0.0; d],
        sq_mean: vec![0.0; d],
    };
    for (unit, &p) in net.units(side).into_iter().zip(probs) {
        let Unit::Point(i) = unit else { continue };
        if p == 0.0 {
            continue;
        }
        m.mass += p;
        for ((mu, s), u) in m.mean.iter_mut().zip(m.sq_mean.iter_mut()).zip(net.point(i)) {
            *mu += p * u;
            *s += p * u * u;
        }
    }
    m
}

/// `E_η = (1−η)·E₀ + η·E₁` with
/// `E₀ = x ⊙ Σ p_i p_j w_ij = x ⊙ 2(S₋ū₊ − S₊ū₋)` and
/// `E₁ = E₀ − Σ p_i p_j m_ij ⊙ w_ij = E₀ − (S₋s₊ − S₊s₋)`,
/// where `S`, `ū`, `s` are the pool's mass, weighted point sum and weighted
/// squared-point sum. `S = 1` unless the bias unit holds part of the mass.
pub fn explain_fast_path(
    net: &NeuralizedNet,
    x: &[f64],
    probs: &PoolingProbabilities,
    eta: f64,
) -> Result<Vec<f64>> {
    check_dim(net.dim(), x.len())?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("eta must lie in [0, 1], got {eta}")));
    }
    let pos = pool_moments(net, PoolSide::Positive, &probs.positive);
    let neg = pool_moments(net, PoolSide::Negative, &probs.negative);
    let relevance = (0..x.len())
        .map(|k| {
            let e0 = x[k] * 2.0 * (neg.mass * pos.mean[k] - pos.mass * neg.mean[k]);
            let e1 = e0 - (neg.mass * pos.sq_mean[k] - pos.mass * neg.sq_mean[k]);
            (1.0 - eta) * e0 + eta * e1
        })
        .collect();
    Ok(relevance)
}
