//! Exact rewriting of Gaussian SVMs and KNN classifiers as three-layer
//! networks: linear detection units over opposite-class pairs, a max-like
//! pool over the positive class and a min-like pool over the negative class.
//!
//! Detection units are never materialized per pair. Each training point
//! `u_ℓ` carries a score `a_ℓ = 2xᵀu_ℓ − ‖u_ℓ‖² + c_ℓ` (with `c_ℓ = γ⁻¹ log α_ℓ`
//! for SVMs and `0` for KNN), and every pairwise activation is recovered as
//! `z_ij = a_i − a_j = (x − m_ij)ᵀ w_ij + b_ij`. Both pooling operators commute
//! with subtracting a constant, so the whole forward pass is linear in the
//! number of points.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{affinity, sq_norm, Points};
use crate::model::{Class, KnnModel, Model, SvmModel};

/// Pooling operator pair used by the two upper layers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Pooling {
    /// Log-sum-exp max over `𝒞₊` followed by its min counterpart over `𝒞₋`.
    Smooth { gamma: f64 },
    /// `q`-th largest over `𝒞₊` followed by `q`-th smallest over `𝒞₋`.
    Ranked { q: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolSide {
    Positive,
    Negative,
}

/// The constant unit carrying the SVM offset.
///
/// `value` is `z₀ = −γ⁻¹ log|θ|`. The unit behaves like a support vector of
/// coefficient `|θ|` whose kernel response is identically one, so its score
/// is `a₀ = ‖x‖² − z₀` and every pair it forms reproduces `θ` exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BiasUnit {
    pub value: f64,
    pub pool: PoolSide,
}

/// A member of one of the two pools.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unit {
    /// Index into the source model's points.
    Point(usize),
    Bias,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeuralizedNet {
    points: Points,
    sq_norms: Vec<f64>,
    log_coeffs: Vec<f64>,
    positive_pool: Vec<usize>,
    negative_pool: Vec<usize>,
    pooling: Pooling,
    bias_unit: Option<BiasUnit>,
}

/// Intermediate values of one forward pass.
///
/// Unit scores are listed pool by pool in ascending training index with the
/// bias unit, if it belongs to that pool, last.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub positive_scores: Vec<f64>,
    pub negative_scores: Vec<f64>,
    /// `h_j` for every unit of the negative pool.
    pub pooled: Vec<f64>,
    pub output: f64,
    /// Ranked pooling only: positions (within each pool) of the units
    /// selected at rank `q`.
    pub selected: Option<(usize, usize)>,
}

pub fn neuralize_svm(model: &SvmModel) -> NeuralizedNet {
    let gamma = model.gamma();
    let (positive_pool, negative_pool) = split_pools(model.labels());
    let bias_unit = match model.bias() {
        t if t > 0.0 => Some(BiasUnit {
            value: -t.ln() / gamma,
            pool: PoolSide::Positive,
        }),
        t if t < 0.0 => Some(BiasUnit {
            value: -(-t).ln() / gamma,
            pool: PoolSide::Negative,
        }),
        _ => None,
    };
    NeuralizedNet {
        points: model.support_vectors().clone(),
        sq_norms: model.sq_norms().to_vec(),
        log_coeffs: model.dual_coeffs().iter().map(|a| a.ln() / gamma).collect(),
        positive_pool,
        negative_pool,
        pooling: Pooling::Smooth { gamma },
        bias_unit,
    }
}

pub fn neuralize_knn(model: &KnnModel) -> NeuralizedNet {
    let (positive_pool, negative_pool) = split_pools(model.labels());
    NeuralizedNet {
        points: model.points().clone(),
        sq_norms: model.sq_norms().to_vec(),
        log_coeffs: vec![0.0; model.points().n_rows()],
        positive_pool,
        negative_pool,
        pooling: Pooling::Ranked { q: model.q() },
        bias_unit: None,
    }
}

/// Neuralizes any model; kernel ridge models go through their SVM form.
pub fn neuralize(model: &Model) -> Result<NeuralizedNet> {
    match model {
        Model::Svm(m) => Ok(neuralize_svm(m)),
        Model::Knn(m) => Ok(neuralize_knn(m)),
        Model::Krr(m) => Ok(neuralize_svm(&m.to_svm()?)),
    }
}

fn split_pools(labels: &[Class]) -> (Vec<usize>, Vec<usize>) {
    (0..labels.len()).partition(|&i| labels[i] == Class::Positive)
}

impl NeuralizedNet {
    pub fn dim(&self) -> usize {
        self.points.n_cols()
    }

    pub fn pooling(&self) -> Pooling {
        self.pooling
    }

    pub fn bias_unit(&self) -> Option<BiasUnit> {
        self.bias_unit
    }

    pub fn positive_pool(&self) -> &[usize] {
        &self.positive_pool
    }

    pub fn negative_pool(&self) -> &[usize] {
        &self.negative_pool
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    /// Members of one pool in trace order.
    pub fn units(&self, side: PoolSide) -> Vec<Unit> {
        let pool = match side {
            PoolSide::Positive => &self.positive_pool,
            PoolSide::Negative => &self.negative_pool,
        };
        let mut units: Vec<Unit> = pool.iter().map(|&i| Unit::Point(i)).collect();
        if self.bias_unit.map(|b| b.pool) == Some(side) {
            units.push(Unit::Bias);
        }
        units
    }

    /// Factorized score `a_ℓ` of one training point.
    pub fn score(&self, i: usize, x: &[f64]) -> f64 {
        affinity(x, self.points.row(i), self.sq_norms[i]) + self.log_coeffs[i]
    }

    fn unit_score(&self, unit: Unit, x: &[f64], x_sq: f64) -> f64 {
        match unit {
            Unit::Point(i) => self.score(i, x),
            Unit::Bias => x_sq - self.bias_unit.map(|b| b.value).unwrap_or(0.0),
        }
    }

    fn pool_scores(&self, side: PoolSide, x: &[f64]) -> Vec<f64> {
        let x_sq = sq_norm(x);
        self.units(side)
            .into_iter()
            .map(|u| self.unit_score(u, x, x_sq))
            .collect()
    }

    /// `w_ij = 2(u_i − u_j)`.
    pub fn pair_weight(&self, i: usize, j: usize) -> Vec<f64> {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| 2.0 * (a - b))
            .collect()
    }

    /// `m_ij = (u_i + u_j)/2`.
    pub fn pair_midpoint(&self, i: usize, j: usize) -> Vec<f64> {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// `b_ij = γ⁻¹ log(α_i/α_j)` for SVMs, zero for KNN.
    pub fn pair_bias(&self, i: usize, j: usize) -> f64 {
        self.log_coeffs[i] - self.log_coeffs[j]
    }

    /// Detection activation `z_ij = (x − m_ij)ᵀ w_ij + b_ij`, evaluated from the
    /// pairwise parameters directly.
    pub fn detection(&self, i: usize, j: usize, x: &[f64]) -> f64 {
        let w = self.pair_weight(i, j);
        let m = self.pair_midpoint(i, j);
        x.iter()
            .zip(&m)
            .zip(&w)
            .map(|((xv, mv), wv)| (xv - mv) * wv)
            .sum::<f64>()
            + self.pair_bias(i, j)
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        check_dim(self.dim(), x.len())?;
        let positive_scores = self.pool_scores(PoolSide::Positive, x);
        let negative_scores = self.pool_scores(PoolSide::Negative, x);
        let trace = match self.pooling {
            Pooling::Smooth { gamma } => {
                let top = smooth_max(&positive_scores, gamma);
                let pooled: Vec<f64> = negative_scores.iter().map(|a| top - a).collect();
                let output = smooth_min(&pooled, gamma);
                ForwardTrace {
                    positive_scores,
                    negative_scores,
                    pooled,
                    output,
                    selected: None,
                }
            }
            Pooling::Ranked { q } => {
                let (i_sel, top) = ranked_max(&positive_scores, q);
                let pooled: Vec<f64> = negative_scores.iter().map(|a| top - a).collect();
                let (j_sel, output) = ranked_min(&pooled, q);
                ForwardTrace {
                    positive_scores,
                    negative_scores,
                    pooled,
                    output,
                    selected: Some((i_sel, j_sel)),
                }
            }
        };
        Ok(trace)
    }

    pub fn output(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward(x)?.output)
    }

    /// `∇g(x)` for smooth pooling, by the chain rule through the softmax
    /// weights of both pools. Ranked pooling is piecewise linear in `x` and
    /// is treated like the KNN it came from.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let gamma = match self.pooling {
            Pooling::Smooth { gamma } => gamma,
            Pooling::Ranked { .. } => return Err(Error::GradientInapplicable("neuralized knn")),
        };
        let trace = self.forward(x)?;
        let d = x.len();
        let score_grad = |unit: Unit| -> Vec<f64> {
            match unit {
                Unit::Point(i) => self.point(i).iter().map(|u| 2.0 * u).collect(),
                Unit::Bias => x.iter().map(|v| 2.0 * v).collect(),
            }
        };

        // ∇(smax over 𝒞₊) = Σ_i softmax_i ∇a_i
        let pi = softmax(&trace.positive_scores, gamma);
        let mut top_grad = vec![0.0; d];
        for (unit, p) in self.units(PoolSide::Positive).into_iter().zip(&pi) {
            for (g, s) in top_grad.iter_mut().zip(score_grad(unit)) {
                *g += p * s;
            }
        }
        // g = smin_j h_j with h_j = top − a_j: ∇g = Σ_j ρ_j (∇top − ∇a_j)
        let rho = softmax(&trace.pooled, -gamma);
        let mut grad = top_grad;
        for (unit, r) in self.units(PoolSide::Negative).into_iter().zip(&rho) {
            for (g, s) in grad.iter_mut().zip(score_grad(unit)) {
                *g -= r * s;
            }
        }
        Ok(grad)
    }

    pub fn to_document(&self) -> NetDocument<'_> {
        NetDocument {
            kind: match self.pooling {
                Pooling::Smooth { .. } => "neural-svm",
                Pooling::Ranked { .. } => "neural-knn",
            },
            pooling: self.pooling,
            positive_pool: &self.positive_pool,
            negative_pool: &self.negative_pool,
            directions: &self.points,
            sq_norms: &self.sq_norms,
            log_coeffs: &self.log_coeffs,
            bias_unit: self.bias_unit,
        }
    }
}

/// JSON view of a network, for inspection only.
#[derive(Debug, Serialize)]
pub struct NetDocument<'a> {
    pub kind: &'static str,
    pub pooling: Pooling,
    pub positive_pool: &'a [usize],
    pub negative_pool: &'a [usize],
    pub directions: &'a Points,
    pub sq_norms: &'a [f64],
    pub log_coeffs: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias_unit: Option<BiasUnit>,
}

/// `γ⁻¹ log Σ exp(γ a)`, max-shifted. Negative `gamma` gives the smooth min.
pub fn smooth_max(values: &[f64], gamma: f64) -> f64 {
    let m = if gamma > 0.0 {
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        values.iter().copied().fold(f64::INFINITY, f64::min)
    };
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|v| (gamma * (v - m)).exp()).sum();
    m + s.ln() / gamma
}

/// `smin^γ{a} = −smax^γ{−a}`.
pub fn smooth_min(values: &[f64], gamma: f64) -> f64 {
    let neg: Vec<f64> = values.iter().map(|v| -v).collect();
    -smooth_max(&neg, gamma)
}

/// Normalized `exp(β a)` weights, max-shifted.
pub fn softmax(values: &[f64], beta: f64) -> Vec<f64> {
    let m = values
        .iter()
        .map(|v| beta * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = values.iter().map(|v| (beta * v - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Position and value of the `q`-th largest element; ties go to the lower
/// position.
pub fn ranked_max(values: &[f64], q: usize) -> (usize, f64) {
    select_rank(values, q, |a, b| values[*b].total_cmp(&values[*a]).then(a.cmp(b)))
}

/// Position and value of the `q`-th smallest element; ties go to the lower
/// position.
pub fn ranked_min(values: &[f64], q: usize) -> (usize, f64) {
    select_rank(values, q, |a, b| values[*a].total_cmp(&values[*b]).then(a.cmp(b)))
}

fn select_rank(
    values: &[f64],
    q: usize,
    cmp: impl FnMut(&usize, &usize) -> Ordering,
) -> (usize, f64) {
    assert!(q >= 1 && q <= values.len(), "rank {q} out of 1..={}", values.len());
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let (_, &mut pos, _) = idx.select_nth_unstable_by(q - 1, cmp);
    (pos, values[pos])
}

/// Outcome of comparing the signs of a model and its network on probe points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SignReport {
    pub probes: usize,
    /// Probes with `|f| ≤ 1e−9`, excluded from the comparison.
    pub dead_zone: usize,
    pub mismatches: usize,
    pub first_mismatch: Option<usize>,
}

pub const SIGN_DEAD_ZONE: f64 = 1e-9;

pub fn sign_equivalence_check(
    model: &Model,
    net: &NeuralizedNet,
    probes: &Points,
) -> Result<SignReport> {
    let mut report = SignReport {
        probes: probes.n_rows(),
        dead_zone: 0,
        mismatches: 0,
        first_mismatch: None,
    };
    for (p, x) in probes.rows().enumerate() {
        let f = model.decision(x)?;
        if f.abs() <= SIGN_DEAD_ZONE {
            report.dead_zone += 1;
            continue;
        }
        let g = net.output(x)?;
        let agree = (f > 0.0 && g > 0.0) || (f < 0.0 && g < 0.0);
        if !agree {
            report.mismatches += 1;
            report.first_mismatch.get_or_insert(p);
        }
    }
    Ok(report)
}
