//! Pixel-flipping evaluation of explanations.
//!
//! Features are removed in decreasing order of relevance. Removed features
//! are resampled from a kernel density estimate of the training data
//! conditioned on the features still present, and the classifier's decision
//! is compared with its decision on the intact input. The flipping curve
//! records `+1` (unchanged) or `−1` (flipped) per step; its mean is the AUFC,
//! lower being better.

use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::Function;
use crate::error::{check_dim, Error, Result};
use crate::linalg::Points;
use crate::model::Class;
use crate::seed::rng_for;

/// Gaussian KDE over reference data, used for conditional resampling.
#[derive(Clone, Debug)]
pub struct KdeInpainter {
    reference: Points,
    bandwidth: Vec<f64>,
    rng_seed: u64,
}

/// Inpainted input plus whether the conditional weights had to be replaced
/// by uniform ones.
#[derive(Clone, Debug, PartialEq)]
pub struct Inpainting {
    pub values: Vec<f64>,
    pub uniform_fallback: bool,
}

const MIN_BANDWIDTH: f64 = 1e-6;

impl KdeInpainter {
    pub fn new(reference: Points, bandwidth: Vec<f64>, rng_seed: u64) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::EmptySplit("KDE reference data".into()));
        }
        check_dim(reference.n_cols(), bandwidth.len())?;
        if let Some(b) = bandwidth.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {b}")));
        }
        Ok(Self {
            reference,
            bandwidth,
            rng_seed,
        })
    }

    /// Per-feature Silverman bandwidth `(4/3)^{1/5} σ n^{−1/5}`.
    pub fn silverman(reference: Points, rng_seed: u64) -> Result<Self> {
        let n = reference.n_rows() as f64;
        let factor = (4.0 / 3.0f64).powf(0.2) * n.powf(-0.2);
        let bandwidth = reference
            .column_stds()
            .into_iter()
            .map(|s| (factor * s).max(MIN_BANDWIDTH))
            .collect();
        Self::new(reference, bandwidth, rng_seed)
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Deterministic in `(rng_seed, call_index)`.
    pub fn inpaint(&self, x: &[f64], removed: &[usize], call_index: u64) -> Result<Inpainting> {
        let mut rng = rng_for(self.rng_seed, &[call_index]);
        self.inpaint_with(x, removed, &mut rng)
    }

    /// Weights each reference point by the kernel product over the kept
    /// features, draws one point by weight, and replaces the removed features
    /// with that point's values plus Gaussian kernel noise.
    pub fn inpaint_with<R: Rng>(&self, x: &[f64], removed: &[usize], rng: &mut R) -> Result<Inpainting> {
        let d = self.reference.n_cols();
        check_dim(d, x.len())?;
        if removed.is_empty() {
            return Err(Error::InvalidParameter("no feature to inpaint".into()));
        }
        if let Some(k) = removed.iter().find(|&&k| k >= d) {
            return Err(Error::InvalidParameter(format!("feature {k} out of range")));
        }
        let mut kept = vec![true; d];
        for &k in removed {
            kept[k] = false;
        }
        let log_w: Vec<f64> = self
            .reference
            .rows()
            .map(|u| {
                (0..d)
                    .filter(|&k| kept[k])
                    .map(|k| {
                        let t = (x[k] - u[k]) / self.bandwidth[k];
                        -0.5 * t * t
                    })
                    .sum()
            })
            .collect();
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
        let (chosen, uniform_fallback) = match WeightedIndex::new(&weights) {
            Ok(dist) if max.is_finite() => (dist.sample(rng), false),
            _ => (rng.gen_range(0..self.reference.n_rows()), true),
        };
        let u = self.reference.row(chosen);
        let mut values = x.to_vec();
        for k in 0..d {
            if !kept[k] {
                let z: f64 = rng.sample(StandardNormal);
                values[k] = u[k] + self.bandwidth[k] * z;
            }
        }
        Ok(Inpainting {
            values,
            uniform_fallback,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlippingCurve {
    /// Per-step outcome, averaged over inpainting repeats.
    pub outcomes: Vec<f64>,
    pub aufc: f64,
}

impl FlippingCurve {
    pub fn from_outcomes(outcomes: Vec<f64>) -> Self {
        let aufc = outcomes.iter().sum::<f64>() / outcomes.len() as f64;
        Self { outcomes, aufc }
    }
}

/// Feature indices by decreasing relevance, ties by ascending index.
pub fn removal_order(relevance: &[f64]) -> Result<Vec<usize>> {
    if let Some(k) = relevance.iter().position(|r| r.is_nan()) {
        return Err(Error::NonFiniteRelevance(k));
    }
    let mut order: Vec<usize> = (0..relevance.len()).collect();
    order.sort_by(|&a, &b| relevance[b].total_cmp(&relevance[a]).then(a.cmp(&b)));
    Ok(order)
}

/// Flipping curve of one explanation. At step `t` the `t` most relevant
/// features are inpainted jointly. `stream` keys the random draws, so equal
/// streams and equal rankings give equal curves.
///
/// Scores are ranked as given: orient signed explanations towards the
/// predicted class first, as `Explainer::importance` does.
pub fn flip(
    decider: &dyn Function,
    relevance: &[f64],
    x: &[f64],
    inpainter: &KdeInpainter,
    stream: u64,
    repeats: usize,
) -> Result<FlippingCurve> {
    check_dim(x.len(), relevance.len())?;
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    let order = removal_order(relevance)?;
    let original = Class::of(decider.value(x)?);
    let d = x.len();
    let mut sums = vec![0.0; d];
    for r in 0..repeats {
        let mut rng = rng_for(inpainter.rng_seed, &[stream, r as u64]);
        for t in 1..=d {
            let probe = inpainter.inpaint_with(x, &order[..t], &mut rng)?;
            let same = Class::of(decider.value(&probe.values)?) == original;
            sums[t - 1] += if same { 1.0 } else { -1.0 };
        }
    }
    Ok(FlippingCurve::from_outcomes(
        sums.into_iter().map(|s| s / repeats as f64).collect(),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AufcSummary {
    pub method: String,
    pub mean_aufc: f64,
    /// Sample standard deviation of the per-sample AUFC.
    pub std: f64,
    pub n: usize,
    pub curves: Vec<FlippingCurve>,
}

impl AufcSummary {
    pub fn std_error(&self) -> f64 {
        self.std / (self.n as f64).sqrt()
    }

    /// Mean outcome per removal step across samples.
    pub fn mean_curve(&self) -> Vec<f64> {
        let d = self.curves.first().map(|c| c.outcomes.len()).unwrap_or(0);
        (0..d)
            .map(|t| self.curves.iter().map(|c| c.outcomes[t]).sum::<f64>() / self.n as f64)
            .collect()
    }
}

/// Explains and flips every sample, in parallel across samples. Sample `i`
/// uses inpainting stream `i` whatever the explainer, so methods evaluated
/// with the same inpainter see the same random draws.
pub fn evaluate_method<E>(
    method: &str,
    decider: &dyn Function,
    samples: &Points,
    explainer: E,
    inpainter: &KdeInpainter,
    repeats: usize,
) -> Result<AufcSummary>
where
    E: Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync,
{
    if samples.is_empty() {
        return Err(Error::EmptySplit("no samples to evaluate".into()));
    }
    let curves = (0..samples.n_rows())
        .into_par_iter()
        .map(|i| {
            let x = samples.row(i);
            let relevance = explainer(i, x)?;
            flip(decider, &relevance, x, inpainter, i as u64, repeats)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = curves.len();
    let mean = curves.iter().map(|c| c.aufc).sum::<f64>() / n as f64;
    let std = if n > 1 {
        (curves.iter().map(|c| (c.aufc - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(AufcSummary {
        method: method.to_string(),
        mean_aufc: mean,
        std,
        n,
        curves,
    })
}

/// `sample_id,step,outcome`, steps counted from 1.
pub fn write_curves_csv<W: Write>(out: W, summary: &AufcSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample_id", "step", "outcome"])?;
    for (i, c) in summary.curves.iter().enumerate() {
        for (t, o) in c.outcomes.iter().enumerate() {
            w.write_record([i.to_string(), (t + 1).to_string(), o.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `method,mean_aufc,std,n`.
pub fn write_summary_csv<W: Write>(out: W, summaries: &[AufcSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "mean_aufc", "std", "n"])?;
    for s in summaries {
        w.write_record([
            s.method.clone(),
            s.mean_aufc.to_string(),
            s.std.to_string(),
            s.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
