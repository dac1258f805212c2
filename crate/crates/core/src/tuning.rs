//! Hyperparameter selection by k-fold cross-validation over a grid.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{train_svm, Class, KnnModel, Model};
use crate::seed::rng_for;

#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    Svm { gammas: Vec<f64>, cs: Vec<f64> },
    Knn { ks: Vec<usize> },
}

/// One trainable configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Candidate {
    Svm { gamma: f64, c: f64 },
    Knn { k: usize },
}

impl Candidate {
    pub fn train(&self, data: &Dataset) -> Result<Model> {
        let labels = data.labels()?;
        Ok(match *self {
            Candidate::Svm { gamma, c } => Model::Svm(train_svm(&data.features, &labels, gamma, c)?),
            Candidate::Knn { k } => Model::Knn(KnnModel::new(data.features.clone(), labels, k)?),
        })
    }
}

impl Grid {
    /// Candidates in row-major grid order.
    pub fn candidates(&self) -> Vec<Candidate> {
        match self {
            Grid::Svm { gammas, cs } => gammas
                .iter()
                .flat_map(|&gamma| cs.iter().map(move |&c| Candidate::Svm { gamma, c }))
                .collect(),
            Grid::Knn { ks } => ks.iter().map(|&k| Candidate::Knn { k }).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvScore {
    pub candidate: Candidate,
    /// `None` when the grid had a single point and no search was run.
    pub accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvReport {
    pub folds: usize,
    pub scores: Vec<CvScore>,
    pub best: Candidate,
}

/// Stratified folds: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[Class], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); folds];
    let mut slot = 0;
    for (tag, class) in [(0u64, Class::Positive), (1, Class::Negative)] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng_for(seed, &[0x464F4C44, tag]));
        for i in members {
            out[slot % folds].push(i);
            slot += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

/// Mean held-out accuracy of one candidate.
pub fn cross_validate(data: &Dataset, candidate: &Candidate, folds: &[Vec<usize>]) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for (f, held) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        let model = candidate.train(&data.select(&train))?;
        for &i in held {
            let pred = Class::of(model.decision(data.features.row(i))?);
            if pred.sign() == data.targets[i] {
                correct += 1;
            }
            total += 1;
        }
    }
    Ok(correct as f64 / total as f64)
}

/// Picks the most accurate candidate (first in grid order on ties) and
/// retrains it on all of `data`. A one-point grid is trained directly.
pub fn grid_search(data: &Dataset, grid: &Grid, folds: usize, seed: u64) -> Result<(Model, CvReport)> {
    let candidates = grid.candidates();
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("empty hyperparameter grid".into()));
    }
    if candidates.len() == 1 {
        let best = candidates[0];
        let report = CvReport {
            folds: 0,
            scores: vec![CvScore {
                candidate: best,
                accuracy: None,
            }],
            best,
        };
        return Ok((best.train(data)?, report));
    }
    if folds < 2 || folds > data.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot make {folds} folds from {} rows",
            data.len()
        )));
    }
    let split = stratified_folds(&data.labels()?, folds, seed);
    let accuracies = candidates
        .par_iter()
        .map(|c| cross_validate(data, c, &split))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, a) in accuracies.iter().enumerate() {
        if *a > accuracies[best] {
            best = i;
        }
    }
    let report = CvReport {
        folds,
        scores: candidates
            .iter()
            .zip(&accuracies)
            .map(|(&candidate, &a)| CvScore {
                candidate,
                accuracy: Some(a),
            })
            .collect(),
        best: candidates[best],
    };
    Ok((candidates[best].train(data)?, report))
}
