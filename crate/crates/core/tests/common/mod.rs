#![allow(dead_code)]

use distlrp::model::{Class, KnnModel, SvmModel};
use distlrp::Points;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, d: usize, spread: f64) -> Points {
    let data = (0..n * d).map(|_| rng.gen_range(-spread..spread)).collect();
    Points::new(d, data).unwrap()
}

/// Labels with both classes present; the first two points are forced apart.
pub fn random_labels<R: Rng>(rng: &mut R, n: usize) -> Vec<Class> {
    (0..n)
        .map(|i| match i {
            0 => Class::Positive,
            1 => Class::Negative,
            _ if rng.gen_bool(0.5) => Class::Positive,
            _ => Class::Negative,
        })
        .collect()
}

pub fn random_svm<R: Rng>(rng: &mut R, n: usize, d: usize, gamma: f64, bias: f64) -> SvmModel {
    let points = random_points(rng, n, d, 1.0);
    let alphas = (0..n).map(|_| rng.gen_range(0.05..2.0)).collect();
    SvmModel::new(points, alphas, random_labels(rng, n), gamma, bias).unwrap()
}

/// KNN model with at least `(k+1)/2` points per class.
pub fn random_knn<R: Rng>(rng: &mut R, n: usize, d: usize, k: usize) -> KnnModel {
    let q = (k + 1) / 2;
    let points = random_points(rng, n, d, 1.0);
    let labels = (0..n)
        .map(|i| {
            if i < q {
                Class::Positive
            } else if i < 2 * q {
                Class::Negative
            } else if rng.gen_bool(0.5) {
                Class::Positive
            } else {
                Class::Negative
            }
        })
        .collect();
    KnnModel::new(points, labels, k).unwrap()
}

pub fn random_vec<R: Rng>(rng: &mut R, d: usize, spread: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-spread..spread)).collect()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `‖a − b‖∞ / max(‖b‖∞, floor)`.
pub fn rel_dev(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    max_abs(&diff) / max_abs(b).max(floor)
}
