mod common;

use common::*;
use distlrp::baselines::gradient_x_input;
use distlrp::lrp::{explain, pooling_probabilities, LrpHyperparams};
use distlrp::model::{Class, KnnModel, SvmModel};
use distlrp::neuralize::{neuralize_knn, neuralize_svm};
use distlrp::Points;
use proptest::prelude::*;

fn d2(x: &[f64], u: &[f64]) -> f64 {
    x.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn softmax(v: &[f64], beta: f64) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|a| (beta * (a - m)).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Pool members in ascending index; `None` stands for the bias unit.
fn pools(labels: &[Class], bias: f64) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
    let mut pos: Vec<Option<usize>> = Vec::new();
    let mut neg: Vec<Option<usize>> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Class::Positive => pos.push(Some(i)),
            Class::Negative => neg.push(Some(i)),
        }
    }
    if bias > 0.0 {
        pos.push(None);
    } else if bias < 0.0 {
        neg.push(None);
    }
    (pos, neg)
}

/// Softargmax over the unit log-scores `‖x‖² − ‖x−u‖² + γ⁻¹ log α`. The
/// `softmin` of `h_j = A₊ − a_j` reduces to the same softargmax over the
/// negative scores.
fn svm_probabilities(m: &SvmModel, x: &[f64], beta: f64) -> (Vec<f64>, Vec<f64>) {
    let (pos, neg) = pools(m.labels(), m.bias());
    let x2: f64 = x.iter().map(|v| v * v).sum();
    let score = |u: &Option<usize>| match u {
        Some(i) => {
            x2 - d2(x, m.support_vectors().row(*i)) + m.dual_coeffs()[*i].ln() / m.gamma()
        }
        None => x2 + m.bias().abs().ln() / m.gamma(),
    };
    let a: Vec<f64> = pos.iter().map(score).collect();
    let b: Vec<f64> = neg.iter().map(score).collect();
    (softmax(&a, beta), softmax(&b, beta))
}

/// `Σ_i Σ_j p_i p_j (x − η m_ij) ⊙ w_ij` over point pairs, bias excluded.
fn double_sum(
    points: &Points,
    pos: &[Option<usize>],
    neg: &[Option<usize>],
    p_pos: &[f64],
    p_neg: &[f64],
    x: &[f64],
    eta: f64,
) -> Vec<f64> {
    let mut r = vec![0.0; x.len()];
    for (ui, pi) in pos.iter().zip(p_pos) {
        let Some(i) = ui else { continue };
        for (uj, pj) in neg.iter().zip(p_neg) {
            let Some(j) = uj else { continue };
            let (a, b) = (points.row(*i), points.row(*j));
            for k in 0..x.len() {
                let w = 2.0 * (a[k] - b[k]);
                let mid = 0.5 * (a[k] + b[k]);
                r[k] += pi * pj * (x[k] - eta * mid) * w;
            }
        }
    }
    r
}

/// Uniform weight over distance ranks `[q−κ, q+κ]` within one class, plus any
/// point tied with a band edge.
fn knn_band(m: &KnnModel, x: &[f64], class: Class, kappa: usize) -> Vec<f64> {
    let members: Vec<usize> = (0..m.labels().len()).filter(|&i| m.labels()[i] == class).collect();
    let dist: Vec<f64> = members.iter().map(|&i| d2(x, m.points().row(i))).collect();
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    let q = m.q();
    let lo = q.saturating_sub(kappa).max(1);
    let hi = (q + kappa).min(members.len());
    let (d_lo, d_hi) = (dist[order[lo - 1]], dist[order[hi - 1]]);
    let inside: Vec<bool> = (0..members.len())
        .map(|p| {
            let rank = order.iter().position(|&o| o == p).unwrap() + 1;
            (lo..=hi).contains(&rank) || dist[p] == d_lo || dist[p] == d_hi
        })
        .collect();
    let count = inside.iter().filter(|&&b| b).count() as f64;
    inside.iter().map(|&b| if b { 1.0 / count } else { 0.0 }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svm_relevance_matches_brute_force(
        seed in any::<u64>(),
        n in 2usize..50,
        d in 1usize..10,
        gamma in prop::sample::select(vec![0.1, 1.0, 10.0]),
        bias in prop::sample::select(vec![-0.5, 0.0, 0.5]),
        eta in prop::sample::select(vec![0.0, 0.3, 0.6, 0.7, 1.0]),
        beta_scale in 0.2f64..3.0,
    ) {
        let mut r = rng(seed);
        let m = random_svm(&mut r, n, d, gamma, bias);
        let net = neuralize_svm(&m);
        let x = random_vec(&mut r, d, 1.2);
        let beta = gamma * beta_scale;
        let e = explain(&net, &x, &LrpHyperparams::svm(eta, beta)).unwrap();

        let (p_pos, p_neg) = svm_probabilities(&m, &x, beta);
        prop_assert!(rel_dev(&e.probabilities.positive, &p_pos, 1.0) < 1e-12);
        prop_assert!(rel_dev(&e.probabilities.negative, &p_neg, 1.0) < 1e-12);

        let (pos, neg) = pools(m.labels(), m.bias());
        let oracle = double_sum(m.support_vectors(), &pos, &neg, &p_pos, &p_neg, &x, eta);
        prop_assert!(rel_dev(&e.relevance, &oracle, 1e-12) < 1e-9,
            "{:?} vs {:?}", e.relevance, oracle);
    }

    #[test]
    fn knn_relevance_matches_brute_force(
        seed in any::<u64>(),
        n in 6usize..50,
        d in 1usize..10,
        k in prop::sample::select(vec![1usize, 3, 5, 7]),
        kappa in 0usize..4,
        eta in prop::sample::select(vec![0.0, 0.3, 0.7, 1.0]),
    ) {
        let mut r = rng(seed);
        let m = random_knn(&mut r, n.max(k + 1), d, k);
        let net = neuralize_knn(&m);
        let x = random_vec(&mut r, d, 1.2);
        let e = explain(&net, &x, &LrpHyperparams::knn(eta, kappa)).unwrap();

        let p_pos = knn_band(&m, &x, Class::Positive, kappa);
        let p_neg = knn_band(&m, &x, Class::Negative, kappa);
        prop_assert_eq!(&e.probabilities.positive, &p_pos);
        prop_assert_eq!(&e.probabilities.negative, &p_neg);

        let (pos, neg) = pools(m.labels(), 0.0);
        let oracle = double_sum(m.points(), &pos, &neg, &p_pos, &p_neg, &x, eta);
        prop_assert!(rel_dev(&e.relevance, &oracle, 1e-12) < 1e-9);
    }

    #[test]
    fn convex_in_eta(
        seed in any::<u64>(),
        eta in 0.0f64..=1.0,
        bias in prop::sample::select(vec![-0.5, 0.0, 0.5]),
    ) {
        let mut r = rng(seed);
        let m = random_svm(&mut r, 15, 4, 1.0, bias);
        let net = neuralize_svm(&m);
        let x = random_vec(&mut r, 4, 1.0);
        let p = LrpHyperparams::svm(eta, 1.0);
        let e = explain(&net, &x, &p).unwrap().relevance;
        let e0 = explain(&net, &x, &p.with_eta(0.0)).unwrap().relevance;
        let e1 = explain(&net, &x, &p.with_eta(1.0)).unwrap().relevance;
        for k in 0..4 {
            prop_assert!((e[k] - ((1.0 - eta) * e0[k] + eta * e1[k])).abs() <= 1e-12);
        }
    }

    #[test]
    fn pooling_weights_conserve(
        seed in any::<u64>(),
        beta in 0.01f64..100.0,
        kappa in 0usize..5,
        bias in prop::sample::select(vec![-0.5, 0.0, 0.5]),
    ) {
        let mut r = rng(seed);
        let m = random_svm(&mut r, 20, 3, 10.0, bias);
        let net = neuralize_svm(&m);
        let x = random_vec(&mut r, 3, 1.5);
        let p = pooling_probabilities(&net, &net.forward(&x).unwrap(), &LrpHyperparams::svm(0.5, beta)).unwrap();
        prop_assert!((p.positive.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!((p.negative.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(p.positive.iter().chain(&p.negative).all(|&v| v >= 0.0));

        let k = random_knn(&mut r, 20, 3, 5);
        let net = neuralize_knn(&k);
        let p = pooling_probabilities(&net, &net.forward(&x).unwrap(), &LrpHyperparams::knn(0.5, kappa)).unwrap();
        prop_assert!((p.positive.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!((p.negative.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eta_zero_at_beta_gamma_is_gradient_times_input(
        seed in any::<u64>(),
        gamma in prop::sample::select(vec![0.1, 1.0, 10.0]),
    ) {
        let mut r = rng(seed);
        let m = random_svm(&mut r, 12, 3, gamma, 0.0);
        let net = neuralize_svm(&m);
        let x = random_vec(&mut r, 3, 1.0);
        let lrp = explain(&net, &x, &LrpHyperparams::svm(0.0, gamma)).unwrap().relevance;
        let gi = gradient_x_input(&net, &x).unwrap();
        prop_assert!(rel_dev(&lrp, &gi, 1e-12) < 1e-9);
    }

    #[test]
    fn translation_covariant_at_eta_one(
        seed in any::<u64>(),
        bias in prop::sample::select(vec![-0.5, 0.0, 0.5]),
    ) {
        let mut r = rng(seed);
        let m = random_svm(&mut r, 10, 3, 1.0, bias);
        let x = random_vec(&mut r, 3, 1.0);
        let delta = random_vec(&mut r, 3, 2.0);
        let shifted_pts = m.support_vectors().map_rows(|u| u.iter().zip(&delta).map(|(a, b)| a + b).collect()).unwrap();
        let shifted = SvmModel::new(shifted_pts, m.dual_coeffs().to_vec(), m.labels().to_vec(), m.gamma(), m.bias()).unwrap();
        let xs: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let p = LrpHyperparams::svm(1.0, 1.0);
        let e = explain(&neuralize_svm(&m), &x, &p).unwrap().relevance;
        let es = explain(&neuralize_svm(&shifted), &xs, &p).unwrap().relevance;
        prop_assert!(rel_dev(&es, &e, 1e-6) < 1e-9);
    }

    #[test]
    fn nearest_pair_decides_knn_relevance(seed in any::<u64>(), eta in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let m = random_knn(&mut r, 14, 3, 1);
        let x = random_vec(&mut r, 3, 1.0);
        let p = LrpHyperparams::knn(eta, 0);
        let e = explain(&neuralize_knn(&m), &x, &p).unwrap();
        let (pos, neg) = pools(m.labels(), 0.0);
        let chosen: Vec<usize> = pos.iter().zip(&e.probabilities.positive)
            .chain(neg.iter().zip(&e.probabilities.negative))
            .filter(|(_, &w)| w > 0.0)
            .map(|(u, _)| u.unwrap())
            .collect();
        prop_assert_eq!(chosen.len(), 2);
        // push every other point further from x
        let moved = m.points().map_rows(|u| u.to_vec()).unwrap();
        let mut moved = moved;
        for i in 0..moved.n_rows() {
            if !chosen.contains(&i) {
                let step = r.gen_range(0.1..1.0);
                let row = moved.row_mut(i);
                for k in 0..3 {
                    row[k] += step * (row[k] - x[k]);
                }
            }
        }
        let m2 = KnnModel::new(moved, m.labels().to_vec(), 1).unwrap();
        let e2 = explain(&neuralize_knn(&m2), &x, &p).unwrap();
        prop_assert_eq!(e.relevance, e2.relevance);
    }
}

use rand::Rng;

#[test]
fn stiff_pooling_approaches_argmax() {
    let mut r = rng(3);
    for _ in 0..50 {
        let m = random_svm(&mut r, 12, 3, 1.0, 0.0);
        let net = neuralize_svm(&m);
        let x = random_vec(&mut r, 3, 1.0);
        let t = net.forward(&x).unwrap();
        let p = pooling_probabilities(&net, &t, &LrpHyperparams::svm(0.0, 1e6)).unwrap();
        let top = t
            .positive_scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(p.positive[top] > 1.0 - 1e-6);
        let bottom = t
            .pooled
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(p.negative[bottom] > 1.0 - 1e-6);
    }
}

#[test]
fn concentrated_pair_gives_its_own_expansion() {
    // far-apart clusters make one pair dominate at high beta
    let m = SvmModel::new(
        Points::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5], vec![-1.0, -1.0], vec![4.0, 4.0]]).unwrap(),
        vec![1.0, 1.0, 1.0, 1.0],
        vec![Class::Positive, Class::Positive, Class::Negative, Class::Negative],
        1.0,
        0.0,
    )
    .unwrap();
    let net = neuralize_svm(&m);
    let x = [0.5, 0.8];
    let e = explain(&net, &x, &LrpHyperparams::svm(0.4, 1e9)).unwrap();
    let (u, v) = ([1.0, 2.0], [-1.0, -1.0]);
    for k in 0..2 {
        let w = 2.0 * (u[k] - v[k]);
        let mid = 0.5 * (u[k] + v[k]);
        assert!((e.relevance[k] - (x[k] - 0.4 * mid) * w).abs() < 1e-12);
    }
}
