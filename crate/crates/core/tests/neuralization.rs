mod common;

use common::*;
use distlrp::model::{Class, KnnModel, SvmModel};
use distlrp::neuralize::{neuralize_knn, neuralize_svm, sign_equivalence_check, SIGN_DEAD_ZONE};
use distlrp::{Model, Points};
use proptest::prelude::*;

/// `f(x) = Σ y α exp(−γ‖x−u‖²) + θ`, summed directly.
fn svm_oracle(m: &SvmModel, x: &[f64]) -> f64 {
    let mut f = m.bias();
    for (l, u) in m.support_vectors().rows().enumerate() {
        let d2: f64 = x.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum();
        f += m.labels()[l].sign() * m.dual_coeffs()[l] * (-m.gamma() * d2).exp();
    }
    f
}

/// `g = γ⁻¹ log((P + θ⁺) / (N + θ⁻))` with `P`, `N` the class-wise kernel sums.
fn svm_net_oracle(m: &SvmModel, x: &[f64]) -> f64 {
    let (mut pos, mut neg) = (m.bias().max(0.0), (-m.bias()).max(0.0));
    for (l, u) in m.support_vectors().rows().enumerate() {
        let d2: f64 = x.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum();
        let t = m.dual_coeffs()[l] * (-m.gamma() * d2).exp();
        match m.labels()[l] {
            Class::Positive => pos += t,
            Class::Negative => neg += t,
        }
    }
    (pos / neg).ln() / m.gamma()
}

/// `k`-nearest vote with ties to the lower index, by full sort.
fn knn_oracle(m: &KnnModel, x: &[f64]) -> f64 {
    let mut idx: Vec<(f64, usize)> = m
        .points()
        .rows()
        .enumerate()
        .map(|(i, u)| (x.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    idx[..m.k()].iter().map(|&(_, i)| m.labels()[i].sign()).sum()
}

/// `q`-th smallest over negatives of the `q`-th largest over positives of
/// `z_ij = ‖x−u_j‖² − ‖x−u_i‖²`, from the full pair table.
fn knn_net_oracle(m: &KnnModel, x: &[f64]) -> f64 {
    let q = m.q();
    let d2 = |u: &[f64]| -> f64 { x.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum() };
    let pos: Vec<&[f64]> = (0..m.labels().len())
        .filter(|&i| m.labels()[i] == Class::Positive)
        .map(|i| m.points().row(i))
        .collect();
    let mut per_j: Vec<f64> = (0..m.labels().len())
        .filter(|&j| m.labels()[j] == Class::Negative)
        .map(|j| {
            let uj = m.points().row(j);
            let mut z: Vec<f64> = pos.iter().map(|ui| d2(uj) - d2(ui)).collect();
            z.sort_by(|a, b| b.total_cmp(a));
            z[q - 1]
        })
        .collect();
    per_j.sort_by(f64::total_cmp);
    per_j[q - 1]
}

#[test]
fn decision_functions_match_direct_sums() {
    let mut r = rng(1);
    for _ in 0..50 {
        let m = random_svm(&mut r, 9, 3, 1.0, 0.3);
        let x = random_vec(&mut r, 3, 1.5);
        let f = m.decision(&x).unwrap();
        assert!((f - svm_oracle(&m, &x)).abs() < 1e-12 * (1.0 + f.abs()));
        let k = random_knn(&mut r, 11, 2, 5);
        let x = random_vec(&mut r, 2, 1.5);
        assert_eq!(k.decision(&x).unwrap(), knn_oracle(&k, &x));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smooth_net_matches_log_ratio(
        seed in any::<u64>(),
        n in 2usize..20,
        d in 1usize..6,
        gamma in prop::sample::select(vec![0.1, 1.0, 10.0]),
        bias in prop::sample::select(vec![-0.5, 0.0, 0.5]),
    ) {
        let mut r = rng(seed);
        let m = random_svm(&mut r, n, d, gamma, bias);
        let net = neuralize_svm(&m);
        for _ in 0..20 {
            let x = random_vec(&mut r, d, 1.2);
            let g = net.output(&x).unwrap();
            let oracle = svm_net_oracle(&m, &x);
            prop_assert!((g - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()), "{g} vs {oracle}");
        }
    }

    #[test]
    fn ranked_net_matches_pair_table(
        seed in any::<u64>(),
        n in 6usize..25,
        d in 1usize..5,
        k in prop::sample::select(vec![1usize, 3, 5]),
    ) {
        let mut r = rng(seed);
        let m = random_knn(&mut r, n, d, k);
        let net = neuralize_knn(&m);
        for _ in 0..20 {
            let x = random_vec(&mut r, d, 1.5);
            let g = net.output(&x).unwrap();
            let oracle = knn_net_oracle(&m, &x);
            prop_assert!((g - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()));
        }
    }

    #[test]
    fn signs_agree_for_svms(
        seed in any::<u64>(),
        n in 2usize..30,
        d in 1usize..6,
        gamma in prop::sample::select(vec![0.1, 1.0, 10.0]),
        bias in prop::sample::select(vec![-0.5, 0.0, 0.5]),
    ) {
        let mut r = rng(seed);
        let m = random_svm(&mut r, n, d, gamma, bias);
        let net = neuralize_svm(&m);
        let probes = random_points(&mut r, 50, d, 1.5);
        let report = sign_equivalence_check(&Model::Svm(m), &net, &probes).unwrap();
        prop_assert_eq!(report.mismatches, 0);
    }

    #[test]
    fn signs_agree_for_knn(
        seed in any::<u64>(),
        n in 6usize..30,
        d in 1usize..5,
        k in prop::sample::select(vec![1usize, 3, 5]),
    ) {
        let mut r = rng(seed);
        let m = random_knn(&mut r, n, d, k);
        let net = neuralize_knn(&m);
        let probes = random_points(&mut r, 50, d, 1.5);
        let report = sign_equivalence_check(&Model::Knn(m), &net, &probes).unwrap();
        prop_assert_eq!(report.mismatches, 0);
        prop_assert_eq!(report.dead_zone, 0);
    }
}

#[test]
fn grid_points_with_exact_ties_keep_sign() {
    // lattice data makes equal distances common
    let rows: Vec<Vec<f64>> = (0..16).map(|i| vec![(i % 4) as f64, (i / 4) as f64]).collect();
    let labels = (0..16)
        .map(|i| if (i % 4 + i / 4) % 2 == 0 { Class::Positive } else { Class::Negative })
        .collect();
    let m = KnnModel::new(Points::from_rows(&rows).unwrap(), labels, 3).unwrap();
    let net = neuralize_knn(&m);
    let probes: Vec<Vec<f64>> = (0..49)
        .map(|i| vec![(i % 7) as f64 * 0.5, (i / 7) as f64 * 0.5])
        .collect();
    let model = Model::Knn(m);
    let probes = Points::from_rows(&probes).unwrap();
    let report = sign_equivalence_check(&model, &net, &probes).unwrap();
    let mut zero = 0;
    for x in probes.rows() {
        let (f, g) = (model.decision(x).unwrap(), net.output(x).unwrap());
        if g == 0.0 {
            zero += 1;
        } else {
            assert_eq!(f.signum(), g.signum(), "{x:?}");
        }
    }
    // exact ties put the probe on the boundary of the network, g = 0
    assert_eq!(report.mismatches, zero);
}

#[test]
fn dead_zone_only_excludes_near_boundary_probes() {
    let m = SvmModel::new(
        Points::from_rows(&[vec![1.0], vec![-1.0]]).unwrap(),
        vec![1.0, 1.0],
        vec![Class::Positive, Class::Negative],
        1.0,
        0.0,
    )
    .unwrap();
    let net = neuralize_svm(&m);
    let probes = Points::from_rows(&[vec![0.0], vec![1e-12], vec![1e-3]]).unwrap();
    let report = sign_equivalence_check(&Model::Svm(m), &net, &probes).unwrap();
    assert_eq!(report.dead_zone, 2);
    assert_eq!(report.mismatches, 0);
    assert!(SIGN_DEAD_ZONE <= 1e-9);
}
