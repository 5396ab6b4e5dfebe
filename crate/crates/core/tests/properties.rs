// SPDX-License-Identifier: MIT OR Apache-2.0

use mlnet_cpd::inference::{confidence_interval, variance_estimate};
use mlnet_cpd::localize::StageOneScores;
use mlnet_cpd::metrics::{coverage, count_error, hausdorff_one_sided, Partition};
use mlnet_cpd::scan::cusum_weights;
use mlnet_cpd::{
    cusum_transform, hpca, refined_scan_profile, seeded_intervals, thpca, HpcaConfig, Matrix, Tensor3, TensorSeries,
    TuckerRanks,
};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..5, 1usize..5, 1usize..4)
}

fn tensor() -> impl Strategy<Value = Tensor3<f64>> {
    dims().prop_flat_map(|d| {
        prop::collection::vec(-1.0f64..1.0, d.0 * d.1 * d.2).prop_map(move |v| Tensor3::from_vec(d, v).unwrap())
    })
}

fn tensor_pair() -> impl Strategy<Value = (Tensor3<f64>, Tensor3<f64>, Tensor3<f64>)> {
    dims().prop_flat_map(|d| {
        let n = d.0 * d.1 * d.2;
        let v = move || prop::collection::vec(-1.0f64..1.0, n).prop_map(move |v| Tensor3::from_vec(d, v).unwrap());
        (v(), v(), v())
    })
}

fn series(max_t: usize) -> impl Strategy<Value = TensorSeries<f64>> {
    (2usize..5, 1usize..3, 4usize..max_t).prop_flat_map(|(n, l, t)| {
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, n * n * l), t).prop_map(move |snaps| {
            TensorSeries::new(snaps.into_iter().map(|v| Tensor3::from_vec((n, n, l), v).unwrap()).collect()).unwrap()
        })
    })
}

fn change_set(horizon: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::btree_set(1..horizon, 0..6).prop_map(|s| s.into_iter().collect())
}

fn tucker_tensor(core: &[f64], f1: &[f64], f2: &[f64], f3: &[f64], dims: (usize, usize, usize)) -> Tensor3<f64> {
    let g = Tensor3::from_vec((2, 2, 2), core.to_vec()).unwrap();
    let m = |v: &[f64], p: usize| Matrix::from_fn(p, 2, |i, j| v[i * 2 + j]);
    g.mode_multiply(&m(f1, dims.0), 1)
        .and_then(|x| x.mode_multiply(&m(f2, dims.1), 2))
        .and_then(|x| x.mode_multiply(&m(f3, dims.2), 3))
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn thpca_error_shrinks_with_perturbation(
        core in prop::collection::vec(-2.0f64..2.0, 8),
        f1 in prop::collection::vec(-1.0f64..1.0, 16),
        f2 in prop::collection::vec(-1.0f64..1.0, 16),
        f3 in prop::collection::vec(-1.0f64..1.0, 12),
        noise in prop::collection::vec(-1.0f64..1.0, 8 * 8 * 6),
    ) {
        let dims = (8, 8, 6);
        let a = tucker_tensor(&core, &f1, &f2, &f3, dims);
        prop_assume!(a.frob_norm() > 1e-2);
        let e = Tensor3::from_vec(dims, noise).unwrap();
        let cfg = HpcaConfig { max_iterations: 20_000, rel_tolerance: 1e-13 };
        let errors: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|&eps| {
                let noisy = a.add(&e.scaled(eps * a.frob_norm() / e.frob_norm())).unwrap();
                let out = thpca(&noisy, TuckerRanks::new(2, 2, 2), f64::INFINITY, f64::INFINITY, &cfg).unwrap();
                out.estimate.sub(&a).unwrap().frob_norm() / a.frob_norm()
            })
            .collect();
        prop_assert!(errors[0] > errors[1] && errors[1] > errors[2], "errors {:?}", errors);
    }
}

proptest! {
    #[test]
    fn matricization_preserves_entries_and_norm(a in tensor(), mode in 1usize..=3) {
        let m = a.matricize(mode).unwrap();
        prop_assert_eq!(m.rows() * m.cols(), a.len());
        let n2: f64 = m.data().iter().map(|x| x * x).sum();
        prop_assert!((n2 - a.frob_norm().powi(2)).abs() <= 1e-12 * (1.0 + n2));
        let back = Tensor3::from_matricized(&m, mode, a.dims()).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn inner_is_symmetric_and_bilinear((x, y, z) in tensor_pair(), c in -3.0f64..3.0) {
        let xy = x.inner(&y).unwrap();
        prop_assert!((xy - y.inner(&x).unwrap()).abs() <= 1e-12);
        let lhs = x.scaled(c).add(&z).unwrap().inner(&y).unwrap();
        let rhs = c * xy + z.inner(&y).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn tucker_projection_never_increases_norm(a in tensor(), seed in any::<u64>()) {
        let (p1, p2, p3) = a.dims();
        let basis = |p: usize, salt: u64| {
            let r = 1 + (seed.wrapping_add(salt) % p as u64) as usize;
            let m = Matrix::from_fn(p, p, |i, j| ((i * 7 + j * 3 + salt as usize) % 5) as f64 - 2.0 + if i == j { 4.0 } else { 0.0 });
            hpca(&m.gram(), r, &HpcaConfig::default()).unwrap().basis
        };
        let proj = a.project_tucker(&basis(p1, 1), &basis(p2, 2), &basis(p3, 3)).unwrap();
        prop_assert!(proj.frob_norm() <= a.frob_norm() * (1.0 + 1e-10) + 1e-12);
    }

    #[test]
    fn hpca_basis_is_orthonormal(n in 2usize..9, r_frac in 0.0f64..1.0, vals in prop::collection::vec(-1.0f64..1.0, 81)) {
        let r = 1 + (r_frac * (n - 1) as f64) as usize;
        let x = Matrix::from_fn(n, n, |i, j| vals[i * 9 + j]);
        let out = hpca(&x.gram(), r, &HpcaConfig::default()).unwrap();
        prop_assert!(out.basis.orthonormality_defect() <= 1e-10);
    }

    #[test]
    fn thpca_respects_thresholds(a in tensor(), t1 in 0.0f64..0.5, t2 in 0.0f64..0.5) {
        let out = thpca(&a, TuckerRanks::full(a.dims()), t1, t2, &HpcaConfig::default()).unwrap();
        prop_assert!(out.estimate.data().iter().all(|&x| -t2 <= x && x <= t1));
    }

    #[test]
    fn thpca_full_rank_is_identity(a in tensor()) {
        let out = thpca(&a, TuckerRanks::full(a.dims()), f64::INFINITY, f64::INFINITY, &HpcaConfig::default()).unwrap();
        let err = out.estimate.sub(&a).unwrap().frob_norm();
        prop_assert!(err <= 1e-9 * (1.0 + a.frob_norm()));
    }

    #[test]
    fn cusum_weights_cancel_on_constants(s in 0usize..50, gap1 in 1usize..50, gap2 in 1usize..50) {
        let (t, e) = (s + gap1, s + gap1 + gap2);
        let w = cusum_weights::<f64>(s, t, e).unwrap();
        let sum: f64 = w.weights.iter().sum();
        prop_assert!(sum.abs() <= 1e-12);
        let sq: f64 = w.weights.iter().map(|x| x * x).sum();
        prop_assert!((sq - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn seeded_family_is_linear_in_horizon(t in 2usize..600) {
        let set = seeded_intervals(t, 1.0).unwrap();
        prop_assert!(set.len() <= 4 * t);
        prop_assert!(set.intervals.iter().all(|i| i.start < i.end && i.end <= t));
    }

    #[test]
    fn refined_profile_is_nonnegative(x in series(14), y_seed in any::<u64>()) {
        let t = x.len();
        let shift = (y_seed % 3) as f64 * 0.1;
        let y = TensorSeries::new(x.snapshots().iter().rev().map(|s| s.map(|v| (v + shift).min(1.0))).collect()).unwrap();
        let b = t / 2;
        let out = refined_scan_profile(&x, &y, 0, b, t, TuckerRanks::full(x.shape()), &HpcaConfig::default()).unwrap();
        prop_assert!(out.profile.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn stage_one_candidates_shrink_with_threshold(x in series(24), taus in (0.0f64..3.0, 0.0f64..3.0)) {
        let y = TensorSeries::new(x.snapshots().iter().map(|s| s.map(|v| 1.0 - v)).collect()).unwrap();
        let scores = StageOneScores::compute(&x, &y, 1.0).unwrap();
        let (lo, hi) = if taus.0 <= taus.1 { taus } else { (taus.1, taus.0) };
        let many = scores.segment(lo);
        let few = scores.segment(hi);
        prop_assert!(few.len() <= many.len());
        let times = many.times();
        prop_assert!(few.times().iter().all(|t| times.contains(t)));
        prop_assert!(times.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(many.candidates.iter().all(|c| c.score > lo));
    }

    #[test]
    fn cusum_of_constant_series_vanishes(a in tensor(), len in 3usize..12, pick in any::<(u16, u16, u16)>()) {
        let x = TensorSeries::new(vec![a; len]).unwrap();
        let mut pts = [pick.0 as usize % (len + 1), pick.1 as usize % (len + 1), pick.2 as usize % (len + 1)];
        pts.sort_unstable();
        prop_assume!(pts[0] < pts[1] && pts[1] < pts[2]);
        let c = cusum_transform(&x, pts[0], pts[1], pts[2]).unwrap();
        prop_assert!(c.frob_norm() <= 1e-10);
    }

    #[test]
    fn coverage_is_a_fraction(t in 2usize..80, a in any::<u64>(), b in any::<u64>()) {
        let pick = |seed: u64| -> Vec<usize> { (1..t).filter(|k| (seed >> (k % 64)) & 1 == 1 && k % 3 == (seed % 3) as usize).collect() };
        let (ca, cb) = (pick(a), pick(b));
        let pa = Partition::from_change_points(&ca, t).unwrap();
        let pb = Partition::from_change_points(&cb, t).unwrap();
        let c = coverage(&pa, &pb).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
        prop_assert_eq!(c == 1.0, ca == cb);
    }

    #[test]
    fn hausdorff_zero_iff_subset(est in change_set(60), truth in change_set(60)) {
        prop_assume!(!est.is_empty() && !truth.is_empty());
        let d = hausdorff_one_sided(&est, &truth);
        let subset = truth.iter().all(|c| est.contains(c));
        prop_assert_eq!(d == 0.0, subset);
    }

    #[test]
    fn metrics_ignore_input_order(est in change_set(60), truth in change_set(60)) {
        let mut rev_est = est.clone();
        rev_est.reverse();
        let mut rev_truth = truth.clone();
        rev_truth.reverse();
        prop_assert_eq!(count_error(&est, &truth), count_error(&rev_est, &rev_truth));
        let (d1, d2) = (hausdorff_one_sided(&est, &truth), hausdorff_one_sided(&rev_est, &rev_truth));
        prop_assert!(d1 == d2);
        let c1 = coverage(&Partition::from_change_points(&truth, 60).unwrap(), &Partition::from_change_points(&est, 60).unwrap()).unwrap();
        let c2 = coverage(&Partition::from_change_points(&rev_truth, 60).unwrap(), &Partition::from_change_points(&rev_est, 60).unwrap()).unwrap();
        prop_assert_eq!(c1, c2);
    }

    #[test]
    fn interval_widens_as_alpha_shrinks(draws in prop::collection::vec(-5.0f64..5.0, 2..60), kappa in 0.1f64..3.0, a1 in 0.01f64..0.99, a2 in 0.01f64..0.99) {
        let (small, large) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let wide = confidence_interval(50, kappa, &draws, small).unwrap();
        let narrow = confidence_interval(50, kappa, &draws, large).unwrap();
        prop_assert!(wide.0 <= narrow.0 + 1e-12 && narrow.1 <= wide.1 + 1e-12);
        prop_assert!(wide.0 <= wide.1);
    }

    #[test]
    fn variance_is_nonnegative_and_zero_on_exact_fit(x in series(10), p_seed in 0.0f64..1.0) {
        let shape = x.shape();
        let p = Tensor3::filled(shape, p_seed);
        let psi = Tensor3::from_fn(shape, |i, j, l| if (i + j + l) % 2 == 0 { 1.0 } else { -1.0 });
        let psi = psi.scaled(1.0 / psi.frob_norm());
        let v = variance_estimate(&x, &psi, 0, x.len(), &p).unwrap();
        prop_assert!(v >= 0.0);
        let exact = TensorSeries::new(vec![p.clone(); x.len()]).unwrap();
        prop_assert_eq!(variance_estimate(&exact, &psi, 0, x.len(), &p).unwrap(), 0.0);
    }
}
