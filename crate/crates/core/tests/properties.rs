mod common;

use common::{random_feasible_y, random_matrix, singular_values, sym_eigs_ascending};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robsparse::analysis::draw_delta;
use robsparse::matops::{psd_project, SymMatrix};
use robsparse::sparsifier::{stopping_epsilon, truncate, truncate_in, update_weights, y_step};
use robsparse::system::{StructureSet, UncertainLti};

fn psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> DMatrix<f64> {
    let g = random_matrix(rng, n, rank);
    &g * g.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn y_step_attains_tail_and_beats_feasible_y(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let order = 6 * n + m;
        let mm = psd(&mut rng, order, order);
        let y = y_step(&SymMatrix::new(mm.clone()).unwrap(), n, m).unwrap();
        let val = y.as_matrix().component_mul(&mm).sum();
        let tail: f64 = sym_eigs_ascending(&mm).iter().take(4 * n + m).sum();
        prop_assert!((val - tail).abs() <= 1e-9 * mm.norm().max(1.0));
        let eig = sym_eigs_ascending(y.as_matrix());
        prop_assert!(eig[0] > -1e-12 && eig[order - 1] < 1.0 + 1e-12);
        prop_assert!((y.trace() - (4 * n + m) as f64).abs() < 1e-10);
        for _ in 0..8 {
            let yf = random_feasible_y(&mut rng, order, 4 * n + m);
            prop_assert!(val <= yf.component_mul(&mm).sum() + 1e-9 * mm.norm());
        }
    }

    #[test]
    fn weights_are_reciprocal(vals in prop::collection::vec(-5.0f64..5.0, 6), xi in 1e-8f64..1e-2) {
        let k = DMatrix::from_row_slice(2, 3, &vals);
        let w = update_weights(&k, xi);
        for (wi, ki) in w.iter().zip(k.iter()) {
            prop_assert!(*wi > 0.0 && *wi <= 1.0 / xi);
            prop_assert!((wi * (ki.abs() + xi) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_zeroes_only_small(vals in prop::collection::vec(-1e-3f64..1e-3, 12), thr in 1e-6f64..1e-3) {
        let k = DMatrix::from_row_slice(3, 4, &vals);
        let t = truncate(&k, thr);
        for (a, b) in k.iter().zip(t.iter()) {
            if a.abs() < thr { prop_assert_eq!(*b, 0.0); } else { prop_assert_eq!(*b, *a); }
        }
        prop_assert_eq!(truncate(&t, thr), t.clone());
        let mut lower = DMatrix::from_element(3, 4, f64::NEG_INFINITY);
        lower[(0, 0)] = -2e-3;
        lower[(1, 1)] = 1e-7;
        let s = StructureSet::new(DMatrix::from_element(3, 4, true), lower, DMatrix::from_element(3, 4, f64::INFINITY)).unwrap();
        let (ti, skipped) = truncate_in(&k, thr, &s);
        for &(i, j) in &skipped {
            prop_assert!(!s.admits_zero(i, j));
            prop_assert_eq!(ti[(i, j)], k[(i, j)]);
        }
    }

    #[test]
    fn stopping_ratio_is_scale_free(vals in prop::collection::vec(-3.0f64..3.0, 6), s in 0.1f64..10.0) {
        let a = DMatrix::from_row_slice(2, 3, &vals);
        prop_assume!(a.norm() > 1e-6);
        let b = &a * 1.1;
        let e1 = stopping_epsilon(&b, &a);
        let e2 = stopping_epsilon(&(&b * s), &(&a * s));
        prop_assert!((e1 - e2).abs() <= 1e-12 * e1.max(1.0));
        prop_assert_eq!(stopping_epsilon(&a, &a), 0.0);
    }

    #[test]
    fn delta_respects_norm_bound(seed in any::<u64>(), i in 1usize..4, j in 1usize..4, rho in 0.0f64..3.0, boundary in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = draw_delta(&mut rng, i, j, rho, boundary);
        prop_assert_eq!(d.shape(), (i, j));
        let smax = singular_values(&d).first().copied().unwrap_or(0.0);
        prop_assert!(smax <= rho * (1.0 + 1e-12) + 1e-15);
        if boundary {
            prop_assert!((smax - rho).abs() <= 1e-10 * rho.max(1.0));
        }
    }

    #[test]
    fn psd_projection_is_nearest(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_matrix(&mut rng, n, n);
        let s = SymMatrix::new(&g + g.transpose()).unwrap();
        let p = psd_project(&s);
        prop_assert!(sym_eigs_ascending(p.as_matrix())[0] >= -1e-12);
        prop_assert!((psd_project(&p).as_matrix() - p.as_matrix()).norm() <= 1e-12 * p.as_matrix().norm().max(1.0));
        let dist = (s.as_matrix() - p.as_matrix()).norm();
        for _ in 0..8 {
            let t = psd(&mut rng, n, n);
            prop_assert!(dist <= (s.as_matrix() - t).norm() + 1e-12);
        }
    }

    #[test]
    fn system_json_round_trip(seed in any::<u64>(), n in 1usize..4, m in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = UncertainLti::new(
            random_matrix(&mut rng, n, n),
            random_matrix(&mut rng, n, m),
            random_matrix(&mut rng, n, 1),
            random_matrix(&mut rng, n, n),
            random_matrix(&mut rng, n, 2),
            random_matrix(&mut rng, 2, n),
            random_matrix(&mut rng, 2, m),
            0.3,
        ).unwrap();
        let back = UncertainLti::from_json_str(&sys.to_json_string()).unwrap();
        prop_assert_eq!(back, sys);
    }
}
