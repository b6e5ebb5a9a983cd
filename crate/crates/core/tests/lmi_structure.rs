mod common;

use common::{random_matrix, random_spd, singular_values};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robsparse::lmi::{assemble_z_program, consistent_m2, rank_n_completion, LmiInstance};
use robsparse::matops::SymMatrix;
use robsparse::sdp::{SolverSettings, Workspace};
use robsparse::sparsifier::y_step;
use robsparse::system::{closed_loop_data, StructureSet, UncertainLti};

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let s = singular_values(m);
    s.iter().filter(|&&v| v > 1e-8 * s[0]).count()
}

#[test]
fn completion_has_rank_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=4);
        let u = random_spd(&mut rng, n);
        let y = random_matrix(&mut rng, m, n);
        let full = rank_n_completion(&u, &y).unwrap();
        assert_eq!(numerical_rank(&full), n);

        // a symmetric perturbation of any one free block breaks the rank
        let blocks = [(0, 0, n, n), (n, n, m, m), (n + m, n + m, n, n), (0, n, n, m)];
        for &(r, c, h, w) in &blocks {
            let mut p = full.clone();
            let e = random_matrix(&mut rng, h, w) * 1e-2;
            let mut blk = p.view((r, c), (h, w)).clone_owned() + &e;
            if r == c {
                blk = (&blk + blk.transpose()) * 0.5;
            }
            p.view_mut((r, c), (h, w)).copy_from(&blk);
            if r != c {
                p.view_mut((c, r), (w, h)).copy_from(&blk.transpose());
            }
            assert!(numerical_rank(&p) > n, "perturbing block at ({r},{c}) kept rank {n}");
        }
    }
}

fn small_plant(rng: &mut ChaCha8Rng, n: usize, m: usize) -> UncertainLti {
    let a = common::random_stable(rng, n, 0.5);
    UncertainLti::new(
        a,
        random_matrix(rng, n, m),
        random_matrix(rng, n, 1),
        DMatrix::identity(n, n),
        random_matrix(rng, n, 1),
        random_matrix(rng, 1, n),
        DMatrix::zeros(1, m),
        0.1,
    )
    .unwrap()
}

#[test]
fn m2_rank_tracks_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..40 {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=2);
        let sys = small_plant(&mut rng, n, m);
        let data = closed_loop_data(&sys, &DMatrix::zeros(m, n)).unwrap();
        let nn = data.big_n();
        let k = random_matrix(&mut rng, m, n);
        let x1 = random_spd(&mut rng, nn);
        let x2 = random_spd(&mut rng, nn);
        let kc = (&k * &data.c_k).transpose();
        let y1 = &x1 * &kc;
        let y2 = &x2 * &kc;
        let m2 = consistent_m2(&x1, &y1, &x2, &y2, &k, &data.c_k).unwrap();
        assert_eq!(m2.nrows(), 6 * n + m);
        assert_eq!(numerical_rank(&m2), nn);

        let mut y1p = y1.clone();
        y1p[(0, 0)] += 1e-2;
        let off = consistent_m2(&x1, &y1p, &x2, &y2, &k, &data.c_k).unwrap();
        assert!(numerical_rank(&off) > nn);
    }
}

#[test]
fn z_program_bookkeeping() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sys = small_plant(&mut rng, 6, 3);
    let k_hat = random_matrix(&mut rng, 3, 6) * 0.1;
    let data = closed_loop_data(&sys, &k_hat).unwrap();
    let s = StructureSet::full(3, 6);
    let zp = assemble_z_program(&LmiInstance {
        data: &data,
        structure: &s,
        lambda1: 0.5,
        lambda2: 0.1,
        nu: 100.0,
        delta_strict: 1e-7,
    })
    .unwrap();
    assert_eq!(zp.m2.nrows(), 39);
    assert!(zp.m2.is_symmetric());
    let names: Vec<&str> = zp.prog.constraints().iter().map(|c| c.name.as_str()).collect();
    for want in ["h2_block", "hinf_block", "M2_psd", "l1_epigraph", "h2_trace", "X1_positive", "X2_positive"] {
        assert!(names.contains(&want), "missing {want}");
    }
    zp.prog.validate().unwrap();
}

/// Nominal scalar plant with a light sparsity weight: the gain stays away
/// from zero and the ℓ1 epigraph is tight at the optimum.
#[test]
fn z_step_l1_model_is_exact_and_y_step_matches_eigs() {
    let sys = UncertainLti::nominal(
        DMatrix::from_element(1, 1, -1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
    )
    .unwrap();
    let k_hat = DMatrix::from_element(1, 1, -0.5);
    let data = closed_loop_data(&sys, &k_hat).unwrap();
    let s = StructureSet::full(1, 1);
    let zp = assemble_z_program(&LmiInstance {
        data: &data,
        structure: &s,
        lambda1: 0.5,
        lambda2: 1e-3,
        nu: 1.0,
        delta_strict: 1e-7,
    })
    .unwrap();
    let w = DMatrix::from_element(1, 1, 2.0);
    let y = DMatrix::identity(7, 7);
    let mut ws = Workspace::new(&zp.prog, SolverSettings::default()).unwrap();
    let sol = ws.solve(&zp.objective(&y, &w), None).unwrap();
    let z = zp.extract(&sol, &w);
    let direct: f64 = z.k.iter().zip(w.iter()).map(|(k, w)| w * k.abs()).sum();
    assert!(z.k[(0, 0)].abs() > 1e-2, "gain collapsed to {}", z.k[(0, 0)]);
    assert!((z.l1_model - direct).abs() <= 1e-5 * (1.0 + direct), "{} vs {direct}", z.l1_model);
    assert!(common::sym_eigs_ascending(&z.m2)[0] > -1e-6);

    let ys = y_step(&SymMatrix::new(z.m2.clone()).unwrap(), 1, 1).unwrap();
    let tail: f64 = common::sym_eigs_ascending(&z.m2).iter().take(5).sum();
    assert!(((ys.as_matrix().component_mul(&z.m2)).sum() - tail).abs() <= 1e-9 * (1.0 + z.m2.norm()));
}
