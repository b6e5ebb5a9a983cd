use std::path::PathBuf;

use nalgebra::{dmatrix, DMatrix};
use robsparse::matops::{spectral_abscissa, SymMatrix};
use robsparse::power::{link_uncertainty, lqr_baseline, swing_model, PowerNetwork};
use robsparse::sparsifier::{run, RunStatus, SparsifierOptions};
use robsparse::system::{StructureSet, UncertainLti};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

/// Lightly damped oscillator plus a stable mode, full state measured.
fn small_plant(rho: f64) -> UncertainLti {
    UncertainLti::new(
        dmatrix![0.0, 1.0, 0.0; -2.0, -0.2, 0.5; 0.0, 0.0, -1.0],
        dmatrix![0.0, 0.0; 1.0, 0.0; 0.0, 1.0],
        DMatrix::identity(3, 3),
        DMatrix::identity(3, 3),
        dmatrix![0.0; 1.0; 0.0],
        dmatrix![1.0, 0.0, 0.0],
        dmatrix![0.0, 0.0],
        rho,
    )
    .unwrap()
}

fn baseline(sys: &UncertainLti) -> DMatrix<f64> {
    let n = sys.n();
    let m = sys.m();
    lqr_baseline(sys, &SymMatrix::identity(n), &SymMatrix::new(DMatrix::identity(m, m)).unwrap()).unwrap()
}

fn check_run_invariants(sys: &UncertainLti, k_hat: &DMatrix<f64>, opts: &SparsifierOptions, s: &StructureSet) -> robsparse::sparsifier::SparsifierResult {
    let res = run(sys, k_hat, s, opts).unwrap();
    assert_ne!(res.status, RunStatus::Infeasible);
    assert!(!res.history.is_empty() && res.history.len() <= opts.max_outer_iters);
    assert!(res.max_ascent() <= 1e-7, "ascent {:e}", res.max_ascent());
    for v in res.k_final.iter() {
        assert!(*v == 0.0 || v.abs() >= opts.truncation_threshold);
    }
    assert!(s.contains(&res.k_final));
    let cert = res.certificate.as_ref().unwrap();
    assert_eq!(cert.target_rank, 2 * sys.n());
    assert!(res.eps_s > 0.0 && res.eps_y > 0.0);
    let rc = res.recert.as_ref().expect("truncated gain is re-certified");
    let stable = spectral_abscissa(&sys.closed_loop_a(&res.k_final, None)) < 0.0;
    assert_eq!(rc.nominal_stable, stable);
    assert_eq!(rc.metrics.is_some(), stable);
    res
}

#[test]
fn small_plant_descends_and_recertifies() {
    let sys = small_plant(0.1);
    let k_hat = baseline(&sys);
    let opts = SparsifierOptions { max_outer_iters: 12, ..Default::default() };
    let res = check_run_invariants(&sys, &k_hat, &opts, &StructureSet::full(2, 3));
    assert!(res.recert.unwrap().nominal_stable);
}

#[test]
fn forbidden_entries_stay_zero() {
    let sys = small_plant(0.0);
    let k_hat = baseline(&sys);
    let pattern = DMatrix::from_row_slice(2, 3, &[true, true, false, false, true, true]);
    let s = StructureSet::from_pattern(pattern.clone());
    let opts = SparsifierOptions { max_outer_iters: 8, ..Default::default() };
    let res = check_run_invariants(&sys, &k_hat, &opts, &s);
    for (k, allowed) in res.k_final.iter().zip(pattern.iter()) {
        if !allowed {
            assert_eq!(*k, 0.0);
        }
    }
}

#[test]
fn three_generator_short_run() {
    let net = PowerNetwork::load(&data("synthetic3.json")).unwrap();
    let sys = link_uncertainty(&net, 1, 2, 0.2).unwrap().apply(&swing_model(&net).unwrap()).unwrap();
    let k_hat = lqr_baseline(&sys, &SymMatrix::identity(6), &SymMatrix::new(DMatrix::identity(3, 3) * 10.0).unwrap()).unwrap();
    let opts = SparsifierOptions { max_outer_iters: 4, ..Default::default() };
    let res = check_run_invariants(&sys, &k_hat, &opts, &StructureSet::full(3, 6));
    // the first Z-step is taken at Y = I, so the objective must fall afterwards
    let h = &res.history;
    assert!(h.last().unwrap().objective < h[0].objective);
}
