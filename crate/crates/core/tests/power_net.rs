mod common;

use common::{data_file, sym_eigs_ascending};
use nalgebra::DMatrix;
use robsparse::matops::{care_residual, solve_care, spectral_abscissa, SymMatrix};
use robsparse::power::{laplacian_from_kron, link_uncertainty, lqr_baseline, swing_model, PowerNetwork};

fn nets() -> Vec<PowerNetwork> {
    ["synthetic3.json", "new_england_10gen_demo.json"]
        .iter()
        .map(|f| PowerNetwork::load(&data_file(f)).unwrap())
        .collect()
}

#[test]
fn laplacian_is_psd_with_zero_row_sums() {
    for net in nets() {
        let l = laplacian_from_kron(&net.b_kron).unwrap();
        for i in 0..net.n_gen {
            assert!(l.row(i).sum().abs() <= 1e-12);
        }
        assert_eq!(l, l.transpose());
        assert!(sym_eigs_ascending(&l)[0] >= -1e-12);
    }
}

#[test]
fn link_uncertainty_touches_only_the_pair() {
    for net in nets() {
        let sys = swing_model(&net).unwrap();
        let g = net.n_gen;
        for (i1, i2) in net.links() {
            let u = link_uncertainty(&net, i1, i2, 0.2).unwrap();
            let de = &u.d * &u.e_a;
            let nz: Vec<(usize, usize)> = (0..2 * g)
                .flat_map(|r| (0..2 * g).map(move |c| (r, c)))
                .filter(|&(r, c)| de[(r, c)] != 0.0)
                .collect();
            let mut want = vec![(g + i1, g + i1), (g + i1, g + i2), (g + i2, g + i1), (g + i2, g + i2)];
            want.sort();
            assert_eq!(nz, want);
            // the perturbation moves both rows of the pair in opposite directions
            assert!((de[(g + i1, g + i1)] * net.inertia[i1] + 1.0).abs() < 1e-15);
            assert!((de[(g + i2, g + i2)] * net.inertia[i2] + 1.0).abs() < 1e-15);
            assert!(u.apply(&sys).unwrap().check_structure().is_ok());
        }
    }
}

#[test]
fn lqr_residual_and_stability() {
    for net in nets() {
        let sys = swing_model(&net).unwrap();
        let n = 2 * net.n_gen;
        let q = SymMatrix::identity(n);
        let r = SymMatrix::new(DMatrix::identity(net.n_gen, net.n_gen) * 10.0).unwrap();
        let p = solve_care(&sys.a, &sys.b1, &q, &r).unwrap();
        assert!(care_residual(&sys.a, &sys.b1, &q, &r, &p).unwrap().norm() <= 1e-8);
        let k = lqr_baseline(&sys, &q, &r).unwrap();
        assert!(spectral_abscissa(&(&sys.a + &sys.b1 * &k)) < 0.0);
    }
}

#[test]
fn lqr_is_equivariant_under_generator_relabeling() {
    let net = PowerNetwork::load(&data_file("synthetic3.json")).unwrap();
    let perm = [2usize, 0, 1];
    let g = net.n_gen;
    let pb = DMatrix::from_fn(g, g, |i, j| net.b_kron[(perm[i], perm[j])]);
    let permuted = PowerNetwork::new(
        perm.iter().map(|&i| net.inertia[i]).collect(),
        perm.iter().map(|&i| net.damping[i]).collect(),
        pb,
    )
    .unwrap();
    let gains: Vec<DMatrix<f64>> = [&net, &permuted]
        .iter()
        .map(|n| {
            let sys = swing_model(n).unwrap();
            let r = SymMatrix::new(DMatrix::identity(g, g) * 10.0).unwrap();
            lqr_baseline(&sys, &SymMatrix::identity(2 * g), &r).unwrap()
        })
        .collect();
    let state = |i: usize| if i < g { perm[i] } else { g + perm[i - g] };
    for i in 0..g {
        for j in 0..2 * g {
            assert!((gains[1][(i, j)] - gains[0][(perm[i], state(j))]).abs() <= 1e-9);
        }
    }
}

#[test]
fn network_json_round_trip() {
    for net in nets() {
        let back = PowerNetwork::from_json_str(&net.to_json_string()).unwrap();
        assert_eq!(back, net);
    }
    let bad = r#"{"n_gen":2,"inertia":[1,1],"damping":[1,1],"b_kron":[[0,1],[2,0]]}"#;
    assert!(PowerNetwork::from_json_str(bad).is_err());
}
