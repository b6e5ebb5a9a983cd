use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robsparse::analysis::{h2_norm, hinf_norm};
use robsparse::lmi::{certify, Certificate};
use robsparse::sdp::SolverSettings;

fn random_stable(rng: &mut ChaCha8Rng, n: usize, p: usize, q: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let s = 1.0 / (n as f64).sqrt();
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-s..s));
    let abs = robsparse::matops::spectral_abscissa(&a);
    let shift = abs + rng.random_range(0.2..1.0);
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let b = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let c = DMatrix::from_fn(q, n, |_, _| rng.random_range(-1.0..1.0));
    (a, b, c)
}

#[test]
fn h2_certificate_is_tight_nominal() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let st = SolverSettings::default();
    for trial in 0..10 {
        let n = 1 + trial % 8;
        let (a, b, c) = random_stable(&mut rng, n, 2, 2);
        let t0 = std::time::Instant::now();
        let cert = certify(&a, &b, &c, &DMatrix::zeros(n, 1), &DMatrix::zeros(1, n), 0.0, Certificate::H2, &st).unwrap();
        let h2 = h2_norm(&a, &b, &c).unwrap();
        eprintln!("n={n} eps={} h2^2={} {:?} {:?}", cert.bound, h2 * h2, cert.status, t0.elapsed());
        assert!((cert.bound - h2 * h2).abs() <= 0.02 * h2 * h2);
    }
}

#[test]
fn hinf_certificate_is_tight_nominal() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let st = SolverSettings::default();
    for trial in 0..10 {
        let n = 1 + trial % 8;
        let (a, b, c) = random_stable(&mut rng, n, 2, 2);
        let t0 = std::time::Instant::now();
        let cert = certify(&a, &b, &c, &DMatrix::zeros(n, 1), &DMatrix::zeros(1, n), 0.0, Certificate::Hinf, &st).unwrap();
        let hi = hinf_norm(&a, &b, &c, 1e-9).unwrap();
        eprintln!("n={n} eps_y={} hinf={} {:?} {:?}", cert.bound, hi, cert.status, t0.elapsed());
        assert!((cert.bound - hi).abs() <= 0.02 * hi);
    }
}
