//! Independent oracles and random instance generators shared by the
//! integration tests. Nothing here calls the solvers under test.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn data_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

/// Max real part of the eigenvalues, via nalgebra's general eigen solver.
pub fn abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Dense random matrix with entries of size `1/√n`, shifted so that the
/// spectral abscissa is `−margin`.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> DMatrix<f64> {
    let s = 1.0 / (n as f64).sqrt();
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-s..s));
    let shift = abscissa(&a) + margin;
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    a
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = random_matrix(rng, n, n);
    &g * g.transpose() + DMatrix::identity(n, n) * 0.1
}

/// Solves `A X + X Aᵀ + Q = 0` as `(I ⊗ A + A ⊗ I) vec X = −vec Q`.
pub fn kron_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let big = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let sol = big.lu().solve(&rhs).expect("nonsingular Kronecker system");
    DMatrix::from_column_slice(n, n, sol.as_slice())
}

/// `√Tr(C X Cᵀ)` from the Kronecker Gramian.
pub fn h2_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    let x = kron_lyapunov(a, &(b * b.transpose()));
    (c * x * c.transpose()).trace().max(0.0).sqrt()
}

/// `σ_max(C (jωI − A)⁻¹ B)` by a direct complex solve.
pub fn sigma_max(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, w: f64) -> f64 {
    let n = a.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| Complex64::new(-a[(i, j)], if i == j { w } else { 0.0 }));
    let x = m.lu().solve(&b.map(|v| Complex64::new(v, 0.0))).expect("jω not an eigenvalue");
    let g = c.map(|v| Complex64::new(v, 0.0)) * x;
    g.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Peak of `σ_max` over a log grid, refined by golden-section search
/// around the best few grid points.
pub fn hinf_grid_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    let scale = a.complex_eigenvalues().iter().map(|z| z.norm()).fold(1.0, f64::max);
    let pts = 4000;
    let lo = 1e-4f64;
    let hi = 1e3 * scale;
    let grid: Vec<f64> = std::iter::once(0.0)
        .chain((0..pts).map(|k| lo * (hi / lo).powf(k as f64 / (pts - 1) as f64)))
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&w| sigma_max(a, b, c, w)).collect();
    let mut best = vals.iter().copied().fold(0.0, f64::max);
    let mut idx: Vec<usize> = (0..grid.len()).collect();
    idx.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]));
    for &i in idx.iter().take(8) {
        let (mut l, mut r) = (grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)]);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let m1 = r - phi * (r - l);
            let m2 = l + phi * (r - l);
            if sigma_max(a, b, c, m1) > sigma_max(a, b, c, m2) {
                r = m2;
            } else {
                l = m1;
            }
        }
        best = best.max(sigma_max(a, b, c, 0.5 * (l + r)));
    }
    best
}

/// Ascending eigenvalues of a symmetric matrix via nalgebra directly.
pub fn sym_eigs_ascending(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Descending singular values.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

/// Random `Y` with `0 ⪯ Y ⪯ I` and `Tr Y = k`, built from a random
/// orthonormal basis and a capped-simplex spectrum.
pub fn random_feasible_y(rng: &mut ChaCha8Rng, order: usize, k: usize) -> DMatrix<f64> {
    let g = random_matrix(rng, order, order);
    let q = g.qr().q();
    let mut s: Vec<f64> = (0..order).map(|_| rng.random_range(0.0..1.0)).collect();
    // rescale into [0,1] with sum k by bisection on a shift
    let target = k as f64;
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let sum = |t: f64, s: &[f64]| s.iter().map(|v| (v + t).clamp(0.0, 1.0)).sum::<f64>();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid, &s) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    for v in &mut s {
        *v = (*v + 0.5 * (lo + hi)).clamp(0.0, 1.0);
    }
    &q * DMatrix::from_diagonal(&DVector::from_vec(s)) * q.transpose()
}

/// Smallest `σ_min([λI − A, B])` over eigenvalues with `Re λ ≥ 0`
/// (`+∞` when `A` is Hurwitz).
pub fn pbh_unstable_margin(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let m = b.ncols();
    let mut best = f64::INFINITY;
    for l in a.complex_eigenvalues().iter().filter(|z| z.re >= 0.0) {
        let mat = DMatrix::from_fn(n, n + m, |i, j| {
            if j < n {
                let d = if i == j { *l } else { Complex64::new(0.0, 0.0) };
                d - Complex64::new(a[(i, j)], 0.0)
            } else {
                Complex64::new(b[(i, j - n)], 0.0)
            }
        });
        let s = mat.singular_values().iter().copied().fold(f64::INFINITY, f64::min);
        best = best.min(s);
    }
    best
}
