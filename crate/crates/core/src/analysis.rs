//! System norms, stability, uncertainty sampling and deviation metrics,
//! computed directly from state-space data (no LMIs involved).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::matops::{eigenvalues, solve_lyapunov, solve_sylvester, spectral_abscissa, SymMatrix};
use crate::system::UncertainLti;
use crate::{Error, Result};

pub const CSV_SCHEMA_VERSION: u32 = 1;

/// `√Tr(C X Cᵀ)` with `A X + X Aᵀ + B Bᵀ = 0`.
pub fn h2_norm(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<f64> {
    check_abc(a, b, c)?;
    let x = solve_lyapunov(a, &SymMatrix::symmetrized(b * b.transpose()))?;
    Ok((c * x.as_matrix() * c.transpose()).trace().max(0.0).sqrt())
}

fn check_abc(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() || b.nrows() != a.nrows() || c.ncols() != a.nrows() {
        return Err(Error::Dimension(format!(
            "A {}x{}, B {}x{}, C {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    Ok(())
}

fn ensure_stable(a: &DMatrix<f64>) -> Result<()> {
    if let Some(l) = eigenvalues(a).into_iter().find(|l| l.re >= 0.0) {
        return Err(Error::NotHurwitz { re: l.re, im: l.im });
    }
    Ok(())
}

/// `C (jωI − A)⁻¹ B`, or `None` when `jωI − A` is singular.
pub fn transfer_at(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, w: f64) -> Option<DMatrix<Complex64>> {
    let n = a.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(-a[(i, j)], if i == j { w } else { 0.0 })
    });
    let bc = b.map(|v| Complex64::new(v, 0.0));
    let x = m.lu().solve(&bc)?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    Some(c.map(|v| Complex64::new(v, 0.0)) * x)
}

fn singular_values(g: &DMatrix<Complex64>) -> DVector<f64> {
    if g.nrows() == 0 || g.ncols() == 0 {
        return DVector::zeros(0);
    }
    let mut s = g.clone().singular_values();
    s.as_mut_slice().sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

fn sigma_max_at(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, w: f64) -> f64 {
    match transfer_at(a, b, c, w) {
        Some(g) => singular_values(&g).iter().copied().fold(0.0, f64::max),
        None => f64::INFINITY,
    }
}

/// H∞ norm by bisection on γ with the Hamiltonian imaginary-eigenvalue test.
/// Imaginary eigenvalues are confirmed by evaluating `σ_max(G(jω))`, which
/// also raises the lower bound to attained values.
pub fn hinf_norm(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, tol: f64) -> Result<f64> {
    check_abc(a, b, c)?;
    ensure_stable(a)?;
    let n = a.nrows();
    if n == 0 || b.ncols() == 0 || c.nrows() == 0 {
        return Ok(0.0);
    }
    let tol = tol.max(1e-12);
    let mut lb = 0.0f64;
    let mut probe = vec![0.0];
    for l in eigenvalues(a) {
        probe.push(l.im.abs());
        probe.push(l.norm());
    }
    for k in 0..=40 {
        probe.push(10f64.powf(-4.0 + 0.25 * k as f64));
    }
    for &w in &probe {
        lb = lb.max(sigma_max_at(a, b, c, w));
    }
    if lb == 0.0 {
        return Ok(0.0);
    }
    let bbt = b * b.transpose();
    let ctc = c.transpose() * c;
    let mut ub = f64::INFINITY;
    for _ in 0..200 {
        if ub.is_finite() && ub - lb <= tol * lb {
            break;
        }
        let gamma = if ub.is_finite() { 0.5 * (lb + ub) } else { 2.0 * lb };
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(a);
        h.view_mut((0, n), (n, n)).copy_from(&(&bbt / gamma));
        h.view_mut((n, 0), (n, n)).copy_from(&(-&ctc / gamma));
        h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
        let hn = h.norm().max(1.0);
        let mut ws: Vec<f64> = eigenvalues(&h)
            .into_iter()
            .filter(|l| l.re.abs() <= 1e-7 * hn)
            .map(|l| l.im.abs())
            .collect();
        ws.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut best = 0.0f64;
        for (idx, &w) in ws.iter().enumerate() {
            best = best.max(sigma_max_at(a, b, c, w));
            if idx + 1 < ws.len() {
                best = best.max(sigma_max_at(a, b, c, 0.5 * (w + ws[idx + 1])));
            }
        }
        lb = lb.max(best);
        if best < gamma * (1.0 - 1e-9) {
            ub = gamma;
        }
    }
    Ok(if ub.is_finite() { 0.5 * (lb + ub.max(lb)) } else { lb })
}

/// Stability flag and spectral abscissa.
pub fn is_hurwitz(a: &DMatrix<f64>) -> (bool, f64) {
    let s = spectral_abscissa(a);
    (s < 0.0, s)
}

/// Error system in cascade form: states `[x₁ − x₂; x₂]` with
/// `A = [[A₁, A₁ − A₂], [0, A₂]]`, `B = [0; B₂]`, `C = [C, 0]`.
/// Exactly zero when `A₁ = A₂`.
pub struct DifferenceSystem {
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl DifferenceSystem {
    pub fn new(sys: &UncertainLti, k_hat: &DMatrix<f64>, k: &DMatrix<f64>, delta: Option<&DMatrix<f64>>) -> Self {
        DifferenceSystem {
            a1: sys.closed_loop_a(k, delta),
            a2: sys.closed_loop_a(k_hat, None),
            b2: sys.b2.clone(),
            c: sys.c.clone(),
        }
    }

    pub fn realization(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let n = self.a1.nrows();
        let p = self.b2.ncols();
        let q = self.c.nrows();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        a.view_mut((0, 0), (n, n)).copy_from(&self.a1);
        a.view_mut((0, n), (n, n)).copy_from(&(&self.a1 - &self.a2));
        a.view_mut((n, n), (n, n)).copy_from(&self.a2);
        let mut b = DMatrix::zeros(2 * n, p);
        b.view_mut((n, 0), (n, p)).copy_from(&self.b2);
        let mut c = DMatrix::zeros(q, 2 * n);
        c.view_mut((0, 0), (q, n)).copy_from(&self.c);
        (a, b, c)
    }

    /// H2 norm through block-triangular Gramian solves.
    pub fn h2(&self) -> Result<f64> {
        let f = &self.a1 - &self.a2;
        let x22 = solve_lyapunov(&self.a2, &SymMatrix::symmetrized(&self.b2 * self.b2.transpose()))?;
        ensure_stable(&self.a1)?;
        let x12 = solve_sylvester(&self.a1, &self.a2, &(&f * x22.as_matrix()))?;
        let q11 = &f * x12.transpose() + &x12 * f.transpose();
        let x11 = solve_lyapunov(&self.a1, &SymMatrix::symmetrized(q11))?;
        Ok((&self.c * x11.as_matrix() * self.c.transpose()).trace().max(0.0).sqrt())
    }

    pub fn hinf(&self, tol: f64) -> Result<f64> {
        ensure_stable(&self.a2)?;
        ensure_stable(&self.a1)?;
        if self.a1 == self.a2 {
            return Ok(0.0);
        }
        let (a, b, c) = self.realization();
        hinf_norm(&a, &b, &c, tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationMetrics {
    pub r2: f64,
    pub r_inf: f64,
    pub cardinality_ratio: f64,
    pub h2_dev: f64,
    pub hinf_dev: f64,
    pub h2_ref: f64,
    pub hinf_ref: f64,
}

pub fn nnz(k: &DMatrix<f64>) -> usize {
    k.iter().filter(|v| **v != 0.0).count()
}

/// `‖S − Ŝ‖/‖Ŝ‖` in H2 and H∞ at Δ = 0, plus `‖K‖₀/‖K̂‖₀`.
pub fn deviation_metrics(sys: &UncertainLti, k_hat: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<DeviationMetrics> {
    let a_hat = sys.closed_loop_a(k_hat, None);
    let h2_ref = h2_norm(&a_hat, &sys.b2, &sys.c)?;
    let hinf_ref = hinf_norm(&a_hat, &sys.b2, &sys.c, 1e-6)?;
    let diff = DifferenceSystem::new(sys, k_hat, k, None);
    let h2_dev = diff.h2()?;
    let hinf_dev = diff.hinf(1e-6)?;
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else if num == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(DeviationMetrics {
        r2: ratio(h2_dev, h2_ref),
        r_inf: ratio(hinf_dev, hinf_ref),
        cardinality_ratio: ratio(nnz(k) as f64, nnz(k_hat) as f64),
        h2_dev,
        hinf_dev,
        h2_ref,
        hinf_ref,
    })
}

fn random_orthogonal(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(k, k, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // fix column signs so the distribution is Haar
    let mut q = q;
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Admissible `Δ = ρ U diag(s) Vᵀ` (i×j). Boundary draws use `s = 1`.
pub fn draw_delta(rng: &mut ChaCha8Rng, i: usize, j: usize, rho: f64, boundary: bool) -> DMatrix<f64> {
    let u = random_orthogonal(rng, i);
    let v = random_orthogonal(rng, j);
    let r = i.min(j);
    let unit = Uniform::new_inclusive(0.0, 1.0).expect("valid range");
    let mut s = DMatrix::zeros(i, j);
    for t in 0..r {
        s[(t, t)] = if boundary { 1.0 } else { unit.sample(rng) };
    }
    u * s * v.transpose() * rho
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub samples: usize,
    pub seed: u64,
    pub unstable: usize,
    pub worst_abscissa: f64,
    pub nominal_abscissa: f64,
    /// Worst sampled deviation norms over the stable samples.
    pub worst_h2: f64,
    pub worst_hinf: f64,
}

/// Samples `count` admissible Δ (every other one on the boundary) and reports
/// the worst closed-loop abscissa and deviation norms. `count` must be ≥ 1.
pub fn sample_uncertainty(sys: &UncertainLti, k_hat: &DMatrix<f64>, k: &DMatrix<f64>, count: usize, seed: u64) -> Result<RobustnessReport> {
    if count == 0 {
        return Err(Error::Invalid("sample count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, nominal_abscissa) = is_hurwitz(&sys.closed_loop_a(k, None));
    let mut rep = RobustnessReport {
        samples: count,
        seed,
        unstable: 0,
        worst_abscissa: f64::NEG_INFINITY,
        nominal_abscissa,
        worst_h2: 0.0,
        worst_hinf: 0.0,
    };
    for s in 0..count {
        let delta = draw_delta(&mut rng, sys.i_dim(), sys.j_dim(), sys.rho, s % 2 == 0);
        let a1 = sys.closed_loop_a(k, Some(&delta));
        let (stable, absc) = is_hurwitz(&a1);
        rep.worst_abscissa = rep.worst_abscissa.max(absc);
        if !stable {
            rep.unstable += 1;
            rep.worst_h2 = f64::INFINITY;
            rep.worst_hinf = f64::INFINITY;
            continue;
        }
        let diff = DifferenceSystem::new(sys, k_hat, k, Some(&delta));
        rep.worst_h2 = rep.worst_h2.max(diff.h2()?);
        rep.worst_hinf = rep.worst_hinf.max(diff.hinf(1e-6)?);
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyResponse {
    pub grid: Vec<f64>,
    pub sigma_max: Vec<f64>,
    pub sigma_min: Vec<f64>,
    pub schatten2: Vec<f64>,
    /// Grid points where `jωI − A` was singular (values there are NaN).
    pub singular: Vec<usize>,
}

/// `count` log-spaced frequencies over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count).map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64)).collect()
}

pub fn default_grid() -> Vec<f64> {
    log_grid(1e-2, 1e3, 400)
}

pub fn frequency_response(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, grid: &[f64]) -> Result<FrequencyResponse> {
    check_abc(a, b, c)?;
    if grid.is_empty() || grid.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::Invalid("frequency grid must be nonempty and positive".into()));
    }
    let mut out = FrequencyResponse {
        grid: grid.to_vec(),
        sigma_max: Vec::with_capacity(grid.len()),
        sigma_min: Vec::with_capacity(grid.len()),
        schatten2: Vec::with_capacity(grid.len()),
        singular: Vec::new(),
    };
    for (idx, &w) in grid.iter().enumerate() {
        match transfer_at(a, b, c, w) {
            Some(g) => {
                let s = singular_values(&g);
                out.sigma_max.push(s.iter().copied().fold(0.0, f64::max));
                out.sigma_min.push(if s.is_empty() { 0.0 } else { s[s.len() - 1] });
                out.schatten2.push(s.iter().map(|v| v * v).sum::<f64>().sqrt());
            }
            None => {
                out.singular.push(idx);
                out.sigma_max.push(f64::NAN);
                out.sigma_min.push(f64::NAN);
                out.schatten2.push(f64::NAN);
            }
        }
    }
    Ok(out)
}

impl FrequencyResponse {
    pub fn to_csv(&self) -> String {
        let mut s = format!("# frequency-response v{CSV_SCHEMA_VERSION}: omega_rad_s,sigma_max,sigma_min,schatten2\nomega,sigma_max,sigma_min,schatten2\n");
        for k in 0..self.grid.len() {
            s.push_str(&format!("{:.9e},{:.9e},{:.9e},{:.9e}\n", self.grid[k], self.sigma_max[k], self.sigma_min[k], self.schatten2[k]));
        }
        s
    }
}

/// `f(X)_ij = ‖x_ii‖₀ + ‖x_ij‖₀ + ‖x_ji‖₀ + ‖x_jj‖₀` for `i ≠ j`, 0 on the diagonal.
pub fn link_density(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !x.is_square() {
        return Err(Error::Dimension("link density needs a square matrix".into()));
    }
    let z = |v: f64| if v != 0.0 { 1.0 } else { 0.0 };
    Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        if i == j {
            0.0
        } else {
            z(x[(i, i)]) + z(x[(i, j)]) + z(x[(j, i)]) + z(x[(j, j)])
        }
    }))
}
