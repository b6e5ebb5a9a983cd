//! Dense linear-algebra kernels: symmetric eigendecomposition, Lyapunov,
//! Sylvester and Riccati solvers, and projection onto the PSD cone.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square real matrix whose entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Builds a symmetric matrix, averaging the two triangles so that
    /// `s[(i, j)] == s[(j, i)]` holds bit-for-bit.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        check_finite(&m)?;
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Eigenvalues sorted in descending order with matching orthonormal
/// eigenvectors stored column-wise.
#[derive(Debug, Clone)]
pub struct EigPair {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigPair {
    /// `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[k]);
        }
        &scaled * self.vectors.transpose()
    }
}

pub fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Symmetric eigendecomposition with a deterministic layout: values
/// descending, exact ties kept in original index order, and each vector
/// signed so that its first nonzero component is positive.
pub fn eig_sym(s: &SymMatrix) -> EigPair {
    let n = s.order();
    if n == 0 {
        return EigPair {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        };
    }
    let eig = nalgebra::SymmetricEigen::new(s.as_matrix().clone());
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort: equal values keep their original relative order
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    let tiny = 16.0 * f64::EPSILON;
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        let sign = col
            .iter()
            .find(|v| v.abs() > tiny)
            .map_or(1.0, |v| v.signum());
        vectors.set_column(dst, &(col * sign));
    }
    EigPair { values, vectors }
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clipped to 0.
pub fn psd_project(s: &SymMatrix) -> SymMatrix {
    let eig = eig_sym(s);
    if eig.values.iter().all(|&v| v >= 0.0) {
        return s.clone();
    }
    SymMatrix::symmetrized(eig.reconstruct_with(|v| v.max(0.0)))
}

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.complex_eigenvalues().iter().copied().collect()
}

/// Maximum real part of the spectrum (−∞ for an empty matrix).
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest singular value of `[A − λI, B]` over the eigenvalues `λ` of `A`
/// (PBH test). Zero iff the pair is uncontrollable; with `only_unstable`
/// the minimum runs over eigenvalues with `Re λ ≥ 0` (stabilizability).
pub fn pbh_margin(a: &DMatrix<f64>, b: &DMatrix<f64>, only_unstable: bool) -> f64 {
    let n = a.nrows();
    let m = b.ncols();
    let mut margin = f64::INFINITY;
    for lam in eigenvalues(a) {
        if only_unstable && lam.re < 0.0 {
            continue;
        }
        let mut pencil = DMatrix::<Complex64>::zeros(n, n + m);
        for i in 0..n {
            for j in 0..n {
                pencil[(i, j)] = Complex64::new(a[(i, j)], 0.0);
            }
            pencil[(i, i)] -= lam;
            for j in 0..m {
                pencil[(i, n + j)] = Complex64::new(b[(i, j)], 0.0);
            }
        }
        let sv = pencil.singular_values();
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        margin = margin.min(smin);
    }
    margin
}

struct ComplexSchur {
    q: DMatrix<Complex64>,
    t: DMatrix<Complex64>,
}

fn complex_schur(a: &DMatrix<f64>) -> Result<ComplexSchur> {
    let ac = a.map(|v| Complex64::new(v, 0.0));
    let schur = nalgebra::Schur::try_new(ac, f64::EPSILON, 10_000).ok_or_else(|| {
        Error::NoConvergence("Schur decomposition failed to converge".to_string())
    })?;
    let (q, t) = schur.unpack();
    Ok(ComplexSchur { q, t })
}

fn ensure_hurwitz(t: &DMatrix<Complex64>) -> Result<()> {
    let worst = (0..t.nrows())
        .map(|i| t[(i, i)])
        .max_by(|a, b| a.re.partial_cmp(&b.re).unwrap_or(std::cmp::Ordering::Equal));
    match worst {
        Some(z) if !(z.re < 0.0) => Err(Error::NotHurwitz { re: z.re, im: z.im }),
        _ => Ok(()),
    }
}

/// Solves `T_a Y + Y T_bᴴ = F` for upper-triangular `T_a`, `T_b`.
fn triangular_sylvester(
    ta: &DMatrix<Complex64>,
    tb: &DMatrix<Complex64>,
    f: DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    let n = ta.nrows();
    let m = tb.nrows();
    let mut y = DMatrix::<Complex64>::zeros(n, m);
    for j in (0..m).rev() {
        let mut rhs = f.column(j).into_owned();
        for k in (j + 1)..m {
            let coef = tb[(j, k)].conj();
            if coef != Complex64::new(0.0, 0.0) {
                rhs -= y.column(k) * coef;
            }
        }
        let shift = tb[(j, j)].conj();
        // back substitution with (T_a + shift·I)
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for l in (i + 1)..n {
                acc -= ta[(i, l)] * y[(l, j)];
            }
            let diag = ta[(i, i)] + shift;
            if diag.norm() == 0.0 {
                return Err(Error::Invalid(
                    "Sylvester operator is singular (λ_i + λ_j = 0)".to_string(),
                ));
            }
            y[(i, j)] = acc / diag;
        }
    }
    Ok(y)
}

/// Solves `A X + X Bᵀ + C = 0` for Hurwitz `A` and `B`
/// (complex-Schur Bartels–Stewart).
pub fn solve_sylvester(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if !a.is_square() || !b.is_square() || c.nrows() != a.nrows() || c.ncols() != b.nrows() {
        return Err(Error::Dimension(format!(
            "sylvester: A {}x{}, B {}x{}, C {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    check_finite(a)?;
    check_finite(b)?;
    check_finite(c)?;
    if a.nrows() == 0 || b.nrows() == 0 {
        return Ok(DMatrix::zeros(a.nrows(), b.nrows()));
    }
    let sa = complex_schur(a)?;
    ensure_hurwitz(&sa.t)?;
    let sb = complex_schur(b)?;
    ensure_hurwitz(&sb.t)?;
    let cc = c.map(|v| Complex64::new(-v, 0.0));
    let f = sa.q.adjoint() * cc * &sb.q;
    let y = triangular_sylvester(&sa.t, &sb.t, f)?;
    let x = &sa.q * y * sb.q.adjoint();
    Ok(x.map(|z| z.re))
}

/// Solves the Lyapunov equation `A X + X Aᵀ + Q = 0` for Hurwitz `A`.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &SymMatrix) -> Result<SymMatrix> {
    if !a.is_square() || a.nrows() != q.order() {
        return Err(Error::Dimension(format!(
            "lyapunov: A is {}x{}, Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.order(),
            q.order()
        )));
    }
    check_finite(a)?;
    if a.nrows() == 0 {
        return Ok(SymMatrix::zeros(0));
    }
    let s = complex_schur(a)?;
    ensure_hurwitz(&s.t)?;
    let qc = q.as_matrix().map(|v| Complex64::new(-v, 0.0));
    let f = s.q.adjoint() * qc * &s.q;
    let y = triangular_sylvester(&s.t, &s.t, f)?;
    let x = &s.q * y * s.q.adjoint();
    Ok(SymMatrix::symmetrized(x.map(|z| z.re)))
}

/// Riccati residual `AᵀP + PA − P B R⁻¹ Bᵀ P + Q`.
pub fn care_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &SymMatrix,
    r: &SymMatrix,
    p: &SymMatrix,
) -> Result<DMatrix<f64>> {
    let r_chol = nalgebra::Cholesky::new(r.as_matrix().clone())
        .ok_or_else(|| Error::Invalid("R must be positive definite".to_string()))?;
    let p = p.as_matrix();
    let rinv_bt_p = r_chol.solve(&(b.transpose() * p));
    Ok(a.transpose() * p + p * a - p * b * rinv_bt_p + q.as_matrix())
}

/// Stabilizing solution of the continuous algebraic Riccati equation
/// `AᵀP + PA − P B R⁻¹ Bᵀ P + Q = 0` by Newton–Kleinman iteration.
///
/// The initial stabilizing gain comes from the shifted Lyapunov equation
/// `(A + βI) Z + Z (A + βI)ᵀ = 2 B Bᵀ`, which yields `u = −Bᵀ Z⁻¹ x`; if
/// that fails numerically the shift is continued down from a stable
/// `A − βI`.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &SymMatrix,
    r: &SymMatrix,
) -> Result<SymMatrix> {
    let n = a.nrows();
    let m = b.ncols();
    if !a.is_square() || b.nrows() != n || q.order() != n || r.order() != m {
        return Err(Error::Dimension(format!(
            "care: A {}x{}, B {}x{}, Q {}, R {}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            q.order(),
            r.order()
        )));
    }
    check_finite(a)?;
    check_finite(b)?;
    let r_chol = nalgebra::Cholesky::new(r.as_matrix().clone())
        .ok_or_else(|| Error::Invalid("R must be positive definite".to_string()))?;
    if eig_sym(q).values.iter().any(|&v| v < -1e-12 * (1.0 + q.as_matrix().norm())) {
        return Err(Error::Invalid("Q must be positive semidefinite".to_string()));
    }

    let gain = initial_stabilizing_gain(a, b)?;
    let p = match newton_kleinman_from(a, b, q, r, gain) {
        Err(Error::NotHurwitz { re, im }) => {
            return Err(Error::NoConvergence(format!(
                "Newton-Kleinman iterate lost stability (eigenvalue {re:.3e}{im:+.3e}i)"
            )))
        }
        other => other?,
    };
    let mut p = SymMatrix::symmetrized(p);
    let mut res_m = care_residual(a, b, q, r, &p)?;
    // defect correction: Newton steps solved for the update, not for P itself
    for _ in 0..4 {
        let k = r_chol.solve(&(b.transpose() * p.as_matrix()));
        let a_k = a - b * k;
        let Ok(e) = solve_lyapunov(&a_k.transpose(), &SymMatrix::symmetrized(res_m.clone())) else {
            break;
        };
        let cand = SymMatrix::symmetrized(p.as_matrix() + e.as_matrix());
        let cand_res = care_residual(a, b, q, r, &cand)?;
        if cand_res.norm() >= res_m.norm() {
            break;
        }
        p = cand;
        res_m = cand_res;
    }
    let q_scale = q.as_matrix().norm().max(1.0);
    let res = res_m.norm();
    // backward-error scale: magnitude of the individual terms
    let pm = p.as_matrix();
    let term_scale = q_scale
        + 2.0 * (a.transpose() * pm).norm()
        + (pm * b * r_chol.solve(&(b.transpose() * pm))).norm();
    if res > 1e-10 * term_scale {
        return Err(Error::NoConvergence(format!(
            "Riccati residual {res:.3e} above tolerance"
        )));
    }
    let closed = a - b * r_chol.solve(&(b.transpose() * p.as_matrix()));
    let abscissa = spectral_abscissa(&closed);
    if !(abscissa < 0.0) {
        return Err(Error::NotStabilizable(format!(
            "closed loop abscissa {abscissa:.3e} is not negative"
        )));
    }
    Ok(p)
}

fn initial_stabilizing_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    // marginal modes (e.g. a Laplacian kernel) can show up as -1e-17
    if spectral_abscissa(a) < -1e-8 * a.norm().max(1.0) {
        return Ok(DMatrix::zeros(b.ncols(), n));
    }
    if let Some(k) = bass_gain(a, b) {
        return Ok(k);
    }
    shift_continuation_gain(a, b)
}

/// Bass: with `β > max(0, −Re λ(A))`, `(A + βI) Z + Z (A + βI)ᵀ = 2BBᵀ`
/// gives `(A − BBᵀZ⁻¹) Z + Z (…)ᵀ = −2βZ`.
fn bass_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let lowest = eigenvalues(a).iter().map(|z| -z.re).fold(0.0, f64::max);
    let beta = lowest + 0.1 * a.norm().max(1.0);
    let shifted = -(a + DMatrix::identity(n, n) * beta);
    let z = solve_lyapunov(&shifted, &SymMatrix::symmetrized(b * b.transpose() * 2.0)).ok()?;
    let k = -z.into_inner().lu().solve(b)?.transpose();
    (spectral_abscissa(&(a + b * &k)) < 0.0).then_some(k)
}

/// Walks the shift `β` in `A − βI` down to zero, re-solving the shifted
/// Riccati equation with the previous gain as the starting point.
fn shift_continuation_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let m = b.ncols();
    let eye = DMatrix::<f64>::identity(n, n);
    let q = SymMatrix::identity(n);
    let r = SymMatrix::identity(m);
    let mut beta = spectral_abscissa(a).max(0.0) + 1.0;
    let mut gain = DMatrix::zeros(m, n);
    for _ in 0..200 {
        let shifted = a - &eye * beta;
        let p = newton_kleinman_from(&shifted, b, &q, &r, gain.clone())?;
        gain = -b.transpose() * p;
        if beta == 0.0 {
            return Ok(gain);
        }
        let margin = -spectral_abscissa(&(&shifted + b * &gain));
        beta = (beta - 0.9 * margin).max(0.0);
        if spectral_abscissa(&(a - &eye * beta + b * &gain)) >= 0.0 {
            break;
        }
    }
    Err(Error::NotStabilizable(
        "no stabilizing gain found by shift continuation".to_string(),
    ))
}

fn newton_kleinman_from(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &SymMatrix,
    r: &SymMatrix,
    mut gain: DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let r_chol = nalgebra::Cholesky::new(r.as_matrix().clone())
        .ok_or_else(|| Error::Invalid("R must be positive definite".to_string()))?;
    let mut prev: Option<DMatrix<f64>> = None;
    for _ in 0..100 {
        let a_k = a + b * &gain;
        let rhs = q.as_matrix() + gain.transpose() * r.as_matrix() * &gain;
        let p = solve_lyapunov(&a_k.transpose(), &SymMatrix::symmetrized(rhs))?.into_inner();
        gain = -r_chol.solve(&(b.transpose() * &p));
        let done = prev
            .as_ref()
            .is_some_and(|pp| (&p - pp).norm() <= 1e-13 * p.norm().max(1.0));
        prev = Some(p);
        if done {
            break;
        }
    }
    Ok(prev.expect("at least one iteration"))
}
