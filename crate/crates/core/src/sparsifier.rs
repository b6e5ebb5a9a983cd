//! Alternating Z/Y minimization of the rank-penalized problem, with
//! reweighting, stopping rule, truncation and the rank-tolerance report.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::analysis::{deviation_metrics, is_hurwitz, nnz, DeviationMetrics};
use crate::lmi::{assemble_z_program, certify, Certificate, LmiInstance, ZPoint, DEFAULT_DELTA_STRICT};
use crate::matops::{eig_sym, SymMatrix};
use crate::sdp::{ConicSolution, SolveStatus, SolverSettings, WarmStart, Workspace};
use crate::system::{augment, closed_loop_data, StructureSet, UncertainLti};
use crate::{serde_mat, Error, Result};

pub const HISTORY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct SparsifierOptions {
    pub lambda1: f64,
    pub lambda2: f64,
    pub nu: f64,
    pub xi: f64,
    pub eps_star: f64,
    pub truncation_threshold: f64,
    pub reweight_iters: usize,
    pub max_outer_iters: usize,
    /// Initial weights; all ones when absent.
    pub w0: Option<DMatrix<f64>>,
    pub delta_strict: f64,
    pub solver: SolverSettings,
    /// Slack allowed when comparing objective values of consecutive iterates.
    pub descent_tol: f64,
}

impl Default for SparsifierOptions {
    fn default() -> Self {
        SparsifierOptions {
            lambda1: 0.5,
            lambda2: 0.1,
            nu: 100.0,
            xi: 1e-6,
            eps_star: 1e-2,
            truncation_threshold: 5e-5,
            reweight_iters: 5,
            max_outer_iters: 200,
            w0: None,
            delta_strict: DEFAULT_DELTA_STRICT,
            solver: SolverSettings {
                max_iters: 50_000,
                ..SolverSettings::default()
            },
            descent_tol: 1e-7,
        }
    }
}

impl SparsifierOptions {
    fn validate(&self) -> Result<()> {
        let pos = [self.lambda1, self.nu, self.xi, self.eps_star, self.truncation_threshold, self.delta_strict];
        if pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !(self.lambda2.is_finite() && self.lambda2 >= 0.0) {
            return Err(Error::Invalid("λ1, ν, ξ, ε*, truncation and δ must be positive, λ2 nonnegative".into()));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::Invalid("max_outer_iters must be positive".into()));
        }
        Ok(())
    }
}

/// `I − Σ uᵢuᵢᵀ` over the `2n` leading eigenvectors of `M₂` (order `6n+m`).
pub fn y_step(m2: &SymMatrix, n: usize, m: usize) -> Result<SymMatrix> {
    let order = 6 * n + m;
    if m2.order() != order {
        return Err(Error::Dimension(format!("M2 has order {}, expected {order}", m2.order())));
    }
    let eig = eig_sym(m2);
    let top = eig.vectors.columns(0, 2 * n);
    let y = DMatrix::identity(order, order) - &top * top.transpose();
    Ok(SymMatrix::symmetrized(y))
}

/// `w_ij = 1 / (|k_ij| + ξ)`.
pub fn update_weights(k: &DMatrix<f64>, xi: f64) -> DMatrix<f64> {
    k.map(|v| 1.0 / (v.abs() + xi))
}

/// `‖K_next − K_prev‖_F / ‖K_next‖_F`; `+∞` when `K_next = 0`.
pub fn stopping_epsilon(k_next: &DMatrix<f64>, k_prev: &DMatrix<f64>) -> f64 {
    let den = k_next.norm();
    if den == 0.0 {
        return f64::INFINITY;
    }
    (k_next - k_prev).norm() / den
}

/// Zeroes entries below `threshold` in magnitude.
pub fn truncate(k: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    k.map(|v| if v.abs() < threshold { 0.0 } else { v })
}

/// Truncation restricted to entries whose bounds admit zero. Returns the
/// truncated gain and the entries that had to be left alone.
pub fn truncate_in(k: &DMatrix<f64>, threshold: f64, s: &StructureSet) -> (DMatrix<f64>, Vec<(usize, usize)>) {
    let mut out = k.clone();
    let mut skipped = Vec::new();
    for j in 0..k.ncols() {
        for i in 0..k.nrows() {
            let v = k[(i, j)];
            if v != 0.0 && v.abs() < threshold {
                if s.admits_zero(i, j) {
                    out[(i, j)] = 0.0;
                } else {
                    skipped.push((i, j));
                }
            }
        }
    }
    (out, skipped)
}

/// Number of singular values `≥ eps`.
pub fn rank_with_tol(x: &DMatrix<f64>, eps: f64) -> usize {
    if x.is_empty() {
        return 0;
    }
    x.clone().svd(false, false).singular_values.iter().filter(|&&s| s >= eps).count()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterRecord {
    pub k: usize,
    /// `F(Z⁽ᵏ⁺¹⁾, Y⁽ᵏ⁺¹⁾)` under the weights used for this Z-step.
    pub objective: f64,
    /// `F(Z⁽ᵏ⁾, Y⁽ᵏ⁾)` under the same weights (`+∞` at the first step).
    pub objective_prev: f64,
    pub eps: f64,
    pub nnz: usize,
    /// `Tr(Y⁽ᵏ⁺¹⁾M₂⁽ᵏ⁺¹⁾)`: the 4n+m smallest eigenvalues of `M₂`.
    pub tail: f64,
    pub eps_s: f64,
    pub eps_y: f64,
    pub solver_iters: usize,
    pub solver_status: SolveStatus,
    /// True when the Z-step was rejected and the previous point kept.
    pub kept_previous: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankCertificate {
    pub tail: f64,
    /// `η`, taken as the final objective value.
    pub eta: f64,
    /// `η/ν`.
    pub tolerance: f64,
    pub holds: bool,
    /// `rank(M₂; η/ν)`; at most `2n` when the bound holds.
    pub rank_at_tolerance: usize,
    pub target_rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    MaxIters,
    /// A Z-step could not improve on the previous point, even at a tighter
    /// solver tolerance.
    Stalled,
    Infeasible,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Recertification {
    pub nominal_stable: bool,
    pub nominal_abscissa: f64,
    pub metrics: Option<DeviationMetrics>,
    /// Fixed-gain LMI bound on `‖S − Ŝ‖²_H2` over the uncertainty set.
    pub h2_sq_bound: Option<f64>,
    pub h2_bound_status: Option<SolveStatus>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparsifierResult {
    pub status: RunStatus,
    /// Constraint family carrying the infeasibility certificate.
    pub infeasible_family: Option<String>,
    #[serde(with = "serde_mat")]
    pub k_final: DMatrix<f64>,
    #[serde(with = "serde_mat")]
    pub k_raw: DMatrix<f64>,
    pub truncation_skipped: Vec<(usize, usize)>,
    pub history: Vec<IterRecord>,
    pub certificate: Option<RankCertificate>,
    pub eps_s: f64,
    pub eps_y: f64,
    pub recert: Option<Recertification>,
    #[serde(skip)]
    pub m2: Option<DMatrix<f64>>,
}

impl SparsifierResult {
    /// Iterate history as CSV with a versioned header comment.
    pub fn history_csv(&self) -> String {
        let mut s = format!("# robsparse history v{HISTORY_SCHEMA_VERSION}\nk,objective,objective_prev,eps,tail,nnz,eps_s,eps_y,solver_iters,kept_previous\n");
        for r in &self.history {
            s.push_str(&format!(
                "{},{:.12e},{:.12e},{:.6e},{:.6e},{},{:.12e},{:.12e},{},{}\n",
                r.k, r.objective, r.objective_prev, r.eps, r.tail, r.nnz, r.eps_s, r.eps_y, r.solver_iters, r.kept_previous
            ));
        }
        s
    }

    /// Largest violation of `F⁽ᵏ⁺¹⁾ ≤ F⁽ᵏ⁾` over the history (≤ 0 when monotone).
    pub fn max_ascent(&self) -> f64 {
        self.history
            .iter()
            .filter(|r| r.objective_prev.is_finite())
            .map(|r| r.objective - r.objective_prev)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn family_of(prog_names: &[String], sol: &ConicSolution) -> Option<String> {
    sol.duals
        .iter()
        .zip(prog_names)
        .map(|(d, name)| (d.iter().map(|v| v * v).sum::<f64>(), name))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, name)| name.clone())
}

/// Runs the alternating scheme from `Y = I`, `K = 0`.
pub fn run(sys: &UncertainLti, k_hat: &DMatrix<f64>, s: &StructureSet, opts: &SparsifierOptions) -> Result<SparsifierResult> {
    opts.validate()?;
    let data = closed_loop_data(sys, k_hat)?;
    let (n, m, q) = (sys.n(), sys.m(), sys.q());
    if s.shape() != (m, q) {
        return Err(Error::Dimension("structure set must be m×q".into()));
    }
    let zp = assemble_z_program(&LmiInstance {
        data: &data,
        structure: s,
        lambda1: opts.lambda1,
        lambda2: opts.lambda2,
        nu: opts.nu,
        delta_strict: opts.delta_strict,
    })?;
    let names: Vec<String> = zp.prog.constraints().iter().map(|c| c.name.clone()).collect();
    let mut ws = Workspace::new(&zp.prog, opts.solver.clone())?;

    let order = 6 * n + m;
    let mut y = DMatrix::<f64>::identity(order, order);
    let mut w = match &opts.w0 {
        Some(w0) if w0.shape() == (m, q) && w0.iter().all(|v| *v > 0.0 && v.is_finite()) => w0.clone(),
        Some(_) => return Err(Error::Invalid("W0 must be m×q and entrywise positive".into())),
        None => DMatrix::from_element(m, q, 1.0),
    };
    let mut k_prev = DMatrix::zeros(m, q);
    let mut z_prev: Option<ZPoint> = None;
    let mut warm: Option<WarmStart> = None;
    let mut history = Vec::new();
    let mut status = RunStatus::MaxIters;

    for it in 0..opts.max_outer_iters {
        let obj = zp.objective(&y, &w);
        let f_prev = z_prev.as_ref().map_or(f64::INFINITY, |z| zp.value_at(z, &y, &w));
        let mut sol = ws.solve(&obj, warm.as_ref())?;
        if sol.status == SolveStatus::Infeasible {
            return Ok(SparsifierResult {
                status: RunStatus::Infeasible,
                infeasible_family: family_of(&names, &sol),
                k_final: DMatrix::zeros(m, q),
                k_raw: DMatrix::zeros(m, q),
                truncation_skipped: Vec::new(),
                history,
                certificate: None,
                eps_s: f64::NAN,
                eps_y: f64::NAN,
                recert: None,
                m2: None,
            });
        }
        let mut z = zp.extract(&sol, &w);
        let mut f_z = zp.value_at(&z, &y, &w);
        if f_z > f_prev + opts.descent_tol {
            // inexact Z-step; retry once at a tighter tolerance before giving up on it
            let saved = ws.settings_mut().clone();
            ws.settings_mut().tol_feas *= 0.1;
            ws.settings_mut().tol_gap *= 0.1;
            let retry = ws.solve(&obj, Some(&sol.warm))?;
            *ws.settings_mut() = saved;
            if retry.status != SolveStatus::Infeasible {
                let zr = zp.extract(&retry, &w);
                let fr = zp.value_at(&zr, &y, &w);
                if fr < f_z {
                    z = zr;
                    f_z = fr;
                    sol = retry;
                }
            }
        }
        let kept_previous = f_z > f_prev + opts.descent_tol;
        if kept_previous {
            z = z_prev.clone().expect("finite f_prev implies a previous point");
        } else {
            warm = Some(sol.warm.clone());
        }

        let m2 = SymMatrix::symmetrized(z.m2.clone());
        let y_next = y_step(&m2, n, m)?.into_inner();
        let tail = (y_next.component_mul(&z.m2)).sum();
        let f_zy = zp.value_at(&z, &y_next, &w);
        let eps = stopping_epsilon(&z.k, &k_prev);
        history.push(IterRecord {
            k: it + 1,
            objective: f_zy,
            objective_prev: f_prev,
            eps,
            nnz: nnz(&truncate(&z.k, opts.truncation_threshold)),
            tail,
            eps_s: z.eps_s,
            eps_y: z.eps_y,
            solver_iters: sol.iterations,
            solver_status: sol.status,
            kept_previous,
        });

        y = y_next;
        k_prev = z.k.clone();
        if it < opts.reweight_iters {
            w = update_weights(&z.k, opts.xi);
            // the stored duals are scaled to the old weights and stall the next solve
            warm = None;
        }
        z_prev = Some(z);
        if kept_previous {
            status = RunStatus::Stalled;
            break;
        }
        if eps <= opts.eps_star {
            status = RunStatus::Converged;
            break;
        }
    }

    let z = z_prev.expect("at least one outer iteration");
    let (k_final, skipped) = truncate_in(&z.k, opts.truncation_threshold, s);
    let last = history.last().expect("nonempty history");
    let eta = last.objective;
    let tolerance = eta / opts.nu;
    let certificate = RankCertificate {
        tail: last.tail,
        eta,
        tolerance,
        holds: last.tail <= tolerance,
        rank_at_tolerance: rank_with_tol(&z.m2, tolerance),
        target_rank: 2 * n,
    };
    let recert = recertify(sys, k_hat, &k_final, &opts.solver)?;
    Ok(SparsifierResult {
        status,
        infeasible_family: None,
        k_final,
        k_raw: z.k.clone(),
        truncation_skipped: skipped,
        history,
        certificate: Some(certificate),
        eps_s: z.eps_s,
        eps_y: z.eps_y,
        recert: Some(recert),
        m2: Some(z.m2),
    })
}

/// Re-checks a (truncated) gain without trusting in-loop bounds: nominal
/// stability, deviation metrics and a fixed-gain H2 certificate.
pub fn recertify(sys: &UncertainLti, k_hat: &DMatrix<f64>, k: &DMatrix<f64>, settings: &SolverSettings) -> Result<Recertification> {
    let (stable, abscissa) = is_hurwitz(&sys.closed_loop_a(k, None));
    if !stable {
        return Ok(Recertification {
            nominal_stable: false,
            nominal_abscissa: abscissa,
            metrics: None,
            h2_sq_bound: None,
            h2_bound_status: None,
        });
    }
    let metrics = deviation_metrics(sys, k_hat, k)?;
    let aug = augment(sys, k_hat, k)?;
    let cert = certify(&aug.a_bar, &aug.b_bar, &aug.c_bar, &aug.d_bar, &aug.e_bar, sys.rho, Certificate::H2, settings)?;
    Ok(Recertification {
        nominal_stable: true,
        nominal_abscissa: abscissa,
        metrics: Some(metrics),
        h2_sq_bound: (cert.status == SolveStatus::Optimal).then_some(cert.bound),
        h2_bound_status: Some(cert.status),
    })
}
