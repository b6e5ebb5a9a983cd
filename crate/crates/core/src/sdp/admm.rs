//! Douglas–Rachford splitting on the homogeneous self-dual embedding.
//!
//! Canonical form: `min cᵀx + c0  s.t.  Ax + s = b, s ∈ K` where `K` is a
//! product of a zero cone, a nonnegative orthant and PSD cones in scaled
//! lower-triangular vectorization (off-diagonals times √2).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use super::{tri_len, ConeKind, ConicProgram, ConicSolution, LinExpr, SolveStatus, SolverSettings, VarKind};
use crate::matops::{psd_project, SymMatrix};
use crate::{Error, Result};

const SQRT2: f64 = std::f64::consts::SQRT_2;
const RHO_X: f64 = 1e-6;
const MIN_SCALE: f64 = 1e-6;
const MAX_SCALE: f64 = 1e6;
const CHECK_EVERY: usize = 10;

#[derive(Debug, Clone)]
struct Csr {
    ncols: usize,
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Csr {
    fn nrows(&self) -> usize {
        self.ptr.len() - 1
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.ptr[i]..self.ptr[i + 1]).map(move |k| (self.idx[k], self.val[k]))
    }

    /// `out = self · x`
    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.ptr[i]..self.ptr[i + 1] {
                acc += self.val[k] * x[self.idx[k]];
            }
            *o = acc;
        }
    }

    /// `out = selfᵀ · y`
    fn transpose_mul(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for k in self.ptr[i]..self.ptr[i + 1] {
                out[self.idx[k]] += self.val[k] * yi;
            }
        }
    }

    fn transpose(&self) -> Csr {
        let m = self.nrows();
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let ptr = counts.clone();
        let mut fill = counts;
        let mut idx = vec![0; self.idx.len()];
        let mut val = vec![0.0; self.val.len()];
        for i in 0..m {
            for k in self.ptr[i]..self.ptr[i + 1] {
                let j = self.idx[k];
                idx[fill[j]] = i;
                val[fill[j]] = self.val[k];
                fill[j] += 1;
            }
        }
        Csr {
            ncols: m,
            ptr,
            idx,
            val,
        }
    }
}

/// Program rewritten in canonical form.
#[derive(Debug, Clone)]
pub(crate) struct Canonical {
    n: usize,
    a: Csr,
    b: Vec<f64>,
    zero: usize,
    nonneg: usize,
    psd: Vec<usize>,
    /// First canonical row of each program constraint.
    cons_row: Vec<usize>,
    /// Row count and PSD order of each program constraint.
    cons_shape: Vec<(usize, Option<usize>)>,
}

#[derive(Serialize)]
pub(crate) struct CanonicalDump {
    format: &'static str,
    n: usize,
    m: usize,
    cones: DumpCones,
    /// `(row, col, value)` triplets of `A`.
    a: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    c: Vec<f64>,
    c0: f64,
    blocks: Vec<super::VarBlock>,
    constraints: Vec<DumpConstraint>,
}

#[derive(Serialize)]
struct DumpCones {
    zero: usize,
    nonneg: usize,
    psd: Vec<usize>,
}

#[derive(Serialize)]
struct DumpConstraint {
    name: String,
    cone: ConeKind,
    first_row: usize,
    rows: usize,
}

impl Canonical {
    pub(crate) fn build(prog: &ConicProgram) -> Result<Self> {
        prog.validate()?;
        let n = prog.n_vars();
        let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        let mut cons_row = vec![0; prog.constraints().len()];

        let push_expr = |rows: &mut Vec<(Vec<(usize, f64)>, f64)>, e: &LinExpr, s: f64| {
            rows.push((e.terms().iter().map(|&(j, v)| (j, -s * v)).collect(), s * e.constant));
        };

        for (ci, c) in prog.constraints().iter().enumerate() {
            if c.cone == ConeKind::Zero {
                cons_row[ci] = rows.len();
                for r in &c.rows {
                    push_expr(&mut rows, r, 1.0);
                }
            }
        }
        let zero = rows.len();
        for (ci, c) in prog.constraints().iter().enumerate() {
            if c.cone == ConeKind::Nonneg {
                cons_row[ci] = rows.len();
                for r in &c.rows {
                    push_expr(&mut rows, r, 1.0);
                }
            }
        }
        for b in prog.blocks() {
            if b.kind == VarKind::Nonneg {
                for j in b.offset..b.offset + b.len {
                    rows.push((vec![(j, -1.0)], 0.0));
                }
            }
        }
        let nonneg = rows.len() - zero;
        let mut psd = Vec::new();
        for (ci, c) in prog.constraints().iter().enumerate() {
            if let ConeKind::Psd(k) = c.cone {
                cons_row[ci] = rows.len();
                let mut t = 0;
                for j in 0..k {
                    for i in j..k {
                        push_expr(&mut rows, &c.rows[t], if i == j { 1.0 } else { SQRT2 });
                        t += 1;
                    }
                }
                psd.push(k);
            }
        }
        for b in prog.blocks() {
            if let VarKind::Psd(k) = b.kind {
                let mut t = b.offset;
                for j in 0..k {
                    for i in j..k {
                        rows.push((vec![(t, if i == j { -1.0 } else { -SQRT2 })], 0.0));
                        t += 1;
                    }
                }
                psd.push(k);
            }
        }

        let mut ptr = vec![0];
        let mut idx = Vec::new();
        let mut val = Vec::new();
        let mut bvec = Vec::with_capacity(rows.len());
        for (terms, c) in rows {
            for (j, v) in terms {
                idx.push(j);
                val.push(v);
            }
            ptr.push(idx.len());
            bvec.push(c);
        }
        Ok(Canonical {
            n,
            a: Csr {
                ncols: n,
                ptr,
                idx,
                val,
            },
            b: bvec,
            zero,
            nonneg,
            psd,
            cons_row,
            cons_shape: prog
                .constraints()
                .iter()
                .map(|c| {
                    (
                        c.rows.len(),
                        match c.cone {
                            ConeKind::Psd(k) => Some(k),
                            _ => None,
                        },
                    )
                })
                .collect(),
        })
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    pub(crate) fn dump(&self, prog: &ConicProgram) -> CanonicalDump {
        let mut a = Vec::with_capacity(self.a.val.len());
        for i in 0..self.m() {
            for (j, v) in self.a.row(i) {
                a.push((i, j, v));
            }
        }
        let mut c = vec![0.0; self.n];
        for &(j, v) in prog.objective().terms() {
            c[j] = v;
        }
        CanonicalDump {
            format: "conic-program/v1: min c'x + c0 s.t. Ax + s = b, s in K; psd cones use column-major lower triangle with sqrt(2) off-diagonals",
            n: self.n,
            m: self.m(),
            cones: DumpCones {
                zero: self.zero,
                nonneg: self.nonneg,
                psd: self.psd.clone(),
            },
            a,
            b: self.b.clone(),
            c,
            c0: prog.objective().constant,
            blocks: prog.blocks().to_vec(),
            constraints: prog
                .constraints()
                .iter()
                .zip(&self.cons_row)
                .map(|(c, &r)| DumpConstraint {
                    name: c.name.clone(),
                    cone: c.cone,
                    first_row: r,
                    rows: c.rows.len(),
                })
                .collect(),
        }
    }
}

/// Primal-dual point in the unscaled canonical space, reusable across solves
/// of programs that share constraints.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solver state tied to one constraint set. The objective may change between
/// calls to [`Workspace::solve`] without refactoring.
pub struct Workspace {
    canon: Canonical,
    settings: SolverSettings,
    /// Equilibrated `A` and its transpose.
    a: Csr,
    at: Csr,
    d: Vec<f64>,
    e: Vec<f64>,
    /// `D b`, before the scalar normalization.
    db: Vec<f64>,
    scale: f64,
    ry_inv: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl Workspace {
    pub fn new(prog: &ConicProgram, settings: SolverSettings) -> Result<Self> {
        let canon = Canonical::build(prog)?;
        let m = canon.m();
        let n = canon.n;
        let (d, e) = if settings.equilibrate {
            ruiz(&canon)
        } else {
            (vec![1.0; m], vec![1.0; n])
        };
        let mut a = canon.a.clone();
        for i in 0..m {
            for k in a.ptr[i]..a.ptr[i + 1] {
                a.val[k] *= d[i] * e[a.idx[k]];
            }
        }
        let at = a.transpose();
        let db: Vec<f64> = canon.b.iter().zip(&d).map(|(b, d)| b * d).collect();
        let scale = 0.1;
        let ry_inv = ry_inverse(&canon, scale);
        let chol = factor(&a, &ry_inv, n)?;
        Ok(Workspace {
            canon,
            settings,
            a,
            at,
            d,
            e,
            db,
            scale,
            ry_inv,
            chol,
        })
    }

    pub fn settings_mut(&mut self) -> &mut SolverSettings {
        &mut self.settings
    }

    fn refactor(&mut self, scale: f64) -> Result<()> {
        self.scale = scale;
        self.ry_inv = ry_inverse(&self.canon, scale);
        self.chol = factor(&self.a, &self.ry_inv, self.canon.n)?;
        Ok(())
    }

    /// Solves `[[ρI, Âᵀ], [−Â, R_y]] [x; y] = [rx; ry]` in place.
    fn solve_m(&self, rx: &mut [f64], ry: &mut [f64], tmp_n: &mut [f64], tmp_m: &mut [f64]) {
        for i in 0..ry.len() {
            ry[i] *= self.ry_inv[i];
        }
        self.at.mul(ry, tmp_n);
        let mut rhs = DVector::from_iterator(rx.len(), rx.iter().zip(tmp_n.iter()).map(|(a, b)| a - b));
        self.chol.solve_mut(&mut rhs);
        rx.copy_from_slice(rhs.as_slice());
        self.a.mul(rx, tmp_m);
        for i in 0..ry.len() {
            ry[i] += self.ry_inv[i] * tmp_m[i];
        }
    }

    fn project_dual_cone(&self, y: &mut [f64]) {
        let c = &self.canon;
        for v in &mut y[c.zero..c.zero + c.nonneg] {
            *v = v.max(0.0);
        }
        let mut off = c.zero + c.nonneg;
        for &k in &c.psd {
            let len = tri_len(k);
            project_svec(&mut y[off..off + len], k);
            off += len;
        }
    }

    pub fn solve(&mut self, objective: &LinExpr, warm: Option<&WarmStart>) -> Result<ConicSolution> {
        let n = self.canon.n;
        let m = self.canon.m();
        let l = n + m + 1;
        let st = self.settings.clone();

        let mut c = vec![0.0; n];
        for &(j, v) in objective.terms() {
            if j >= n {
                return Err(Error::Invalid("objective references unknown variable".into()));
            }
            c[j] = v;
        }
        let c0 = objective.constant;
        let ec: Vec<f64> = c.iter().zip(&self.e).map(|(c, e)| c * e).collect();
        let beta = 1.0 / inf_norm(&self.db).clamp(1e-4, 1e4);
        let gamma = 1.0 / inf_norm(&ec).clamp(1e-4, 1e4);
        let bh: Vec<f64> = self.db.iter().map(|v| v * beta).collect();
        let ch: Vec<f64> = ec.iter().map(|v| v * gamma).collect();

        let b_norm = inf_norm(&self.canon.b);
        let c_norm = inf_norm(&c);

        let mut tmp_n = vec![0.0; n];
        let mut tmp_m = vec![0.0; m];

        // g = M⁻¹ h with h = [ĉ; b̂]
        let mut gx = ch.clone();
        let mut gy = bh.clone();
        let compute_g = |ws: &Self, gx: &mut Vec<f64>, gy: &mut Vec<f64>, tn: &mut [f64], tm: &mut [f64]| -> f64 {
            gx.copy_from_slice(&ch);
            gy.copy_from_slice(&bh);
            ws.solve_m(gx, gy, tn, tm);
            dot(&ch, gx) + dot(&bh, gy)
        };
        let mut hg = compute_g(self, &mut gx, &mut gy, &mut tmp_n, &mut tmp_m);

        // w = u + R⁻¹v at the starting point
        let mut w = vec![0.0; l];
        w[l - 1] = 1.0;
        if let Some(ws) = warm {
            if ws.x.len() == n && ws.y.len() == m && ws.s.len() == m {
                for j in 0..n {
                    w[j] = beta * ws.x[j] / self.e[j];
                }
                for i in 0..m {
                    let yt = gamma * ws.y[i] / self.d[i];
                    let st_ = beta * ws.s[i] * self.d[i];
                    w[n + i] = yt + self.ry_inv[i] * st_;
                }
            }
        }

        let mut ut = vec![0.0; l];
        let mut u = vec![0.0; l];
        let mut v = vec![0.0; l];
        let mut w_next = vec![0.0; l];

        let mut aa = Anderson::new(l, st.anderson_mem);
        let mut f_prev_norm = f64::INFINITY;
        let mut aa_pending: Option<Vec<f64>> = None;

        let mut best: Option<(f64, Iterate)> = None;
        let mut last_scale_update = 0usize;
        let mut status = SolveStatus::MaxIters;
        let mut cert = None;
        let mut result: Option<Iterate> = None;
        let mut iters = 0;

        for k in 0..st.max_iters {
            iters = k + 1;
            // ũ = (R + M)⁻¹ R w
            {
                let (wx, rest) = w.split_at(n);
                let (wy, wt) = rest.split_at(m);
                let (px, prest) = ut.split_at_mut(n);
                let (py, pt) = prest.split_at_mut(m);
                for j in 0..n {
                    px[j] = RHO_X * wx[j];
                }
                for i in 0..m {
                    py[i] = wy[i] / self.ry_inv[i];
                }
                self.solve_m(px, py, &mut tmp_n, &mut tmp_m);
                let hp = dot(&ch, px) + dot(&bh, py);
                let tau = (wt[0] + hp) / (1.0 + hg);
                for j in 0..n {
                    px[j] -= gx[j] * tau;
                }
                for i in 0..m {
                    py[i] -= gy[i] * tau;
                }
                pt[0] = tau;
            }
            // u = Π(2ũ − w)
            for i in 0..l {
                u[i] = 2.0 * ut[i] - w[i];
            }
            self.project_dual_cone(&mut u[n..n + m]);
            u[l - 1] = u[l - 1].max(0.0);
            // v = R(u + w − 2ũ)
            for j in 0..n {
                v[j] = 0.0;
            }
            for i in 0..m {
                v[n + i] = (u[n + i] + w[n + i] - 2.0 * ut[n + i]) / self.ry_inv[i];
            }
            v[l - 1] = u[l - 1] + w[l - 1] - 2.0 * ut[l - 1];
            for i in 0..l {
                w_next[i] = w[i] + st.alpha * (u[i] - ut[i]);
            }

            let f_norm = w_next.iter().zip(&w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if let Some(fallback) = aa_pending.take() {
                if f_norm > f_prev_norm {
                    // accelerated point was worse: fall back to the plain step
                    w.copy_from_slice(&fallback);
                    aa.reset();
                    continue;
                }
            }

            if k % CHECK_EVERY == 0 || k + 1 == st.max_iters {
                let it = self.unscale(&u, &v, beta, gamma, &c, c0, b_norm, c_norm);
                if let Some(it) = it {
                    let merit = (it.pri / st.tol_feas).max(it.dua / st.tol_feas).max(it.gap / st.tol_gap);
                    if st.verbose && k % 500 == 0 {
                        eprintln!(
                            "{k:6} pri {:.2e} dua {:.2e} gap {:.2e} obj {:.6e} scale {:.2e}",
                            it.pri, it.dua, it.gap, it.obj, self.scale
                        );
                    }
                    if it.pri <= st.tol_feas && it.dua <= st.tol_feas && it.gap <= st.tol_gap {
                        status = SolveStatus::Optimal;
                        result = Some(it);
                        break;
                    }
                    if best.as_ref().is_none_or(|(b, _)| merit < *b) {
                        best = Some((merit, it));
                    }
                }
                if let Some((s, r)) = self.certificates(&u, &v, beta, gamma, &c) {
                    status = s;
                    cert = Some(r);
                    break;
                }
                if st.adaptive_scale && k >= last_scale_update + 100 {
                    if let Some(ratio) = self.residual_ratio(&u, &v, &bh, &ch) {
                        if !(0.5..=2.0).contains(&ratio) {
                            let new_scale = (self.scale * ratio).clamp(MIN_SCALE, MAX_SCALE);
                            if new_scale != self.scale {
                                self.refactor(new_scale)?;
                                hg = compute_g(self, &mut gx, &mut gy, &mut tmp_n, &mut tmp_m);
                                for i in 0..m {
                                    w[n + i] = u[n + i] + self.ry_inv[i] * v[n + i];
                                }
                                for j in 0..n {
                                    w[j] = u[j];
                                }
                                w[l - 1] = u[l - 1] + v[l - 1];
                                aa.reset();
                                f_prev_norm = f64::INFINITY;
                                last_scale_update = k;
                                continue;
                            }
                        }
                    }
                }
            }

            if st.anderson_mem > 0 {
                let fvec: Vec<f64> = w_next.iter().zip(&w).map(|(a, b)| a - b).collect();
                if let Some(acc) = aa.step(&w, &fvec) {
                    aa_pending = Some(w_next.clone());
                    f_prev_norm = f_norm;
                    w.copy_from_slice(&acc);
                    continue;
                }
            }
            f_prev_norm = f_norm;
            std::mem::swap(&mut w, &mut w_next);
        }

        let it = match (status, result) {
            (SolveStatus::Optimal, Some(it)) => it,
            _ => match best {
                Some((_, it)) => it,
                None => Iterate::nan(n, m),
            },
        };
        let duals = self.split_duals(&it.y);
        Ok(ConicSolution {
            status,
            x: it.x.clone(),
            duals,
            primal_residual: it.pri,
            dual_residual: it.dua,
            gap: it.gap,
            objective: it.obj,
            dual_objective: it.dobj,
            iterations: iters,
            certificate_residual: cert,
            warm: WarmStart {
                x: it.x,
                y: it.y,
                s: it.s,
            },
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn unscale(&self, u: &[f64], v: &[f64], beta: f64, gamma: f64, c: &[f64], c0: f64, b_norm: f64, c_norm: f64) -> Option<Iterate> {
        let n = self.canon.n;
        let m = self.canon.m();
        let tau = u[n + m];
        if tau <= 0.0 {
            return None;
        }
        let x: Vec<f64> = (0..n).map(|j| self.e[j] * u[j] / (tau * beta)).collect();
        let y: Vec<f64> = (0..m).map(|i| self.d[i] * u[n + i] / (tau * gamma)).collect();
        let s: Vec<f64> = (0..m).map(|i| v[n + i] / (self.d[i] * tau * beta)).collect();
        let mut ax = vec![0.0; m];
        self.canon.a.mul(&x, &mut ax);
        let pres: Vec<f64> = (0..m).map(|i| ax[i] + s[i] - self.canon.b[i]).collect();
        let mut aty = vec![0.0; n];
        self.canon.a.transpose_mul(&y, &mut aty);
        let dres: Vec<f64> = (0..n).map(|j| aty[j] + c[j]).collect();
        let cx = dot(c, &x);
        let by = dot(&self.canon.b, &y);
        let pri = inf_norm(&pres) / (1.0 + inf_norm(&ax).max(inf_norm(&s)).max(b_norm));
        let dua = inf_norm(&dres) / (1.0 + inf_norm(&aty).max(c_norm));
        let gap = (cx + by).abs() / (1.0 + cx.abs().max(by.abs()));
        if !(pri.is_finite() && dua.is_finite() && gap.is_finite()) {
            return None;
        }
        Some(Iterate {
            x,
            y,
            s,
            pri,
            dua,
            gap,
            obj: cx + c0,
            dobj: -by + c0,
        })
    }

    /// Infeasibility and unboundedness certificates from the raw iterate.
    fn certificates(&self, u: &[f64], v: &[f64], beta: f64, gamma: f64, c: &[f64]) -> Option<(SolveStatus, f64)> {
        let n = self.canon.n;
        let m = self.canon.m();
        let tol = self.settings.tol_infeas;
        let y: Vec<f64> = (0..m).map(|i| self.d[i] * u[n + i] / gamma).collect();
        let by = dot(&self.canon.b, &y);
        if by < 0.0 {
            let mut aty = vec![0.0; n];
            self.canon.a.transpose_mul(&y, &mut aty);
            let r = inf_norm(&aty) / -by;
            if r < tol {
                return Some((SolveStatus::Infeasible, r));
            }
        }
        let x: Vec<f64> = (0..n).map(|j| self.e[j] * u[j] / beta).collect();
        let cx = dot(c, &x);
        if cx < 0.0 {
            let s: Vec<f64> = (0..m).map(|i| v[n + i] / (self.d[i] * beta)).collect();
            let mut ax = vec![0.0; m];
            self.canon.a.mul(&x, &mut ax);
            let r = (0..m).map(|i| (ax[i] + s[i]).abs()).fold(0.0, f64::max) / -cx;
            if r < tol {
                return Some((SolveStatus::Unbounded, r));
            }
        }
        None
    }

    /// `sqrt(relative primal / relative dual)` residual in the scaled space.
    fn residual_ratio(&self, u: &[f64], v: &[f64], bh: &[f64], ch: &[f64]) -> Option<f64> {
        let n = self.canon.n;
        let m = self.canon.m();
        let tau = u[n + m];
        if tau <= 0.0 {
            return None;
        }
        let mut ax = vec![0.0; m];
        self.a.mul(&u[..n], &mut ax);
        let mut pr = 0.0f64;
        let mut pn = 0.0f64;
        for i in 0..m {
            pr = pr.max((ax[i] + v[n + i] - bh[i] * tau).abs());
            pn = pn.max(ax[i].abs()).max(v[n + i].abs()).max((bh[i] * tau).abs());
        }
        let mut aty = vec![0.0; n];
        self.at.mul(&u[n..n + m], &mut aty);
        let mut dr = 0.0f64;
        let mut dn = 0.0f64;
        for j in 0..n {
            dr = dr.max((aty[j] + ch[j] * tau).abs());
            dn = dn.max(aty[j].abs()).max((ch[j] * tau).abs());
        }
        let rp = pr / (pn + 1e-12 * tau);
        let rd = dr / (dn + 1e-12 * tau);
        if rp > 0.0 && rd > 0.0 && rp.is_finite() && rd.is_finite() {
            Some((rp / rd).sqrt())
        } else {
            None
        }
    }

    fn split_duals(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.canon.cons_row.len());
        for (&r0, &(len, psd)) in self.canon.cons_row.iter().zip(&self.canon.cons_shape) {
            let mut d: Vec<f64> = y[r0..r0 + len].to_vec();
            if let Some(k) = psd {
                let mut t = 0;
                for j in 0..k {
                    for i in j..k {
                        if i != j {
                            d[t] /= SQRT2;
                        }
                        t += 1;
                    }
                }
            }
            out.push(d);
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
    pri: f64,
    dua: f64,
    gap: f64,
    obj: f64,
    dobj: f64,
}

impl Iterate {
    fn nan(n: usize, m: usize) -> Self {
        Iterate {
            x: vec![f64::NAN; n],
            y: vec![f64::NAN; m],
            s: vec![f64::NAN; m],
            pri: f64::INFINITY,
            dua: f64::INFINITY,
            gap: f64::INFINITY,
            obj: f64::NAN,
            dobj: f64::NAN,
        }
    }
}

fn ry_inverse(canon: &Canonical, scale: f64) -> Vec<f64> {
    let mut r = vec![scale; canon.m()];
    for v in &mut r[..canon.zero] {
        *v = 1000.0 * scale;
    }
    r
}

fn factor(a: &Csr, ry_inv: &[f64], n: usize) -> Result<Cholesky<f64, Dyn>> {
    let mut k = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = RHO_X;
    }
    for i in 0..a.nrows() {
        let r = ry_inv[i];
        for p in a.ptr[i]..a.ptr[i + 1] {
            let (j1, v1) = (a.idx[p], a.val[p]);
            for q in a.ptr[i]..a.ptr[i + 1] {
                k[(j1, a.idx[q])] += r * v1 * a.val[q];
            }
        }
    }
    Cholesky::new(k).ok_or_else(|| Error::NoConvergence("KKT factorization failed".into()))
}

/// Ruiz equilibration. Rows of one PSD cone share a single factor so the
/// scaled cone is unchanged.
fn ruiz(canon: &Canonical) -> (Vec<f64>, Vec<f64>) {
    let m = canon.m();
    let n = canon.n;
    let a = &canon.a;
    let mut d = vec![1.0; m];
    let mut e = vec![1.0; n];
    let mut rn = vec![0.0; m];
    let mut cn = vec![0.0; n];
    for _ in 0..25 {
        rn.iter_mut().for_each(|v| *v = 0.0);
        cn.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            for (j, v) in a.row(i) {
                let s = (v * d[i] * e[j]).abs();
                rn[i] = f64::max(rn[i], s);
                cn[j] = f64::max(cn[j], s);
            }
        }
        let mut off = canon.zero + canon.nonneg;
        for &k in &canon.psd {
            let len = tri_len(k);
            let mean = rn[off..off + len].iter().sum::<f64>() / len as f64;
            rn[off..off + len].iter_mut().for_each(|v| *v = mean);
            off += len;
        }
        for i in 0..m {
            if rn[i] > 1e-12 {
                d[i] = (d[i] / rn[i].sqrt()).clamp(1e-4, 1e4);
            }
        }
        for j in 0..n {
            if cn[j] > 1e-12 {
                e[j] = (e[j] / cn[j].sqrt()).clamp(1e-4, 1e4);
            }
        }
    }
    (d, e)
}

/// Projects a scaled lower-triangular vector onto the PSD cone in place.
fn project_svec(v: &mut [f64], k: usize) {
    if k == 1 {
        v[0] = v[0].max(0.0);
        return;
    }
    let mut mat = DMatrix::<f64>::zeros(k, k);
    let mut t = 0;
    for j in 0..k {
        for i in j..k {
            let x = if i == j { v[t] } else { v[t] / SQRT2 };
            mat[(i, j)] = x;
            mat[(j, i)] = x;
            t += 1;
        }
    }
    let p = psd_project(&SymMatrix::symmetrized(mat));
    let p = p.as_matrix();
    let mut t = 0;
    for j in 0..k {
        for i in j..k {
            v[t] = if i == j { p[(i, j)] } else { p[(i, j)] * SQRT2 };
            t += 1;
        }
    }
}

/// Type-II Anderson acceleration on the fixed-point map `w ↦ w + f(w)`.
struct Anderson {
    mem: usize,
    dw: Vec<Vec<f64>>,
    df: Vec<Vec<f64>>,
    last: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    fn new(_len: usize, mem: usize) -> Self {
        Anderson {
            mem,
            dw: Vec::new(),
            df: Vec::new(),
            last: None,
        }
    }

    fn reset(&mut self) {
        self.dw.clear();
        self.df.clear();
        self.last = None;
    }

    /// Records `(w, f)` and returns an extrapolated point once history exists.
    fn step(&mut self, w: &[f64], f: &[f64]) -> Option<Vec<f64>> {
        if self.mem == 0 {
            return None;
        }
        if let Some((lw, lf)) = self.last.take() {
            self.dw.push(w.iter().zip(&lw).map(|(a, b)| a - b).collect());
            self.df.push(f.iter().zip(&lf).map(|(a, b)| a - b).collect());
            if self.dw.len() > self.mem {
                self.dw.remove(0);
                self.df.remove(0);
            }
        }
        self.last = Some((w.to_vec(), f.to_vec()));
        let h = self.df.len();
        if h == 0 {
            return None;
        }
        let mut g = DMatrix::<f64>::zeros(h, h);
        let mut rhs = DVector::<f64>::zeros(h);
        for a in 0..h {
            for b in a..h {
                let v = dot(&self.df[a], &self.df[b]);
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
            rhs[a] = dot(&self.df[a], f);
        }
        let reg = 1e-10 * (0..h).map(|a| g[(a, a)]).fold(0.0, f64::max).max(1e-300);
        for a in 0..h {
            g[(a, a)] += reg;
        }
        let gam = g.cholesky()?.solve(&rhs);
        if gam.iter().any(|x| !x.is_finite()) || gam.norm() > 1e4 {
            self.reset();
            return None;
        }
        let mut out: Vec<f64> = w.iter().zip(f).map(|(a, b)| a + b).collect();
        for a in 0..h {
            let ga = gam[a];
            for ((o, dw), df) in out.iter_mut().zip(&self.dw[a]).zip(&self.df[a]) {
                *o -= ga * (dw + df);
            }
        }
        Some(out)
    }
}
