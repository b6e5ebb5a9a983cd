//! H2 / H∞ LMI blocks for uncertain systems, the rank-carrying matrix `M₂`,
//! and the Z-step conic program.

use nalgebra::DMatrix;

use crate::sdp::{ConicProgram, ConicSolution, ExprMat, LinExpr, SolveStatus, SolverSettings, Workspace};
use crate::system::{ClosedLoopData, StructureSet};
use crate::{Error, Result};

pub const DEFAULT_DELTA_STRICT: f64 = 1e-7;

/// Decision variables shared by the two LMI blocks, as affine expressions.
#[derive(Debug, Clone)]
pub struct ZVars {
    pub x1: ExprMat,
    pub x2: ExprMat,
    pub y1: ExprMat,
    pub y2: ExprMat,
    pub eps1: LinExpr,
    pub eps2: LinExpr,
    pub eps_y: LinExpr,
    pub eps_s: LinExpr,
    /// Gain; entries outside the structure pattern are the constant 0.
    pub k: ExprMat,
    /// Entrywise bounds `t ≥ |k|` (zero where `k` is disallowed).
    pub t: ExprMat,
    pub w22: ExprMat,
    pub w33: ExprMat,
    pub w43: ExprMat,
    pub w44: ExprMat,
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `Q = X A_oᵀ + A_o X + Y B_Kᵀ + B_K Yᵀ`.
fn q_term(data: &ClosedLoopData, x: &ExprMat, y: &ExprMat) -> ExprMat {
    x.left_mul(&data.a_o).sym_sum().add(&y.right_mul(&data.b_k.transpose()).sym_sum())
}

/// `R = E_o X + E_B1 Yᵀ`.
fn r_term(data: &ClosedLoopData, x: &ExprMat, y: &ExprMat) -> ExprMat {
    x.left_mul(&data.e_o).add(&y.transpose().left_mul(&data.e_b1))
}

/// H2 block `[[Q₁ + B̄B̄ᵀ + ε₁ρD̄D̄ᵀ, √ρR₁ᵀ], [√ρR₁, −ε₁I]]`, to be made ≺ 0.
pub fn build_h2_block(data: &ClosedLoopData, x: &ExprMat, y: &ExprMat, eps: &LinExpr) -> Result<ExprMat> {
    let nn = data.a_o.nrows();
    check_xy(data, x, y)?;
    let j = data.e_o.nrows();
    let sr = data.rho.sqrt();
    let mut top = q_term(data, x, y).add_constant(&sym(&(&data.b_bar * data.b_bar.transpose())));
    let dd = sym(&(&data.d_bar * data.d_bar.transpose())) * data.rho;
    add_scaled_const(&mut top, eps, &dd);
    let r = r_term(data, x, y).scaled(sr);
    let mut out = ExprMat::zeros(nn + j, nn + j);
    out.set_block(0, 0, &top);
    out.set_sym_block(nn, 0, &r);
    for i in 0..j {
        out.set(nn + i, nn + i, eps.scaled(-1.0));
    }
    Ok(out)
}

/// H∞ block of order `2n + p + q + j`, to be made ≺ 0.
pub fn build_hinf_block(data: &ClosedLoopData, x: &ExprMat, y: &ExprMat, eps: &LinExpr, eps_y: &LinExpr) -> Result<ExprMat> {
    let nn = data.a_o.nrows();
    check_xy(data, x, y)?;
    let (p, q, j) = (data.b_bar.ncols(), data.c_bar.nrows(), data.e_o.nrows());
    let sr = data.rho.sqrt();
    let mut top = q_term(data, x, y);
    let dd = sym(&(&data.d_bar * data.d_bar.transpose())) * data.rho;
    add_scaled_const(&mut top, eps, &dd);
    let ord = nn + p + q + j;
    let mut out = ExprMat::zeros(ord, ord);
    out.set_block(0, 0, &top);
    out.set_sym_block(nn, 0, &ExprMat::constant(&data.b_bar.transpose()));
    out.set_sym_block(nn + p, 0, &x.left_mul(&data.c_bar));
    out.set_sym_block(nn + p + q, 0, &r_term(data, x, y).scaled(sr));
    for i in 0..p + q {
        out.set(nn + i, nn + i, eps_y.scaled(-1.0));
    }
    for i in 0..j {
        out.set(nn + p + q + i, nn + p + q + i, eps.scaled(-1.0));
    }
    Ok(out)
}

fn check_xy(data: &ClosedLoopData, x: &ExprMat, y: &ExprMat) -> Result<()> {
    let nn = data.a_o.nrows();
    if x.nrows() != nn || x.ncols() != nn || y.nrows() != nn || y.ncols() != data.b_k.ncols() {
        return Err(Error::Dimension(format!(
            "LMI variables: X {}x{}, Y {}x{}, expected {nn}x{nn} and {nn}x{}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols(),
            data.b_k.ncols()
        )));
    }
    Ok(())
}

fn add_scaled_const(m: &mut ExprMat, s: &LinExpr, c: &DMatrix<f64>) {
    for j in 0..c.ncols() {
        for i in 0..c.nrows() {
            if c[(i, j)] != 0.0 {
                m.get_mut(i, j).add_scaled(s, c[(i, j)]);
            }
        }
    }
}

/// `M₂` with block sizes `(N, m, N, N)`:
///
/// ```text
/// [ X1     Y1    X2ᵀ   I      ]
/// [ Y1ᵀ    W22   Y2ᵀ   K C_K  ]
/// [ X2     Y2    W33   W43ᵀ   ]
/// [ I   (KC_K)ᵀ  W43   W44    ]
/// ```
///
/// `W22`, `W33`, `W44` symmetric and `W43` full are free.
pub fn build_m2(z: &ZVars, c_k: &DMatrix<f64>) -> ExprMat {
    let nn = z.x1.nrows();
    let m = z.y1.ncols();
    let ord = 3 * nn + m;
    let mut out = ExprMat::zeros(ord, ord);
    let (r2, r3, r4) = (nn, nn + m, 2 * nn + m);
    out.set_block(0, 0, &z.x1);
    out.set_sym_block(r2, 0, &z.y1.transpose());
    out.set_sym_block(r3, 0, &z.x2);
    out.set_sym_block(r4, 0, &ExprMat::constant(&DMatrix::identity(nn, nn)));
    out.set_block(r2, r2, &z.w22);
    out.set_sym_block(r3, r2, &z.y2);
    out.set_sym_block(r4, r2, &z.k.right_mul(c_k).transpose());
    out.set_block(r3, r3, &z.w33);
    out.set_sym_block(r4, r3, &z.w43);
    out.set_block(r4, r4, &z.w44);
    out
}

/// Rank-n completion `[[U, UYᵀ, I], [YU, YUYᵀ, Y], [I, Yᵀ, U⁻¹]]` (rank n).
pub fn rank_n_completion(u: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = u.nrows();
    let m = y.nrows();
    if !u.is_square() || y.ncols() != n {
        return Err(Error::Dimension("rank-n completion needs U n×n and Y m×n".into()));
    }
    let uinv = u
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Invalid("U must be positive definite".into()))?
        .inverse();
    let v = u * y.transpose();
    let mut out = DMatrix::zeros(2 * n + m, 2 * n + m);
    out.view_mut((0, 0), (n, n)).copy_from(u);
    out.view_mut((0, n), (n, m)).copy_from(&v);
    out.view_mut((n, 0), (m, n)).copy_from(&v.transpose());
    out.view_mut((n, n), (m, m)).copy_from(&sym(&(y * &v)));
    out.view_mut((0, n + m), (n, n)).fill_with_identity();
    out.view_mut((n + m, 0), (n, n)).fill_with_identity();
    out.view_mut((n, n + m), (m, n)).copy_from(y);
    out.view_mut((n + m, n), (n, m)).copy_from(&y.transpose());
    out.view_mut((n + m, n + m), (n, n)).copy_from(&sym(&uinv));
    Ok(out)
}

/// Numeric `M₂` at a point, free blocks completed as `V X1⁻¹ Vᵀ` with
/// `V = [X1; Y1ᵀ; X2; I]`. Rank `N` exactly when `Y_r = X_r (K C_K)ᵀ`.
pub fn consistent_m2(x1: &DMatrix<f64>, y1: &DMatrix<f64>, x2: &DMatrix<f64>, y2: &DMatrix<f64>, k: &DMatrix<f64>, c_k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let nn = x1.nrows();
    let m = y1.ncols();
    let x1inv = x1
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Invalid("X1 must be positive definite".into()))?
        .inverse();
    let mut v = DMatrix::zeros(3 * nn + m, nn);
    v.view_mut((0, 0), (nn, nn)).copy_from(x1);
    v.view_mut((nn, 0), (m, nn)).copy_from(&y1.transpose());
    v.view_mut((nn + m, 0), (nn, nn)).copy_from(x2);
    v.view_mut((2 * nn + m, 0), (nn, nn)).fill_with_identity();
    let mut full = sym(&(&v * x1inv * v.transpose()));
    // keep the fixed blocks exactly as given
    let kc = (k * c_k).transpose();
    let (r2, r3, r4) = (nn, nn + m, 2 * nn + m);
    full.view_mut((0, 0), (nn, nn)).copy_from(&sym(x1));
    full.view_mut((r2, 0), (m, nn)).copy_from(&y1.transpose());
    full.view_mut((0, r2), (nn, m)).copy_from(y1);
    full.view_mut((r3, 0), (nn, nn)).copy_from(x2);
    full.view_mut((0, r3), (nn, nn)).copy_from(&x2.transpose());
    full.view_mut((r4, 0), (nn, nn)).fill_with_identity();
    full.view_mut((0, r4), (nn, nn)).fill_with_identity();
    full.view_mut((r3, r2), (nn, m)).copy_from(y2);
    full.view_mut((r2, r3), (m, nn)).copy_from(&y2.transpose());
    full.view_mut((r4, r2), (nn, m)).copy_from(&kc);
    full.view_mut((r2, r4), (m, nn)).copy_from(&kc.transpose());
    Ok(full)
}

/// Numerical values of the Z-block at a solution.
#[derive(Debug, Clone)]
pub struct ZPoint {
    pub x1: DMatrix<f64>,
    pub x2: DMatrix<f64>,
    pub y1: DMatrix<f64>,
    pub y2: DMatrix<f64>,
    pub eps1: f64,
    pub eps2: f64,
    pub eps_y: f64,
    pub eps_s: f64,
    pub k: DMatrix<f64>,
    pub m2: DMatrix<f64>,
    /// `Σ w|k|` as represented by the epigraph variables.
    pub l1_model: f64,
}

/// Parameters of one Z-step.
#[derive(Debug, Clone)]
pub struct LmiInstance<'a> {
    pub data: &'a ClosedLoopData,
    pub structure: &'a StructureSet,
    pub lambda1: f64,
    pub lambda2: f64,
    pub nu: f64,
    pub delta_strict: f64,
}

/// The assembled Z-step program. Only the objective depends on the
/// multiplier `Y` and the weights `W`, so one instance serves every
/// outer iteration.
pub struct ZProgram {
    pub prog: ConicProgram,
    pub vars: ZVars,
    pub m2: ExprMat,
    pub lambda1: f64,
    pub lambda2: f64,
    pub nu: f64,
    pub c_k: DMatrix<f64>,
}

impl ZProgram {
    /// `ε_S + λ1 ε_y + λ2 Σ w t + ν Tr(Y M₂)`.
    pub fn objective(&self, y: &DMatrix<f64>, w: &DMatrix<f64>) -> LinExpr {
        let mut obj = self.vars.eps_s.clone();
        obj.add_scaled(&self.vars.eps_y, self.lambda1);
        obj.add_scaled(&self.vars.t.inner(w), self.lambda2);
        obj.add_scaled(&self.m2.inner(y), self.nu);
        obj
    }

    pub fn extract(&self, sol: &ConicSolution, w: &DMatrix<f64>) -> ZPoint {
        let v = &self.vars;
        ZPoint {
            x1: sym(&sol.eval_mat(&v.x1)),
            x2: sym(&sol.eval_mat(&v.x2)),
            y1: sol.eval_mat(&v.y1),
            y2: sol.eval_mat(&v.y2),
            eps1: sol.eval(&v.eps1),
            eps2: sol.eval(&v.eps2),
            eps_y: sol.eval(&v.eps_y),
            eps_s: sol.eval(&v.eps_s),
            k: sol.eval_mat(&v.k),
            m2: sym(&sol.eval_mat(&self.m2)),
            l1_model: sol.eval(&v.t.inner(w)),
        }
    }

    /// Objective value at a point for given `Y`, `W`.
    pub fn value_at(&self, z: &ZPoint, y: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
        let l1: f64 = z.k.iter().zip(w.iter()).map(|(k, w)| w * k.abs()).sum();
        z.eps_s + self.lambda1 * z.eps_y + self.lambda2 * l1 + self.nu * (y.component_mul(&z.m2)).sum()
    }
}

fn lmi_scale(data: &ClosedLoopData) -> f64 {
    1.0f64
        .max(data.a_o.norm())
        .max((&data.b_bar * data.b_bar.transpose()).norm())
        .max(data.rho * (&data.d_bar * data.d_bar.transpose()).norm())
}

/// `M − δI` for a symmetric expression `M`.
fn shift(m: &ExprMat, delta: f64) -> ExprMat {
    m.add_constant(&(DMatrix::identity(m.nrows(), m.ncols()) * -delta))
}

pub fn assemble_z_program(inst: &LmiInstance) -> Result<ZProgram> {
    let data = inst.data;
    if !(inst.lambda1 > 0.0 && inst.lambda2 >= 0.0 && inst.nu > 0.0 && inst.delta_strict > 0.0) {
        return Err(Error::Invalid("need λ1 > 0, λ2 ≥ 0, ν > 0 and δ > 0".into()));
    }
    let nn = data.a_o.nrows();
    let m = data.b_k.ncols();
    let q = data.c_k.nrows();
    if inst.structure.shape() != (m, q) {
        return Err(Error::Dimension("structure set shape must be m×q".into()));
    }
    let delta = inst.delta_strict * lmi_scale(data);
    let mut prog = ConicProgram::new();
    let x1 = prog.add_free_symmetric("X1", nn);
    let x2 = prog.add_free_symmetric("X2", nn);
    let y1 = prog.add_free_matrix("Y1", nn, m);
    let y2 = prog.add_free_matrix("Y2", nn, m);
    let eps = prog.add_free("eps", 4);
    let (eps1, eps2, eps_y, eps_s) = (eps[0].clone(), eps[1].clone(), eps[2].clone(), eps[3].clone());

    let s = inst.structure;
    let allowed: Vec<(usize, usize)> = (0..q).flat_map(|j| (0..m).map(move |i| (i, j))).filter(|&(i, j)| s.pattern[(i, j)]).collect();
    let kv = prog.add_free("K", allowed.len());
    let tv = prog.add_free("T", allowed.len());
    let mut k = ExprMat::zeros(m, q);
    let mut t = ExprMat::zeros(m, q);
    for (idx, &(i, j)) in allowed.iter().enumerate() {
        k.set(i, j, kv[idx].clone());
        t.set(i, j, tv[idx].clone());
    }
    let w22 = prog.add_free_symmetric("W22", m);
    let w33 = prog.add_free_symmetric("W33", nn);
    let w43 = prog.add_free_matrix("W43", nn, nn);
    let w44 = prog.add_free_symmetric("W44", nn);

    let vars = ZVars {
        x1,
        x2,
        y1,
        y2,
        eps1,
        eps2,
        eps_y,
        eps_s,
        k,
        t,
        w22,
        w33,
        w43,
        w44,
    };

    let dl = LinExpr::constant(delta);
    prog.add_nonneg_constraint(
        "eps_positive",
        vec![&vars.eps1 - &dl, &vars.eps2 - &dl, &vars.eps_y - &dl],
    );
    let mut tr = vars.x1.left_mul(&data.c_bar).right_mul(&data.c_bar.transpose()).trace();
    tr.constant += delta;
    prog.add_nonneg_constraint("h2_trace", vec![&vars.eps_s - &tr]);

    let mut l1_rows = Vec::new();
    let mut box_rows = Vec::new();
    for &(i, j) in &allowed {
        let (ke, te) = (vars.k.get(i, j), vars.t.get(i, j));
        l1_rows.push(te - ke);
        l1_rows.push(te + ke);
        if s.lower[(i, j)].is_finite() {
            box_rows.push(ke - &LinExpr::constant(s.lower[(i, j)]));
        }
        if s.upper[(i, j)].is_finite() {
            box_rows.push(&LinExpr::constant(s.upper[(i, j)]) - ke);
        }
    }
    prog.add_nonneg_constraint("l1_epigraph", l1_rows);
    if !box_rows.is_empty() {
        prog.add_nonneg_constraint("gain_bounds", box_rows);
    }

    prog.add_lmi("X1_positive", &shift(&vars.x1, delta));
    prog.add_lmi("X2_positive", &shift(&vars.x2, delta));
    let h2 = build_h2_block(data, &vars.x1, &vars.y1, &vars.eps1)?;
    prog.add_lmi("h2_block", &shift(&h2.scaled(-1.0), delta));
    let hi = build_hinf_block(data, &vars.x2, &vars.y2, &vars.eps2, &vars.eps_y)?;
    prog.add_lmi("hinf_block", &shift(&hi.scaled(-1.0), delta));
    let m2 = build_m2(&vars, &data.c_k);
    prog.add_lmi("M2_psd", &m2);

    let zp = ZProgram {
        prog,
        vars,
        m2,
        lambda1: inst.lambda1,
        lambda2: inst.lambda2,
        nu: inst.nu,
        c_k: data.c_k.clone(),
    };
    let obj = zp.objective(&DMatrix::identity(3 * nn + m, 3 * nn + m), &DMatrix::from_element(m, q, 1.0));
    let mut zp = zp;
    zp.prog.set_objective(obj);
    Ok(zp)
}

/// Which performance certificate to compute for a fixed gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certificate {
    H2,
    Hinf,
}

#[derive(Debug, Clone)]
pub struct CertResult {
    pub status: SolveStatus,
    /// Certified bound: `ε_S` (an H2² bound) or `ε_y` (an H∞ bound).
    pub bound: f64,
    pub x: DMatrix<f64>,
    pub eps: f64,
    pub iterations: usize,
}

/// Smallest certified H2² (resp. H∞) bound for the uncertain system
/// `(A + D Δ E, B, C)`, `ΔᵀΔ ⪯ ρ²I`, from the LMI blocks with `Y = 0`.
#[allow(clippy::too_many_arguments)]
pub fn certify(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    e: &DMatrix<f64>,
    rho: f64,
    which: Certificate,
    settings: &SolverSettings,
) -> Result<CertResult> {
    let nn = a.nrows();
    let data = ClosedLoopData {
        a_o: a.clone(),
        b_k: DMatrix::zeros(nn, 0),
        c_k: DMatrix::zeros(0, nn),
        e_o: e.clone(),
        d_bar: d.clone(),
        k_hat: DMatrix::zeros(0, 0),
        b_bar: b.clone(),
        c_bar: c.clone(),
        e_b1: DMatrix::zeros(e.nrows(), 0),
        rho,
        n: nn,
        m: 0,
        q: c.nrows(),
    };
    let delta = DEFAULT_DELTA_STRICT * lmi_scale(&data);
    let mut prog = ConicProgram::new();
    let x = prog.add_free_symmetric("X", nn);
    let ev = prog.add_free("eps", 2);
    let y = ExprMat::zeros(nn, 0);
    let dl = LinExpr::constant(delta);
    prog.add_lmi("X_positive", &shift(&x, delta));
    match which {
        Certificate::H2 => {
            prog.add_nonneg_constraint("eps_positive", vec![&ev[0] - &dl]);
            let mut tr = x.left_mul(c).right_mul(&c.transpose()).trace();
            tr.constant += delta;
            prog.add_nonneg_constraint("h2_trace", vec![&ev[1] - &tr]);
            let blk = build_h2_block(&data, &x, &y, &ev[0])?;
            prog.add_lmi("h2_block", &shift(&blk.scaled(-1.0), delta));
        }
        Certificate::Hinf => {
            prog.add_nonneg_constraint("eps_positive", vec![&ev[0] - &dl, &ev[1] - &dl]);
            let blk = build_hinf_block(&data, &x, &y, &ev[0], &ev[1])?;
            prog.add_lmi("hinf_block", &shift(&blk.scaled(-1.0), delta));
        }
    }
    prog.set_objective(ev[1].clone());
    let mut ws = Workspace::new(&prog, settings.clone())?;
    let sol = ws.solve(prog.objective(), None)?;
    Ok(CertResult {
        status: sol.status,
        bound: sol.x[prog.block("eps").expect("declared").offset + 1],
        x: sym(&sol.eval_mat(&x)),
        eps: sol.eval(&ev[0]),
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{closed_loop_data, UncertainLti};

    fn scalar_data() -> ClosedLoopData {
        let sys = UncertainLti::nominal(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        closed_loop_data(&sys, &DMatrix::from_element(1, 1, -0.5)).unwrap()
    }

    fn zvars(prog: &mut ConicProgram, data: &ClosedLoopData) -> ZVars {
        let nn = data.big_n();
        let m = data.m;
        ZVars {
            x1: prog.add_free_symmetric("X1", nn),
            x2: prog.add_free_symmetric("X2", nn),
            y1: prog.add_free_matrix("Y1", nn, m),
            y2: prog.add_free_matrix("Y2", nn, m),
            eps1: LinExpr::var(0),
            eps2: LinExpr::var(0),
            eps_y: LinExpr::var(0),
            eps_s: LinExpr::var(0),
            k: prog.add_free_matrix("K", m, data.q),
            t: prog.add_free_matrix("T", m, data.q),
            w22: prog.add_free_symmetric("W22", m),
            w33: prog.add_free_symmetric("W33", nn),
            w43: prog.add_free_matrix("W43", nn, nn),
            w44: prog.add_free_symmetric("W44", nn),
        }
    }

    #[test]
    fn block_orders() {
        let data = scalar_data();
        let mut prog = ConicProgram::new();
        let z = zvars(&mut prog, &data);
        let h2 = build_h2_block(&data, &z.x1, &z.y1, &z.eps1).unwrap();
        assert_eq!(h2.nrows(), 2 + 1);
        assert!(h2.is_symmetric());
        let hi = build_hinf_block(&data, &z.x2, &z.y2, &z.eps2, &z.eps_y).unwrap();
        assert_eq!(hi.nrows(), 2 + 1 + 1 + 1);
        assert!(hi.is_symmetric());
        let m2 = build_m2(&z, &data.c_k);
        assert_eq!(m2.nrows(), 7);
        assert!(m2.is_symmetric());
    }

    #[test]
    fn rho_zero_decouples_corner() {
        let data = scalar_data();
        let mut prog = ConicProgram::new();
        let z = zvars(&mut prog, &data);
        let h2 = build_h2_block(&data, &z.x1, &z.y1, &z.eps1).unwrap();
        for i in 0..2 {
            assert!(h2.get(2, i).is_constant() && h2.get(2, i).constant == 0.0);
        }
        assert_eq!(*h2.get(2, 2), z.eps1.scaled(-1.0));
    }

    #[test]
    fn m2_blocks_at_point() {
        let data = scalar_data();
        let mut prog = ConicProgram::new();
        let z = zvars(&mut prog, &data);
        let m2 = build_m2(&z, &data.c_k);
        let x: Vec<f64> = (0..prog.n_vars()).map(|i| (i as f64 * 0.37).sin()).collect();
        let v = m2.eval(&x);
        let x1 = z.x1.eval(&x);
        let k = z.k.eval(&x);
        assert_eq!(v.view((0, 0), (2, 2)).clone_owned(), x1);
        assert_eq!(v.view((5, 0), (2, 2)).clone_owned(), DMatrix::identity(2, 2));
        assert_eq!(v.view((5, 2), (2, 1)).clone_owned(), (&k * &data.c_k).transpose());
        assert_eq!(v.view((3, 2), (2, 1)).clone_owned(), z.y2.eval(&x));
    }
}
