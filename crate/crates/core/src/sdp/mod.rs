//! Linear-objective conic programs over free, nonnegative and PSD blocks,
//! plus a first-order solver on the homogeneous self-dual embedding.

mod admm;
mod expr;

use std::path::Path;

use serde::Serialize;

use crate::{Error, Result};

pub use admm::{Workspace, WarmStart};
pub use expr::{ExprMat, LinExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VarKind {
    Free,
    Nonneg,
    /// Symmetric block; its variables are the lower triangle, column by column.
    Psd(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarBlock {
    pub name: String,
    pub kind: VarKind,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConeKind {
    /// Each row `== 0`.
    Zero,
    /// Each row `>= 0`.
    Nonneg,
    /// Rows are the lower triangle (column-major) of a symmetric matrix `⪰ 0`.
    Psd(usize),
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub cone: ConeKind,
    pub rows: Vec<LinExpr>,
}

/// `minimize objective(x)` subject to the listed cone constraints and the
/// implicit constraints of nonnegative and PSD variable blocks.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    blocks: Vec<VarBlock>,
    n_vars: usize,
    objective: LinExpr,
    constraints: Vec<Constraint>,
}

pub(crate) fn tri_len(order: usize) -> usize {
    order * (order + 1) / 2
}

/// Position of `(i, j)`, `i >= j`, in the column-major lower triangle.
pub(crate) fn tri_index(order: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < order);
    j * order - j * (j + 1) / 2 + i
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    fn push_block(&mut self, name: &str, kind: VarKind, len: usize) -> usize {
        let offset = self.n_vars;
        self.blocks.push(VarBlock {
            name: name.to_string(),
            kind,
            offset,
            len,
        });
        self.n_vars += len;
        offset
    }

    pub fn add_free(&mut self, name: &str, len: usize) -> Vec<LinExpr> {
        let off = self.push_block(name, VarKind::Free, len);
        (off..off + len).map(LinExpr::var).collect()
    }

    pub fn add_nonneg(&mut self, name: &str, len: usize) -> Vec<LinExpr> {
        let off = self.push_block(name, VarKind::Nonneg, len);
        (off..off + len).map(LinExpr::var).collect()
    }

    /// Full `rows × cols` matrix of free variables, stored column-major.
    pub fn add_free_matrix(&mut self, name: &str, rows: usize, cols: usize) -> ExprMat {
        let off = self.push_block(name, VarKind::Free, rows * cols);
        ExprMat::from_fn(rows, cols, |i, j| LinExpr::var(off + j * rows + i))
    }

    /// Symmetric matrix of free variables.
    pub fn add_free_symmetric(&mut self, name: &str, order: usize) -> ExprMat {
        let off = self.push_block(name, VarKind::Free, tri_len(order));
        sym_from_offset(off, order)
    }

    /// Symmetric matrix variable constrained PSD.
    pub fn add_psd(&mut self, name: &str, order: usize) -> ExprMat {
        assert!(order >= 1, "PSD block order must be positive");
        let off = self.push_block(name, VarKind::Psd(order), tri_len(order));
        sym_from_offset(off, order)
    }

    pub fn add_eq(&mut self, name: &str, rows: Vec<LinExpr>) {
        self.constraints.push(Constraint {
            name: name.to_string(),
            cone: ConeKind::Zero,
            rows,
        });
    }

    /// Each expression `>= 0`.
    pub fn add_nonneg_constraint(&mut self, name: &str, rows: Vec<LinExpr>) {
        self.constraints.push(Constraint {
            name: name.to_string(),
            cone: ConeKind::Nonneg,
            rows,
        });
    }

    /// `m ⪰ 0`; only the lower triangle of `m` is read.
    pub fn add_lmi(&mut self, name: &str, m: &ExprMat) {
        let k = m.nrows();
        assert_eq!(k, m.ncols(), "LMI must be square");
        debug_assert!(m.is_symmetric(), "LMI {name} is not symmetric");
        let mut rows = Vec::with_capacity(tri_len(k));
        for j in 0..k {
            for i in j..k {
                rows.push(m.get(i, j).clone());
            }
        }
        self.constraints.push(Constraint {
            name: name.to_string(),
            cone: ConeKind::Psd(k),
            rows,
        });
    }

    pub fn set_objective(&mut self, obj: LinExpr) {
        self.objective = obj;
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn blocks(&self) -> &[VarBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&VarBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn validate(&self) -> Result<()> {
        let mut next = 0;
        for b in &self.blocks {
            if b.offset != next {
                return Err(Error::Invalid(format!("block {} is not contiguous", b.name)));
            }
            if let VarKind::Psd(k) = b.kind {
                if k == 0 || b.len != tri_len(k) {
                    return Err(Error::Invalid(format!("bad PSD block {}", b.name)));
                }
            }
            next += b.len;
        }
        if next != self.n_vars {
            return Err(Error::Invalid("blocks do not cover all variables".into()));
        }
        let check = |e: &LinExpr, what: &str| -> Result<()> {
            if !e.constant.is_finite() || e.terms().iter().any(|t| !t.1.is_finite()) {
                return Err(Error::Invalid(format!("non-finite coefficient in {what}")));
            }
            if e.terms().iter().any(|t| t.0 >= self.n_vars) {
                return Err(Error::Invalid(format!("unknown variable in {what}")));
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for c in &self.constraints {
            if let ConeKind::Psd(k) = c.cone {
                if k == 0 || c.rows.len() != tri_len(k) {
                    return Err(Error::Invalid(format!("bad PSD constraint {}", c.name)));
                }
            }
            for r in &c.rows {
                check(r, &c.name)?;
            }
        }
        Ok(())
    }

    /// Writes the canonical form `A x + s = b, s ∈ K, min cᵀx` as JSON.
    pub fn dump_json(&self, path: &Path) -> Result<()> {
        let canon = admm::Canonical::build(self)?;
        let dump = canon.dump(self);
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), &dump)?;
        Ok(())
    }
}

fn sym_from_offset(off: usize, order: usize) -> ExprMat {
    ExprMat::from_fn(order, order, |i, j| {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        LinExpr::var(off + tri_index(order, r, c))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iters: usize,
    /// Relative tolerance for infeasibility certificates.
    pub tol_infeas: f64,
    pub alpha: f64,
    pub adaptive_scale: bool,
    pub equilibrate: bool,
    /// Anderson memory; 0 disables acceleration.
    pub anderson_mem: usize,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol_feas: 1e-6,
            tol_gap: 1e-6,
            max_iters: 200_000,
            tol_infeas: 1e-8,
            alpha: 1.5,
            adaptive_scale: true,
            equilibrate: true,
            anderson_mem: 0,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Primal values of every scalar variable, indexed like the program.
    pub x: Vec<f64>,
    /// Dual multipliers per constraint, in the constraint's row order
    /// (PSD rows are natural matrix entries of the dual matrix).
    pub duals: Vec<Vec<f64>>,
    /// Relative primal residual `‖Ax+s−b‖∞ / (1 + max(‖Ax‖∞, ‖s‖∞, ‖b‖∞))`.
    pub primal_residual: f64,
    /// Relative dual residual, same normalization with `Aᵀy` and `c`.
    pub dual_residual: f64,
    /// Relative duality gap.
    pub gap: f64,
    pub objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    /// Residual of the infeasibility certificate when status is infeasible/unbounded.
    pub certificate_residual: Option<f64>,
    pub warm: WarmStart,
}

impl ConicSolution {
    pub fn eval(&self, e: &LinExpr) -> f64 {
        e.eval(&self.x)
    }

    pub fn eval_mat(&self, m: &ExprMat) -> nalgebra::DMatrix<f64> {
        m.eval(&self.x)
    }
}

/// Solves `prog` with default settings except for the given tolerances.
pub fn solve(prog: &ConicProgram, tol_feas: f64, tol_gap: f64, max_iters: usize) -> Result<ConicSolution> {
    let settings = SolverSettings {
        tol_feas,
        tol_gap,
        max_iters,
        ..SolverSettings::default()
    };
    solve_with(prog, &settings, None)
}

pub fn solve_with(prog: &ConicProgram, settings: &SolverSettings, warm: Option<&WarmStart>) -> Result<ConicSolution> {
    let mut ws = Workspace::new(prog, settings.clone())?;
    ws.solve(prog.objective(), warm)
}
