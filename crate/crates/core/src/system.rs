//! Uncertain plant, admissible gain set, augmented error system and the
//! stacked closed-loop data used by the LMI builders.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::matops::pbh_margin;
use crate::{serde_mat, Error, Result};

/// `ẋ = (A + DΔE_A)x + (B1 + DΔE_B1)u + B2 d`, `y = Cx`, `ΔᵀΔ ⪯ ρ²I`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainLti {
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub e_a: DMatrix<f64>,
    pub e_b1: DMatrix<f64>,
    pub rho: f64,
}

#[derive(Serialize, Deserialize)]
struct LtiFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B1")]
    b1: Vec<Vec<f64>>,
    #[serde(rename = "B2")]
    b2: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    #[serde(rename = "E_A")]
    e_a: Vec<Vec<f64>>,
    #[serde(rename = "E_B1")]
    e_b1: Vec<Vec<f64>>,
    rho: f64,
}

impl UncertainLti {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b1: DMatrix<f64>,
        b2: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        e_a: DMatrix<f64>,
        e_b1: DMatrix<f64>,
        rho: f64,
    ) -> Result<Self> {
        let sys = UncertainLti {
            a,
            b1,
            b2,
            c,
            d,
            e_a,
            e_b1,
            rho,
        };
        sys.check_dims()?;
        Ok(sys)
    }

    /// Plant without uncertainty (`D`, `E_A`, `E_B1` zero with one channel).
    pub fn nominal(a: DMatrix<f64>, b1: DMatrix<f64>, b2: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let m = b1.ncols();
        Self::new(a, b1, b2, c, DMatrix::zeros(n, 1), DMatrix::zeros(1, n), DMatrix::zeros(1, m), 0.0)
    }

    fn check_dims(&self) -> Result<()> {
        let n = self.a.nrows();
        let dim = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Error::Dimension(what.to_string())) };
        dim(self.a.ncols() == n && n > 0, "A must be square and nonempty")?;
        dim(self.b1.nrows() == n, "B1 rows must equal n")?;
        dim(self.b2.nrows() == n, "B2 rows must equal n")?;
        dim(self.c.ncols() == n, "C columns must equal n")?;
        dim(self.d.nrows() == n, "D rows must equal n")?;
        dim(self.e_a.ncols() == n, "E_A columns must equal n")?;
        dim(self.e_b1.ncols() == self.b1.ncols(), "E_B1 columns must equal m")?;
        dim(self.e_b1.nrows() == self.e_a.nrows(), "E_A and E_B1 row counts differ")?;
        for m in [&self.a, &self.b1, &self.b2, &self.c, &self.d, &self.e_a, &self.e_b1] {
            crate::matops::check_finite(m)?;
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::Invalid(format!("rho must be a finite nonnegative number, got {}", self.rho)));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b1.ncols()
    }
    pub fn p(&self) -> usize {
        self.b2.ncols()
    }
    pub fn q(&self) -> usize {
        self.c.nrows()
    }
    /// Column count of Δ's input side (`D` is n×i).
    pub fn i_dim(&self) -> usize {
        self.d.ncols()
    }
    /// Row count of `E_A`.
    pub fn j_dim(&self) -> usize {
        self.e_a.nrows()
    }

    /// Checks that (A, B1) is controllable and (A, C) detectable.
    pub fn check_structure(&self) -> Result<()> {
        let tol = 1e-9 * self.a.norm().max(1.0);
        let ctrb = pbh_margin(&self.a, &self.b1, false);
        if ctrb <= tol {
            return Err(Error::NotStabilizable(format!("(A, B1) not controllable, PBH margin {ctrb:.3e}")));
        }
        let det = pbh_margin(&self.a.transpose(), &self.c.transpose(), true);
        if det <= tol {
            return Err(Error::NotStabilizable(format!("(A, C) not detectable, PBH margin {det:.3e}")));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: LtiFile = serde_json::from_str(s)?;
        let a = serde_mat::from_rows(&f.a, 0)?;
        let n = a.nrows();
        let b1 = serde_mat::from_rows(&f.b1, 0)?;
        let e_b1 = serde_mat::from_rows(&f.e_b1, b1.ncols())?;
        Self::new(
            a,
            b1,
            serde_mat::from_rows(&f.b2, 0)?,
            serde_mat::from_rows(&f.c, n)?,
            serde_mat::from_rows(&f.d, 0)?,
            serde_mat::from_rows(&f.e_a, n)?,
            e_b1,
            f.rho,
        )
    }

    pub fn to_json_string(&self) -> String {
        let f = LtiFile {
            a: serde_mat::to_rows(&self.a),
            b1: serde_mat::to_rows(&self.b1),
            b2: serde_mat::to_rows(&self.b2),
            c: serde_mat::to_rows(&self.c),
            d: serde_mat::to_rows(&self.d),
            e_a: serde_mat::to_rows(&self.e_a),
            e_b1: serde_mat::to_rows(&self.e_b1),
            rho: self.rho,
        };
        serde_json::to_string_pretty(&f).expect("plain data serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// `A + DΔE_A + (B1 + DΔE_B1) K C` for a given Δ and gain.
    pub fn closed_loop_a(&self, k: &DMatrix<f64>, delta: Option<&DMatrix<f64>>) -> DMatrix<f64> {
        let mut a = &self.a + &self.b1 * k * &self.c;
        if let Some(dl) = delta {
            a += &self.d * dl * (&self.e_a + &self.e_b1 * k * &self.c);
        }
        a
    }
}

/// Admissible gains: pattern mask plus entrywise box.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureSet {
    pub pattern: DMatrix<bool>,
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct StructureFile {
    pattern: Vec<Vec<bool>>,
    /// `null` stands for an infinite bound.
    lower: Vec<Vec<Option<f64>>>,
    upper: Vec<Vec<Option<f64>>>,
}

impl StructureSet {
    pub fn new(pattern: DMatrix<bool>, lower: DMatrix<f64>, upper: DMatrix<f64>) -> Result<Self> {
        let shape = pattern.shape();
        if lower.shape() != shape || upper.shape() != shape {
            return Err(Error::Dimension("structure bounds must match the pattern shape".into()));
        }
        for (l, u) in lower.iter().zip(upper.iter()) {
            if l.is_nan() || u.is_nan() || l > u {
                return Err(Error::Invalid(format!("bad bounds [{l}, {u}]")));
            }
        }
        Ok(StructureSet { pattern, lower, upper })
    }

    /// Every entry allowed, no bounds.
    pub fn full(m: usize, q: usize) -> Self {
        StructureSet {
            pattern: DMatrix::from_element(m, q, true),
            lower: DMatrix::from_element(m, q, f64::NEG_INFINITY),
            upper: DMatrix::from_element(m, q, f64::INFINITY),
        }
    }

    pub fn from_pattern(pattern: DMatrix<bool>) -> Self {
        let (m, q) = pattern.shape();
        StructureSet {
            pattern,
            lower: DMatrix::from_element(m, q, f64::NEG_INFINITY),
            upper: DMatrix::from_element(m, q, f64::INFINITY),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.pattern.shape()
    }

    pub fn contains(&self, k: &DMatrix<f64>) -> bool {
        k.shape() == self.shape()
            && k.iter().enumerate().all(|(t, &v)| {
                if self.pattern[t] {
                    v >= self.lower[t] && v <= self.upper[t]
                } else {
                    v == 0.0
                }
            })
    }

    /// Whether zero is an admissible value of entry `(i, j)`.
    pub fn admits_zero(&self, i: usize, j: usize) -> bool {
        !self.pattern[(i, j)] || (self.lower[(i, j)] <= 0.0 && self.upper[(i, j)] >= 0.0)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: StructureFile = serde_json::from_str(s)?;
        let m = f.pattern.len();
        let q = f.pattern.first().map_or(0, |r| r.len());
        let ok = |rows: usize, cols: &dyn Fn(usize) -> usize| rows == m && (0..m).all(|i| cols(i) == q);
        if !ok(f.pattern.len(), &|i| f.pattern[i].len())
            || !ok(f.lower.len(), &|i| f.lower[i].len())
            || !ok(f.upper.len(), &|i| f.upper[i].len())
        {
            return Err(Error::Dimension("structure set arrays must share one m×q shape".into()));
        }
        Self::new(
            DMatrix::from_fn(m, q, |i, j| f.pattern[i][j]),
            DMatrix::from_fn(m, q, |i, j| f.lower[i][j].unwrap_or(f64::NEG_INFINITY)),
            DMatrix::from_fn(m, q, |i, j| f.upper[i][j].unwrap_or(f64::INFINITY)),
        )
    }

    pub fn to_json_string(&self) -> String {
        let (m, q) = self.shape();
        let fin = |v: f64| v.is_finite().then_some(v);
        let f = StructureFile {
            pattern: (0..m).map(|i| (0..q).map(|j| self.pattern[(i, j)]).collect()).collect(),
            lower: (0..m).map(|i| (0..q).map(|j| fin(self.lower[(i, j)])).collect()).collect(),
            upper: (0..m).map(|i| (0..q).map(|j| fin(self.upper[(i, j)])).collect()).collect(),
        };
        serde_json::to_string_pretty(&f).expect("plain data serializes")
    }
}

/// Zeroes disallowed entries and clamps the rest into their bounds.
pub fn project_structure(k: &DMatrix<f64>, s: &StructureSet) -> DMatrix<f64> {
    assert_eq!(k.shape(), s.shape(), "gain and structure set shapes differ");
    DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| {
        if s.pattern[(i, j)] {
            k[(i, j)].clamp(s.lower[(i, j)], s.upper[(i, j)])
        } else {
            0.0
        }
    })
}

/// Error system between the uncertain loop closed with `K` and the nominal
/// loop closed with `K̂`. The uncertain state matrix is `a_bar + d_bar Δ e_bar`.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    pub a_bar: DMatrix<f64>,
    pub b_bar: DMatrix<f64>,
    pub c_bar: DMatrix<f64>,
    pub d_bar: DMatrix<f64>,
    pub e_bar: DMatrix<f64>,
}

impl AugmentedSystem {
    pub fn a_with(&self, delta: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a_bar + &self.d_bar * delta * &self.e_bar
    }
}

fn check_gain(sys: &UncertainLti, k: &DMatrix<f64>, what: &str) -> Result<()> {
    if k.shape() != (sys.m(), sys.q()) {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, expected {}x{}",
            k.nrows(),
            k.ncols(),
            sys.m(),
            sys.q()
        )));
    }
    crate::matops::check_finite(k)
}

pub fn augment(sys: &UncertainLti, k_hat: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<AugmentedSystem> {
    check_gain(sys, k_hat, "K_hat")?;
    check_gain(sys, k, "K")?;
    let n = sys.n();
    let mut a_bar = DMatrix::zeros(2 * n, 2 * n);
    a_bar.view_mut((0, 0), (n, n)).copy_from(&sys.closed_loop_a(k, None));
    a_bar.view_mut((n, n), (n, n)).copy_from(&sys.closed_loop_a(k_hat, None));
    let mut b_bar = DMatrix::zeros(2 * n, sys.p());
    b_bar.view_mut((0, 0), (n, sys.p())).copy_from(&sys.b2);
    b_bar.view_mut((n, 0), (n, sys.p())).copy_from(&sys.b2);
    let mut c_bar = DMatrix::zeros(sys.q(), 2 * n);
    c_bar.view_mut((0, 0), (sys.q(), n)).copy_from(&sys.c);
    c_bar.view_mut((0, n), (sys.q(), n)).copy_from(&(-&sys.c));
    let mut d_bar = DMatrix::zeros(2 * n, sys.i_dim());
    d_bar.view_mut((0, 0), (n, sys.i_dim())).copy_from(&sys.d);
    let mut e_bar = DMatrix::zeros(sys.j_dim(), 2 * n);
    e_bar
        .view_mut((0, 0), (sys.j_dim(), n))
        .copy_from(&(&sys.e_a + &sys.e_b1 * k * &sys.c));
    Ok(AugmentedSystem {
        a_bar,
        b_bar,
        c_bar,
        d_bar,
        e_bar,
    })
}

/// Stacked matrices of the corollary LMI problem.
#[derive(Debug, Clone)]
pub struct ClosedLoopData {
    pub a_o: DMatrix<f64>,
    pub b_k: DMatrix<f64>,
    pub c_k: DMatrix<f64>,
    pub e_o: DMatrix<f64>,
    pub d_bar: DMatrix<f64>,
    pub k_hat: DMatrix<f64>,
    pub b_bar: DMatrix<f64>,
    pub c_bar: DMatrix<f64>,
    pub e_b1: DMatrix<f64>,
    pub rho: f64,
    pub n: usize,
    pub m: usize,
    pub q: usize,
}

impl ClosedLoopData {
    /// Order of the augmented state, `2n`.
    pub fn big_n(&self) -> usize {
        2 * self.n
    }
    pub fn p(&self) -> usize {
        self.b_bar.ncols()
    }
    pub fn i_dim(&self) -> usize {
        self.d_bar.ncols()
    }
    pub fn j_dim(&self) -> usize {
        self.e_o.nrows()
    }
}

pub fn closed_loop_data(sys: &UncertainLti, k_hat: &DMatrix<f64>) -> Result<ClosedLoopData> {
    check_gain(sys, k_hat, "K_hat")?;
    let (n, m, q, p) = (sys.n(), sys.m(), sys.q(), sys.p());
    let mut a_o = DMatrix::zeros(2 * n, 2 * n);
    a_o.view_mut((0, 0), (n, n)).copy_from(&sys.a);
    a_o.view_mut((n, n), (n, n)).copy_from(&sys.closed_loop_a(k_hat, None));
    let mut b_k = DMatrix::zeros(2 * n, m);
    b_k.view_mut((0, 0), (n, m)).copy_from(&sys.b1);
    let mut c_k = DMatrix::zeros(q, 2 * n);
    c_k.view_mut((0, 0), (q, n)).copy_from(&sys.c);
    let mut e_o = DMatrix::zeros(sys.j_dim(), 2 * n);
    e_o.view_mut((0, 0), (sys.j_dim(), n)).copy_from(&sys.e_a);
    let mut d_bar = DMatrix::zeros(2 * n, sys.i_dim());
    d_bar.view_mut((0, 0), (n, sys.i_dim())).copy_from(&sys.d);
    let mut b_bar = DMatrix::zeros(2 * n, p);
    b_bar.view_mut((0, 0), (n, p)).copy_from(&sys.b2);
    b_bar.view_mut((n, 0), (n, p)).copy_from(&sys.b2);
    let mut c_bar = DMatrix::zeros(q, 2 * n);
    c_bar.view_mut((0, 0), (q, n)).copy_from(&sys.c);
    c_bar.view_mut((0, n), (q, n)).copy_from(&(-&sys.c));
    Ok(ClosedLoopData {
        a_o,
        b_k,
        c_k,
        e_o,
        d_bar,
        k_hat: k_hat.clone(),
        b_bar,
        c_bar,
        e_b1: sys.e_b1.clone(),
        rho: sys.rho,
        n,
        m,
        q,
    })
}

/// JSON form of a gain matrix, shared by the CLI and tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainFile {
    #[serde(rename = "K", with = "serde_mat")]
    pub k: DMatrix<f64>,
}
