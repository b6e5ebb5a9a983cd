//! Linearized swing-equation networks: model, link uncertainty, LQR baseline.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::matops::{solve_care, SymMatrix};
use crate::system::UncertainLti;
use crate::{serde_mat, Error, Result};

/// Generators with per-unit inertia and damping, coupled by a Kron-reduced
/// susceptance matrix. States are ordered `[θ; ω]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerNetwork {
    pub n_gen: usize,
    pub inertia: Vec<f64>,
    pub damping: Vec<f64>,
    #[serde(with = "serde_mat")]
    pub b_kron: DMatrix<f64>,
    #[serde(default)]
    pub labels: Vec<String>,
    /// Equilibrium angles and speeds; metadata only, the model is
    /// equilibrium-relative.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<Vec<f64>>,
    /// Free-form provenance note carried through unchanged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl PowerNetwork {
    pub fn new(inertia: Vec<f64>, damping: Vec<f64>, b_kron: DMatrix<f64>) -> Result<Self> {
        let n_gen = inertia.len();
        let labels = (1..=n_gen).map(|i| format!("G{i}")).collect();
        let net = PowerNetwork {
            n_gen,
            inertia,
            damping,
            b_kron,
            labels,
            theta0: None,
            omega0: None,
            note: None,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_gen;
        if n == 0 {
            return Err(Error::Invalid("network needs at least one generator".into()));
        }
        if self.inertia.len() != n || self.damping.len() != n {
            return Err(Error::Dimension("inertia and damping need n_gen entries".into()));
        }
        if !self.labels.is_empty() && self.labels.len() != n {
            return Err(Error::Dimension("labels need n_gen entries".into()));
        }
        if self.inertia.iter().chain(&self.damping).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Invalid("inertia and damping must be positive".into()));
        }
        check_susceptance(&self.b_kron, n)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let mut net: PowerNetwork = serde_json::from_str(s)?;
        if net.labels.is_empty() {
            net.labels = (1..=net.n_gen).map(|i| format!("G{i}")).collect();
        }
        net.validate()?;
        Ok(net)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    /// Unordered generator pairs `(i, j)`, `i < j`, 0-based.
    pub fn links(&self) -> Vec<(usize, usize)> {
        (0..self.n_gen).flat_map(|i| (i + 1..self.n_gen).map(move |j| (i, j))).collect()
    }
}

fn check_susceptance(b: &DMatrix<f64>, n: usize) -> Result<()> {
    if b.shape() != (n, n) {
        return Err(Error::Dimension("b_kron must be n_gen × n_gen".into()));
    }
    crate::matops::check_finite(b)?;
    for i in 0..n {
        if b[(i, i)] != 0.0 {
            return Err(Error::Invalid("b_kron must have a zero diagonal".into()));
        }
        for j in 0..i {
            if b[(i, j)] != b[(j, i)] {
                return Err(Error::Invalid(format!("b_kron is not symmetric at ({i},{j})")));
            }
            if b[(i, j)] < 0.0 {
                return Err(Error::Invalid("b_kron must be nonnegative".into()));
            }
        }
    }
    Ok(())
}

/// `l_ij = −b_ij`, `l_ii = Σ_{k≠i} b_ik`.
pub fn laplacian_from_kron(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !b.is_square() {
        return Err(Error::Dimension("b_kron must be square".into()));
    }
    let n = b.nrows();
    check_susceptance(b, n)?;
    let mut l = -b.clone();
    for i in 0..n {
        l[(i, i)] = (0..n).filter(|&k| k != i).map(|k| b[(i, k)]).sum();
    }
    Ok(l)
}

/// `A = [[0, I], [−M⁻¹L, −M⁻¹D]]`, `B1 = B2 = [0; M⁻¹]`, `C = I`, no uncertainty.
pub fn swing_model(net: &PowerNetwork) -> Result<UncertainLti> {
    net.validate()?;
    let g = net.n_gen;
    let l = laplacian_from_kron(&net.b_kron)?;
    let mut a = DMatrix::zeros(2 * g, 2 * g);
    let mut b = DMatrix::zeros(2 * g, g);
    for i in 0..g {
        a[(i, g + i)] = 1.0;
        let mi = 1.0 / net.inertia[i];
        for j in 0..g {
            a[(g + i, j)] = -mi * l[(i, j)];
        }
        a[(g + i, g + i)] = -mi * net.damping[i];
        b[(g + i, i)] = mi;
    }
    UncertainLti::nominal(a, b.clone(), b, DMatrix::identity(2 * g, 2 * g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkUncertainty {
    pub i1: usize,
    pub i2: usize,
    pub rho_rel: f64,
    pub rho: f64,
    /// True when `b_{i1 i2} = 0` and the degree-based fallback set `rho`.
    pub fallback: bool,
    pub d: DMatrix<f64>,
    pub e_a: DMatrix<f64>,
    pub e_b1: DMatrix<f64>,
}

impl LinkUncertainty {
    /// Copies the uncertainty into a plant built by [`swing_model`].
    pub fn apply(&self, sys: &UncertainLti) -> Result<UncertainLti> {
        UncertainLti::new(
            sys.a.clone(),
            sys.b1.clone(),
            sys.b2.clone(),
            sys.c.clone(),
            self.d.clone(),
            self.e_a.clone(),
            self.e_b1.clone(),
            self.rho,
        )
    }
}

/// Scalar uncertainty on the link between generators `i1` and `i2` (0-based).
///
/// `D = −[0; M⁻¹](e_{i1+N} − e_{i2+N})`, `E_A = (e_{i1+N} − e_{i2+N})ᵀ`,
/// `E_B1 = 0`, `ρ = ρ_rel b_{i1 i2}`, or `ρ_rel min(deg i1, deg i2)` when the
/// link itself has zero susceptance.
pub fn link_uncertainty(net: &PowerNetwork, i1: usize, i2: usize, rho_rel: f64) -> Result<LinkUncertainty> {
    let g = net.n_gen;
    if i1 == i2 {
        return Err(Error::Invalid("uncertain link needs two distinct generators".into()));
    }
    if i1 >= g || i2 >= g {
        return Err(Error::Dimension(format!("generator index out of range 0..{g}")));
    }
    if !(rho_rel.is_finite() && rho_rel >= 0.0) {
        return Err(Error::Invalid("rho_rel must be nonnegative".into()));
    }
    let b = &net.b_kron;
    let (base, fallback) = if b[(i1, i2)] > 0.0 {
        (b[(i1, i2)], false)
    } else {
        let deg = |i: usize| (0..g).filter(|&k| k != i).map(|k| b[(i, k)]).sum::<f64>();
        (deg(i1).min(deg(i2)), true)
    };
    let mut d = DMatrix::zeros(2 * g, 1);
    d[(g + i1, 0)] = -1.0 / net.inertia[i1];
    d[(g + i2, 0)] = 1.0 / net.inertia[i2];
    let mut e_a = DMatrix::zeros(1, 2 * g);
    e_a[(0, g + i1)] = 1.0;
    e_a[(0, g + i2)] = -1.0;
    Ok(LinkUncertainty {
        i1,
        i2,
        rho_rel,
        rho: rho_rel * base,
        fallback,
        d,
        e_a,
        e_b1: DMatrix::zeros(1, g),
    })
}

/// LQR gain for `u = K̂x`: `K̂ = −R⁻¹B1ᵀP`.
pub fn lqr_baseline(sys: &UncertainLti, q: &SymMatrix, r: &SymMatrix) -> Result<DMatrix<f64>> {
    let p = solve_care(&sys.a, &sys.b1, q, r)?;
    let r_inv = r
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Invalid("R must be positive definite".into()))?
        .inverse();
    Ok(-(r_inv * sys.b1.transpose() * p.as_matrix()))
}

/// Row-major CSV without header, for inspecting `L` or `A`.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.12e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
