//! Affine expressions over the scalar variables of a [`ConicProgram`].
//!
//! [`ConicProgram`]: super::ConicProgram

use nalgebra::DMatrix;

/// `Σ coef·x[idx] + constant`, terms kept sorted by index with no repeats.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(idx: usize) -> Self {
        LinExpr {
            terms: vec![(idx, 1.0)],
            constant: 0.0,
        }
    }

    pub fn from_terms(mut terms: Vec<(usize, f64)>, constant: f64) -> Self {
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (i, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        LinExpr {
            terms: merged,
            constant,
        }
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    pub fn scaled(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zero();
        }
        LinExpr {
            terms: self.terms.iter().map(|&(i, c)| (i, c * s)).collect(),
            constant: self.constant * s,
        }
    }

    /// `self += s·other`, merging sorted term lists.
    pub fn add_scaled(&mut self, other: &LinExpr, s: f64) {
        if s == 0.0 {
            return;
        }
        self.constant += s * other.constant;
        if other.terms.is_empty() {
            return;
        }
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut a, mut b) = (0, 0);
        while a < self.terms.len() || b < other.terms.len() {
            let take_a = b >= other.terms.len()
                || (a < self.terms.len() && self.terms[a].0 < other.terms[b].0);
            let take_b = a >= self.terms.len()
                || (b < other.terms.len() && other.terms[b].0 < self.terms[a].0);
            if take_a {
                out.push(self.terms[a]);
                a += 1;
            } else if take_b {
                out.push((other.terms[b].0, s * other.terms[b].1));
                b += 1;
            } else {
                let c = self.terms[a].1 + s * other.terms[b].1;
                if c != 0.0 {
                    out.push((self.terms[a].0, c));
                }
                a += 1;
                b += 1;
            }
        }
        self.terms = out;
    }

    pub fn add_term(&mut self, idx: usize, coef: f64) {
        self.add_scaled(&LinExpr::var(idx), coef);
    }
}

impl std::ops::Add<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn add(self, rhs: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl std::ops::Sub<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

/// Dense matrix of affine expressions (column-major storage).
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMat {
    rows: usize,
    cols: usize,
    data: Vec<LinExpr>,
}

impl ExprMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ExprMat {
            rows,
            cols,
            data: vec![LinExpr::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> LinExpr) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        ExprMat { rows, cols, data }
    }

    pub fn constant(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| LinExpr::constant(m[(i, j)]))
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &LinExpr {
        &self.data[j * self.rows + i]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut LinExpr {
        &mut self.data[j * self.rows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, e: LinExpr) {
        self.data[j * self.rows + i] = e;
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j).scaled(s))
    }

    pub fn add(&self, other: &ExprMat) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn sub(&self, other: &ExprMat) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn add_constant(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!((self.rows, self.cols), (m.nrows(), m.ncols()));
        Self::from_fn(self.rows, self.cols, |i, j| {
            let mut e = self.get(i, j).clone();
            e.constant += m[(i, j)];
            e
        })
    }

    /// `C · self` for a constant matrix `C`.
    pub fn left_mul(&self, c: &DMatrix<f64>) -> Self {
        assert_eq!(c.ncols(), self.rows);
        Self::from_fn(c.nrows(), self.cols, |i, j| {
            let mut acc = LinExpr::zero();
            for l in 0..self.rows {
                acc.add_scaled(self.get(l, j), c[(i, l)]);
            }
            acc
        })
    }

    /// `self · C` for a constant matrix `C`.
    pub fn right_mul(&self, c: &DMatrix<f64>) -> Self {
        assert_eq!(c.nrows(), self.cols);
        Self::from_fn(self.rows, c.ncols(), |i, j| {
            let mut acc = LinExpr::zero();
            for l in 0..self.cols {
                acc.add_scaled(self.get(i, l), c[(l, j)]);
            }
            acc
        })
    }

    /// `self + selfᵀ`.
    pub fn sym_sum(&self) -> Self {
        assert_eq!(self.rows, self.cols);
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + self.get(j, i))
    }

    pub fn trace(&self) -> LinExpr {
        let mut acc = LinExpr::zero();
        for i in 0..self.rows.min(self.cols) {
            acc.add_scaled(self.get(i, i), 1.0);
        }
        acc
    }

    /// Places `block` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &ExprMat) {
        for j in 0..block.cols {
            for i in 0..block.rows {
                self.set(r0 + i, c0 + j, block.get(i, j).clone());
            }
        }
    }

    /// Places `block` at `(r0, c0)` and its transpose at `(c0, r0)`.
    pub fn set_sym_block(&mut self, r0: usize, c0: usize, block: &ExprMat) {
        self.set_block(r0, c0, block);
        if r0 != c0 {
            self.set_block(c0, r0, &block.transpose());
        }
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(x))
    }

    /// `Σ_ij W_ij · self_ij`, i.e. `Tr(Wᵀ · self)`.
    pub fn inner(&self, w: &DMatrix<f64>) -> LinExpr {
        assert_eq!((self.rows, self.cols), (w.nrows(), w.ncols()));
        let mut acc = LinExpr::zero();
        for j in 0..self.cols {
            for i in 0..self.rows {
                acc.add_scaled(self.get(i, j), w[(i, j)]);
            }
        }
        acc
    }

    /// True when `self_ij` and `self_ji` are the same expression.
    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        (0..self.rows).all(|j| (j + 1..self.rows).all(|i| self.get(i, j) == self.get(j, i)))
    }
}
