//! Vector and matrix containers of expressions with shape-checked algebra.

use super::{Expr, SymError};

#[derive(Clone, Debug)]
pub struct VecExpr {
    entries: Vec<Expr>,
}

impl VecExpr {
    pub fn new(entries: Vec<Expr>) -> Self {
        Self { entries }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![Expr::zero(); n])
    }

    pub fn from_constants(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&v| Expr::constant(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> &Expr {
        &self.entries[i]
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Expr> {
        self.entries
    }

    pub fn map(&self, f: impl FnMut(&Expr) -> Expr) -> VecExpr {
        VecExpr::new(self.entries.iter().map(f).collect())
    }

    pub fn scale(&self, s: &Expr) -> VecExpr {
        self.map(|e| s * e)
    }

    fn check_len(&self, other: &VecExpr) -> Result<(), SymError> {
        if self.len() != other.len() {
            return Err(SymError::Shape {
                op: "vector",
                lhs: (self.len(), 1),
                rhs: (other.len(), 1),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &VecExpr) -> Result<VecExpr, SymError> {
        self.check_len(other)?;
        Ok(VecExpr::new(
            self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &VecExpr) -> Result<VecExpr, SymError> {
        self.check_len(other)?;
        Ok(VecExpr::new(
            self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn neg(&self) -> VecExpr {
        self.map(|e| -e)
    }

    pub fn dot(&self, other: &VecExpr) -> Result<Expr, SymError> {
        self.check_len(other)?;
        Ok(self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum())
    }

    pub fn squared_norm(&self) -> Expr {
        self.entries.iter().map(|e| e * e).sum()
    }

    /// `sqrt(|v|^2 + EPS_NORM)`; finite derivative at the origin.
    pub fn norm(&self) -> Expr {
        (self.squared_norm() + super::EPS_NORM).sqrt()
    }
}

impl std::ops::Index<usize> for VecExpr {
    type Output = Expr;
    fn index(&self, i: usize) -> &Expr {
        &self.entries[i]
    }
}

/// Row-major matrix of expressions.
#[derive(Clone, Debug)]
pub struct MatExpr {
    rows: usize,
    cols: usize,
    data: Vec<Expr>,
}

impl MatExpr {
    pub fn new(rows: usize, cols: usize, data: Vec<Expr>) -> Result<Self, SymError> {
        if data.len() != rows * cols {
            return Err(SymError::Shape {
                op: "matrix construction",
                lhs: (rows, cols),
                rhs: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Expr) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a symmetric matrix from the upper triangle; `(j, i)` reuses
    /// the node built for `(i, j)`.
    pub fn symmetric_from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Expr) -> Self {
        let mut data = vec![Expr::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let e = f(i, j);
                data[j * n + i] = e.clone();
                data[i * n + j] = e;
            }
        }
        Self { rows: n, cols: n, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| Expr::zero())
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, &Expr::one())
    }

    pub fn scaled_identity(n: usize, s: &Expr) -> Self {
        Self::symmetric_from_fn(n, |i, j| if i == j { s.clone() } else { Expr::zero() })
    }

    pub fn diagonal(d: &[Expr]) -> Self {
        Self::symmetric_from_fn(d.len(), |i, j| if i == j { d[i].clone() } else { Expr::zero() })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.data[i * self.cols + j]
    }

    pub fn entries(&self) -> &[Expr] {
        &self.data
    }

    pub fn row(&self, i: usize) -> VecExpr {
        VecExpr::new(self.data[i * self.cols..(i + 1) * self.cols].to_vec())
    }

    pub fn transpose(&self) -> MatExpr {
        MatExpr::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    /// True when every mirrored pair is the same node.
    pub fn is_structurally_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| self.get(i, j).ptr_eq(self.get(j, i))))
    }

    pub fn add(&self, other: &MatExpr) -> Result<MatExpr, SymError> {
        if self.shape() != other.shape() {
            return Err(SymError::Shape {
                op: "matrix add",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        if self.is_structurally_symmetric() && other.is_structurally_symmetric() {
            return Ok(MatExpr::symmetric_from_fn(self.rows, |i, j| {
                self.get(i, j) + other.get(i, j)
            }));
        }
        Ok(MatExpr::from_fn(self.rows, self.cols, |i, j| {
            self.get(i, j) + other.get(i, j)
        }))
    }

    pub fn scale(&self, s: &Expr) -> MatExpr {
        MatExpr {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|e| s * e).collect(),
        }
    }

    pub fn matmul(&self, other: &MatExpr) -> Result<MatExpr, SymError> {
        if self.cols != other.rows {
            return Err(SymError::Shape {
                op: "matmul",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        Ok(MatExpr::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).map(|k| self.get(i, k) * other.get(k, j)).sum()
        }))
    }

    pub fn mul_vec(&self, v: &VecExpr) -> Result<VecExpr, SymError> {
        if self.cols != v.len() {
            return Err(SymError::Shape {
                op: "matrix-vector",
                lhs: self.shape(),
                rhs: (v.len(), 1),
            });
        }
        Ok(VecExpr::new(
            (0..self.rows)
                .map(|i| (0..self.cols).map(|k| self.get(i, k) * v.get(k)).sum())
                .collect(),
        ))
    }

    /// `Aᵀ v`.
    pub fn tr_mul_vec(&self, v: &VecExpr) -> Result<VecExpr, SymError> {
        if self.rows != v.len() {
            return Err(SymError::Shape {
                op: "transpose-matrix-vector",
                lhs: (self.cols, self.rows),
                rhs: (v.len(), 1),
            });
        }
        Ok(VecExpr::new(
            (0..self.cols)
                .map(|j| (0..self.rows).map(|k| self.get(k, j) * v.get(k)).sum())
                .collect(),
        ))
    }

    /// Congruence `Aᵀ S A` with a symmetric result.
    pub fn congruence(&self, s: &MatExpr) -> Result<MatExpr, SymError> {
        if s.rows != s.cols || s.rows != self.rows {
            return Err(SymError::Shape {
                op: "congruence",
                lhs: self.shape(),
                rhs: s.shape(),
            });
        }
        let sa = s.matmul(self)?;
        Ok(MatExpr::symmetric_from_fn(self.cols, |i, j| {
            (0..self.rows).map(|k| self.get(k, i) * sa.get(k, j)).sum()
        }))
    }

    /// Closed-form inverse through the adjugate, for n ≤ 3.
    pub fn inverse_small(&self) -> Result<MatExpr, SymError> {
        if self.rows != self.cols {
            return Err(SymError::Shape {
                op: "inverse",
                lhs: self.shape(),
                rhs: self.shape(),
            });
        }
        let a = |i: usize, j: usize| self.get(i, j).clone();
        match self.rows {
            1 => Ok(MatExpr::from_fn(1, 1, |_, _| 1.0 / a(0, 0))),
            2 => {
                let det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
                let inv = MatExpr::from_fn(2, 2, |i, j| match (i, j) {
                    (0, 0) => a(1, 1),
                    (0, 1) => -a(0, 1),
                    (1, 0) => -a(1, 0),
                    _ => a(0, 0),
                });
                Ok(inv.scale(&(1.0 / det)))
            }
            3 => {
                let cof = |i: usize, j: usize| {
                    let r: Vec<usize> = (0..3).filter(|&k| k != i).collect();
                    let c: Vec<usize> = (0..3).filter(|&k| k != j).collect();
                    let minor = a(r[0], c[0]) * a(r[1], c[1]) - a(r[0], c[1]) * a(r[1], c[0]);
                    if (i + j) % 2 == 0 {
                        minor
                    } else {
                        -minor
                    }
                };
                let det: Expr = (0..3).map(|j| a(0, j) * cof(0, j)).sum();
                let inv_det = 1.0 / det;
                // adjugate is the transposed cofactor matrix
                Ok(MatExpr::from_fn(3, 3, |i, j| cof(j, i) * &inv_det))
            }
            n => Err(SymError::InverseTooLarge(n)),
        }
    }
}
