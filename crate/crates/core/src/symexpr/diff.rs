use std::collections::HashMap;

use super::{BinaryOp, Expr, ExprKind, MatExpr, SymError, UnaryOp, VecExpr};

/// Partial derivative of `e` with respect to the input node `var`.
///
/// `sign` differentiates to zero everywhere and `abs` to `sign(x)`.
pub fn differentiate(e: &Expr, var: &Expr) -> Result<Expr, SymError> {
    let (group, index) = var.as_input().ok_or(SymError::NotAnInput)?;
    let mut d = Differentiator {
        group,
        index,
        memo: HashMap::new(),
    };
    Ok(d.run(e))
}

/// `J[i][j] = ∂v[i]/∂q[j]`.
pub fn jacobian(v: &VecExpr, q: &[Expr]) -> Result<MatExpr, SymError> {
    let mut cols = Vec::with_capacity(q.len());
    for var in q {
        let (group, index) = var.as_input().ok_or(SymError::NotAnInput)?;
        // one memo per variable, shared across the rows
        let mut d = Differentiator {
            group,
            index,
            memo: HashMap::new(),
        };
        cols.push(v.entries().iter().map(|e| d.run(e)).collect::<Vec<_>>());
    }
    Ok(MatExpr::from_fn(v.len(), q.len(), |i, j| cols[j][i].clone()))
}

/// Gradient of a scalar as a vector over `q`.
pub fn gradient(e: &Expr, q: &[Expr]) -> Result<VecExpr, SymError> {
    Ok(jacobian(&VecExpr::new(vec![e.clone()]), q)?.row(0))
}

struct Differentiator<'a> {
    group: &'a str,
    index: usize,
    memo: HashMap<u64, Expr>,
}

impl Differentiator<'_> {
    fn run(&mut self, e: &Expr) -> Expr {
        if let Some(d) = self.memo.get(&e.id()) {
            return d.clone();
        }
        let d = match e.kind() {
            ExprKind::Constant(_) => Expr::zero(),
            ExprKind::Input { group, index } => {
                if &**group == self.group && *index == self.index {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            ExprKind::Unary(op, x) => {
                let dx = self.run(x);
                if dx.is_zero() {
                    Expr::zero()
                } else {
                    match op {
                        UnaryOp::Neg => -dx,
                        UnaryOp::Tanh => (1.0 - e * e) * dx,
                        UnaryOp::Exp => e * dx,
                        UnaryOp::Log => dx / x,
                        UnaryOp::Sqrt => dx / (2.0 * e),
                        UnaryOp::Sign => Expr::zero(),
                        UnaryOp::Abs => x.sign() * dx,
                        UnaryOp::Sin => x.cos() * dx,
                        UnaryOp::Cos => -(x.sin()) * dx,
                    }
                }
            }
            ExprKind::Binary(op, a, b) => {
                let da = self.run(a);
                let db = self.run(b);
                match op {
                    BinaryOp::Add => da + db,
                    BinaryOp::Sub => da - db,
                    BinaryOp::Mul => da * b + a * db,
                    BinaryOp::Div => {
                        if db.is_zero() {
                            da / b
                        } else {
                            (da * b - a * db) / (b * b)
                        }
                    }
                    BinaryOp::Pow => {
                        // d(a^b) = b a^(b-1) da + a^b ln(a) db; zero terms are
                        // skipped so ln(a) never appears for constant exponents
                        let base_term = if da.is_zero() {
                            Expr::zero()
                        } else {
                            b * a.powf(b - 1.0) * da
                        };
                        let exp_term = if db.is_zero() {
                            Expr::zero()
                        } else {
                            e * a.ln() * db
                        };
                        base_term + exp_term
                    }
                }
            }
        };
        self.memo.insert(e.id(), d.clone());
        d
    }
}

/// Replaces input nodes according to `map` (keyed by `(group, index)`).
/// Subtrees without replaced inputs keep their original nodes.
pub fn substitute(e: &Expr, map: &HashMap<(String, usize), Expr>) -> Expr {
    let mut memo = HashMap::new();
    substitute_rec(e, map, &mut memo)
}

pub fn substitute_vec(v: &VecExpr, map: &HashMap<(String, usize), Expr>) -> VecExpr {
    let mut memo = HashMap::new();
    v.map(|e| substitute_rec(e, map, &mut memo))
}

pub fn substitute_mat(m: &MatExpr, map: &HashMap<(String, usize), Expr>) -> MatExpr {
    let mut memo = HashMap::new();
    let symmetric = m.is_structurally_symmetric();
    if symmetric {
        MatExpr::symmetric_from_fn(m.rows(), |i, j| substitute_rec(m.get(i, j), map, &mut memo))
    } else {
        MatExpr::from_fn(m.rows(), m.cols(), |i, j| {
            substitute_rec(m.get(i, j), map, &mut memo)
        })
    }
}

fn substitute_rec(
    e: &Expr,
    map: &HashMap<(String, usize), Expr>,
    memo: &mut HashMap<u64, Expr>,
) -> Expr {
    if let Some(done) = memo.get(&e.id()) {
        return done.clone();
    }
    let out = match e.kind() {
        ExprKind::Constant(_) => e.clone(),
        ExprKind::Input { group, index } => map
            .get(&(group.to_string(), *index))
            .cloned()
            .unwrap_or_else(|| e.clone()),
        ExprKind::Unary(op, x) => {
            let nx = substitute_rec(x, map, memo);
            if nx.ptr_eq(x) {
                e.clone()
            } else {
                Expr::unary(*op, nx)
            }
        }
        ExprKind::Binary(op, a, b) => {
            let na = substitute_rec(a, map, memo);
            let nb = substitute_rec(b, map, memo);
            if na.ptr_eq(a) && nb.ptr_eq(b) {
                e.clone()
            } else {
                Expr::binary(*op, na, nb)
            }
        }
    };
    memo.insert(e.id(), out.clone());
    out
}

/// Substitution map sending each variable of `vars` to the matching entry
/// of `values`.
pub fn bind_map(vars: &[Expr], values: &[Expr]) -> Result<HashMap<(String, usize), Expr>, SymError> {
    if vars.len() != values.len() {
        return Err(SymError::Shape {
            op: "substitution",
            lhs: (vars.len(), 1),
            rhs: (values.len(), 1),
        });
    }
    let mut map = HashMap::new();
    for (v, val) in vars.iter().zip(values) {
        let (g, i) = v.as_input().ok_or(SymError::NotAnInput)?;
        map.insert((g.to_string(), i), val.clone());
    }
    Ok(map)
}
