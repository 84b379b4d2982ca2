use std::collections::HashMap;

use super::{BinaryOp, Expr, ExprKind, SymError, UnaryOp};

/// Values for named input groups.
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    groups: HashMap<String, Vec<f64>>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, group: &str, values: &[f64]) -> Self {
        self.set(group, values);
        self
    }

    pub fn set(&mut self, group: &str, values: &[f64]) {
        self.groups.insert(group.to_string(), values.to_vec());
    }

    pub fn get(&self, group: &str) -> Option<&[f64]> {
        self.groups.get(group).map(Vec::as_slice)
    }
}

/// Reference evaluator: recursive over the DAG, with domain checks on
/// `log`, `sqrt` and `pow`.
pub fn evaluate(e: &Expr, bindings: &Bindings) -> Result<f64, SymError> {
    let mut memo = HashMap::new();
    eval_rec(e, bindings, &mut memo)
}

fn eval_rec(e: &Expr, b: &Bindings, memo: &mut HashMap<u64, f64>) -> Result<f64, SymError> {
    if let Some(&v) = memo.get(&e.id()) {
        return Ok(v);
    }
    let v = match e.kind() {
        ExprKind::Constant(c) => *c,
        ExprKind::Input { group, index } => {
            let values = b
                .get(group)
                .ok_or_else(|| SymError::UnboundInput(group.to_string()))?;
            *values.get(*index).ok_or_else(|| SymError::InputIndex {
                group: group.to_string(),
                index: *index,
                len: values.len(),
            })?
        }
        ExprKind::Unary(op, x) => {
            let xv = eval_rec(x, b, memo)?;
            let bad = match op {
                UnaryOp::Log => xv <= 0.0,
                UnaryOp::Sqrt => xv < 0.0,
                _ => false,
            };
            if bad {
                return Err(domain_error(e, op.name(), xv));
            }
            op.apply(xv)
        }
        ExprKind::Binary(op, x, y) => {
            let xv = eval_rec(x, b, memo)?;
            let yv = eval_rec(y, b, memo)?;
            let out = op.apply(xv, yv);
            if *op == BinaryOp::Pow && out.is_nan() && !xv.is_nan() && !yv.is_nan() {
                return Err(domain_error(e, "pow", xv));
            }
            out
        }
    };
    memo.insert(e.id(), v);
    Ok(v)
}

fn domain_error(e: &Expr, op: &'static str, arg: f64) -> SymError {
    let mut text = e.to_string();
    if text.len() > 120 {
        let cut = (0..=120).rev().find(|&i| text.is_char_boundary(i)).unwrap_or(0);
        text.truncate(cut);
        text.push_str("...");
    }
    SymError::Domain {
        op,
        node: e.id(),
        arg,
        expr: text,
    }
}
