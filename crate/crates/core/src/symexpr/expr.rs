use std::collections::HashSet;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::SymError;

static NEXT_NODE_ID: AtomicU64 = AtomicU64::new(0);

/// Added under the square root of every Euclidean norm so that its
/// derivative stays finite at the origin.
pub const EPS_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Sign,
    Abs,
    Sin,
    Cos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl UnaryOp {
    /// Plain IEEE-754 application; domain checks live in the evaluators.
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            UnaryOp::Neg => -x,
            UnaryOp::Tanh => x.tanh(),
            UnaryOp::Exp => x.exp(),
            UnaryOp::Log => x.ln(),
            UnaryOp::Sqrt => x.sqrt(),
            UnaryOp::Sign => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    // also maps NaN to 0
                    0.0
                }
            }
            UnaryOp::Abs => x.abs(),
            UnaryOp::Sin => x.sin(),
            UnaryOp::Cos => x.cos(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Tanh => "tanh",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sign => "sign",
            UnaryOp::Abs => "abs",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
        }
    }
}

impl BinaryOp {
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
            BinaryOp::Pow => a.powf(b),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

#[derive(Debug)]
pub enum ExprKind {
    Constant(f64),
    Input { group: Arc<str>, index: usize },
    Unary(UnaryOp, Expr),
    Binary(BinaryOp, Expr, Expr),
}

#[derive(Debug)]
pub struct Node {
    id: u64,
    kind: ExprKind,
}

/// Handle to an immutable node of the expression DAG.
///
/// Cloning is cheap and shares the node. Arithmetic on handles goes through
/// the folding constructors, so constants are folded and `0`/`1` identities
/// are dropped as the graph is built.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl Expr {
    fn from_kind(kind: ExprKind) -> Self {
        let id = NEXT_NODE_ID.fetch_add(1, Ordering::Relaxed);
        Expr(Arc::new(Node { id, kind }))
    }

    pub fn constant(value: f64) -> Self {
        Self::from_kind(ExprKind::Constant(value))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub(crate) fn input(group: Arc<str>, index: usize) -> Self {
        Self::from_kind(ExprKind::Input { group, index })
    }

    /// Builds a unary node without any simplification.
    pub fn raw_unary(op: UnaryOp, child: Expr) -> Self {
        Self::from_kind(ExprKind::Unary(op, child))
    }

    /// Builds a binary node without any simplification.
    pub fn raw_binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Self::from_kind(ExprKind::Binary(op, lhs, rhs))
    }

    /// Unary node with constant folding.
    pub fn unary(op: UnaryOp, child: Expr) -> Self {
        if let Some(c) = child.as_constant() {
            return Self::constant(op.apply(c));
        }
        Self::raw_unary(op, child)
    }

    /// Binary node with constant folding and `0`/`1` identities.
    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        let (a, b) = (lhs.as_constant(), rhs.as_constant());
        if let (Some(a), Some(b)) = (a, b) {
            return Self::constant(op.apply(a, b));
        }
        match op {
            BinaryOp::Add => {
                if a == Some(0.0) {
                    return rhs;
                }
                if b == Some(0.0) {
                    return lhs;
                }
            }
            BinaryOp::Sub => {
                if b == Some(0.0) {
                    return lhs;
                }
                if a == Some(0.0) {
                    return Self::unary(UnaryOp::Neg, rhs);
                }
            }
            BinaryOp::Mul => {
                if a == Some(0.0) || b == Some(0.0) {
                    return Self::zero();
                }
                if a == Some(1.0) {
                    return rhs;
                }
                if b == Some(1.0) {
                    return lhs;
                }
            }
            BinaryOp::Div => {
                if a == Some(0.0) {
                    return Self::zero();
                }
                if b == Some(1.0) {
                    return lhs;
                }
            }
            BinaryOp::Pow => {
                if b == Some(0.0) {
                    return Self::one();
                }
                if b == Some(1.0) {
                    return lhs;
                }
            }
        }
        Self::raw_binary(op, lhs, rhs)
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn kind(&self) -> &ExprKind {
        &self.0.kind
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.0.kind {
            ExprKind::Constant(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    /// `(group, index)` when this node is an input.
    pub fn as_input(&self) -> Option<(&str, usize)> {
        match &self.0.kind {
            ExprKind::Input { group, index } => Some((group, *index)),
            _ => None,
        }
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn powf(&self, exponent: impl Into<Expr>) -> Expr {
        Self::binary(BinaryOp::Pow, self.clone(), exponent.into())
    }

    pub fn tanh(&self) -> Expr {
        Self::unary(UnaryOp::Tanh, self.clone())
    }

    pub fn exp(&self) -> Expr {
        Self::unary(UnaryOp::Exp, self.clone())
    }

    pub fn ln(&self) -> Expr {
        Self::unary(UnaryOp::Log, self.clone())
    }

    pub fn sqrt(&self) -> Expr {
        Self::unary(UnaryOp::Sqrt, self.clone())
    }

    pub fn sign(&self) -> Expr {
        Self::unary(UnaryOp::Sign, self.clone())
    }

    pub fn abs(&self) -> Expr {
        Self::unary(UnaryOp::Abs, self.clone())
    }

    pub fn sin(&self) -> Expr {
        Self::unary(UnaryOp::Sin, self.clone())
    }

    pub fn cos(&self) -> Expr {
        Self::unary(UnaryOp::Cos, self.clone())
    }

    pub fn square(&self) -> Expr {
        self * self
    }

    /// `max(self, floor)` written with `abs`, so it stays inside the op set.
    pub fn max_const(&self, floor: f64) -> Expr {
        let f = Expr::constant(floor);
        0.5 * (self + &f + (self - &f).abs())
    }

    /// Names of all input groups referenced anywhere below this node.
    pub fn input_groups(&self) -> HashSet<String> {
        let mut groups = HashSet::new();
        let mut seen = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match e.kind() {
                ExprKind::Constant(_) => {}
                ExprKind::Input { group, .. } => {
                    groups.insert(group.to_string());
                }
                ExprKind::Unary(_, c) => stack.push(c.clone()),
                ExprKind::Binary(_, a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
            }
        }
        groups
    }

    /// Number of distinct nodes reachable from this one.
    pub fn node_count(&self) -> usize {
        let mut seen = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match e.kind() {
                ExprKind::Unary(_, c) => stack.push(c.clone()),
                ExprKind::Binary(_, a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
                _ => {}
            }
        }
        seen.len()
    }
}

/// Structural equality: same operators, constants (bitwise) and inputs.
pub fn structurally_equal(a: &Expr, b: &Expr) -> bool {
    if a.ptr_eq(b) {
        return true;
    }
    match (a.kind(), b.kind()) {
        (ExprKind::Constant(x), ExprKind::Constant(y)) => x.to_bits() == y.to_bits(),
        (ExprKind::Input { group: g1, index: i1 }, ExprKind::Input { group: g2, index: i2 }) => {
            g1 == g2 && i1 == i2
        }
        (ExprKind::Unary(o1, c1), ExprKind::Unary(o2, c2)) => o1 == o2 && structurally_equal(c1, c2),
        (ExprKind::Binary(o1, a1, b1), ExprKind::Binary(o2, a2, b2)) => {
            o1 == o2 && structurally_equal(a1, a2) && structurally_equal(b1, b2)
        }
        _ => false,
    }
}

/// Rebuilds `e` bottom-up through the folding constructors.
pub fn fold(e: &Expr) -> Expr {
    let mut memo = std::collections::HashMap::new();
    fold_rec(e, &mut memo)
}

fn fold_rec(e: &Expr, memo: &mut std::collections::HashMap<u64, Expr>) -> Expr {
    if let Some(done) = memo.get(&e.id()) {
        return done.clone();
    }
    let out = match e.kind() {
        ExprKind::Constant(_) | ExprKind::Input { .. } => e.clone(),
        ExprKind::Unary(op, c) => {
            let c = fold_rec(c, memo);
            Expr::unary(*op, c)
        }
        ExprKind::Binary(op, a, b) => {
            let a = fold_rec(a, memo);
            let b = fold_rec(b, memo);
            Expr::binary(*op, a, b)
        }
    };
    memo.insert(e.id(), out.clone());
    out
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            ExprKind::Constant(c) => write!(f, "{c}"),
            ExprKind::Input { group, index } => write!(f, "{group}[{index}]"),
            ExprKind::Unary(op, c) => write!(f, "{}({c})", op.name()),
            ExprKind::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::constant(v)
    }
}

impl From<&Expr> for Expr {
    fn from(e: &Expr) -> Self {
        e.clone()
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl $trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, self, rhs)
            }
        }
        impl $trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary($op, self, rhs.clone())
            }
        }
        impl $trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, self.clone(), rhs)
            }
        }
        impl $trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary($op, self.clone(), rhs.clone())
            }
        }
        impl $trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::binary($op, self, Expr::constant(rhs))
            }
        }
        impl $trait<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::binary($op, self.clone(), Expr::constant(rhs))
            }
        }
        impl $trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, Expr::constant(self), rhs)
            }
        }
        impl $trait<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary($op, Expr::constant(self), rhs.clone())
            }
        }
    };
}

impl_binop!(Add, add, BinaryOp::Add);
impl_binop!(Sub, sub, BinaryOp::Sub);
impl_binop!(Mul, mul, BinaryOp::Mul);
impl_binop!(Div, div, BinaryOp::Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self)
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self.clone())
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        iter.fold(Expr::zero(), |acc, e| acc + e)
    }
}

/// A named block of input variables, e.g. the joint positions `q`.
#[derive(Clone, Debug)]
pub struct Group {
    name: Arc<str>,
    vars: Vec<Expr>,
}

impl Group {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn var(&self, i: usize) -> &Expr {
        &self.vars[i]
    }

    pub fn vars(&self) -> &[Expr] {
        &self.vars
    }

    pub fn vector(&self) -> super::VecExpr {
        super::VecExpr::new(self.vars.clone())
    }
}

/// Builder context that owns the namespace of input groups.
#[derive(Debug, Default)]
pub struct Context {
    groups: Vec<(String, usize)>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn input_group(&mut self, name: &str, dim: usize) -> Result<Group, SymError> {
        if dim == 0 {
            return Err(SymError::EmptyGroup(name.to_string()));
        }
        if self.groups.iter().any(|(g, _)| g == name) {
            return Err(SymError::DuplicateGroup(name.to_string()));
        }
        self.groups.push((name.to_string(), dim));
        let name: Arc<str> = Arc::from(name);
        let vars = (0..dim).map(|i| Expr::input(name.clone(), i)).collect();
        Ok(Group { name, vars })
    }

    /// Declared groups in declaration order.
    pub fn groups(&self) -> &[(String, usize)] {
        &self.groups
    }
}
