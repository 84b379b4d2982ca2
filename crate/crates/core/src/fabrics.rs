//! Spec algebra: differential maps, pullback, summation, Euler–Lagrange
//! derivation of energies and energization of geometries.
//!
//! A [`Spec`] is the pair `(M, f)` of the system `M ẍ + f = 0`, expressed
//! symbolically over a position group `x` and a velocity group `ẋ`. Every
//! operation here is a pure builder producing new expressions; nothing is
//! evaluated.

use thiserror::Error;

use crate::symexpr::{
    bind_map, differentiate, gradient, jacobian, substitute, substitute_mat, substitute_vec, Expr,
    Group, MatExpr, SymError, VecExpr,
};

/// Regularizer in the energization projector denominator `ẋᵀMẋ + ε`.
pub const EPS_ENERGIZE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FabricError {
    #[error(transparent)]
    Sym(#[from] SymError),
    #[error("map depends on velocity group `{0}`")]
    MapUsesVelocity(String),
    #[error("coordinate mismatch: {0}")]
    Coords(String),
}

/// Position and velocity groups a spec is written in.
#[derive(Debug, Clone)]
pub struct Coords {
    pub pos: Group,
    pub vel: Group,
}

impl Coords {
    pub fn new(pos: Group, vel: Group) -> Result<Self, FabricError> {
        if pos.len() != vel.len() {
            return Err(FabricError::Coords(format!(
                "`{}` has {} entries but `{}` has {}",
                pos.name(),
                pos.len(),
                vel.name(),
                vel.len()
            )));
        }
        Ok(Self { pos, vel })
    }

    pub fn dim(&self) -> usize {
        self.pos.len()
    }

    fn same_as(&self, other: &Coords) -> bool {
        self.pos.name() == other.pos.name()
            && self.vel.name() == other.vel.name()
            && self.dim() == other.dim()
    }
}

#[derive(Debug, Clone)]
pub struct Spec {
    pub m: MatExpr,
    pub f: VecExpr,
    pub coords: Coords,
}

impl Spec {
    pub fn new(m: MatExpr, f: VecExpr, coords: Coords) -> Result<Self, FabricError> {
        let n = coords.dim();
        if m.shape() != (n, n) || f.len() != n {
            return Err(SymError::Shape {
                op: "spec",
                lhs: m.shape(),
                rhs: (f.len(), n),
            }
            .into());
        }
        Ok(Self { m, f, coords })
    }

    pub fn zero(coords: Coords) -> Self {
        let n = coords.dim();
        Self {
            m: MatExpr::symmetric_from_fn(n, |_, _| Expr::zero()),
            f: VecExpr::zeros(n),
            coords,
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.dim()
    }
}

/// `φ: q ↦ x` together with its Jacobian and the Jacobian's time derivative.
#[derive(Debug, Clone)]
pub struct DifferentialMap {
    pub phi: VecExpr,
    pub j: MatExpr,
    pub jdot: MatExpr,
    pub q: Group,
    pub qd: Group,
}

impl DifferentialMap {
    /// Builds `J = ∂φ/∂q` and `J̇[i][j] = Σ_k ∂J[i][j]/∂q_k · q̇_k`.
    pub fn new(phi: VecExpr, q: &Group, qd: &Group) -> Result<Self, FabricError> {
        if q.len() != qd.len() {
            return Err(FabricError::Coords("q and q̇ lengths differ".into()));
        }
        for e in phi.entries() {
            if e.input_groups().contains(qd.name()) {
                return Err(FabricError::MapUsesVelocity(qd.name().to_string()));
            }
        }
        let j = jacobian(&phi, q.vars())?;
        let n = q.len();
        let dj: Vec<MatExpr> = (0..n)
            .map(|k| {
                let col = q.var(k);
                let entries = j
                    .entries()
                    .iter()
                    .map(|e| differentiate(e, col))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(MatExpr::new(j.rows(), j.cols(), entries)?)
            })
            .collect::<Result<_, FabricError>>()?;
        let jdot = MatExpr::from_fn(j.rows(), j.cols(), |r, c| {
            (0..n).map(|k| dj[k].get(r, c) * qd.var(k)).sum()
        });
        Ok(Self {
            phi,
            j,
            jdot,
            q: q.clone(),
            qd: qd.clone(),
        })
    }

    /// Task-space velocity `J q̇`.
    pub fn velocity(&self) -> VecExpr {
        self.j
            .mul_vec(&self.qd.vector())
            .expect("jacobian columns match q̇")
    }

    /// Task-space acceleration `J q̈ + J̇ q̇` for a given `q̈` vector.
    pub fn acceleration(&self, qdd: &VecExpr) -> Result<VecExpr, FabricError> {
        let jq = self.j.mul_vec(qdd)?;
        let jd = self.jdot.mul_vec(&self.qd.vector())?;
        Ok(jq.add(&jd)?)
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }
}

/// Pullback `(JᵀMJ, Jᵀ(f + M J̇ q̇))` of a spec through a map.
///
/// The spec's own coordinates are replaced by `φ(q)` and `J q̇`.
pub fn pull(map: &DifferentialMap, spec: &Spec) -> Result<Spec, FabricError> {
    if spec.dim() != map.dim() {
        return Err(FabricError::Coords(format!(
            "map codomain has dimension {} but the spec has {}",
            map.dim(),
            spec.dim()
        )));
    }
    let mut sub = bind_map(spec.coords.pos.vars(), map.phi.entries())?;
    sub.extend(bind_map(spec.coords.vel.vars(), map.velocity().entries())?);
    let m = substitute_mat(&spec.m, &sub);
    let f = substitute_vec(&spec.f, &sub);

    let curvature = map.jdot.mul_vec(&map.qd.vector())?;
    let inner = f.add(&m.mul_vec(&curvature)?)?;
    let pulled_m = map.j.congruence(&m)?;
    let pulled_f = map.j.tr_mul_vec(&inner)?;
    Spec::new(
        pulled_m,
        pulled_f,
        Coords::new(map.q.clone(), map.qd.clone())?,
    )
}

/// `(M1 + M2, f1 + f2)`.
pub fn sum(a: &Spec, b: &Spec) -> Result<Spec, FabricError> {
    if !a.coords.same_as(&b.coords) {
        return Err(FabricError::Coords(format!(
            "cannot add a spec over ({}, {}) to one over ({}, {})",
            a.coords.pos.name(),
            a.coords.vel.name(),
            b.coords.pos.name(),
            b.coords.vel.name()
        )));
    }
    Spec::new(a.m.add(&b.m)?, a.f.add(&b.f)?, a.coords.clone())
}

/// An energy Lagrangian `L(x, ẋ)`.
#[derive(Debug, Clone)]
pub struct Lagrangian {
    pub l: Expr,
    pub coords: Coords,
}

impl Lagrangian {
    pub fn new(l: Expr, coords: Coords) -> Self {
        Self { l, coords }
    }

    /// Energy `H = ẋᵀ ∂L/∂ẋ − L`; equals `L` when `L` is 2-homogeneous in ẋ.
    pub fn hamiltonian(&self) -> Result<Expr, FabricError> {
        let p = gradient(&self.l, self.coords.vel.vars())?;
        Ok(p.dot(&self.coords.vel.vector())? - &self.l)
    }

    /// Re-expresses the Lagrangian through a map (`x = φ(q)`, `ẋ = J q̇`).
    pub fn pull(&self, map: &DifferentialMap) -> Result<Lagrangian, FabricError> {
        let mut sub = bind_map(self.coords.pos.vars(), map.phi.entries())?;
        sub.extend(bind_map(self.coords.vel.vars(), map.velocity().entries())?);
        Ok(Lagrangian {
            l: substitute(&self.l, &sub),
            coords: Coords::new(map.q.clone(), map.qd.clone())?,
        })
    }
}

/// Equations of motion of `L`: `M = ∂²L/∂ẋ²`,
/// `f = (∂²L/∂x∂ẋ)ᵀ ẋ − ∂L/∂x`.
pub fn euler_lagrange(lag: &Lagrangian) -> Result<Spec, FabricError> {
    let x = &lag.coords.pos;
    let xd = &lag.coords.vel;
    let n = lag.coords.dim();
    let p = gradient(&lag.l, xd.vars())?;
    let mut hess = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            hess[i][j] = differentiate(p.get(i), xd.var(j))?;
        }
    }
    let m = MatExpr::symmetric_from_fn(n, |i, j| hess[i][j].clone());
    let dl_dx = gradient(&lag.l, x.vars())?;
    let mut f = Vec::with_capacity(n);
    for i in 0..n {
        let mixed = jacobian(&VecExpr::new(vec![p.get(i).clone()]), x.vars())?.row(0);
        f.push(mixed.dot(&xd.vector())? - dl_dx.get(i));
    }
    Spec::new(m, VecExpr::new(f), lag.coords.clone())
}

/// How the projector `P = M(M⁻¹ − ẋẋᵀ/(ẋᵀMẋ + ε))` is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergizeRoute {
    /// `P v = v − M ẋ (ẋᵀ v)/(ẋᵀ M ẋ + ε)`; no inverse, defined for
    /// singular `M`.
    Expanded,
    /// Literal `M (M⁻¹ v) − …` with a closed-form inverse; dimensions ≤ 3.
    Inverse,
}

/// Energizes the geometry `ẍ + h = 0` with `le`:
/// `(M_L, f_L + P[M_L h − f_L])`.
pub fn energize(h: &VecExpr, le: &Lagrangian) -> Result<Spec, FabricError> {
    energize_with(h, le, EnergizeRoute::Expanded)
}

pub fn energize_with(
    h: &VecExpr,
    le: &Lagrangian,
    route: EnergizeRoute,
) -> Result<Spec, FabricError> {
    let base = euler_lagrange(le)?;
    if h.len() != base.dim() {
        return Err(SymError::Shape {
            op: "energize",
            lhs: (h.len(), 1),
            rhs: (base.dim(), 1),
        }
        .into());
    }
    let m = &base.m;
    let xd = le.coords.vel.vector();
    let v = m.mul_vec(h)?.sub(&base.f)?;
    let m_xd = m.mul_vec(&xd)?;
    let denom = xd.dot(&m_xd)? + EPS_ENERGIZE;
    let along = xd.dot(&v)? / denom;
    let projected = match route {
        EnergizeRoute::Expanded => v.sub(&m_xd.scale(&along))?,
        EnergizeRoute::Inverse => {
            let m_inv_v = m.inverse_small()?.mul_vec(&v)?;
            m.mul_vec(&m_inv_v)?.sub(&m_xd.scale(&along))?
        }
    };
    let f = base.f.add(&projected)?;
    Spec::new(base.m.clone(), f, base.coords.clone())
}
