//! Parameterized leaf components of the fabric tree.
//!
//! Each avoidance leaf is a one-dimensional distance map `x = φ(q)`, a
//! geometry `ẍ + h(x, ẋ) = 0` with `h = −k_geo / x^β_geo · ẋ²`, and a gated
//! Finsler energy `L = k_fin / x^β_fin · (−½(sign(ẋ) − 1)) · ẋ²` that is only
//! active while the distance shrinks. Tuning parameters enter as runtime
//! inputs so one compiled planner serves every parameter set.

use std::fmt;

use thiserror::Error;

use crate::fabrics::{energize, pull, Coords, DifferentialMap, FabricError, Lagrangian, Spec};
use crate::symexpr::{bind_map, gradient, substitute_vec, Context, Expr, Group, VecExpr};

/// Lower bound applied to a leaf distance inside `1/x^β`.
pub const DISTANCE_FLOOR: f64 = 1e-4;

/// Sharpness of the soft-norm attractor potential.
pub const ATTRACTOR_SHARPNESS: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LeafError {
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error("self-collision pair ({0}, {1}) is not declared by the robot")]
    UndeclaredPair(usize, usize),
    #[error("joint {joint}: lower limit {lower} is not below upper limit {upper}")]
    InvertedLimits { joint: usize, lower: f64, upper: f64 },
    #[error("parameter vector must have {expected} entries, got {got}")]
    ParamCount { expected: usize, got: usize },
}

impl From<crate::symexpr::SymError> for LeafError {
    fn from(e: crate::symexpr::SymError) -> Self {
        LeafError::Fabric(e.into())
    }
}

/// The tunable parameters, in the order of the runtime parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    MBase,
    KGeoCol,
    KGeoLimit,
    KGeoSelf,
    KFinCol,
    KFinLimit,
    KFinSelf,
    ExpGeoCol,
    ExpGeoLimit,
    ExpGeoSelf,
    ExpFinCol,
    ExpFinLimit,
    ExpFinSelf,
    AlphaB,
    BMin,
    BMax,
    RShift,
    VEx,
    KAttractor,
}

impl Param {
    pub const ALL: [Param; 19] = [
        Param::MBase,
        Param::KGeoCol,
        Param::KGeoLimit,
        Param::KGeoSelf,
        Param::KFinCol,
        Param::KFinLimit,
        Param::KFinSelf,
        Param::ExpGeoCol,
        Param::ExpGeoLimit,
        Param::ExpGeoSelf,
        Param::ExpFinCol,
        Param::ExpFinLimit,
        Param::ExpFinSelf,
        Param::AlphaB,
        Param::BMin,
        Param::BMax,
        Param::RShift,
        Param::VEx,
        Param::KAttractor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::MBase => "m_base",
            Param::KGeoCol => "k_geo_col",
            Param::KGeoLimit => "k_geo_limit",
            Param::KGeoSelf => "k_geo_self",
            Param::KFinCol => "k_fin_col",
            Param::KFinLimit => "k_fin_limit",
            Param::KFinSelf => "k_fin_self",
            Param::ExpGeoCol => "exp_geo_col",
            Param::ExpGeoLimit => "exp_geo_limit",
            Param::ExpGeoSelf => "exp_geo_self",
            Param::ExpFinCol => "exp_fin_col",
            Param::ExpFinLimit => "exp_fin_limit",
            Param::ExpFinSelf => "exp_fin_self",
            Param::AlphaB => "alpha_b",
            Param::BMin => "b_min",
            Param::BMax => "b_max",
            Param::RShift => "r_shift",
            Param::VEx => "v_ex",
            Param::KAttractor => "k_attractor",
        }
    }

    pub fn index(self) -> usize {
        Param::ALL.iter().position(|&p| p == self).expect("listed")
    }

    pub fn from_name(name: &str) -> Option<Param> {
        Param::ALL.iter().copied().find(|p| p.name() == name)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Symbolic handles for the runtime parameter vector.
#[derive(Debug, Clone)]
pub struct ParamExprs {
    group: Group,
}

impl ParamExprs {
    pub fn new(group: &Group) -> Result<Self, LeafError> {
        if group.len() != Param::ALL.len() {
            return Err(LeafError::ParamCount {
                expected: Param::ALL.len(),
                got: group.len(),
            });
        }
        Ok(Self {
            group: group.clone(),
        })
    }

    pub fn get(&self, p: Param) -> &Expr {
        self.group.var(p.index())
    }

    pub fn group(&self) -> &Group {
        &self.group
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafFamily {
    Collision,
    SelfCollision,
    Limit,
}

impl LeafFamily {
    /// `(k_geo, β_geo, k_fin, β_fin)` for this family.
    pub fn params(self) -> [Param; 4] {
        match self {
            LeafFamily::Collision => [
                Param::KGeoCol,
                Param::ExpGeoCol,
                Param::KFinCol,
                Param::ExpFinCol,
            ],
            LeafFamily::SelfCollision => [
                Param::KGeoSelf,
                Param::ExpGeoSelf,
                Param::KFinSelf,
                Param::ExpFinSelf,
            ],
            LeafFamily::Limit => [
                Param::KGeoLimit,
                Param::ExpGeoLimit,
                Param::KFinLimit,
                Param::ExpFinLimit,
            ],
        }
    }
}

/// One avoidance component: map, geometry and Finsler energy.
#[derive(Debug, Clone)]
pub struct LeafSpec {
    pub name: String,
    pub family: LeafFamily,
    pub map: DifferentialMap,
    /// Geometry term over the leaf coordinates.
    pub h: VecExpr,
    /// Finsler energy over the leaf coordinates.
    pub le: Lagrangian,
    pub param_names: Vec<&'static str>,
    pub scene_inputs: Vec<String>,
}

impl LeafSpec {
    pub fn coords(&self) -> &Coords {
        &self.le.coords
    }

    /// Energized spec in the leaf's own coordinates.
    pub fn energized(&self) -> Result<Spec, FabricError> {
        energize(&self.h, &self.le)
    }

    /// Energized spec pulled into configuration space.
    pub fn pulled(&self) -> Result<Spec, FabricError> {
        pull(&self.map, &self.energized()?)
    }
}

fn leaf_coords() -> Coords {
    let mut ctx = Context::new();
    let x = ctx.input_group("x", 1).expect("fresh context");
    let xd = ctx.input_group("xd", 1).expect("fresh context");
    Coords::new(x, xd).expect("equal lengths")
}

fn floored(x: &Expr) -> Expr {
    x.max_const(DISTANCE_FLOOR)
}

/// `h = −k / max(x, floor)^β · ẋ²`.
pub fn barrier_geometry(x: &Expr, xd: &Expr, k: &Expr, beta: &Expr) -> Expr {
    -(k / floored(x).powf(beta)) * xd.square()
}

/// `−½(sign(ẋ) − 1)`: 1 while approaching, 0 while receding, ½ at rest.
pub fn approach_gate(xd: &Expr) -> Expr {
    -0.5 * (xd.sign() - 1.0)
}

/// `L = k / max(x, floor)^β · gate(ẋ) · ẋ²`.
pub fn gated_finsler(x: &Expr, xd: &Expr, k: &Expr, beta: &Expr) -> Expr {
    (k / floored(x).powf(beta)) * approach_gate(xd) * xd.square()
}

fn build_leaf(
    name: String,
    family: LeafFamily,
    phi: Expr,
    q: &Group,
    qd: &Group,
    params: &ParamExprs,
    scene_inputs: Vec<String>,
) -> Result<LeafSpec, LeafError> {
    let map = DifferentialMap::new(VecExpr::new(vec![phi]), q, qd)?;
    let coords = leaf_coords();
    let (x, xd) = (coords.pos.var(0).clone(), coords.vel.var(0).clone());
    let [k_geo, b_geo, k_fin, b_fin] = family.params();
    let h = barrier_geometry(&x, &xd, params.get(k_geo), params.get(b_geo));
    let le = gated_finsler(&x, &xd, params.get(k_fin), params.get(b_fin));
    Ok(LeafSpec {
        name,
        family,
        map,
        h: VecExpr::new(vec![h]),
        le: Lagrangian::new(le, coords),
        param_names: family.params().iter().map(|p| p.name()).collect(),
        scene_inputs,
    })
}

/// Runtime inputs describing one sphere obstacle.
#[derive(Debug, Clone)]
pub struct ObstacleInputs {
    pub index: usize,
    pub center: VecExpr,
    pub radius: Expr,
    pub input_names: Vec<String>,
}

/// Link sphere vs obstacle sphere:
/// `φ = ‖fk(q) − x_obst‖ / (r_obst + r_link) − 1`.
pub fn collision_leaf(
    link: usize,
    link_fk: &VecExpr,
    link_radius: f64,
    obstacle: &ObstacleInputs,
    params: &ParamExprs,
    q: &Group,
    qd: &Group,
) -> Result<LeafSpec, LeafError> {
    let dist = link_fk.sub(&obstacle.center)?.norm();
    let phi = dist / (&obstacle.radius + link_radius) - 1.0;
    build_leaf(
        format!("collision_link{link}_obst{}", obstacle.index),
        LeafFamily::Collision,
        phi,
        q,
        qd,
        params,
        obstacle.input_names.clone(),
    )
}

/// Sphere pair on the same robot:
/// `φ = ‖fk_i(q) − fk_j(q)‖ / (r_i + r_j) − 1`.
#[allow(clippy::too_many_arguments)]
pub fn self_collision_leaf(
    declared_pairs: &[[usize; 2]],
    pair: (usize, usize),
    fk_i: &VecExpr,
    fk_j: &VecExpr,
    radii: (f64, f64),
    params: &ParamExprs,
    q: &Group,
    qd: &Group,
) -> Result<LeafSpec, LeafError> {
    let (i, j) = pair;
    let declared = declared_pairs
        .iter()
        .any(|&[a, b]| (a, b) == (i, j) || (a, b) == (j, i));
    if i == j || !declared {
        return Err(LeafError::UndeclaredPair(i, j));
    }
    let dist = fk_i.sub(fk_j)?.norm();
    let phi = dist / (radii.0 + radii.1) - 1.0;
    build_leaf(
        format!("self_link{i}_link{j}"),
        LeafFamily::SelfCollision,
        phi,
        q,
        qd,
        params,
        Vec::new(),
    )
}

/// Two leaves per joint: `q_i − q_min,i` and `q_max,i − q_i`.
pub fn limit_leaves(
    joint_limits: &[[f64; 2]],
    params: &ParamExprs,
    q: &Group,
    qd: &Group,
) -> Result<Vec<LeafSpec>, LeafError> {
    let mut leaves = Vec::with_capacity(2 * joint_limits.len());
    for (i, &[lower, upper]) in joint_limits.iter().enumerate() {
        if !(lower < upper) {
            return Err(LeafError::InvertedLimits {
                joint: i,
                lower,
                upper,
            });
        }
        let qi = q.var(i);
        leaves.push(build_leaf(
            format!("limit_lower_joint{i}"),
            LeafFamily::Limit,
            qi - lower,
            q,
            qd,
            params,
            Vec::new(),
        )?);
        leaves.push(build_leaf(
            format!("limit_upper_joint{i}"),
            LeafFamily::Limit,
            upper - qi,
            q,
            qd,
            params,
            Vec::new(),
        )?);
    }
    Ok(leaves)
}

/// Goal attraction: the residual map `x̃ = fk(q) − x_goal` with the
/// soft-norm potential
/// `ψ = k (‖x̃‖ + log(1 + exp(−2α‖x̃‖))/α)`, whose gradient is
/// `k tanh(α‖x̃‖) x̃/‖x̃‖`.
#[derive(Debug, Clone)]
pub struct Attractor {
    pub map: DifferentialMap,
    /// Potential over the residual coordinates.
    pub potential: Expr,
    /// `∂ψ/∂x̃` over the residual coordinates.
    pub gradient: VecExpr,
    pub residual: Group,
    /// `∂ψ/∂q = Jᵀ ∂ψ/∂x̃`, over the configuration.
    pub config_gradient: VecExpr,
    /// `x̃` as an expression of the configuration.
    pub residual_expr: VecExpr,
}

pub fn soft_norm_potential(residual: &VecExpr, k: &Expr) -> Expr {
    let r = residual.norm();
    let a = ATTRACTOR_SHARPNESS;
    k * (&r + (1.0 + (-2.0 * a * &r).exp()).ln() / a)
}

pub fn attractor(
    ee_fk: &VecExpr,
    goal: &VecExpr,
    params: &ParamExprs,
    q: &Group,
    qd: &Group,
) -> Result<Attractor, LeafError> {
    let residual_expr = ee_fk.sub(goal)?;
    let map = DifferentialMap::new(residual_expr.clone(), q, qd)?;
    let mut ctx = Context::new();
    let xt = ctx.input_group("xt", residual_expr.len())?;
    let potential = soft_norm_potential(&xt.vector(), params.get(Param::KAttractor));
    let grad = gradient(&potential, xt.vars())?;
    let sub = bind_map(xt.vars(), residual_expr.entries())?;
    let grad_q = map.j.tr_mul_vec(&substitute_vec(&grad, &sub))?;
    Ok(Attractor {
        map,
        potential,
        gradient: grad,
        residual: xt,
        config_gradient: grad_q,
        residual_expr,
    })
}

/// `L = ½ m_base q̇ᵀ q̇`.
pub fn base_inertia_energy(m_base: &Expr, q: &Group, qd: &Group) -> Result<Lagrangian, LeafError> {
    let l = 0.5 * m_base * qd.vector().squared_norm();
    Ok(Lagrangian::new(l, Coords::new(q.clone(), qd.clone())?))
}
