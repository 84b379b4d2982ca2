//! Assembly of the fabric tree for a robot and scene layout, compilation to
//! a single tape, and runtime evaluation of the speed-controlled policy.

mod speed;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use speed::{
    energization_coefficient, energization_coefficient_scaled, s_beta, s_eta, speed_control,
    SpeedParams, SpeedTerms,
};

use crate::autotune::{
    AutotuneError, Evaluation, Evaluator, ParameterSet, SearchSpace,
};
use crate::fabrics::{euler_lagrange, sum, Spec};
use crate::leaves::{
    attractor, base_inertia_energy, collision_leaf, limit_leaves, self_collision_leaf, Attractor,
    LeafError, LeafSpec, ObstacleInputs, Param, ParamExprs,
};
use crate::symexpr::{compile, CompiledPlan, Context, Group, Output, SymError, VecExpr};
use crate::world::{
    compute_metrics, objective, rollout, Metrics, Policy, RobotModel, Scenario, TrajectoryLog,
    Weights, WorldError,
};

/// Distance from the origin at which unused obstacle slots are parked.
pub const DUMMY_DISTANCE: f64 = 1e3;
const DUMMY_RADIUS: f64 = 0.1;

pub const GROUP_Q: &str = "q";
pub const GROUP_QD: &str = "qd";
pub const GROUP_OBST_POS: &str = "obst_pos";
pub const GROUP_OBST_RAD: &str = "obst_rad";
pub const GROUP_GOAL: &str = "goal";
pub const GROUP_THETA: &str = "theta";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error(transparent)]
    Leaf(#[from] LeafError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Params(#[from] AutotuneError),
    #[error("scenario has {scenario} obstacles but the planner was built for {planner}")]
    ObstacleCount { scenario: usize, planner: usize },
    #[error("planner is for robot `{planner}` but the scenario names `{scenario}`")]
    RobotMismatch { planner: String, scenario: String },
    #[error("non-finite acceleration: {0}")]
    NonFinite(Box<Snapshot>),
}

impl From<SymError> for PlannerError {
    fn from(e: SymError) -> Self {
        PlannerError::Leaf(e.into())
    }
}

impl From<crate::fabrics::FabricError> for PlannerError {
    fn from(e: crate::fabrics::FabricError) -> Self {
        PlannerError::Leaf(e.into())
    }
}

/// Inputs and outputs of a failed policy evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub theta: Vec<f64>,
    pub qdd: Vec<f64>,
}

impl std::fmt::Display for Snapshot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "q = {:?}, qd = {:?}, theta = {:?} gave qdd = {:?}", self.q, self.qd, self.theta, self.qdd)
    }
}

/// The symbolic fabric tree before compilation.
#[derive(Debug, Clone)]
pub struct PlannerBlueprint {
    pub robot: RobotModel,
    pub obstacle_count: usize,
    pub leaves: Vec<LeafSpec>,
    /// Pulled, summed leaves plus base inertia, over `(q, q̇)`.
    pub root: Spec,
    pub attractor: Attractor,
    pub input_layout: Vec<(String, usize)>,
}

impl PlannerBlueprint {
    pub fn count(&self, family: crate::leaves::LeafFamily) -> usize {
        self.leaves.iter().filter(|l| l.family == family).count()
    }
}

pub fn assemble(robot: &RobotModel, obstacle_count: usize) -> Result<PlannerBlueprint, PlannerError> {
    robot.validate()?;
    let n = robot.dof();
    let mut ctx = Context::new();
    let q = ctx.input_group(GROUP_Q, n)?;
    let qd = ctx.input_group(GROUP_QD, n)?;
    let (obst_pos, obst_rad): (Option<Group>, Option<Group>) = if obstacle_count > 0 {
        (
            Some(ctx.input_group(GROUP_OBST_POS, 2 * obstacle_count)?),
            Some(ctx.input_group(GROUP_OBST_RAD, obstacle_count)?),
        )
    } else {
        (None, None)
    };
    let goal = ctx.input_group(GROUP_GOAL, 2)?;
    let theta = ctx.input_group(GROUP_THETA, Param::ALL.len())?;
    let params = ParamExprs::new(&theta)?;

    let fks: Vec<VecExpr> = (1..=n)
        .map(|link| robot.fk_expr(q.vars(), link))
        .collect::<Result<_, _>>()?;

    let mut leaves = Vec::new();
    if let (Some(pos), Some(rad)) = (&obst_pos, &obst_rad) {
        for j in 0..obstacle_count {
            let obst = ObstacleInputs {
                index: j,
                center: VecExpr::new(vec![pos.var(2 * j).clone(), pos.var(2 * j + 1).clone()]),
                radius: rad.var(j).clone(),
                input_names: vec![GROUP_OBST_POS.into(), GROUP_OBST_RAD.into()],
            };
            for (link, fk) in fks.iter().enumerate() {
                leaves.push(collision_leaf(link + 1, fk, robot.sphere_radii[link], &obst, &params, &q, &qd)?);
            }
        }
    }
    for &[i, j] in &robot.self_collision_pairs {
        leaves.push(self_collision_leaf(
            &robot.self_collision_pairs,
            (i, j),
            &fks[i - 1],
            &fks[j - 1],
            (robot.sphere_radii[i - 1], robot.sphere_radii[j - 1]),
            &params,
            &q,
            &qd,
        )?);
    }
    leaves.extend(limit_leaves(&robot.joint_limits, &params, &q, &qd)?);

    let mut root = euler_lagrange(&base_inertia_energy(params.get(Param::MBase), &q, &qd)?)?;
    for leaf in &leaves {
        root = sum(&root, &leaf.pulled()?)?;
    }
    let attractor = attractor(&fks[n - 1], &goal.vector(), &params, &q, &qd)?;
    Ok(PlannerBlueprint {
        robot: robot.clone(),
        obstacle_count,
        leaves,
        root,
        attractor,
        input_layout: ctx.groups().to_vec(),
    })
}

/// Stable description of a compiled planner, stored in study files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerMetadata {
    pub robot: String,
    pub dof: usize,
    pub obstacle_count: usize,
    pub parameter_order: Vec<String>,
    pub input_layout: Vec<(String, usize)>,
    pub outputs: Vec<String>,
    pub leaves: Vec<String>,
    pub tape_len: usize,
}

#[derive(Debug, Clone)]
pub struct CompiledPlanner {
    plan: CompiledPlan,
    metadata: PlannerMetadata,
    robot: RobotModel,
}

const OUT_M: &str = "M";
const OUT_F: &str = "f";
const OUT_DPSI: &str = "dpsi";
const OUT_XT: &str = "xt";

impl PlannerBlueprint {
    pub fn compile(&self) -> Result<CompiledPlanner, PlannerError> {
        let outputs = [
            Output::matrix(OUT_M, &self.root.m),
            Output::vector(OUT_F, &self.root.f),
            Output::vector(OUT_DPSI, &self.attractor.config_gradient),
            Output::vector(OUT_XT, &self.attractor.residual_expr),
        ];
        let inputs: Vec<(&str, usize)> = self.input_layout.iter().map(|(n, l)| (n.as_str(), *l)).collect();
        let plan = compile(&outputs, &inputs)?;
        let metadata = PlannerMetadata {
            robot: self.robot.name.clone(),
            dof: self.robot.dof(),
            obstacle_count: self.obstacle_count,
            parameter_order: Param::ALL.iter().map(|p| p.name().to_string()).collect(),
            input_layout: self.input_layout.clone(),
            outputs: plan.output_layout().iter().map(|s| s.name.clone()).collect(),
            leaves: self.leaves.iter().map(|l| l.name.clone()).collect(),
            tape_len: plan.tape().len(),
        };
        Ok(CompiledPlanner {
            plan,
            metadata,
            robot: self.robot.clone(),
        })
    }
}

/// Evaluated root quantities at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct RootTerms {
    pub m: DMatrix<f64>,
    pub f: DVector<f64>,
    pub dpsi: DVector<f64>,
    pub xt: [f64; 2],
}

impl CompiledPlanner {
    pub fn build(robot: &RobotModel, obstacle_count: usize) -> Result<Self, PlannerError> {
        assemble(robot, obstacle_count)?.compile()
    }

    pub fn metadata(&self) -> &PlannerMetadata {
        &self.metadata
    }

    pub fn robot(&self) -> &RobotModel {
        &self.robot
    }

    pub fn plan(&self) -> &CompiledPlan {
        &self.plan
    }

    /// Binds scene and parameters, checking `params` against `space` first.
    pub fn bind(
        &self,
        params: &ParameterSet,
        space: &SearchSpace,
        scenario: &Scenario,
    ) -> Result<BoundPlanner<'_>, PlannerError> {
        space.check(params)?;
        self.bind_unchecked(params, scenario)
    }

    /// Binds without a search-space bound check.
    pub fn bind_unchecked(
        &self,
        params: &ParameterSet,
        scenario: &Scenario,
    ) -> Result<BoundPlanner<'_>, PlannerError> {
        if scenario.robot != self.robot.name {
            return Err(PlannerError::RobotMismatch {
                planner: self.robot.name.clone(),
                scenario: scenario.robot.clone(),
            });
        }
        let k = self.metadata.obstacle_count;
        if scenario.obstacles.len() > k {
            return Err(PlannerError::ObstacleCount {
                scenario: scenario.obstacles.len(),
                planner: k,
            });
        }
        let theta = params.to_vector()?;
        let n = self.robot.dof();
        let mut inputs = Vec::with_capacity(self.plan.input_len());
        let mut offset_q = 0;
        for (name, len) in self.plan.input_layout() {
            match name.as_str() {
                GROUP_Q => {
                    offset_q = inputs.len();
                    inputs.extend(std::iter::repeat_n(0.0, *len));
                }
                GROUP_QD => inputs.extend(std::iter::repeat_n(0.0, *len)),
                GROUP_OBST_POS => {
                    for j in 0..k {
                        let c = scenario.obstacles.get(j).map_or(
                            [DUMMY_DISTANCE, 0.0],
                            |o| o.center,
                        );
                        inputs.extend(c);
                    }
                }
                GROUP_OBST_RAD => {
                    for j in 0..k {
                        inputs.push(scenario.obstacles.get(j).map_or(DUMMY_RADIUS, |o| o.radius));
                    }
                }
                GROUP_GOAL => inputs.extend(scenario.goal),
                GROUP_THETA => inputs.extend(&theta),
                other => unreachable!("unexpected input group {other}"),
            }
        }
        let get = |p: Param| theta[p.index()];
        Ok(BoundPlanner {
            planner: self,
            inputs,
            offset_q,
            n,
            scratch: self.plan.new_scratch(),
            out: vec![0.0; self.plan.output_len()],
            speed: SpeedParams {
                m_base: get(Param::MBase),
                alpha_b: get(Param::AlphaB),
                b_min: get(Param::BMin),
                b_max: get(Param::BMax),
                r_shift: get(Param::RShift),
                v_ex: get(Param::VEx),
            },
            theta,
        })
    }

    /// Rollout of the bound policy on `scenario`.
    pub fn simulate(
        &self,
        params: &ParameterSet,
        space: &SearchSpace,
        scenario: &Scenario,
    ) -> Result<TrajectoryLog, PlannerError> {
        scenario.validate(&self.robot)?;
        let mut policy = self.bind(params, space, scenario)?;
        Ok(rollout(&mut policy, &self.robot, scenario))
    }

    /// Rollout, metrics and weighted objective.
    pub fn score(
        &self,
        params: &ParameterSet,
        space: &SearchSpace,
        scenario: &Scenario,
        weights: &Weights,
    ) -> Result<(TrajectoryLog, Metrics, f64), PlannerError> {
        let log = self.simulate(params, space, scenario)?;
        let m = compute_metrics(&log, scenario)?;
        let c = objective(&m, weights);
        Ok((log, m, c))
    }
}

/// A planner with scene and parameters bound; owns its evaluation buffers.
#[derive(Debug, Clone)]
pub struct BoundPlanner<'a> {
    planner: &'a CompiledPlanner,
    inputs: Vec<f64>,
    offset_q: usize,
    n: usize,
    scratch: Vec<f64>,
    out: Vec<f64>,
    speed: SpeedParams,
    theta: Vec<f64>,
}

/// Solves `M x = b` for symmetric `M`, by Cholesky when positive definite.
pub fn solve_symmetric(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    match m.clone().cholesky() {
        Some(c) => Some(c.solve(b)),
        None => m.clone().lu().solve(b),
    }
}

impl BoundPlanner<'_> {
    pub fn speed_params(&self) -> &SpeedParams {
        &self.speed
    }

    pub fn root_terms(&mut self, q: &[f64], qd: &[f64]) -> RootTerms {
        let n = self.n;
        self.inputs[self.offset_q..self.offset_q + n].copy_from_slice(q);
        self.inputs[self.offset_q + n..self.offset_q + 2 * n].copy_from_slice(qd);
        self.planner.plan.eval_into(&self.inputs, &mut self.scratch, &mut self.out);
        let o = &self.out;
        let m = DMatrix::from_row_slice(n, n, &o[..n * n]);
        let f = DVector::from_column_slice(&o[n * n..n * n + n]);
        let dpsi = DVector::from_column_slice(&o[n * n + n..n * n + 2 * n]);
        let xt = [o[n * n + 2 * n], o[n * n + 2 * n + 1]];
        RootTerms { m, f, dpsi, xt }
    }

    /// `(h₂, M⁻¹∂ψ)` at a state; `None` when `M` is singular.
    pub fn forcing_terms(&mut self, q: &[f64], qd: &[f64]) -> Option<(DVector<f64>, DVector<f64>, [f64; 2])> {
        let t = self.root_terms(q, qd);
        let h2 = solve_symmetric(&t.m, &t.f)?;
        let mpsi = solve_symmetric(&t.m, &t.dpsi)?;
        Some((h2, mpsi, t.xt))
    }

    pub fn compute_acceleration(&mut self, q: &[f64], qd: &[f64]) -> Result<(Vec<f64>, SpeedTerms), PlannerError> {
        let nonfinite = |qdd: Vec<f64>, s: &Self| {
            PlannerError::NonFinite(Box::new(Snapshot {
                q: q.to_vec(),
                qd: qd.to_vec(),
                theta: s.theta.clone(),
                qdd,
            }))
        };
        let Some((h2, mpsi, xt)) = self.forcing_terms(q, qd) else {
            return Err(nonfinite(vec![f64::NAN; self.n], self));
        };
        let qd_v = DVector::from_column_slice(qd);
        let (qdd, terms) = speed_control(&h2, &mpsi, &qd_v, xt[0].hypot(xt[1]), &self.speed);
        let qdd: Vec<f64> = qdd.iter().copied().collect();
        if qdd.iter().any(|v| !v.is_finite()) {
            return Err(nonfinite(qdd, self));
        }
        Ok((qdd, terms))
    }
}

impl Policy for BoundPlanner<'_> {
    fn acceleration(&mut self, q: &[f64], qd: &[f64], qdd: &mut [f64]) -> Result<(), String> {
        let (a, _) = self.compute_acceleration(q, qd).map_err(|e| e.to_string())?;
        qdd.copy_from_slice(&a);
        Ok(())
    }
}

/// Scores parameter sets by rolling out one scenario.
pub struct RolloutEvaluator<'a> {
    pub planner: &'a CompiledPlanner,
    pub space: &'a SearchSpace,
    pub scenario: &'a Scenario,
    pub weights: Weights,
}

impl RolloutEvaluator<'_> {
    /// Checks the pairing of planner and scenario before any trial runs.
    pub fn check(&self) -> Result<(), PlannerError> {
        self.scenario.validate(self.planner.robot())?;
        self.space.validate_for_planner()?;
        self.weights.validate()?;
        if self.scenario.obstacles.len() > self.planner.metadata().obstacle_count {
            return Err(PlannerError::ObstacleCount {
                scenario: self.scenario.obstacles.len(),
                planner: self.planner.metadata().obstacle_count,
            });
        }
        Ok(())
    }
}

impl Evaluator for RolloutEvaluator<'_> {
    fn evaluate(&self, params: &ParameterSet, _seed: u64) -> Evaluation {
        match self.planner.score(params, self.space, self.scenario, &self.weights) {
            Ok((log, m, c)) => Evaluation {
                cost: c,
                metrics: Some(m),
                termination: Some(log.termination),
            },
            Err(e) => {
                log::warn!("trial evaluation failed: {e}");
                Evaluation::cost_only(f64::INFINITY)
            }
        }
    }
}

#[cfg(test)]
mod tests;
