use super::*;
use crate::leaves::LeafFamily;
use crate::world::presets;
use crate::autotune::sample_uniform;
use crate::world::{Obstacle, Termination};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ring3() -> (CompiledPlanner, Scenario) {
    let robot = presets::three_link();
    let sc = presets::ring(&robot);
    (CompiledPlanner::build(&robot, sc.obstacles.len()).unwrap(), sc)
}

#[test]
fn leaf_counts_follow_scene_layout() {
    let mut two = presets::two_link();
    two.self_collision_pairs.clear();
    let bp = assemble(&two, 1).unwrap();
    assert_eq!(bp.count(LeafFamily::Collision), 2);
    assert_eq!(bp.count(LeafFamily::SelfCollision), 0);
    assert_eq!(bp.count(LeafFamily::Limit), 4);
    assert_eq!(bp.leaves.len(), 6);

    let bp = assemble(&presets::three_link(), 2).unwrap();
    assert_eq!(bp.count(LeafFamily::Collision), 6);
    assert_eq!(bp.count(LeafFamily::SelfCollision), 1);
    assert_eq!(bp.count(LeafFamily::Limit), 6);
    assert_eq!(bp.leaves.len(), 13);

    let bp = assemble(&two, 0).unwrap();
    assert_eq!(bp.count(LeafFamily::Collision), 0);
    assert!(bp.input_layout.iter().all(|(n, _)| n != GROUP_OBST_POS && n != GROUP_OBST_RAD));
}

#[test]
fn at_rest_on_goal_preimage_is_still() {
    let robot = presets::three_link();
    let planner = CompiledPlanner::build(&robot, 0).unwrap();
    let q = [0.4, -0.9, 0.6];
    let mut sc = presets::empty(&robot);
    sc.goal = robot.end_effector(&q);
    let space = SearchSpace::default_space();
    let mut bound = planner.bind(&space.manual(), &space, &sc).unwrap();
    let (qdd, terms) = bound.compute_acceleration(&q, &[0.0; 3]).unwrap();
    for a in qdd {
        assert!(a.abs() < 1e-12, "{a}");
    }
    assert!(terms.s_beta > 0.5);
}

#[test]
fn root_metric_dominates_base_inertia() {
    let (planner, sc) = ring3();
    let space = SearchSpace::default_space();
    let robot = planner.robot().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    while checked < 200 {
        let mut params = sample_uniform(&space, &mut rng);
        let m_base = rng.random_range(0.05..=1.0);
        params.set(Param::MBase.name(), m_base);
        let q: Vec<f64> = robot.joint_limits.iter().map(|[lo, hi]| rng.random_range(*lo..*hi)).collect();
        if sc.min_sphere_gap(&robot, &q) <= 0.0 || robot.self_collision_gaps(&q).iter().any(|g| *g <= 0.0) {
            continue;
        }
        let qd: Vec<f64> = (0..robot.dof()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut bound = planner.bind_unchecked(&params, &sc).unwrap();
        let m = bound.root_terms(&q, &qd).m;
        assert!((&m - m.transpose()).amax() < 1e-9 * (1.0 + m.amax()));
        let min_eig = m.symmetric_eigenvalues().min();
        assert!(min_eig >= 0.9 * m_base, "λ_min {min_eig} < 0.9·{m_base}");
        checked += 1;
    }
}

#[test]
fn acceleration_is_bit_identical_for_identical_inputs() {
    let (planner, sc) = ring3();
    let space = SearchSpace::default_space();
    let mut a = planner.bind(&space.manual(), &space, &sc).unwrap();
    let mut b = planner.bind(&space.manual(), &space, &sc).unwrap();
    let q = [0.9, -0.5, -0.4];
    let qd = [0.3, -0.2, 0.1];
    let x = a.compute_acceleration(&q, &qd).unwrap().0;
    let y = b.compute_acceleration(&q, &qd).unwrap().0;
    let z = a.compute_acceleration(&q, &qd).unwrap().0;
    assert_eq!(x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), y.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(x, z);
}

#[test]
fn out_of_bounds_parameters_are_rejected() {
    let (planner, sc) = ring3();
    let space = SearchSpace::default_space();
    let mut p = space.manual();
    p.set(Param::BMax.name(), 1e6);
    assert!(matches!(planner.bind(&p, &space, &sc), Err(PlannerError::Params(_))));
    let mut missing = space.manual();
    missing.values.remove(Param::VEx.name());
    assert!(planner.bind(&missing, &space, &sc).is_err());
}

#[test]
fn scene_mismatch_is_rejected() {
    let robot = presets::three_link();
    let planner = CompiledPlanner::build(&robot, 2).unwrap();
    let space = SearchSpace::default_space();
    let sc = presets::ring(&robot);
    assert!(matches!(
        planner.bind(&space.manual(), &space, &sc),
        Err(PlannerError::ObstacleCount { scenario: 5, planner: 2 })
    ));
    let other = presets::empty(&presets::two_link());
    assert!(matches!(
        planner.bind(&space.manual(), &space, &other),
        Err(PlannerError::RobotMismatch { .. })
    ));
}

#[test]
fn fewer_obstacles_than_slots_use_far_dummies() {
    let robot = presets::three_link();
    let planner = CompiledPlanner::build(&robot, 3).unwrap();
    let space = SearchSpace::default_space();
    let mut sc = presets::empty(&robot);
    sc.obstacles = vec![Obstacle {
        center: [0.2, 1.0],
        radius: 0.1,
    }];
    let mut with_dummies = planner.bind(&space.manual(), &space, &sc).unwrap();
    let exact = CompiledPlanner::build(&robot, 1).unwrap();
    let mut one = exact.bind(&space.manual(), &space, &sc).unwrap();
    let q = [0.5, 0.3, -0.2];
    let qd = [0.4, 0.1, -0.3];
    let a = with_dummies.compute_acceleration(&q, &qd).unwrap().0;
    let b = one.compute_acceleration(&q, &qd).unwrap().0;
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()), "{x} vs {y}");
    }
}

#[test]
fn nonfinite_state_reports_snapshot() {
    let (planner, sc) = ring3();
    let space = SearchSpace::default_space();
    let mut bound = planner.bind(&space.manual(), &space, &sc).unwrap();
    let err = bound.compute_acceleration(&[f64::NAN, 0.0, 0.0], &[0.0; 3]).unwrap_err();
    match err {
        PlannerError::NonFinite(s) => {
            assert!(s.q[0].is_nan());
            assert_eq!(s.theta, space.manual().to_vector().unwrap());
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn metadata_round_trips_through_json() {
    let (planner, _) = ring3();
    let md = planner.metadata();
    assert_eq!(md.dof, 3);
    assert_eq!(md.obstacle_count, 5);
    assert_eq!(md.parameter_order.len(), Param::ALL.len());
    assert_eq!(md.outputs, ["M", "f", "dpsi", "xt"]);
    assert_eq!(md.leaves.len(), 15 + 1 + 6);
    let names: Vec<&str> = md.input_layout.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, [GROUP_Q, GROUP_QD, GROUP_OBST_POS, GROUP_OBST_RAD, GROUP_GOAL, GROUP_THETA]);
    let back: PlannerMetadata = serde_json::from_str(&serde_json::to_string(md).unwrap()).unwrap();
    assert_eq!(&back, md);
}

#[test]
fn manual_parameters_reach_goal_in_empty_scene() {
    let space = SearchSpace::default_space();
    for robot in [presets::two_link(), presets::three_link()] {
        let sc = presets::empty(&robot);
        let planner = CompiledPlanner::build(&robot, 0).unwrap();
        let log = planner.simulate(&space.manual(), &space, &sc).unwrap();
        assert_eq!(log.termination, Termination::Completed);
        let ee = log.final_entry().ee;
        let d = (ee[0] - sc.goal[0]).hypot(ee[1] - sc.goal[1]);
        assert!(d <= 0.05, "{}: final distance {d}", robot.name);
    }
}

#[test]
fn evaluator_scores_failures_as_infinite() {
    let (planner, sc) = ring3();
    let space = SearchSpace::default_space();
    let ev = RolloutEvaluator {
        planner: &planner,
        space: &space,
        scenario: &sc,
        weights: Weights::default(),
    };
    ev.check().unwrap();
    let mut bad = space.manual();
    bad.set(Param::KAttractor.name(), -1.0);
    assert_eq!(ev.evaluate(&bad, 0).cost, f64::INFINITY);
    let good = ev.evaluate(&space.manual(), 0);
    assert!(good.cost.is_finite());
    assert!(good.metrics.is_some());
}
