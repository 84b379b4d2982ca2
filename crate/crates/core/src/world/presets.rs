//! Desk-scale planar arms and the reaching scenarios shipped in `configs/`.

use std::f64::consts::TAU;

use super::robot::RobotModel;
use super::scenario::{Obstacle, Scenario};

pub const RING_OBSTACLES: usize = 5;
pub const RING_RADIUS: f64 = 0.6;
pub const RING_OBSTACLE_RADIUS: f64 = 0.15;
pub const RING_GOAL: [f64; 2] = [1.1, 0.0];

pub fn three_link() -> RobotModel {
    RobotModel {
        name: "planar3".into(),
        link_lengths: vec![0.5; 3],
        joint_limits: vec![[-2.6, 2.6]; 3],
        sphere_radii: vec![0.05; 3],
        self_collision_pairs: vec![[1, 3]],
        velocity_limit: 2.0,
    }
}

pub fn two_link() -> RobotModel {
    RobotModel {
        name: "planar2".into(),
        link_lengths: vec![0.75; 2],
        joint_limits: vec![[-2.6, 2.6]; 2],
        sphere_radii: vec![0.05; 2],
        self_collision_pairs: vec![],
        velocity_limit: 2.0,
    }
}

/// Start configuration with the end effector outside the ring, above it.
pub fn ring_start(robot: &RobotModel) -> Vec<f64> {
    match robot.dof() {
        2 => vec![1.3, -1.4],
        3 => vec![1.3, -0.7, -0.7],
        n => vec![0.0; n],
    }
}

/// Obstacles evenly spaced on a circle around the goal, one of the gaps
/// facing the robot base.
pub fn ring(robot: &RobotModel) -> Scenario {
    let obstacles = (0..RING_OBSTACLES)
        .map(|j| {
            let a = TAU * j as f64 / RING_OBSTACLES as f64;
            Obstacle {
                center: [RING_GOAL[0] + RING_RADIUS * a.cos(), RING_GOAL[1] + RING_RADIUS * a.sin()],
                radius: RING_OBSTACLE_RADIUS,
            }
        })
        .collect();
    Scenario {
        robot: robot.name.clone(),
        q0: ring_start(robot),
        qd0: None,
        obstacles,
        goal: RING_GOAL,
        horizon: 1000,
        dt: 0.01,
        seed: 0,
    }
}

/// No obstacles; same start and goal as the ring.
pub fn empty(robot: &RobotModel) -> Scenario {
    Scenario {
        obstacles: Vec::new(),
        horizon: 2000,
        ..ring(robot)
    }
}
