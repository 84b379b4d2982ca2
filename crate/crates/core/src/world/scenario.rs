use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::robot::{dist, RobotModel};
use super::WorldError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub robot: String,
    pub q0: Vec<f64>,
    /// Initial joint velocity; zero when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qd0: Option<Vec<f64>>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub goal: [f64; 2],
    #[serde(rename = "T")]
    pub horizon: usize,
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Limits for test-time randomization of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub obstacle_jitter: f64,
    pub goal_jitter: f64,
    pub max_attempts: usize,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            obstacle_jitter: 0.1,
            goal_jitter: 0.1,
            max_attempts: 1000,
        }
    }
}

/// Margin kept between a perturbed goal and the robot's maximum reach.
const REACH_MARGIN: f64 = 0.02;

impl Scenario {
    pub fn initial_velocity(&self) -> Vec<f64> {
        self.qd0.clone().unwrap_or_else(|| vec![0.0; self.q0.len()])
    }

    pub fn validate(&self, robot: &RobotModel) -> Result<(), WorldError> {
        let bad = |msg: String| Err(WorldError::InvalidScenario(msg));
        if self.robot != robot.name {
            return bad(format!(
                "scenario is for robot `{}` but `{}` was given",
                self.robot, robot.name
            ));
        }
        let n = robot.dof();
        if self.q0.len() != n {
            return bad(format!("q0 has {} entries for {n} joints", self.q0.len()));
        }
        if !robot.within_limits(&self.q0) {
            return bad(format!("q0 {:?} violates the joint limits", self.q0));
        }
        let qd0 = self.initial_velocity();
        if qd0.len() != n || qd0.iter().any(|v| !v.is_finite()) {
            return bad(format!("qd0 must hold {n} finite entries"));
        }
        if !(self.dt > 0.0 && self.dt <= 0.05) {
            return bad(format!("dt must lie in (0, 0.05], got {}", self.dt));
        }
        if self.horizon == 0 {
            return bad("T must be at least 1".into());
        }
        if !self.goal.iter().all(|g| g.is_finite()) {
            return bad("goal must be finite".into());
        }
        for (j, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0 && o.radius.is_finite()) || !o.center.iter().all(|c| c.is_finite()) {
                return bad(format!("obstacle {j} needs a finite center and a positive radius"));
            }
            if dist(o.center, self.goal) <= o.radius {
                return bad(format!("obstacle {j} contains the goal"));
            }
        }
        Ok(())
    }

    /// Smallest signed gap between the end effector and any obstacle surface.
    pub fn ee_clearance(&self, ee: [f64; 2]) -> f64 {
        self.obstacles
            .iter()
            .map(|o| dist(ee, o.center) - o.radius)
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest signed gap between any link sphere and any obstacle, and
    /// between declared self-collision pairs.
    pub fn min_sphere_gap(&self, robot: &RobotModel, q: &[f64]) -> f64 {
        let joints = robot.joint_positions(q);
        let obstacle_gap = joints
            .iter()
            .zip(&robot.sphere_radii)
            .flat_map(|(p, r)| self.obstacles.iter().map(move |o| dist(*p, o.center) - o.radius - r))
            .fold(f64::INFINITY, f64::min);
        robot
            .self_collision_gaps(q)
            .into_iter()
            .fold(obstacle_gap, f64::min)
    }

    /// A randomized copy: each obstacle center and the goal jittered
    /// uniformly per coordinate, rejection-sampled so the goal stays
    /// reachable and outside every obstacle and the start is collision-free.
    pub fn perturbed(
        &self,
        robot: &RobotModel,
        cfg: &Perturbation,
        rng: &mut impl Rng,
    ) -> Result<Scenario, WorldError> {
        let jitter = |rng: &mut dyn rand::RngCore, p: [f64; 2], a: f64| -> [f64; 2] {
            if a > 0.0 {
                [p[0] + rng.random_range(-a..=a), p[1] + rng.random_range(-a..=a)]
            } else {
                p
            }
        };
        for _ in 0..cfg.max_attempts.max(1) {
            let mut s = self.clone();
            for o in &mut s.obstacles {
                o.center = jitter(rng, o.center, cfg.obstacle_jitter);
            }
            s.goal = jitter(rng, s.goal, cfg.goal_jitter);
            let reachable = dist(s.goal, [0.0, 0.0]) <= robot.reach() - REACH_MARGIN;
            let goal_free = s.obstacles.iter().all(|o| dist(o.center, s.goal) > o.radius);
            if reachable && goal_free && s.min_sphere_gap(robot, &s.q0) > 0.0 {
                return Ok(s);
            }
        }
        Err(WorldError::InvalidScenario(format!(
            "no admissible perturbation found in {} attempts",
            cfg.max_attempts
        )))
    }

    /// `k` perturbed scenarios; scenario `i` depends only on `(seed, i)`.
    pub fn test_set(
        &self,
        robot: &RobotModel,
        cfg: &Perturbation,
        k: usize,
        seed: u64,
    ) -> Result<Vec<Scenario>, WorldError> {
        (0..k)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
                let mut s = self.perturbed(robot, cfg, &mut rng)?;
                s.seed = derive_seed(seed, i as u64);
                Ok(s)
            })
            .collect()
    }
}

/// Counter-based seed derivation (SplitMix64 finalizer).
pub fn derive_seed(master: u64, counter: u64) -> u64 {
    let mut z = master
        .wrapping_add(counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::presets;

    #[test]
    fn shipped_presets_validate() {
        for (robot, scenario) in [
            (presets::three_link(), presets::ring(&presets::three_link())),
            (presets::two_link(), presets::ring(&presets::two_link())),
            (presets::two_link(), presets::empty(&presets::two_link())),
        ] {
            robot.validate().unwrap();
            scenario.validate(&robot).unwrap();
            assert!(scenario.min_sphere_gap(&robot, &scenario.q0) > 0.0);
        }
    }

    #[test]
    fn validation_rejects_goal_inside_obstacle_and_bad_dt() {
        let robot = presets::three_link();
        let mut s = presets::ring(&robot);
        s.obstacles[0].center = s.goal;
        assert!(s.validate(&robot).is_err());
        let mut s = presets::ring(&robot);
        s.dt = 0.06;
        assert!(s.validate(&robot).is_err());
        let mut s = presets::ring(&robot);
        s.q0[0] = 10.0;
        assert!(s.validate(&robot).is_err());
        let mut s = presets::ring(&robot);
        s.robot = "other".into();
        assert!(s.validate(&robot).is_err());
    }

    #[test]
    fn perturbation_stays_in_the_jitter_box() {
        let robot = presets::three_link();
        let base = presets::ring(&robot);
        let cfg = Perturbation::default();
        let set = base.test_set(&robot, &cfg, 20, 3).unwrap();
        assert_eq!(set, base.test_set(&robot, &cfg, 20, 3).unwrap());
        assert_ne!(set[0], set[1]);
        for s in &set {
            s.validate(&robot).unwrap();
            assert!(s.min_sphere_gap(&robot, &s.q0) > 0.0);
            assert!(dist(s.goal, [0.0, 0.0]) <= robot.reach());
            for k in 0..2 {
                assert!((s.goal[k] - base.goal[k]).abs() <= 0.1);
                for (o, b) in s.obstacles.iter().zip(&base.obstacles) {
                    assert!((o.center[k] - b.center[k]).abs() <= 0.1);
                    assert_eq!(o.radius, b.radius);
                }
            }
        }
    }

    #[test]
    fn scenario_json_uses_capital_horizon_key() {
        let robot = presets::two_link();
        let s = presets::ring(&robot);
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["T"], 1000);
        let back: Scenario = serde_json::from_value(json).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"robot":"x","q0":[0],"goal":[1,0],"T":5,"dt":0.01,"extra":1}"#;
        assert!(serde_json::from_str::<Scenario>(bad).is_err());
    }
}
