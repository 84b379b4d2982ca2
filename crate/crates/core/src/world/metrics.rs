use serde::{Deserialize, Serialize};

use super::robot::dist;
use super::rollout::TrajectoryLog;
use super::scenario::Scenario;
use super::WorldError;

/// End-effector distance below which the goal counts as reached.
pub const REACH_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub cost_distance: f64,
    pub cost_path: f64,
    pub cost_clearance: f64,
    pub reached: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub distance: f64,
    pub path: f64,
    pub clearance: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            distance: 0.7,
            path: 0.1,
            clearance: 0.2,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<(), WorldError> {
        if [self.distance, self.path, self.clearance].iter().all(|w| w.is_finite()) {
            Ok(())
        } else {
            Err(WorldError::InvalidWeights)
        }
    }
}

/// Normalized summed goal distance, normalized path length and mean
/// end-effector clearance to obstacle centers over the full horizon.
///
/// After an early termination the terminal state is held for the remaining
/// steps: its distance and clearance keep contributing, its path length is 0.
pub fn compute_metrics(log: &TrajectoryLog, scenario: &Scenario) -> Result<Metrics, WorldError> {
    let path = log.ee_path();
    let first = *path.first().ok_or(WorldError::EmptyLog)?;
    let norm = dist(first, scenario.goal);
    if norm == 0.0 {
        return Err(WorldError::DegenerateScenario);
    }
    let horizon = log.horizon.max(path.len() - 1);
    let at = |i: usize| path[i.min(path.len() - 1)];
    let clearance = |p: [f64; 2]| {
        scenario
            .obstacles
            .iter()
            .map(|o| dist(p, o.center))
            .fold(f64::INFINITY, f64::min)
    };
    let mut sum_dist = 0.0;
    let mut sum_path = 0.0;
    let mut sum_clear = 0.0;
    for i in 0..=horizon {
        sum_dist += dist(at(i), scenario.goal);
        if i > 0 {
            sum_path += dist(at(i), at(i - 1));
            if !scenario.obstacles.is_empty() {
                sum_clear += clearance(at(i));
            }
        }
    }
    let last = at(horizon);
    Ok(Metrics {
        cost_distance: sum_dist / norm,
        cost_path: sum_path / norm,
        cost_clearance: if horizon == 0 { 0.0 } else { sum_clear / horizon as f64 },
        reached: dist(last, scenario.goal) <= REACH_TOLERANCE,
    })
}

pub fn objective(m: &Metrics, w: &Weights) -> f64 {
    w.distance * m.cost_distance + w.path * m.cost_path + w.clearance * m.cost_clearance
}
