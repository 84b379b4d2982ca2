//! Planar robots, scenarios, rollout simulation and trajectory metrics.

mod metrics;
pub mod presets;
mod robot;
mod rollout;
mod scenario;

use thiserror::Error;

pub use metrics::{compute_metrics, objective, Metrics, Weights, REACH_TOLERANCE};
pub use robot::RobotModel;
pub use rollout::{rollout, LogEntry, Policy, Termination, TrajectoryLog, ZeroPolicy};
pub use scenario::{derive_seed, Obstacle, Perturbation, Scenario};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid robot model: {0}")]
    InvalidRobot(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("link index {link} outside 1..={dof}")]
    LinkIndex { link: usize, dof: usize },
    #[error("trajectory log is empty")]
    EmptyLog,
    #[error("start position coincides with the goal")]
    DegenerateScenario,
    #[error("objective weights must be finite")]
    InvalidWeights,
    #[error("csv export failed: {0}")]
    Csv(String),
}

impl From<csv::Error> for WorldError {
    fn from(e: csv::Error) -> Self {
        WorldError::Csv(e.to_string())
    }
}

impl From<std::io::Error> for WorldError {
    fn from(e: std::io::Error) -> Self {
        WorldError::Csv(e.to_string())
    }
}
