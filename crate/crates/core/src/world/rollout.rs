use std::io::Write;

use serde::{Deserialize, Serialize};

use super::robot::RobotModel;
use super::scenario::Scenario;
use super::WorldError;

/// An acceleration policy `q̈ = π(q, q̇)`; scene and parameters are bound
/// by the implementor.
pub trait Policy {
    /// Writes `q̈` into `qdd`. An error ends the rollout as non-finite.
    fn acceleration(&mut self, q: &[f64], qd: &[f64], qdd: &mut [f64]) -> Result<(), String>;
}

/// Policy returning `q̈ = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn acceleration(&mut self, _q: &[f64], _qd: &[f64], qdd: &mut [f64]) -> Result<(), String> {
        qdd.fill(0.0);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "step", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Collided(usize),
    Nonfinite(usize),
}

impl Termination {
    pub fn is_failure(&self) -> bool {
        !matches!(self, Termination::Completed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    /// Acceleration that produced this state; zero for the initial state.
    pub qdd: Vec<f64>,
    pub ee: [f64; 2],
    /// Signed end-effector gap to the nearest obstacle surface.
    pub min_dist: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub entries: Vec<LogEntry>,
    pub termination: Termination,
    /// Horizon the rollout was asked to cover.
    pub horizon: usize,
}

impl TrajectoryLog {
    pub fn ee_path(&self) -> Vec<[f64; 2]> {
        self.entries.iter().map(|e| e.ee).collect()
    }

    pub fn min_clearance(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.min_dist)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn final_entry(&self) -> &LogEntry {
        self.entries.last().expect("logs hold the initial state")
    }

    /// CSV with columns `step, q0.., qd0.., ee_x, ee_y, min_dist`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), WorldError> {
        let n = self.entries.first().map_or(0, |e| e.q.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string()];
        header.extend((0..n).map(|i| format!("q{i}")));
        header.extend((0..n).map(|i| format!("qd{i}")));
        header.extend(["ee_x", "ee_y", "min_dist"].map(String::from));
        w.write_record(&header)?;
        for (step, e) in self.entries.iter().enumerate() {
            let mut row = vec![step.to_string()];
            row.extend(e.q.iter().chain(&e.qd).map(f64::to_string));
            row.extend([e.ee[0], e.ee[1], e.min_dist].map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn entry(robot: &RobotModel, scenario: &Scenario, q: &[f64], qd: &[f64], qdd: &[f64]) -> LogEntry {
    let ee = robot.end_effector(q);
    LogEntry {
        q: q.to_vec(),
        qd: qd.to_vec(),
        qdd: qdd.to_vec(),
        ee,
        min_dist: scenario.ee_clearance(ee),
    }
}

/// Integrates `policy` with semi-implicit Euler
/// (`q̇ ← q̇ + dt q̈`, clamp `‖q̇‖∞`, then `q ← q + dt q̇`).
///
/// Stops after the step at which any link sphere penetrates an obstacle or
/// a declared self-collision partner, or before a step that would produce
/// a non-finite state.
pub fn rollout<P: Policy + ?Sized>(
    policy: &mut P,
    robot: &RobotModel,
    scenario: &Scenario,
) -> TrajectoryLog {
    let n = robot.dof();
    let mut q = scenario.q0.clone();
    let mut qd = scenario.initial_velocity();
    let mut qdd = vec![0.0; n];
    let mut entries = Vec::with_capacity(scenario.horizon + 1);
    entries.push(entry(robot, scenario, &q, &qd, &qdd));
    let done = |entries: Vec<LogEntry>, termination| TrajectoryLog {
        entries,
        termination,
        horizon: scenario.horizon,
    };
    if scenario.min_sphere_gap(robot, &q) <= 0.0 {
        return done(entries, Termination::Collided(0));
    }
    let vmax = robot.velocity_limit;
    for step in 1..=scenario.horizon {
        if policy.acceleration(&q, &qd, &mut qdd).is_err() || qdd.iter().any(|a| !a.is_finite()) {
            return done(entries, Termination::Nonfinite(step));
        }
        let mut next_qd = qd.clone();
        let mut next_q = q.clone();
        for i in 0..n {
            next_qd[i] = (qd[i] + scenario.dt * qdd[i]).clamp(-vmax, vmax);
            next_q[i] = q[i] + scenario.dt * next_qd[i];
        }
        if next_q.iter().chain(&next_qd).any(|v| !v.is_finite()) {
            return done(entries, Termination::Nonfinite(step));
        }
        q = next_q;
        qd = next_qd;
        entries.push(entry(robot, scenario, &q, &qd, &qdd));
        if scenario.min_sphere_gap(robot, &q) <= 0.0 {
            return done(entries, Termination::Collided(step));
        }
    }
    done(entries, Termination::Completed)
}
