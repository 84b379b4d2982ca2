use serde::{Deserialize, Serialize};

use super::WorldError;
use crate::symexpr::{Expr, VecExpr};

/// Planar serial chain with one collision sphere at each link's distal joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotModel {
    pub name: String,
    pub link_lengths: Vec<f64>,
    pub joint_limits: Vec<[f64; 2]>,
    pub sphere_radii: Vec<f64>,
    #[serde(default)]
    pub self_collision_pairs: Vec<[usize; 2]>,
    pub velocity_limit: f64,
}

impl RobotModel {
    pub fn dof(&self) -> usize {
        self.link_lengths.len()
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |msg: String| Err(WorldError::InvalidRobot(msg));
        let n = self.dof();
        if n == 0 {
            return bad("at least one link is required".into());
        }
        if let Some(l) = self.link_lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return bad(format!("link lengths must be positive, got {l}"));
        }
        if self.joint_limits.len() != n {
            return bad(format!("{} joint limits for {n} joints", self.joint_limits.len()));
        }
        for (i, [lo, hi]) in self.joint_limits.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("joint {i}: limits [{lo}, {hi}] are not ordered"));
            }
        }
        if self.sphere_radii.len() != n {
            return bad(format!("{} sphere radii for {n} links", self.sphere_radii.len()));
        }
        if let Some(r) = self.sphere_radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return bad(format!("sphere radii must be positive, got {r}"));
        }
        for &[i, j] in &self.self_collision_pairs {
            if i == 0 || j == 0 || i > n || j > n {
                return bad(format!("self-collision pair ({i}, {j}) names a link outside 1..={n}"));
            }
            if i.abs_diff(j) < 2 {
                return bad(format!("self-collision pair ({i}, {j}) must skip at least one link"));
            }
        }
        if !(self.velocity_limit.is_finite() && self.velocity_limit > 0.0) {
            return bad(format!("velocity limit must be positive, got {}", self.velocity_limit));
        }
        Ok(())
    }

    fn check_link(&self, link: usize) -> Result<(), WorldError> {
        if link == 0 || link > self.dof() {
            return Err(WorldError::LinkIndex {
                link,
                dof: self.dof(),
            });
        }
        Ok(())
    }

    /// Position of the distal joint of `link` (1-based).
    pub fn fk(&self, q: &[f64], link: usize) -> Result<[f64; 2], WorldError> {
        self.check_link(link)?;
        let (mut x, mut y, mut angle) = (0.0, 0.0, 0.0);
        for (qi, l) in q.iter().zip(&self.link_lengths).take(link) {
            angle += qi;
            x += l * angle.cos();
            y += l * angle.sin();
        }
        Ok([x, y])
    }

    /// Positions of every distal joint, link 1 first.
    pub fn joint_positions(&self, q: &[f64]) -> Vec<[f64; 2]> {
        let (mut x, mut y, mut angle) = (0.0, 0.0, 0.0);
        q.iter()
            .zip(&self.link_lengths)
            .map(|(qi, l)| {
                angle += qi;
                x += l * angle.cos();
                y += l * angle.sin();
                [x, y]
            })
            .collect()
    }

    pub fn end_effector(&self, q: &[f64]) -> [f64; 2] {
        *self.joint_positions(q).last().expect("at least one link")
    }

    /// Symbolic position of the distal joint of `link` (1-based).
    pub fn fk_expr(&self, q: &[Expr], link: usize) -> Result<VecExpr, WorldError> {
        self.check_link(link)?;
        let (mut x, mut y, mut angle) = (Expr::zero(), Expr::zero(), Expr::zero());
        for (qi, &l) in q.iter().zip(&self.link_lengths).take(link) {
            angle = angle + qi;
            x = x + l * angle.cos();
            y = y + l * angle.sin();
        }
        Ok(VecExpr::new(vec![x, y]))
    }

    /// Signed surface gaps between declared self-collision sphere pairs.
    pub fn self_collision_gaps(&self, q: &[f64]) -> Vec<f64> {
        let joints = self.joint_positions(q);
        self.self_collision_pairs
            .iter()
            .map(|&[i, j]| {
                let (a, b) = (joints[i - 1], joints[j - 1]);
                dist(a, b) - self.sphere_radii[i - 1] - self.sphere_radii[j - 1]
            })
            .collect()
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof()
            && q
                .iter()
                .zip(&self.joint_limits)
                .all(|(v, [lo, hi])| (lo..=hi).contains(&v))
    }
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
