//! Speed control: energization coefficients and the switched damping law
//! `q̈ = −h₂ − M⁻¹∂ψ + α_ex q̇ − β q̇`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::fabrics::EPS_ENERGIZE;

/// `α = −q̇ᵀ(M_L a + f_L) / (q̇ᵀ M_L q̇ + ε)`: the multiple of `q̇` that, added
/// to `a`, keeps the energy of `L` constant.
pub fn energization_coefficient(
    a_raw: &DVector<f64>,
    m_l: &DMatrix<f64>,
    f_l: &DVector<f64>,
    qd: &DVector<f64>,
) -> f64 {
    let num = qd.dot(&(m_l * a_raw + f_l));
    let den = qd.dot(&(m_l * qd)) + EPS_ENERGIZE;
    -num / den
}

/// Same as [`energization_coefficient`] for `L = ½ c q̇ᵀq̇`.
pub fn energization_coefficient_scaled(a_raw: &DVector<f64>, c: f64, qd: &DVector<f64>) -> f64 {
    -(c * qd.dot(a_raw)) / (c * qd.norm_squared() + EPS_ENERGIZE)
}

/// Goal-distance switch between `B_min` and `B_min + B_max`.
pub fn s_beta(goal_distance: f64, alpha_b: f64, r_shift: f64) -> f64 {
    0.5 * ((-alpha_b * (goal_distance - r_shift)).tanh() + 1.0)
}

/// Execution-energy switch between the unforced and forced coefficients.
pub fn s_eta(l_ex: f64, v_ex: f64) -> f64 {
    0.5 * ((-0.5 * l_ex * (1.0 - v_ex) - 0.5).tanh() + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedParams {
    pub m_base: f64,
    pub alpha_b: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub r_shift: f64,
    pub v_ex: f64,
}

/// Intermediate quantities of one speed-control evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedTerms {
    pub l_ex: f64,
    pub alpha_ex0: f64,
    pub alpha_ex_psi: f64,
    pub alpha_le: f64,
    pub s_eta: f64,
    pub s_beta: f64,
    pub alpha_ex: f64,
    pub beta: f64,
}

/// Applies the damping law given `h₂ = M⁻¹f` and `M⁻¹∂ψ`.
///
/// `L_ex = ½q̇ᵀq̇` is taken at the current state. `α_Le` conserves the
/// base-inertia energy `½ m_base q̇ᵀq̇` without goal attraction.
pub fn speed_control(
    h2: &DVector<f64>,
    m_inv_dpsi: &DVector<f64>,
    qd: &DVector<f64>,
    goal_distance: f64,
    p: &SpeedParams,
) -> (DVector<f64>, SpeedTerms) {
    let a0 = -h2;
    let a_psi = &a0 - m_inv_dpsi;
    let l_ex = 0.5 * qd.norm_squared();
    let alpha_ex0 = energization_coefficient_scaled(&a0, 1.0, qd);
    let alpha_ex_psi = energization_coefficient_scaled(&a_psi, 1.0, qd);
    let alpha_le = energization_coefficient_scaled(&a0, p.m_base, qd);
    let se = s_eta(l_ex, p.v_ex);
    let sb = s_beta(goal_distance, p.alpha_b, p.r_shift);
    let alpha_ex = se * alpha_ex0 + (1.0 - se) * alpha_ex_psi;
    let beta = sb * p.b_max + p.b_min + (alpha_ex - alpha_le).max(0.0);
    let qdd = a_psi + qd * (alpha_ex - beta);
    (
        qdd,
        SpeedTerms {
            l_ex,
            alpha_ex0,
            alpha_ex_psi,
            alpha_le,
            s_eta: se,
            s_beta: sb,
            alpha_ex,
            beta,
        },
    )
}
