//! Symbolic optimization fabrics with runtime-bindable parameters, planar
//! rollout simulation and a Tree-structured Parzen Estimator autotuner.

pub mod autotune;
pub mod fabrics;
pub mod leaves;
pub mod planner;
pub mod symexpr;
pub mod world;
