//! Hand pose recovery from contact maps.

mod objective;
mod solve;

pub use objective::{
    loss_contact, loss_direction, loss_penetration, loss_reg, LossBreakdown, LossWeights, Objective, ABS_SMOOTHING,
    REFERENCE_POINTS,
};
pub use solve::{initial_candidates, initial_pose, palm_initial_pose, solve, write_trace_csv, GraspResult, SolverConfig, StageConfig, TraceRow};
