//! Online palpation: impedance control, the probe plant and the policy
//! that ties probing, contour following and cell selection together.

mod control;
mod plant;
mod policy;

pub use control::{
    admissible_force, desired_pose, impedance_force, min_jerk_offset, ControllerGains,
};
pub use plant::{step_plant, PlantConfig, PlantState};
pub use policy::{
    contour_follow, policy_rngs, probe_cell, run_policy, Mode, Outcome, PalpationTrajectory,
    PolicyConfig, PolicyRun, Probe, ProbeParams, ProbeResult, SafetyStats, Strategy, Waypoint,
};
