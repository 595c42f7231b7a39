//! Kinematics, trajectory planning and control simulation for a five-axis
//! hybrid parallel kinematic machine: a three-axis translational parallel
//! stage carrying a two-axis parallel spherical wrist.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod fixtures;
pub mod gcode;
pub mod hybrid;
pub mod machine;
pub mod trajectory;
pub mod translation;
pub mod wrist;

pub use control::{
    computed_torque, error_poles, estimate_velocity, run_sim, torque_normalization, AxisKind,
    AxisPlant, Disturbance, Feedforward, Integrator, Shutdown, SimConfig, SimTrace, TraceRow,
    VelocityEstimator,
};
pub use error::{Block, ConfigError, GcodeError, KinematicsError, PlanError, SimError};
pub use gcode::{
    blend_corners, parse_gcode, parse_gcode_from, plan_gcode, plan_gcode_program, to_gcode,
    BlendedPath, CornerKind, CornerReport, GSegment, MoveKind,
};
pub use hybrid::{
    center_rate_map, coupling_jacobian, evaluate_cycle, fk_full, full_inv_jacobian,
    full_inv_jacobian_dot, ik_full, project_rates, InvJacobian5, JointKinematics, Twist,
};
pub use machine::{
    load_params, workspace_contains, workspace_contains_in_mode, wrist_center_of, ControlGains,
    JointState, MachineParams, Pose, WorkspaceCheck, WorkspaceViolation,
};
pub use trajectory::{
    close_loop, limit_ratios, plan_circular, plan_linear, plan_linear_tour, quintic,
    rescale_to_limits, travel_time, CircleSpec, CircularArc, LimitRatios, Limits, LinearMotion,
    Motion, PathPoint, PlanOptions, SegmentKind, SegmentReport, Trajectory, TrajectorySample,
};
pub use translation::{
    fk_translation, ik_translation, inv_jacobian_translation, AssemblyMode, Branch, WorkingMode,
};
pub use wrist::{fk_wrist, ik_wrist, inv_jacobian_wrist, tool_direction, WristAngles};
