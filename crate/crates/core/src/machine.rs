//! Machine constants, configuration parsing, pose conventions and workspace
//! membership.
//!
//! Poses are expressed at the tool tip. The wrist center sits `tool_length`
//! behind the tip along the tool axis returned by [`tool_direction`].

use std::f64::consts::FRAC_PI_4;
use std::fmt;

use nalgebra::{Vector3, Vector5};

use crate::error::ConfigError;
use crate::translation::{ik_translation, WorkingMode};
use crate::wrist::tool_direction;

/// Minimum admissible distance between tool tip and wrist center (m).
pub const MIN_TOOL_LENGTH: f64 = 0.072;

/// Computed-torque PID gains for the rotational and translational axis groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlGains {
    pub kp_r: f64,
    pub kd_r: f64,
    pub ki_r: f64,
    pub kp_t: f64,
    pub kd_t: f64,
    pub ki_t: f64,
    /// Nominal closed-loop bandwidth (rad/s). Informational only, the gains
    /// above are used as given.
    pub omega: f64,
}

impl Default for ControlGains {
    fn default() -> Self {
        ControlGains {
            kp_r: 19200.0,
            kd_r: 240.0,
            ki_r: 512000.0,
            kp_t: 19200.0,
            kd_t: 240.0,
            ki_t: 512000.0,
            omega: 49.0,
        }
    }
}

/// Geometric and limit constants of the machine. Immutable once validated.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineParams {
    /// Parallelogram leg lengths l1, l2, l3 (m).
    pub leg_lengths: [f64; 3],
    /// Distance from the tool tip to the wrist rotation center (m).
    pub tool_length: f64,
    /// Prismatic joint range `[rho_min, rho_max]` (m), shared by all legs.
    pub rho_limits: [f64; 2],
    /// Maximum |alpha| and |beta| (rad).
    pub tilt_limit: f64,
    /// Max linear speed (m/s); also the prismatic joint speed limit.
    pub k_vt: f64,
    /// Max wrist angular speed (rad/s); also the wrist motor speed limit.
    pub k_vr: f64,
    /// Max linear acceleration (m/s^2).
    pub a_t_max: f64,
    /// Max angular acceleration (rad/s^2).
    pub a_r_max: f64,
    /// Equivalent mass seen by each prismatic actuator (kg).
    pub equiv_mass: f64,
    /// Equivalent inertia seen by each wrist actuator (kg m^2).
    pub equiv_inertia: f64,
    pub gains: ControlGains,
    pub safety_speed_ratio: f64,
    /// Translational joint error that triggers a shutdown (m).
    pub error_shutdown: f64,
}

impl Default for MachineParams {
    fn default() -> Self {
        MachineParams {
            leg_lengths: [0.75; 3],
            tool_length: 0.09,
            rho_limits: [0.05, 1.3],
            tilt_limit: FRAC_PI_4,
            k_vt: 1.2,
            k_vr: 3.27,
            a_t_max: 13.0,
            a_r_max: 270.0,
            equiv_mass: 91.6278,
            equiv_inertia: 0.2772,
            gains: ControlGains::default(),
            safety_speed_ratio: 0.10,
            error_shutdown: 0.003,
        }
    }
}

impl MachineParams {
    /// Checks every invariant, reporting the first offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, value) in [
            ("l1", self.leg_lengths[0]),
            ("l2", self.leg_lengths[1]),
            ("l3", self.leg_lengths[2]),
            ("rho_max", self.rho_limits[1]),
            ("tilt_limit_deg", self.tilt_limit),
            ("k_vt", self.k_vt),
            ("k_vr", self.k_vr),
            ("a_t_max", self.a_t_max),
            ("a_r_max", self.a_r_max),
            ("mass", self.equiv_mass),
            ("inertia", self.equiv_inertia),
            ("safety_speed_ratio", self.safety_speed_ratio),
            ("error_shutdown", self.error_shutdown),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::invalid(field, "must be positive"));
            }
        }
        if !(self.tool_length.is_finite() && self.tool_length > MIN_TOOL_LENGTH) {
            return Err(ConfigError::invalid("tool_length", "must exceed 0.072"));
        }
        if !(self.rho_limits[0].is_finite() && self.rho_limits[0] > 0.0) {
            return Err(ConfigError::invalid("rho_min", "must be positive"));
        }
        if self.rho_limits[0] >= self.rho_limits[1] {
            return Err(ConfigError::invalid("rho_min", "must be below rho_max"));
        }
        // Allow for the round trip through degrees in config files.
        if self.tilt_limit > FRAC_PI_4 * (1.0 + 1e-12) {
            return Err(ConfigError::invalid("tilt_limit_deg", "must not exceed 45"));
        }
        if self.safety_speed_ratio > 1.0 {
            return Err(ConfigError::invalid(
                "safety_speed_ratio",
                "must not exceed 1",
            ));
        }
        let g = &self.gains;
        for (field, value) in [("kp", g.kp_t), ("kd", g.kd_t), ("ki", g.ki_t)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ConfigError::invalid(field, "must be nonnegative"));
            }
        }
        for value in [g.kp_r, g.kd_r, g.ki_r] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ConfigError::invalid("gains", "must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn rho_in_range(&self, rho: f64) -> bool {
        rho >= self.rho_limits[0] && rho <= self.rho_limits[1]
    }
}

/// Parses `key = value` configuration text. Missing keys keep their defaults.
///
/// Keys: `l1 l2 l3 tool_length rho_min rho_max tilt_limit_deg k_vt k_vr
/// a_t_max a_r_max mass inertia kp kd ki safety_speed_ratio error_shutdown`.
/// `kp`, `kd` and `ki` set both axis groups. Text after `#` is ignored.
pub fn load_params(config_text: &str) -> Result<MachineParams, ConfigError> {
    let mut params = MachineParams::default();
    let mut seen: Vec<&str> = Vec::new();

    for (idx, raw) in config_text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let number: f64 = value.parse().map_err(|_| ConfigError::Parse {
            line,
            message: format!("`{value}` is not a number"),
        })?;

        let slot: &mut f64 = match key {
            "l1" => &mut params.leg_lengths[0],
            "l2" => &mut params.leg_lengths[1],
            "l3" => &mut params.leg_lengths[2],
            "tool_length" => &mut params.tool_length,
            "rho_min" => &mut params.rho_limits[0],
            "rho_max" => &mut params.rho_limits[1],
            "tilt_limit_deg" => &mut params.tilt_limit,
            "k_vt" => &mut params.k_vt,
            "k_vr" => &mut params.k_vr,
            "a_t_max" => &mut params.a_t_max,
            "a_r_max" => &mut params.a_r_max,
            "mass" => &mut params.equiv_mass,
            "inertia" => &mut params.equiv_inertia,
            "kp" => &mut params.gains.kp_t,
            "kd" => &mut params.gains.kd_t,
            "ki" => &mut params.gains.ki_t,
            "safety_speed_ratio" => &mut params.safety_speed_ratio,
            "error_shutdown" => &mut params.error_shutdown,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        };
        if seen.contains(&key) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        seen.push(key);
        *slot = if key == "tilt_limit_deg" {
            number.to_radians()
        } else {
            number
        };
    }

    params.gains.kp_r = params.gains.kp_t;
    params.gains.kd_r = params.gains.kd_t;
    params.gains.ki_r = params.gains.ki_t;
    params.validate()?;
    Ok(params)
}

/// Task-space configuration of the tool tip: tilt angles then position.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub alpha: f64,
    pub beta: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Pose {
    pub fn new(alpha: f64, beta: f64, x: f64, y: f64, z: f64) -> Self {
        Pose {
            alpha,
            beta,
            x,
            y,
            z,
        }
    }

    /// Pose with the tool vertical and the wrist center at the origin.
    pub fn home(params: &MachineParams) -> Self {
        Pose::new(0.0, 0.0, 0.0, 0.0, -params.tool_length)
    }

    /// Builds the tip pose whose wrist center is `center`.
    pub fn from_wrist_center(
        alpha: f64,
        beta: f64,
        center: Vector3<f64>,
        tool_length: f64,
    ) -> Self {
        let tip = center + tool_length * tool_direction(alpha, beta);
        Pose::new(alpha, beta, tip.x, tip.y, tip.z)
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn to_vector(&self) -> Vector5<f64> {
        Vector5::new(self.alpha, self.beta, self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector5<f64>) -> Self {
        Pose::new(v[0], v[1], v[2], v[3], v[4])
    }
}

/// Actuator coordinates: wrist angles then prismatic lengths.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointState {
    pub theta1: f64,
    pub theta2: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
}

impl JointState {
    pub fn new(theta1: f64, theta2: f64, rho1: f64, rho2: f64, rho3: f64) -> Self {
        JointState {
            theta1,
            theta2,
            rho1,
            rho2,
            rho3,
        }
    }

    pub fn rho(&self) -> Vector3<f64> {
        Vector3::new(self.rho1, self.rho2, self.rho3)
    }

    pub fn to_vector(&self) -> Vector5<f64> {
        Vector5::new(self.theta1, self.theta2, self.rho1, self.rho2, self.rho3)
    }

    pub fn from_vector(v: &Vector5<f64>) -> Self {
        JointState::new(v[0], v[1], v[2], v[3], v[4])
    }
}

/// Wrist rotation center for a tip pose.
pub fn wrist_center_of(pose: &Pose, params: &MachineParams) -> Vector3<f64> {
    pose.position() - params.tool_length * tool_direction(pose.alpha, pose.beta)
}

/// Why a pose failed [`workspace_contains`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WorkspaceViolation {
    Tilt,
    NoRealIk { leg: usize },
    JointLimit { leg: usize, rho: f64 },
}

impl fmt::Display for WorkspaceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkspaceViolation::Tilt => write!(f, "tilt limit exceeded"),
            WorkspaceViolation::NoRealIk { leg } => {
                write!(f, "no real inverse kinematics for leg {leg}")
            }
            WorkspaceViolation::JointLimit { leg, rho } => {
                write!(f, "rho{leg} = {rho} m outside joint limits")
            }
        }
    }
}

/// Result of a workspace membership query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkspaceCheck {
    pub violation: Option<WorkspaceViolation>,
}

impl WorkspaceCheck {
    pub fn inside(&self) -> bool {
        self.violation.is_none()
    }
}

/// Workspace membership in the default working mode.
pub fn workspace_contains(pose: &Pose, params: &MachineParams) -> WorkspaceCheck {
    workspace_contains_in_mode(pose, params, WorkingMode::default())
}

pub fn workspace_contains_in_mode(
    pose: &Pose,
    params: &MachineParams,
    mode: WorkingMode,
) -> WorkspaceCheck {
    let violation = if pose.alpha.abs() > params.tilt_limit || pose.beta.abs() > params.tilt_limit {
        Some(WorkspaceViolation::Tilt)
    } else {
        let center = wrist_center_of(pose, params);
        match ik_translation(&center, params, mode) {
            Err(crate::KinematicsError::NoRealSolution { leg }) => {
                Some(WorkspaceViolation::NoRealIk { leg })
            }
            Err(_) => Some(WorkspaceViolation::NoRealIk { leg: 0 }),
            Ok(rho) => (0..3).find(|&i| !params.rho_in_range(rho[i])).map(|i| {
                WorkspaceViolation::JointLimit {
                    leg: i + 1,
                    rho: rho[i],
                }
            }),
        }
    };
    WorkspaceCheck { violation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn empty_config_gives_defaults() {
        let p = load_params("").unwrap();
        assert_eq!(p, MachineParams::default());
        assert_eq!(p.tool_length, 0.09);
        assert_eq!(p.k_vt, 1.2);
        assert_eq!(p.equiv_mass, 91.6278);
        assert_eq!(p.equiv_inertia, 0.2772);
        assert_eq!(p.gains.kp_t, 19200.0);
        assert_eq!(p.gains.kd_r, 240.0);
        assert_eq!(p.gains.ki_r, 512000.0);
    }

    #[test]
    fn short_tool_is_rejected() {
        let err = load_params("tool_length = 0.05").unwrap_err();
        assert_eq!(err.to_string(), "tool_length must exceed 0.072");
    }

    #[test]
    fn negative_speed_is_rejected() {
        let err = load_params("k_vt=-1").unwrap_err();
        assert_eq!(err.to_string(), "k_vt must be positive");
    }

    #[test]
    fn config_parsing_details() {
        let p = load_params("# machine\n l1 = 0.8 # longer leg\n\ntilt_limit_deg = 30\nkp = 100\n")
            .unwrap();
        assert_eq!(p.leg_lengths, [0.8, 0.75, 0.75]);
        assert_relative_eq!(p.tilt_limit, 30f64.to_radians());
        assert_eq!(p.gains.kp_r, 100.0);
        assert_eq!(p.gains.kp_t, 100.0);

        assert!(matches!(
            load_params("speed = 3"),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            load_params("k_vt = 1\nk_vt = 2"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(
            load_params("k_vt 1"),
            Err(ConfigError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            load_params("k_vt = fast"),
            Err(ConfigError::Parse { line: 1, .. })
        ));
        assert!(load_params("tilt_limit_deg = 60").is_err());
        assert!(load_params("tilt_limit_deg = 45").is_ok());
        assert!(load_params("rho_min = 0.9\nrho_max = 0.8").is_err());
    }

    #[test]
    fn wrist_center_examples() {
        let mut params = MachineParams {
            tool_length: 0.072,
            ..MachineParams::default()
        };
        let c = wrist_center_of(&Pose::new(0.0, 0.0, 0.0, 0.0, -0.072), &params);
        assert_relative_eq!(c, Vector3::zeros(), epsilon = 1e-15);

        params.tool_length = 0.0;
        let c = wrist_center_of(&Pose::new(0.0, 0.0, 0.1, 0.2, 0.3), &params);
        assert_eq!(c, Vector3::new(0.1, 0.2, 0.3));

        params.tool_length = 0.1;
        let c = wrist_center_of(&Pose::new(FRAC_PI_4, 0.0, 0.0, 0.0, 0.0), &params);
        assert_relative_eq!(
            c,
            Vector3::new(0.0, -0.1 * FRAC_1_SQRT_2, 0.1 * FRAC_1_SQRT_2),
            epsilon = 1e-15
        );
    }

    #[test]
    fn workspace_examples() {
        let params = MachineParams::default();
        assert!(workspace_contains(&Pose::home(&params), &params).inside());

        let tilted = Pose::new(60f64.to_radians(), 0.0, 0.0, 0.0, -0.09);
        assert_eq!(
            workspace_contains(&tilted, &params).violation,
            Some(WorkspaceViolation::Tilt)
        );

        let far = Pose::new(0.0, 0.0, 0.0, 0.75 + 1.0, -0.09);
        assert!(matches!(
            workspace_contains(&far, &params).violation,
            Some(WorkspaceViolation::NoRealIk { .. })
        ));

        let past_stroke = Pose::from_wrist_center(0.0, 0.0, Vector3::new(0.6, 0.0, 0.0), 0.09);
        assert!(matches!(
            workspace_contains(&past_stroke, &params).violation,
            Some(WorkspaceViolation::JointLimit { leg: 1, .. })
        ));
    }

    #[test]
    fn center_to_tip_distance_is_tool_length() {
        let params = MachineParams::default();
        for i in 0..=8 {
            for j in 0..=8 {
                let a = -FRAC_PI_4 + FRAC_PI_4 * i as f64 / 4.0;
                let b = -FRAC_PI_4 + FRAC_PI_4 * j as f64 / 4.0;
                let pose = Pose::new(a, b, 0.1, -0.2, 0.05);
                let d = (pose.position() - wrist_center_of(&pose, &params)).norm();
                assert_relative_eq!(d, params.tool_length, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn tilt_monotonicity() {
        let mut params = MachineParams {
            tilt_limit: 0.3,
            ..MachineParams::default()
        };
        let poses = [
            Pose::new(0.25, 0.1, 0.05, 0.05, -0.05),
            Pose::new(0.35, 0.0, 0.0, 0.0, -0.09),
            Pose::new(0.0, -0.5, 0.1, 0.0, 0.0),
        ];
        let before: Vec<bool> = poses
            .iter()
            .map(|p| workspace_contains(p, &params).inside())
            .collect();
        params.tilt_limit = FRAC_PI_4;
        for (p, was) in poses.iter().zip(before) {
            if was {
                assert!(workspace_contains(p, &params).inside());
            }
        }
    }
}
