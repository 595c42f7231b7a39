//! Two-axis parallel spherical wrist.
//!
//! The tool is tilted by `alpha` about x and `beta` about y. All revolute
//! axes meet at the wrist center, so the wrist alone sets orientation.

use nalgebra::{Matrix2, Vector3};

use crate::error::{Block, KinematicsError};

/// Denominator threshold for the wrist Jacobian and the inverse geometry.
pub const WRIST_SINGULARITY_TOL: f64 = 1e-9;

/// Actuated wrist joint angles (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WristAngles {
    pub theta1: f64,
    pub theta2: f64,
}

impl WristAngles {
    pub fn new(theta1: f64, theta2: f64) -> Self {
        WristAngles { theta1, theta2 }
    }
}

/// Unit vector from the wrist center towards the tool tip.
pub fn tool_direction(alpha: f64, beta: f64) -> Vector3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Vector3::new(-sb, sa * cb, -ca * cb)
}

pub fn ik_wrist(alpha: f64, beta: f64) -> Result<WristAngles, KinematicsError> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let den = ca * cb;
    if den.abs() < WRIST_SINGULARITY_TOL {
        return Err(KinematicsError::Singular {
            block: Block::Wrist,
            index: 0,
        });
    }
    Ok(WristAngles {
        theta1: -(-sa * cb).atan2(den),
        theta2: sb.atan2(den),
    })
}

/// Tool angles for given joint angles, on the branch through the home pose.
pub fn fk_wrist(theta: WristAngles) -> Result<(f64, f64), KinematicsError> {
    let c1 = theta.theta1.cos();
    if c1.abs() < WRIST_SINGULARITY_TOL {
        return Err(KinematicsError::Singular {
            block: Block::Wrist,
            index: 1,
        });
    }
    let (s2, c2) = theta.theta2.sin_cos();
    // tan(beta) = tan(theta2) * cos(theta1)
    Ok((theta.theta1, (s2 * c1).atan2(c2)))
}

/// Maps tool angle rates `(alpha_dot, beta_dot)` to joint rates.
///
/// Written in the joint angles; `alpha` only enters through `theta1`.
pub fn inv_jacobian_wrist(
    _alpha: f64,
    beta: f64,
    theta: WristAngles,
) -> Result<Matrix2<f64>, KinematicsError> {
    let sb = beta.sin();
    let cb = beta.cos();
    let (s1, c1) = theta.theta1.sin_cos();
    let (s2, c2) = theta.theta2.sin_cos();
    let den = sb * s2 + c1 * cb * c2;
    if den.abs() < WRIST_SINGULARITY_TOL {
        return Err(KinematicsError::Singular {
            block: Block::Wrist,
            index: 2,
        });
    }
    Ok(Matrix2::new(
        1.0,
        0.0,
        s2 * s1 * cb / den,
        (sb * c1 * s2 + c2 * cb) / den,
    ))
}
