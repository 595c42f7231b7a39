//! Full five-axis kinematics: the wrist in series on the translational stage.
//!
//! Joint rates follow from the tool twist through a block lower-triangular
//! inverse Jacobian
//!
//! ```text
//! [ theta_dot ]   [ J_A   0  ] [ angle rates ]
//! [ rho_dot   ] = [ J_AC J_O ] [ tip velocity ]
//! ```
//!
//! where `J_AC` is the coupling block: tilting the tool about its tip moves
//! the wrist center and therefore the prismatic joints. All Jacobian
//! entries are written in wrist-center coordinates.

use std::ops::Deref;

use nalgebra::{Matrix3x2, Matrix5, Vector2, Vector3, Vector5};

use crate::error::{Block, KinematicsError};
use crate::machine::{wrist_center_of, JointState, MachineParams, Pose};
use crate::translation::{
    check_joint_limits, fk_translation, ik_translation, AssemblyMode, WorkingMode, SINGULARITY_TOL,
};
use crate::wrist::{fk_wrist, ik_wrist, tool_direction, WristAngles, WRIST_SINGULARITY_TOL};

/// Tool twist: tilt rates (rad/s) then tip velocity (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub alpha_dot: f64,
    pub beta_dot: f64,
    pub x_dot: f64,
    pub y_dot: f64,
    pub z_dot: f64,
}

impl Twist {
    pub fn new(alpha_dot: f64, beta_dot: f64, x_dot: f64, y_dot: f64, z_dot: f64) -> Self {
        Twist {
            alpha_dot,
            beta_dot,
            x_dot,
            y_dot,
            z_dot,
        }
    }

    pub fn to_vector(&self) -> Vector5<f64> {
        Vector5::new(
            self.alpha_dot,
            self.beta_dot,
            self.x_dot,
            self.y_dot,
            self.z_dot,
        )
    }

    pub fn from_vector(v: &Vector5<f64>) -> Self {
        Twist::new(v[0], v[1], v[2], v[3], v[4])
    }

    pub fn angular(&self) -> Vector2<f64> {
        Vector2::new(self.alpha_dot, self.beta_dot)
    }

    pub fn linear(&self) -> Vector3<f64> {
        Vector3::new(self.x_dot, self.y_dot, self.z_dot)
    }
}

impl From<Vector5<f64>> for Twist {
    fn from(v: Vector5<f64>) -> Self {
        Twist::from_vector(&v)
    }
}

/// The assembled 5x5 inverse Jacobian. The upper-right 2x3 block is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvJacobian5(Matrix5<f64>);

impl InvJacobian5 {
    pub fn matrix(&self) -> &Matrix5<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix5<f64> {
        self.0
    }
}

impl Deref for InvJacobian5 {
    type Target = Matrix5<f64>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

/// Wrist-center velocity produced by tilt rates while the tip is held.
///
/// Derivative of `tip - l * u(alpha, beta)` with respect to the angles.
pub fn center_rate_map(alpha: f64, beta: f64, tool_length: f64) -> Matrix3x2<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let l = tool_length;
    Matrix3x2::new(
        0.0,
        l * cb, //
        -l * ca * cb,
        l * sa * sb, //
        -l * sa * cb,
        -l * ca * sb,
    )
}

fn translation_denominators(
    center: &Vector3<f64>,
    rho: &Vector3<f64>,
    block: Block,
) -> Result<Vector3<f64>, KinematicsError> {
    let d = rho - center;
    match (0..3).find(|&i| d[i].abs() < SINGULARITY_TOL) {
        Some(i) => Err(KinematicsError::Singular {
            block,
            index: i + 1,
        }),
        None => Ok(d),
    }
}

/// Coupling block: prismatic joint rates caused by tilting the tool about
/// its tip. Equal to `J_O * center_rate_map`, expanded entrywise.
pub fn coupling_jacobian(
    pose: &Pose,
    rho: &Vector3<f64>,
    params: &MachineParams,
) -> Result<Matrix3x2<f64>, KinematicsError> {
    let c = wrist_center_of(pose, params);
    let d = translation_denominators(&c, rho, Block::Coupling)?;
    Ok(coupling_entries(
        pose.alpha,
        pose.beta,
        &c,
        &d,
        params.tool_length,
    ))
}

fn coupling_entries(
    alpha: f64,
    beta: f64,
    c: &Vector3<f64>,
    d: &Vector3<f64>,
    l: f64,
) -> Matrix3x2<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let (x, y, z) = (c.x, c.y, c.z);
    Matrix3x2::new(
        y * l * ca * cb / d[0] + z * l * sa * cb / d[0],
        l * cb - y * l * sa * sb / d[0] + z * l * ca * sb / d[0],
        -l * ca * cb + z * l * sa * cb / d[1],
        -x * l * cb / d[1] + l * sa * sb + z * l * ca * sb / d[1],
        y * l * ca * cb / d[2] - l * sa * cb,
        -x * l * cb / d[2] - y * l * sa * sb / d[2] - l * ca * sb,
    )
}

/// Wrist rows of the full matrix, written in the tool angles and theta2.
fn wrist_rows(alpha: f64, beta: f64, theta2: f64) -> Result<[f64; 2], KinematicsError> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let (s2, c2) = theta2.sin_cos();
    let den = sb * s2 + ca * cb * c2;
    if den.abs() < WRIST_SINGULARITY_TOL {
        return Err(KinematicsError::Singular {
            block: Block::Wrist,
            index: 2,
        });
    }
    Ok([s2 * sa * cb / den, (ca * sb * s2 + c2 * cb) / den])
}

/// Inverse Jacobian at a consistent `(pose, q)` pair: `q_dot = J * t`.
pub fn full_inv_jacobian(
    pose: &Pose,
    q: &JointState,
    params: &MachineParams,
) -> Result<InvJacobian5, KinematicsError> {
    let c = wrist_center_of(pose, params);
    let rho = q.rho();
    let wrist = wrist_rows(pose.alpha, pose.beta, q.theta2)?;
    let d = translation_denominators(&c, &rho, Block::Translation)?;
    let coupling = coupling_entries(pose.alpha, pose.beta, &c, &d, params.tool_length);

    let mut m = Matrix5::zeros();
    m[(0, 0)] = 1.0;
    m[(1, 0)] = wrist[0];
    m[(1, 1)] = wrist[1];
    m.fixed_view_mut::<3, 2>(2, 0).copy_from(&coupling);
    for i in 0..3 {
        for j in 0..3 {
            m[(2 + i, 2 + j)] = if i == j { 1.0 } else { -c[j] / d[i] };
        }
    }
    Ok(InvJacobian5(m))
}

#[inline]
fn quotient_rate(num: f64, num_dot: f64, den: f64, den_dot: f64) -> f64 {
    (num_dot * den - num * den_dot) / (den * den)
}

/// Time derivative of [`full_inv_jacobian`] along a motion with the given
/// tool twist, the joints following `q_dot = J * t`.
pub fn full_inv_jacobian_dot(
    pose: &Pose,
    q: &JointState,
    twist: &Twist,
    params: &MachineParams,
) -> Result<Matrix5<f64>, KinematicsError> {
    let jac = full_inv_jacobian(pose, q, params)?;
    Ok(inv_jacobian_dot_with(pose, q, twist, &jac, params))
}

fn inv_jacobian_dot_with(
    pose: &Pose,
    q: &JointState,
    twist: &Twist,
    jac: &InvJacobian5,
    params: &MachineParams,
) -> Matrix5<f64> {
    let l = params.tool_length;
    let (sa, ca) = pose.alpha.sin_cos();
    let (sb, cb) = pose.beta.sin_cos();
    let (s2, c2) = q.theta2.sin_cos();
    let ad = twist.alpha_dot;
    let bd = twist.beta_dot;

    let q_dot = jac.0 * twist.to_vector();
    let t2d = q_dot[1];
    let rho_dot = Vector3::new(q_dot[2], q_dot[3], q_dot[4]);

    let c = wrist_center_of(pose, params);
    let c_dot = twist.linear() + center_rate_map(pose.alpha, pose.beta, l) * twist.angular();
    let d = q.rho() - c;
    let d_dot = rho_dot - c_dot;
    let (x, y, z) = (c.x, c.y, c.z);
    let (xd, yd, zd) = (c_dot.x, c_dot.y, c_dot.z);

    // Rates of the elementary trigonometric factors.
    let sa_d = ca * ad;
    let ca_d = -sa * ad;
    let sb_d = cb * bd;
    let cb_d = -sb * bd;
    let s2_d = c2 * t2d;
    let c2_d = -s2 * t2d;

    let mut m = Matrix5::zeros();

    // Wrist rows.
    let den = sb * s2 + ca * cb * c2;
    let den_d = sb_d * s2 + sb * s2_d + ca_d * cb * c2 + ca * cb_d * c2 + ca * cb * c2_d;
    let n1 = s2 * sa * cb;
    let n1_d = s2_d * sa * cb + s2 * sa_d * cb + s2 * sa * cb_d;
    let n2 = ca * sb * s2 + c2 * cb;
    let n2_d = ca_d * sb * s2 + ca * sb_d * s2 + ca * sb * s2_d + c2_d * cb + c2 * cb_d;
    m[(1, 0)] = quotient_rate(n1, n1_d, den, den_d);
    m[(1, 1)] = quotient_rate(n2, n2_d, den, den_d);

    // Leg 1 coupling: l cb (y ca + z sa) / d1 and l cb + l sb (z ca - y sa) / d1.
    let g = cb * (y * ca + z * sa);
    let g_d = cb_d * (y * ca + z * sa) + cb * (yd * ca + y * ca_d + zd * sa + z * sa_d);
    m[(2, 0)] = l * quotient_rate(g, g_d, d[0], d_dot[0]);
    let k = sb * (z * ca - y * sa);
    let k_d = sb_d * (z * ca - y * sa) + sb * (zd * ca + z * ca_d - yd * sa - y * sa_d);
    m[(2, 1)] = l * cb_d + l * quotient_rate(k, k_d, d[0], d_dot[0]);

    // Leg 2 coupling: -l ca cb + l z sa cb / d2 and
    // l sa sb + l (z ca sb - x cb) / d2.
    let n = z * sa * cb;
    let n_d = zd * sa * cb + z * sa_d * cb + z * sa * cb_d;
    m[(3, 0)] = -l * (ca_d * cb + ca * cb_d) + l * quotient_rate(n, n_d, d[1], d_dot[1]);
    let p = z * ca * sb - x * cb;
    let p_d = zd * ca * sb + z * ca_d * sb + z * ca * sb_d - xd * cb - x * cb_d;
    m[(3, 1)] = l * (sa_d * sb + sa * sb_d) + l * quotient_rate(p, p_d, d[1], d_dot[1]);

    // Leg 3 coupling: l y ca cb / d3 - l sa cb and
    // -l (x cb + y sa sb) / d3 - l ca sb.
    let r = y * ca * cb;
    let r_d = yd * ca * cb + y * ca_d * cb + y * ca * cb_d;
    m[(4, 0)] = l * quotient_rate(r, r_d, d[2], d_dot[2]) - l * (sa_d * cb + sa * cb_d);
    let s = x * cb + y * sa * sb;
    let s_d = xd * cb + x * cb_d + yd * sa * sb + y * sa_d * sb + y * sa * sb_d;
    m[(4, 1)] = -l * quotient_rate(s, s_d, d[2], d_dot[2]) - l * (ca_d * sb + ca * sb_d);

    // Translational block: -c_j / d_i off the diagonal.
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                m[(2 + i, 2 + j)] = -quotient_rate(c[j], c_dot[j], d[i], d_dot[i]);
            }
        }
    }
    m
}

/// Joint coordinates for a tip pose: wrist first, then the translational
/// stage at the wrist center. Enforces tilt and joint limits.
pub fn ik_full(
    pose: &Pose,
    params: &MachineParams,
    mode: WorkingMode,
) -> Result<JointState, KinematicsError> {
    if pose.alpha.abs() > params.tilt_limit || pose.beta.abs() > params.tilt_limit {
        return Err(KinematicsError::TiltLimit {
            alpha: pose.alpha,
            beta: pose.beta,
        });
    }
    let theta = ik_wrist(pose.alpha, pose.beta)?;
    let center = wrist_center_of(pose, params);
    let rho = ik_translation(&center, params, mode)?;
    check_joint_limits(&rho, params)?;
    Ok(JointState::new(
        theta.theta1,
        theta.theta2,
        rho[0],
        rho[1],
        rho[2],
    ))
}

/// Tip pose for joint coordinates: translational stage first, then wrist.
pub fn fk_full(
    q: &JointState,
    params: &MachineParams,
    mode: AssemblyMode,
) -> Result<Pose, KinematicsError> {
    let center = fk_translation(&q.rho(), params, mode)?.center;
    let (alpha, beta) = fk_wrist(WristAngles::new(q.theta1, q.theta2))?;
    let tip = center + params.tool_length * tool_direction(alpha, beta);
    Ok(Pose::new(alpha, beta, tip.x, tip.y, tip.z))
}

/// Joint velocity and acceleration for a task-space velocity and
/// acceleration: `q_dot = J V`, `q_ddot = J A + J_dot V`.
pub fn project_rates(
    pose: &Pose,
    q: &JointState,
    velocity: &Twist,
    acceleration: &Vector5<f64>,
    params: &MachineParams,
) -> Result<(Vector5<f64>, Vector5<f64>), KinematicsError> {
    let jac = full_inv_jacobian(pose, q, params)?;
    let jac_dot = inv_jacobian_dot_with(pose, q, velocity, &jac, params);
    let v = velocity.to_vector();
    Ok((jac.0 * v, jac.0 * acceleration + jac_dot * v))
}

/// Everything the control loop needs at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointKinematics {
    pub q: JointState,
    pub jacobian: InvJacobian5,
    pub jacobian_dot: Matrix5<f64>,
}

/// Combined inverse kinematics, inverse Jacobian and its derivative.
pub fn evaluate_cycle(
    pose: &Pose,
    twist: &Twist,
    params: &MachineParams,
    mode: WorkingMode,
) -> Result<JointKinematics, KinematicsError> {
    let q = ik_full(pose, params, mode)?;
    let jacobian = full_inv_jacobian(pose, &q, params)?;
    let jacobian_dot = inv_jacobian_dot_with(pose, &q, twist, &jacobian, params);
    Ok(JointKinematics {
        q,
        jacobian,
        jacobian_dot,
    })
}
