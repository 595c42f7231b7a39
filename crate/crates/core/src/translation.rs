//! Translational stage: three prismatic actuators along the x, y and z axes,
//! each carrying a constant-length parallelogram leg to the wrist center.
//!
//! Leg `i` constrains the wrist center `p` to a sphere of radius `l_i`
//! centered on the actuator position `rho_i * e_i`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Block, KinematicsError};
use crate::machine::MachineParams;

/// Denominators of the inverse Jacobian below this value (m) are singular.
pub const SINGULARITY_TOL: f64 = 1e-9;

/// Square-root branch of a single leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    fn symbol(self) -> char {
        match self {
            Branch::Plus => '+',
            Branch::Minus => '-',
        }
    }

    fn from_symbol(c: char) -> Option<Self> {
        match c {
            '+' => Some(Branch::Plus),
            '-' => Some(Branch::Minus),
            _ => None,
        }
    }
}

/// Inverse-kinematics branch, one sign per leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WorkingMode(pub [Branch; 3]);

impl WorkingMode {
    pub const ALL: [WorkingMode; 8] = {
        use Branch::{Minus as M, Plus as P};
        [
            WorkingMode([P, P, P]),
            WorkingMode([P, P, M]),
            WorkingMode([P, M, P]),
            WorkingMode([P, M, M]),
            WorkingMode([M, P, P]),
            WorkingMode([M, P, M]),
            WorkingMode([M, M, P]),
            WorkingMode([M, M, M]),
        ]
    };
}

impl Default for WorkingMode {
    fn default() -> Self {
        WorkingMode([Branch::Plus; 3])
    }
}

impl fmt::Display for WorkingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{}", b.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for WorkingMode {
    type Err = String;

    /// Accepts `+++`, `+-+`, or comma separated `+,-,+`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let symbols: Vec<char> = s
            .chars()
            .filter(|c| *c != ',' && !c.is_whitespace())
            .collect();
        if symbols.len() != 3 {
            return Err(format!("working mode `{s}` needs three signs"));
        }
        let mut branches = [Branch::Plus; 3];
        for (slot, c) in branches.iter_mut().zip(symbols) {
            *slot = Branch::from_symbol(c).ok_or_else(|| format!("bad sign `{c}` in `{s}`"))?;
        }
        Ok(WorkingMode(branches))
    }
}

/// Forward-kinematics branch: which root of the quadratic in `w = |p|^2`
/// is taken. `Minus` is the smaller root, i.e. the solution on the same side
/// of the actuator plane (through the three prismatic joints) as the origin;
/// `Plus` is its mirror image. Both usually satisfy the same working mode,
/// so the branch of a configuration is found with [`AssemblyMode::of`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AssemblyMode {
    Plus,
    #[default]
    Minus,
}

impl AssemblyMode {
    pub const ALL: [AssemblyMode; 2] = [AssemblyMode::Plus, AssemblyMode::Minus];

    /// Branch that reproduces `center` from its joint positions `rho`.
    pub fn of(center: &Vector3<f64>, rho: &Vector3<f64>) -> AssemblyMode {
        let side: f64 = (0..3).map(|i| center[i] / rho[i]).sum();
        if side > 1.0 {
            AssemblyMode::Plus
        } else {
            AssemblyMode::Minus
        }
    }
}

impl fmt::Display for AssemblyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssemblyMode::Plus => "+",
            AssemblyMode::Minus => "-",
        })
    }
}

impl FromStr for AssemblyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "+" | "plus" => Ok(AssemblyMode::Plus),
            "-" | "minus" => Ok(AssemblyMode::Minus),
            other => Err(format!("assembly mode must be `+` or `-`, got `{other}`")),
        }
    }
}

/// Prismatic joint positions for a wrist center.
pub fn ik_translation(
    center: &Vector3<f64>,
    params: &MachineParams,
    mode: WorkingMode,
) -> Result<Vector3<f64>, KinematicsError> {
    let sq = center.component_mul(center);
    let mut rho = Vector3::zeros();
    for i in 0..3 {
        let l = params.leg_lengths[i];
        let disc = l * l - (sq[(i + 1) % 3] + sq[(i + 2) % 3]);
        if disc < 0.0 {
            return Err(KinematicsError::NoRealSolution { leg: i + 1 });
        }
        rho[i] = center[i] + mode.0[i].sign() * disc.sqrt();
    }
    Ok(rho)
}

/// Same as [`ik_translation`] but also enforces the joint range.
pub fn ik_translation_checked(
    center: &Vector3<f64>,
    params: &MachineParams,
    mode: WorkingMode,
) -> Result<Vector3<f64>, KinematicsError> {
    let rho = ik_translation(center, params, mode)?;
    check_joint_limits(&rho, params)?;
    Ok(rho)
}

pub fn check_joint_limits(
    rho: &Vector3<f64>,
    params: &MachineParams,
) -> Result<(), KinematicsError> {
    match (0..3).find(|&i| !params.rho_in_range(rho[i])) {
        Some(i) => Err(KinematicsError::JointLimit {
            leg: i + 1,
            value: rho[i],
        }),
        None => Ok(()),
    }
}

/// Wrist center from forward kinematics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationFk {
    pub center: Vector3<f64>,
    /// Both assembly modes collapse onto this solution.
    pub coincident: bool,
}

/// Wrist center for given prismatic joint positions.
///
/// Each loop-closure equation is linear in the coordinate along its own
/// axis once `w = x^2 + y^2 + z^2` is known:
/// `x = (w + rho1^2 - l1^2) / (2 rho1)` and cyclically. Substituting back into
/// the definition of `w` gives `A w^2 + (2B - 1) w + C = 0`.
pub fn fk_translation(
    rho: &Vector3<f64>,
    params: &MachineParams,
    mode: AssemblyMode,
) -> Result<TranslationFk, KinematicsError> {
    let mut slope = Vector3::zeros();
    let mut offset = Vector3::zeros();
    for i in 0..3 {
        if rho[i] == 0.0 {
            return Err(KinematicsError::SingularInput { leg: i + 1 });
        }
        let l = params.leg_lengths[i];
        slope[i] = 0.5 / rho[i];
        offset[i] = (rho[i] * rho[i] - l * l) * slope[i];
    }
    let a = slope.norm_squared();
    let b = 2.0 * slope.dot(&offset) - 1.0;
    let c = offset.norm_squared();

    let disc = b * b - 4.0 * a * c;
    let coincident = disc.abs() <= 1e-14 * b * b;
    if disc < 0.0 && !coincident {
        return Err(KinematicsError::NoRealForward);
    }
    let root = disc.max(0.0).sqrt();
    // Stable pair: q / a and c / q, where q carries the sign of -b.
    let q = -0.5 * (b + b.signum() * root);
    let (w1, w2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    let (small, large) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
    let w = if coincident {
        0.5 * (small + large)
    } else {
        match mode {
            AssemblyMode::Minus => small,
            AssemblyMode::Plus => large,
        }
    };
    Ok(TranslationFk {
        center: slope * w + offset,
        coincident,
    })
}

/// Maps wrist-center velocity to prismatic joint rates.
pub fn inv_jacobian_translation(
    center: &Vector3<f64>,
    rho: &Vector3<f64>,
) -> Result<Matrix3<f64>, KinematicsError> {
    let mut m = Matrix3::identity();
    for i in 0..3 {
        let den = rho[i] - center[i];
        if den.abs() < SINGULARITY_TOL {
            return Err(KinematicsError::Singular {
                block: Block::Translation,
                index: i + 1,
            });
        }
        for j in 0..3 {
            if j != i {
                m[(i, j)] = -center[j] / den;
            }
        }
    }
    Ok(m)
}
