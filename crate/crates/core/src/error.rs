use std::fmt;

use thiserror::Error;

/// Which part of the machine produced a singular configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Wrist,
    Translation,
    Coupling,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Block::Wrist => "wrist",
            Block::Translation => "translation",
            Block::Coupling => "coupling",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("no real solution for leg {leg}")]
    NoRealSolution { leg: usize },
    #[error("forward kinematics has no real solution")]
    NoRealForward,
    #[error("singular input: rho{leg} is zero")]
    SingularInput { leg: usize },
    #[error("singular configuration in {block} block (index {index})")]
    Singular { block: Block, index: usize },
    #[error("joint limit exceeded: rho{leg} = {value} m")]
    JointLimit { leg: usize, value: f64 },
    #[error("tilt limit exceeded (alpha = {alpha} rad, beta = {beta} rad)")]
    TiltLimit { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("{field} {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}

impl ConfigError {
    pub(crate) fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("trajectory leaves the workspace at t = {t:.6} s: {reason}")]
    WorkspaceExit { t: f64, reason: String },
    #[error("kinematic failure at t = {t:.6} s: {source}")]
    Kinematics {
        t: f64,
        #[source]
        source: KinematicsError,
    },
    #[error("t = {t} outside [0, {t_f}]")]
    Domain { t: f64, t_f: f64 },
    #[error("invalid trajectory request: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GcodeError {
    #[error("line {line}: unsupported code `{code}`")]
    UnsupportedCode { line: usize, code: String },
    #[error("line {line}: malformed word `{word}`")]
    MalformedWord { line: usize, word: String },
    #[error("line {line}: feed move without a feed rate")]
    MissingFeed { line: usize },
    #[error("line {line}: feed rate must be positive")]
    NonPositiveFeed { line: usize },
    #[error("line {line}: coordinates given before any G0 or G1")]
    NoMotionMode { line: usize },
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("plan is empty")]
    EmptyPlan,
    #[error("invalid simulation config: {0}")]
    Invalid(String),
}
