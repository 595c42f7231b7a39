//! G0/G1 programs: parsing, corner blending and timing.

mod blend;
mod parse;
mod plan;

pub use blend::{
    blend_corners, BlendedPath, CornerKind, CornerReport, OrientationKnot, PathPiece, Primitive,
    Run,
};
pub use parse::{parse_gcode, parse_gcode_from, to_gcode};
pub use plan::{plan_gcode, plan_gcode_program, GcodeMotion};

use crate::machine::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    /// G0: full machine speed.
    Rapid,
    /// G1: programmed feed.
    Feed,
}

/// One parsed move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GSegment {
    pub kind: MoveKind,
    pub target: Pose,
    /// Feed rate (m/s) of a G1 move.
    pub feed: Option<f64>,
}
