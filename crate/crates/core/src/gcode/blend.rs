use std::f64::consts::PI;

use nalgebra::Vector3;

use super::{GSegment, MoveKind};
use crate::error::PlanError;
use crate::machine::{MachineParams, Pose};

/// Turn angles below this are treated as straight continuations.
const COLLINEAR_TOL: f64 = 1e-10;
/// Moves shorter than this only change orientation.
const LENGTH_TOL: f64 = 1e-12;
/// Blend radii below this stop the machine at the corner instead.
const MIN_RADIUS: f64 = 1e-9;
/// Fraction of the shorter neighbouring move a blend may consume.
const CORNER_FRACTION: f64 = 0.25;

/// Piece of a blended tool-tip path, parameterized by arc length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    /// Straight move with a quintic speed ramp at each end.
    Line {
        start: Vector3<f64>,
        end: Vector3<f64>,
        entry_speed: f64,
        exit_speed: f64,
        cruise_speed: f64,
    },
    /// Constant-speed corner arc. `from` is the arc start, `direction` the
    /// unit tangent there.
    Arc {
        center: Vector3<f64>,
        from: Vector3<f64>,
        direction: Vector3<f64>,
        radius: f64,
        sweep: f64,
        speed: f64,
    },
}

impl Primitive {
    pub fn length(&self) -> f64 {
        match self {
            Primitive::Line { start, end, .. } => (end - start).norm(),
            Primitive::Arc { radius, sweep, .. } => radius * sweep,
        }
    }

    pub fn point(&self, s: f64) -> Vector3<f64> {
        match self {
            Primitive::Line { start, end, .. } => {
                let l = (end - start).norm();
                if s >= l {
                    *end
                } else {
                    start + (end - start) * (s / l)
                }
            }
            Primitive::Arc {
                center,
                from,
                direction,
                radius,
                ..
            } => {
                let (sp, cp) = (s / radius).sin_cos();
                center + (from - center) * cp + direction * (radius * sp)
            }
        }
    }

    /// Unit tangent at arc length `s`.
    pub fn tangent(&self, s: f64) -> Vector3<f64> {
        match self {
            Primitive::Line { start, end, .. } => (end - start).normalize(),
            Primitive::Arc {
                center,
                from,
                direction,
                radius,
                ..
            } => {
                let (sp, cp) = (s / radius).sin_cos();
                -(from - center) * (sp / radius) + direction * cp
            }
        }
    }

    /// Second derivative of the position with respect to arc length.
    pub fn curvature(&self, s: f64) -> Vector3<f64> {
        match self {
            Primitive::Line { .. } => Vector3::zeros(),
            Primitive::Arc { center, radius, .. } => -(self.point(s) - center) / (radius * radius),
        }
    }

    pub fn start_point(&self) -> Vector3<f64> {
        self.point(0.0)
    }

    pub fn end_point(&self) -> Vector3<f64> {
        self.point(self.length())
    }
}

/// Tilt angles reached at arc length `s` along a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationKnot {
    pub s: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Path section that starts and ends at rest, tangent-continuous inside.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub primitives: Vec<Primitive>,
    /// Orientation set-points; angles follow a quintic in arc length
    /// between consecutive knots.
    pub knots: Vec<OrientationKnot>,
}

impl Run {
    pub fn length(&self) -> f64 {
        self.primitives.iter().map(Primitive::length).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathPiece {
    Run(Run),
    /// Orientation change with the tip held still.
    Reorient {
        position: Vector3<f64>,
        from: (f64, f64),
        to: (f64, f64),
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CornerKind {
    /// Replaced by a tangent arc.
    Blended,
    /// Collinear moves joined without an arc.
    Merged,
    /// Too sharp or too small to blend; the tool stops.
    Stop,
}

/// How one corner between consecutive moves was handled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerReport {
    /// Index of the incoming move in the parsed program.
    pub segment: usize,
    pub kind: CornerKind,
    /// Change of direction (rad); zero when collinear.
    pub turn_angle: f64,
    pub radius: f64,
    /// Distance from the corner to each arc end.
    pub tangent_distance: f64,
    pub corner: Vector3<f64>,
    /// Speed through the corner after speed matching.
    pub speed: f64,
}

/// Blended path ready for timing.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendedPath {
    pub start: Pose,
    pub pieces: Vec<PathPiece>,
    pub corners: Vec<CornerReport>,
    /// Linear acceleration used for ramps and corner speeds.
    pub acceleration: f64,
}

impl BlendedPath {
    /// Largest position gap (m) and tangent angle (rad) between consecutive
    /// primitives of every run.
    pub fn junction_errors(&self) -> (f64, f64) {
        let mut gap = 0.0f64;
        let mut angle = 0.0f64;
        for piece in &self.pieces {
            let PathPiece::Run(run) = piece else { continue };
            for pair in run.primitives.windows(2) {
                gap = gap.max((pair[1].start_point() - pair[0].end_point()).norm());
                let t0 = pair[0].tangent(pair[0].length());
                let t1 = pair[1].tangent(0.0);
                angle = angle.max(t0.cross(&t1).norm().atan2(t0.dot(&t1)));
            }
        }
        (gap, angle)
    }
}

#[derive(Debug, Clone, Copy)]
struct Leg {
    index: usize,
    start: Vector3<f64>,
    end: Vector3<f64>,
    speed: f64,
    orientation: (f64, f64),
}

impl Leg {
    fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }

    fn direction(&self) -> Vector3<f64> {
        (self.end - self.start) / self.length()
    }
}

struct Corner {
    report: CornerReport,
    arc: Option<Primitive>,
}

fn corner(a: &Leg, b: &Leg, cap: f64, accel: f64) -> Corner {
    let (d1, d2) = (a.direction(), b.direction());
    let turn = d1.cross(&d2).norm().atan2(d1.dot(&d2));
    let mut report = CornerReport {
        segment: a.index,
        kind: CornerKind::Merged,
        turn_angle: turn,
        radius: 0.0,
        tangent_distance: 0.0,
        corner: a.end,
        speed: a.speed.min(b.speed),
    };
    if turn <= COLLINEAR_TOL {
        report.turn_angle = 0.0;
        return Corner { report, arc: None };
    }
    let half = 0.5 * (PI - turn);
    let d_max = CORNER_FRACTION * a.length().min(b.length());
    let radius = cap.min(d_max * half.tan());
    if !(radius > MIN_RADIUS) || PI - turn <= COLLINEAR_TOL {
        report.kind = CornerKind::Stop;
        report.speed = 0.0;
        return Corner { report, arc: None };
    }
    let td = radius / half.tan();
    let bisector = (d2 - d1).normalize();
    let center = a.end + bisector * (radius / half.sin());
    report.kind = CornerKind::Blended;
    report.radius = radius;
    report.tangent_distance = td;
    report.speed = report.speed.min((accel * radius).sqrt());
    let arc = Primitive::Arc {
        center,
        from: a.end - d1 * td,
        direction: d1,
        radius,
        sweep: turn,
        speed: report.speed,
    };
    Corner {
        report,
        arc: Some(arc),
    }
}

/// Lowers node speeds until every line can ramp between its end speeds.
fn match_speeds(nodes: &mut [f64], lengths: &[f64], kappa: f64) {
    for k in 0..lengths.len() {
        nodes[k + 1] = nodes[k + 1].min((nodes[k] * nodes[k] + kappa * lengths[k]).sqrt());
    }
    for k in (0..lengths.len()).rev() {
        nodes[k] = nodes[k].min((nodes[k + 1] * nodes[k + 1] + kappa * lengths[k]).sqrt());
    }
}

/// A quintic speed ramp from `v1` to `v2` with peak acceleration `accel`
/// covers `|v2^2 - v1^2| / kappa`.
pub(crate) fn ramp_kappa(accel: f64) -> f64 {
    2.0 * accel / crate::trajectory::QUINTIC_PEAK_SPEED
}

fn build_run(
    legs: &[Leg],
    corners: &mut [Corner],
    start_orientation: (f64, f64),
    accel: f64,
) -> Run {
    let n = legs.len();
    let kappa = ramp_kappa(accel);
    let td = |k: usize| corners[k].report.tangent_distance;
    let lines: Vec<(Vector3<f64>, Vector3<f64>)> = (0..n)
        .map(|k| {
            let d = legs[k].direction();
            let start = if k == 0 {
                legs[k].start
            } else {
                legs[k].start + d * td(k - 1)
            };
            let end = if k + 1 == n {
                legs[k].end
            } else {
                legs[k].end - d * td(k)
            };
            (start, end)
        })
        .collect();
    let lengths: Vec<f64> = lines.iter().map(|(a, b)| (b - a).norm()).collect();
    let mut nodes = vec![0.0; n + 1];
    for k in 1..n {
        nodes[k] = corners[k - 1].report.speed;
    }
    match_speeds(&mut nodes, &lengths, kappa);

    let mut primitives = Vec::with_capacity(2 * n);
    let mut knots = vec![OrientationKnot {
        s: 0.0,
        alpha: start_orientation.0,
        beta: start_orientation.1,
    }];
    let mut s = 0.0;
    for k in 0..n {
        let (va, vb) = (nodes[k], nodes[k + 1]);
        let l = lengths[k];
        let cruise = legs[k]
            .speed
            .min(((kappa * l + va * va + vb * vb) / 2.0).sqrt())
            .max(va)
            .max(vb);
        primitives.push(Primitive::Line {
            start: lines[k].0,
            end: lines[k].1,
            entry_speed: va,
            exit_speed: vb,
            cruise_speed: cruise,
        });
        s += l;
        let (alpha, beta) = legs[k].orientation;
        if k + 1 < n {
            let c = &mut corners[k];
            c.report.speed = vb;
            match c.arc.as_mut() {
                Some(Primitive::Arc { speed, .. }) => {
                    *speed = vb;
                    let arc = c.arc.unwrap();
                    knots.push(OrientationKnot {
                        s: s + 0.5 * arc.length(),
                        alpha,
                        beta,
                    });
                    s += arc.length();
                    primitives.push(arc);
                }
                _ => knots.push(OrientationKnot { s, alpha, beta }),
            }
        } else {
            knots.push(OrientationKnot { s, alpha, beta });
        }
    }
    Run { primitives, knots }
}

/// Replaces the corners between consecutive moves with tangent arcs.
///
/// Feed moves run at their feed and rapid moves at `speed_ratio * k_vt`,
/// both capped at that speed. Each blend radius is the smaller of
/// `corner_cap` and the radius whose tangent points sit a quarter of the
/// shorter neighbouring move from the corner. Corner speed is limited by
/// `v^2 / r <= a_t_max`. Moves without translation become stand-still
/// reorientations, and the tool stops at reversals and at corners that
/// cannot be blended.
pub fn blend_corners(
    start: &Pose,
    segments: &[GSegment],
    params: &MachineParams,
    corner_cap: f64,
    speed_ratio: f64,
) -> Result<BlendedPath, PlanError> {
    if !(corner_cap >= 0.0) {
        return Err(PlanError::Invalid(format!(
            "corner radius cap {corner_cap} must not be negative"
        )));
    }
    if !(speed_ratio > 0.0 && speed_ratio <= 1.0) {
        return Err(PlanError::Invalid(format!(
            "speed ratio {speed_ratio} outside (0, 1]"
        )));
    }
    let accel = params.a_t_max;
    let v_max = params.k_vt * speed_ratio;
    let mut pieces = Vec::new();
    let mut reports = Vec::new();
    let mut legs: Vec<Leg> = Vec::new();
    let mut position = start.position();
    let mut orientation = (start.alpha, start.beta);
    let mut run_orientation = orientation;

    let mut flush =
        |legs: &mut Vec<Leg>, run_orientation: (f64, f64), pieces: &mut Vec<PathPiece>| {
            if legs.is_empty() {
                return;
            }
            let mut corners: Vec<Corner> = legs
                .windows(2)
                .map(|w| corner(&w[0], &w[1], corner_cap, accel))
                .collect();
            let mut first = 0;
            let mut orient = run_orientation;
            for k in 0..=corners.len() {
                if k == corners.len() || corners[k].report.kind == CornerKind::Stop {
                    let run = build_run(&legs[first..=k], &mut corners[first..k], orient, accel);
                    pieces.push(PathPiece::Run(run));
                    orient = legs[k].orientation;
                    first = k + 1;
                }
            }
            reports.extend(corners.into_iter().map(|c| c.report));
            legs.clear();
        };

    for (index, seg) in segments.iter().enumerate() {
        let target = seg.target.position();
        let target_orientation = (seg.target.alpha, seg.target.beta);
        if (target - position).norm() <= LENGTH_TOL {
            if target_orientation != orientation {
                flush(&mut legs, run_orientation, &mut pieces);
                pieces.push(PathPiece::Reorient {
                    position,
                    from: orientation,
                    to: target_orientation,
                });
                run_orientation = target_orientation;
            }
            orientation = target_orientation;
            continue;
        }
        let speed = match seg.kind {
            MoveKind::Rapid => v_max,
            MoveKind::Feed => seg.feed.unwrap_or(v_max).min(v_max),
        };
        legs.push(Leg {
            index,
            start: position,
            end: target,
            speed,
            orientation: target_orientation,
        });
        position = target;
        orientation = target_orientation;
    }
    flush(&mut legs, run_orientation, &mut pieces);

    Ok(BlendedPath {
        start: *start,
        pieces,
        corners: reports,
        acceleration: accel,
    })
}
