use nalgebra::{Vector2, Vector5};

use super::blend::{BlendedPath, OrientationKnot, PathPiece, Primitive, Run};
use super::{blend_corners, parse_gcode_from};
use crate::error::{GcodeError, PlanError};
use crate::machine::{MachineParams, Pose};
use crate::trajectory::{
    travel_time, unit_quintic, unit_quintic_integral, LinearMotion, Motion, PathPoint, PlanOptions,
    Sampler, SegmentKind, Trajectory, QUINTIC_PEAK_SPEED,
};

/// Task-space state at an instant: pose, velocity, acceleration.
type State = (Vector5<f64>, Vector5<f64>, Vector5<f64>);

#[derive(Debug, Clone, Copy)]
enum Speed {
    /// Quintic change from `from` to `to`.
    Ramp {
        from: f64,
        to: f64,
    },
    Cruise(f64),
}

#[derive(Debug, Clone, Copy)]
struct Phase {
    t0: f64,
    duration: f64,
    s0: f64,
    speed: Speed,
}

impl Phase {
    /// Arc length, speed and tangential acceleration at local time `tau`.
    fn at(&self, tau: f64) -> (f64, f64, f64) {
        match self.speed {
            Speed::Cruise(v) => (self.s0 + v * tau, v, 0.0),
            Speed::Ramp { from, to } => {
                let t = self.duration;
                let u = tau / t;
                let (r, dr, _) = unit_quintic(u);
                let dv = to - from;
                (
                    self.s0 + from * tau + dv * t * unit_quintic_integral(u),
                    from + dv * r,
                    dv * dr / t,
                )
            }
        }
    }
}

/// Timing of one run: speed phases over its primitives.
#[derive(Debug, Clone)]
struct RunProfile {
    run: Run,
    starts: Vec<f64>,
    phases: Vec<Phase>,
    duration: f64,
}

impl RunProfile {
    fn new(run: Run, accel: f64) -> Self {
        let mut phases = Vec::new();
        let mut starts = Vec::with_capacity(run.primitives.len());
        let (mut t, mut s) = (0.0, 0.0);
        let push =
            |phases: &mut Vec<Phase>, t: &mut f64, s: &mut f64, dur: f64, len: f64, speed| {
                if dur > 0.0 {
                    phases.push(Phase {
                        t0: *t,
                        duration: dur,
                        s0: *s,
                        speed,
                    });
                    *t += dur;
                    *s += len;
                }
            };
        for p in &run.primitives {
            starts.push(s);
            let start_s = s;
            match *p {
                Primitive::Line {
                    entry_speed: va,
                    exit_speed: vb,
                    cruise_speed: vc,
                    ..
                } => {
                    let ramp = |a: f64, b: f64| {
                        let dur = QUINTIC_PEAK_SPEED * (b - a).abs() / accel;
                        (dur, 0.5 * (a + b) * dur)
                    };
                    let (d1, l1) = ramp(va, vc);
                    let (d2, l2) = ramp(vc, vb);
                    let cruise = (p.length() - l1 - l2).max(0.0);
                    push(
                        &mut phases,
                        &mut t,
                        &mut s,
                        d1,
                        l1,
                        Speed::Ramp { from: va, to: vc },
                    );
                    if vc > 0.0 {
                        push(
                            &mut phases,
                            &mut t,
                            &mut s,
                            cruise / vc,
                            cruise,
                            Speed::Cruise(vc),
                        );
                    }
                    push(
                        &mut phases,
                        &mut t,
                        &mut s,
                        d2,
                        l2,
                        Speed::Ramp { from: vc, to: vb },
                    );
                }
                Primitive::Arc { speed, .. } => {
                    let len = p.length();
                    push(
                        &mut phases,
                        &mut t,
                        &mut s,
                        len / speed,
                        len,
                        Speed::Cruise(speed),
                    );
                }
            }
            // Keep arc length bookkeeping tied to the geometry.
            s = start_s + p.length();
        }
        RunProfile {
            run,
            starts,
            phases,
            duration: t,
        }
    }

    fn orientation(&self, s: f64) -> (Vector2<f64>, Vector2<f64>, Vector2<f64>) {
        let knots = &self.run.knots;
        let k = knots
            .partition_point(|k| k.s <= s)
            .clamp(1, knots.len() - 1);
        let (a, b): (&OrientationKnot, &OrientationKnot) = (&knots[k - 1], &knots[k]);
        let o0 = Vector2::new(a.alpha, a.beta);
        let delta = Vector2::new(b.alpha, b.beta) - o0;
        let span = b.s - a.s;
        if !(span > 0.0) {
            return (o0 + delta, Vector2::zeros(), Vector2::zeros());
        }
        let (r, dr, ddr) = unit_quintic((s - a.s) / span);
        (
            o0 + delta * r,
            delta * (dr / span),
            delta * (ddr / (span * span)),
        )
    }

    fn state(&self, t: f64) -> State {
        let i = self.phases.partition_point(|p| p.t0 <= t).saturating_sub(1);
        let phase = &self.phases[i];
        let (s, v, a) = phase.at((t - phase.t0).clamp(0.0, phase.duration));
        let j = self.starts.partition_point(|&s0| s0 <= s).saturating_sub(1);
        let prim = &self.run.primitives[j];
        let local = (s - self.starts[j]).clamp(0.0, prim.length());
        let (p, tan, curv) = (
            prim.point(local),
            prim.tangent(local),
            prim.curvature(local),
        );
        let vel = tan * v;
        let acc = tan * a + curv * (v * v);
        let (o, o1, o2) = self.orientation(s);
        let w = o1 * v;
        let dw = o2 * (v * v) + o1 * a;
        (
            Vector5::new(o[0], o[1], p.x, p.y, p.z),
            Vector5::new(w[0], w[1], vel.x, vel.y, vel.z),
            Vector5::new(dw[0], dw[1], acc.x, acc.y, acc.z),
        )
    }
}

#[derive(Debug, Clone)]
enum Timed {
    Run(RunProfile),
    Reorient(LinearMotion),
}

impl Timed {
    fn duration(&self) -> f64 {
        match self {
            Timed::Run(r) => r.duration,
            Timed::Reorient(m) => m.t_f,
        }
    }

    fn state(&self, t: f64) -> State {
        match self {
            Timed::Run(r) => r.state(t),
            Timed::Reorient(m) => {
                let p = m.eval(t / m.t_f);
                (p.pose, p.d1 / m.t_f, p.d2 / (m.t_f * m.t_f))
            }
        }
    }
}

/// A blended program timed at its nominal speeds, as one motion.
#[derive(Debug, Clone)]
pub struct GcodeMotion {
    start: Pose,
    pieces: Vec<Timed>,
    starts: Vec<f64>,
    duration: f64,
}

impl GcodeMotion {
    pub fn new(
        path: &BlendedPath,
        params: &MachineParams,
        speed_ratio: f64,
    ) -> Result<Self, PlanError> {
        let mut pieces = Vec::with_capacity(path.pieces.len());
        for piece in &path.pieces {
            let timed = match piece {
                PathPiece::Run(run) => Timed::Run(RunProfile::new(run.clone(), path.acceleration)),
                PathPiece::Reorient { position, from, to } => {
                    let p =
                        |o: &(f64, f64)| Pose::new(o.0, o.1, position.x, position.y, position.z);
                    let (a, b) = (p(from), p(to));
                    Timed::Reorient(LinearMotion::new(
                        a,
                        b,
                        travel_time(&a, &b, params, speed_ratio)?,
                    ))
                }
            };
            if timed.duration() > 0.0 {
                pieces.push(timed);
            }
        }
        let mut starts = Vec::with_capacity(pieces.len());
        let mut t = 0.0;
        for p in &pieces {
            starts.push(t);
            t += p.duration();
        }
        Ok(GcodeMotion {
            start: path.start,
            pieces,
            starts,
            duration: t,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Pose, velocity and acceleration at time `t` of the nominal timing.
    pub fn state(&self, t: f64) -> (Pose, Vector5<f64>, Vector5<f64>) {
        if self.pieces.is_empty() {
            return (self.start, Vector5::zeros(), Vector5::zeros());
        }
        let t = t.clamp(0.0, self.duration);
        let i = self.starts.partition_point(|&s| s <= t).saturating_sub(1);
        let piece = &self.pieces[i];
        let (p, v, a) = piece.state((t - self.starts[i]).min(piece.duration()));
        (Pose::from_vector(&p), v, a)
    }
}

impl Motion for GcodeMotion {
    fn provisional_duration(&self) -> f64 {
        self.duration
    }

    fn eval(&self, u: f64) -> PathPoint {
        let d = self.duration;
        let (pose, v, a) = self.state(u * d);
        PathPoint {
            pose: pose.to_vector(),
            d1: v * d,
            d2: a * (d * d),
        }
    }
}

/// Samples a blended path and stretches it uniformly in time until every
/// joint and Cartesian limit holds. An empty path gives an empty plan.
pub fn plan_gcode(
    path: &BlendedPath,
    params: &MachineParams,
    opts: &PlanOptions,
) -> Result<Trajectory, PlanError> {
    let sampler = Sampler::new(params, opts)?;
    if path.pieces.is_empty() {
        return Ok(Trajectory::default());
    }
    let motion = GcodeMotion::new(path, params, opts.effective_ratio(params))?;
    sampler.segment(&motion, SegmentKind::Blended)
}

/// Parses, blends and plans a program starting at `start`.
pub fn plan_gcode_program(
    text: &str,
    start: &Pose,
    params: &MachineParams,
    corner_cap: f64,
    opts: &PlanOptions,
) -> Result<(BlendedPath, Trajectory), GcodeError> {
    let segments = parse_gcode_from(text, start)?;
    let path = blend_corners(
        start,
        &segments,
        params,
        corner_cap,
        opts.effective_ratio(params),
    )?;
    let plan = plan_gcode(&path, params, opts)?;
    Ok((path, plan))
}
