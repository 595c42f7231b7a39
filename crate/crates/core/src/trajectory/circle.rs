use nalgebra::{Matrix3, Rotation3, Vector3, Vector5};

use super::linear::linear_segment;
use super::{
    effective_ratio, unit_quintic, Motion, PathPoint, PlanOptions, Sampler, SegmentKind, Trajectory,
};
use crate::error::PlanError;
use crate::machine::{MachineParams, Pose};

/// Circular arc of the tool tip with linearly interpolated tilt angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleSpec {
    pub center: Vector3<f64>,
    pub radius: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    /// Rotation of the arc plane about z.
    pub alpha1: f64,
    /// Rotation of the arc plane about y.
    pub beta1: f64,
    /// Tilt angles at the start of the arc.
    pub start_angles: (f64, f64),
    /// Tilt angles at the end of the arc.
    pub end_angles: (f64, f64),
    pub speed_ratio: f64,
}

impl CircleSpec {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(PlanError::Invalid(format!(
                "radius {} must be positive",
                self.radius
            )));
        }
        if self.eta_max == self.eta_min {
            return Err(PlanError::Invalid("arc has zero sweep".into()));
        }
        if !(self.speed_ratio > 0.0 && self.speed_ratio <= 1.0) {
            return Err(PlanError::Invalid(format!(
                "speed ratio {} outside (0, 1]",
                self.speed_ratio
            )));
        }
        Ok(())
    }

    pub fn sweep(&self) -> f64 {
        self.eta_max - self.eta_min
    }

    fn plane(&self) -> Matrix3<f64> {
        (Rotation3::from_axis_angle(&Vector3::z_axis(), self.alpha1)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), self.beta1))
        .into_inner()
    }

    fn point(&self, eta: f64) -> Vector3<f64> {
        let (s, c) = eta.sin_cos();
        self.center + self.plane() * Vector3::new(self.radius * c, self.radius * s, 0.0)
    }

    pub fn start_pose(&self) -> Pose {
        let p = self.point(self.eta_min);
        Pose::new(self.start_angles.0, self.start_angles.1, p.x, p.y, p.z)
    }

    pub fn end_pose(&self) -> Pose {
        let p = self.point(self.eta_max);
        Pose::new(self.end_angles.0, self.end_angles.1, p.x, p.y, p.z)
    }

    fn angle_delta(&self) -> (f64, f64) {
        (
            self.end_angles.0 - self.start_angles.0,
            self.end_angles.1 - self.start_angles.1,
        )
    }

    /// Provisional duration: arc length at the translational speed or the
    /// tilt change at the angular speed, whichever is slower.
    pub fn travel_time(&self, params: &MachineParams, ratio: f64) -> f64 {
        let (da, db) = self.angle_delta();
        let length = self.radius * self.sweep().abs();
        (length / (ratio * params.k_vt)).max(da.hypot(db) / (ratio * params.k_vr))
    }
}

/// A [`CircleSpec`] with its provisional duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularArc {
    pub spec: CircleSpec,
    pub t_f: f64,
    plane: Matrix3<f64>,
}

impl CircularArc {
    pub fn new(spec: CircleSpec, t_f: f64) -> Self {
        CircularArc {
            spec,
            t_f,
            plane: spec.plane(),
        }
    }
}

impl Motion for CircularArc {
    fn provisional_duration(&self) -> f64 {
        self.t_f
    }

    fn eval(&self, u: f64) -> PathPoint {
        let s = &self.spec;
        let (r, dr, ddr) = unit_quintic(u);
        let d_eta = s.sweep();
        let gamma = s.eta_min + d_eta * r;
        let (sg, cg) = gamma.sin_cos();
        let radial = Vector3::new(cg, sg, 0.0);
        let tangent = Vector3::new(-sg, cg, 0.0);
        let w = d_eta * dr;
        let local = s.radius * radial;
        let local_d1 = s.radius * w * tangent;
        let local_d2 = s.radius * (-w * w * radial + d_eta * ddr * tangent);
        let p = s.center + self.plane * local;
        let v = self.plane * local_d1;
        let a = self.plane * local_d2;
        let (da, db) = s.angle_delta();
        let (alpha, beta) = if u >= 1.0 {
            s.end_angles
        } else {
            (s.start_angles.0 + da * r, s.start_angles.1 + db * r)
        };
        PathPoint {
            pose: Vector5::new(alpha, beta, p.x, p.y, p.z),
            d1: Vector5::new(da * dr, db * dr, v.x, v.y, v.z),
            d2: Vector5::new(da * ddr, db * ddr, a.x, a.y, a.z),
        }
    }
}

/// Approach from `entry` to the arc start, the arc, then a retract to
/// `exit`. The arc runs at the spec's speed ratio, the linear legs at the
/// options' ratio.
pub fn plan_circular(
    spec: &CircleSpec,
    entry: &Pose,
    exit: &Pose,
    params: &MachineParams,
    opts: &PlanOptions,
) -> Result<Trajectory, PlanError> {
    spec.validate()?;
    let sampler = Sampler::new(params, opts)?;
    let leg_ratio = opts.effective_ratio(params);
    let arc_ratio = effective_ratio(spec.speed_ratio, opts.safety_cap, params);
    let (start, end) = (spec.start_pose(), spec.end_pose());

    let mut out = linear_segment(&sampler, entry, &start, leg_ratio, SegmentKind::Approach)?;
    let arc = CircularArc::new(*spec, spec.travel_time(params, arc_ratio));
    out.append(sampler.segment(&arc, SegmentKind::Arc)?);
    out.append(linear_segment(
        &sampler,
        &end,
        exit,
        leg_ratio,
        SegmentKind::Retract,
    )?);
    Ok(out)
}
