use nalgebra::Vector5;

use super::{
    effective_ratio, unit_quintic, Motion, PathPoint, PlanOptions, Sampler, SegmentKind, Trajectory,
};
use crate::error::PlanError;
use crate::machine::{MachineParams, Pose};

/// Straight move between two poses with quintic timing; angles and
/// position are interpolated together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMotion {
    pub from: Pose,
    pub to: Pose,
    pub t_f: f64,
}

impl LinearMotion {
    pub fn new(from: Pose, to: Pose, t_f: f64) -> Self {
        LinearMotion { from, to, t_f }
    }
}

impl Motion for LinearMotion {
    fn provisional_duration(&self) -> f64 {
        self.t_f
    }

    fn eval(&self, u: f64) -> PathPoint {
        let (r, dr, ddr) = unit_quintic(u);
        let delta = self.to.to_vector() - self.from.to_vector();
        let pose = if u >= 1.0 {
            self.to.to_vector()
        } else {
            self.from.to_vector() + delta * r
        };
        PathPoint {
            pose,
            d1: delta * dr,
            d2: delta * ddr,
        }
    }
}

fn displacement(p1: &Pose, p2: &Pose) -> (f64, f64) {
    let d: Vector5<f64> = p2.to_vector() - p1.to_vector();
    (d.fixed_rows::<3>(2).norm(), d.fixed_rows::<2>(0).norm())
}

/// Provisional travel time: the slower of the translation at
/// `speed_ratio * k_vt` and the rotation at `speed_ratio * k_vr`.
pub fn travel_time(
    p1: &Pose,
    p2: &Pose,
    params: &MachineParams,
    speed_ratio: f64,
) -> Result<f64, PlanError> {
    if !(speed_ratio > 0.0 && speed_ratio <= 1.0) {
        return Err(PlanError::Invalid(format!(
            "speed ratio {speed_ratio} outside (0, 1]"
        )));
    }
    let (dt, dr) = displacement(p1, p2);
    Ok((dt / (speed_ratio * params.k_vt)).max(dr / (speed_ratio * params.k_vr)))
}

pub(crate) fn linear_segment(
    sampler: &Sampler<'_>,
    p1: &Pose,
    p2: &Pose,
    ratio: f64,
    kind: SegmentKind,
) -> Result<Trajectory, PlanError> {
    let t_f = travel_time(p1, p2, sampler.params, ratio)?;
    sampler.segment(&LinearMotion::new(*p1, *p2, t_f), kind)
}

/// Quintic straight-line move from `p1` to `p2`.
pub fn plan_linear(
    p1: &Pose,
    p2: &Pose,
    params: &MachineParams,
    opts: &PlanOptions,
) -> Result<Trajectory, PlanError> {
    let sampler = Sampler::new(params, opts)?;
    linear_segment(
        &sampler,
        p1,
        p2,
        opts.effective_ratio(params),
        SegmentKind::Linear,
    )
}

/// Consecutive linear moves through `poses`, stopping at each one.
/// Repeated poses add nothing.
pub fn plan_linear_tour(
    poses: &[Pose],
    params: &MachineParams,
    opts: &PlanOptions,
) -> Result<Trajectory, PlanError> {
    let sampler = Sampler::new(params, opts)?;
    let ratio = opts.effective_ratio(params);
    let mut out = Trajectory::default();
    let Some(first) = poses.first() else {
        return Ok(out);
    };
    for pair in poses.windows(2) {
        if pair[0] != pair[1] {
            out.append(linear_segment(
                &sampler,
                &pair[0],
                &pair[1],
                ratio,
                SegmentKind::Linear,
            )?);
        }
    }
    if out.is_empty() {
        out = linear_segment(&sampler, first, first, ratio, SegmentKind::Linear)?;
    }
    Ok(out)
}

const SAME_POSE_TOL: f64 = 1e-12;

fn same_pose(a: &Pose, b: &Pose) -> bool {
    (a.to_vector() - b.to_vector()).amax() <= SAME_POSE_TOL
}

/// Adds linear moves from `current` to the start of `plan` and from its end
/// back to `current`, so the machine leaves from and returns to where it
/// is. Ends that already coincide with `current` are left alone.
pub fn close_loop(
    current: &Pose,
    plan: Trajectory,
    params: &MachineParams,
    opts: &PlanOptions,
) -> Result<Trajectory, PlanError> {
    let (Some(first), Some(last)) = (plan.first_pose(), plan.last_pose()) else {
        return Ok(plan);
    };
    let sampler = Sampler::new(params, opts)?;
    let ratio = effective_ratio(opts.speed_ratio, opts.safety_cap, params);
    let mut out = Trajectory::default();
    if !same_pose(current, &first) {
        out.append(linear_segment(
            &sampler,
            current,
            &first,
            ratio,
            SegmentKind::Approach,
        )?);
    }
    out.append(plan);
    if !same_pose(&last, current) {
        out.append(linear_segment(
            &sampler,
            &last,
            current,
            ratio,
            SegmentKind::Retract,
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::reference_poses;
    use crate::trajectory::{limit_ratios, LIMIT_TOLERANCE};
    use approx::assert_relative_eq;

    fn params() -> MachineParams {
        MachineParams::default()
    }

    #[test]
    fn travel_time_examples() {
        let p = params();
        let [p1, p2, p3, _] = reference_poses();
        assert_eq!(travel_time(&p1, &p1, &p, 1.0).unwrap(), 0.0);

        // Norms recomputed from the millimetre and degree differences.
        let dt = (140f64.powi(2) + 130f64.powi(2) + 132f64.powi(2)).sqrt() / 1000.0;
        let t = travel_time(&p1, &p2, &p, 1.0).unwrap();
        assert_relative_eq!(t, dt / 1.2, max_relative = 1e-12);
        // 0.19352 s; the published 0.1937 s is off in the fourth digit.
        assert!((t - 0.1937).abs() < 3e-4);

        let dt = (380f64.powi(2) + 360f64.powi(2) + 240f64.powi(2)).sqrt() / 1000.0;
        let dr = (2.0 * 20f64.to_radians().powi(2)).sqrt();
        assert!((dt - 0.5759).abs() < 1e-4 && (dr - 0.4937).abs() < 1e-4);
        let t = travel_time(&p2, &p3, &p, 1.0).unwrap();
        assert_relative_eq!(t, dt / 1.2, max_relative = 1e-12);
        assert!((t - 0.4799).abs() < 1e-4);
        assert!(dr / 3.27 < t);

        assert_relative_eq!(
            travel_time(&p2, &p3, &p, 0.5).unwrap(),
            2.0 * t,
            max_relative = 1e-15
        );
        assert!(travel_time(&p2, &p3, &p, 0.0).is_err());
    }

    #[test]
    fn stationary_move_is_a_single_sample() {
        let p = params();
        let [p1, ..] = reference_poses();
        let tr = plan_linear(&p1, &p1, &p, &PlanOptions::default()).unwrap();
        assert_eq!(tr.samples.len(), 1);
        assert_eq!(tr.samples[0].pose, p1);
    }

    #[test]
    fn endpoints_and_boundary_rates() {
        let p = params();
        let [p1, p2, ..] = reference_poses();
        let tr = plan_linear(&p1, &p2, &p, &PlanOptions::default()).unwrap();
        let (a, b) = (tr.samples.first().unwrap(), tr.samples.last().unwrap());
        assert_eq!(a.pose, p1);
        assert_eq!(b.pose, p2);
        for s in [a, b] {
            assert!(s.velocity.to_vector().amax() <= 1e-12);
            assert!(s.acceleration.amax() <= 1e-12);
            assert!(s.q_dot.amax() <= 1e-12 && s.q_ddot.amax() <= 1e-12);
        }
        // Bell-shaped speed: rises to a single interior peak, then falls.
        let speed: Vec<f64> = tr
            .samples
            .iter()
            .map(|s| s.velocity.linear().norm())
            .collect();
        let k = speed
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .unwrap()
            .0;
        assert!(speed[..=k].windows(2).all(|w| w[1] >= w[0]));
        assert!(speed[k..].windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn uniform_grid_at_the_sampling_rate() {
        let p = params();
        let [p1, p2, ..] = reference_poses();
        let tr = plan_linear(&p1, &p2, &p, &PlanOptions::default()).unwrap();
        let h = 1.0 / 1500.0;
        let n = tr.samples.len();
        for (k, s) in tr.samples[..n - 1].iter().enumerate() {
            assert_eq!(s.t, k as f64 * h);
        }
        let last = tr.samples[n - 1].t - tr.samples[n - 2].t;
        assert!(last > 0.0 && last <= h + 1e-15);
    }

    #[test]
    fn p2_to_p3_peaks_at_the_linear_speed_limit() {
        let p = params();
        let [_, p2, p3, _] = reference_poses();
        let tr = plan_linear(&p2, &p3, &p, &PlanOptions::default()).unwrap();
        let seg = tr.segments[0];
        assert!((seg.provisional_duration - 0.4799).abs() < 1e-4);
        let peak = tr
            .samples
            .iter()
            .map(|s| s.velocity.linear().norm())
            .fold(0.0, f64::max);
        assert!(
            (peak - 1.2).abs() <= 0.012,
            "peak {peak}, multiplier {}",
            seg.multiplier
        );
        let r = limit_ratios(&tr.samples, &PlanOptions::default().limits(&p));
        assert!(r.velocity <= 1.0 + LIMIT_TOLERANCE && r.acceleration <= 1.0 + LIMIT_TOLERANCE);
    }

    #[test]
    fn joint_rates_match_finite_differences() {
        let p = params();
        let [p1, p2, p3, p4] = reference_poses();
        let tr = plan_linear_tour(&[p1, p2, p3, p4], &p, &PlanOptions::default()).unwrap();
        let s = &tr.samples;
        let vmax = s.iter().map(|x| x.q_dot.amax()).fold(0.0, f64::max);
        let amax = s.iter().map(|x| x.q_ddot.amax()).fold(0.0, f64::max);
        for w in s.windows(3) {
            let h = w[2].t - w[0].t;
            if (w[1].t - w[0].t - (w[2].t - w[1].t)).abs() > 1e-12 {
                continue;
            }
            let fd = (w[2].q.to_vector() - w[0].q.to_vector()) / h;
            assert!((fd - w[1].q_dot).amax() <= 1e-3 * vmax);
            let fdd = (w[2].q_dot - w[0].q_dot) / h;
            assert!((fdd - w[1].q_ddot).amax() <= 1e-2 * amax);
        }
        for x in s {
            for r in [x.q.rho1, x.q.rho2, x.q.rho3] {
                assert!(p.rho_in_range(r));
            }
        }
    }

    #[test]
    fn time_scaling_law() {
        let p = params();
        let [_, p2, p3, _] = reference_poses();
        let m = LinearMotion::new(p2, p3, 1.0);
        let sampler = Sampler::new(&p, &PlanOptions::default()).unwrap();
        let a = sampler.fixed(&m, 1.0, SegmentKind::Linear).unwrap();
        let b = sampler.fixed(&m, 2.0, SegmentKind::Linear).unwrap();
        let peak = |t: &Trajectory| t.samples.iter().map(|s| s.q_dot.amax()).fold(0.0, f64::max);
        // Both grids contain u = 1/2, where the speed peaks.
        assert_relative_eq!(peak(&b), peak(&a) / 2.0, max_relative = 1e-9);
        // Shared grid points u = k/1500.
        for k in 0..=1500 {
            let (x, y) = (&a.samples[k], &b.samples[2 * k]);
            assert_relative_eq!(y.acceleration * 4.0, x.acceleration, epsilon = 1e-9);
        }
    }

    #[test]
    fn safety_cap_limits_the_speed() {
        let p = params();
        let [_, p2, p3, _] = reference_poses();
        let opts = PlanOptions {
            safety_cap: true,
            ..PlanOptions::default()
        };
        let tr = plan_linear(&p2, &p3, &p, &opts).unwrap();
        let peak = tr
            .samples
            .iter()
            .map(|s| s.velocity.linear().norm())
            .fold(0.0, f64::max);
        assert!(peak <= 0.12 * (1.0 + 1e-9));
    }

    #[test]
    fn workspace_exit_is_reported_with_time() {
        let p = params();
        let [p1, ..] = reference_poses();
        let far = Pose::new(0.0, 0.0, 0.0, 2.0, 0.0);
        match plan_linear(&p1, &far, &p, &PlanOptions::default()) {
            Err(PlanError::WorkspaceExit { t, .. }) => assert!(t > 0.0),
            other => panic!("expected a workspace exit, got {other:?}"),
        }
    }

    #[test]
    fn close_loop_examples() {
        let p = params();
        let [p1, p2, p3, p4] = reference_poses();
        let opts = PlanOptions::default();
        let tour = plan_linear_tour(&[p1, p2, p3, p4], &p, &opts).unwrap();
        let closed = close_loop(&p1, tour.clone(), &p, &opts).unwrap();
        assert_eq!(closed, tour);

        let plan = plan_linear(&p2, &p3, &p, &opts).unwrap();
        let closed = close_loop(&p1, plan.clone(), &p, &opts).unwrap();
        assert_eq!(closed.first_pose(), Some(p1));
        assert_eq!(closed.last_pose(), Some(p1));
        assert_eq!(closed.segments.len(), 3);
        assert_eq!(closed.segments[0].kind, SegmentKind::Approach);
        assert_eq!(closed.segments[2].kind, SegmentKind::Retract);
        for (r, pose) in closed.segments[1..].iter().zip([p2, p3]) {
            let s = closed.samples.iter().find(|s| s.t == r.start_time).unwrap();
            assert_eq!(s.pose, pose);
            assert!(s.velocity.to_vector().amax() <= 1e-12);
        }
        let t = closed.samples.iter().map(|s| s.t).collect::<Vec<_>>();
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }
}
