use hpkm_core::fixtures::{circle_entry_exit, reference_circle, reference_poses, square_program};
use hpkm_core::trajectory::LIMIT_TOLERANCE;
use hpkm_core::{
    limit_ratios, plan_circular, plan_gcode_program, plan_linear, plan_linear_tour, quintic,
    travel_time, CornerKind, MachineParams, PlanOptions, Trajectory, TrajectorySample,
};
use nalgebra::Vector3;
use proptest::prelude::*;

fn within_limits(plan: &Trajectory, params: &MachineParams, opts: &PlanOptions) {
    let r = limit_ratios(&plan.samples, &opts.limits(params));
    assert!(r.velocity <= 1.0 + LIMIT_TOLERANCE, "{r:?}");
    assert!(r.acceleration <= 1.0 + LIMIT_TOLERANCE, "{r:?}");
}

/// Per axis, the largest joint step over the largest sampled rate times the
/// longest sample interval; at most one for a continuous curve.
fn joint_jump_ratio(samples: &[TrajectorySample]) -> f64 {
    let dt = samples
        .windows(2)
        .map(|w| w[1].t - w[0].t)
        .fold(0.0, f64::max);
    (0..5)
        .map(|i| {
            let jump = samples
                .windows(2)
                .map(|w| (w[1].q.to_vector()[i] - w[0].q.to_vector()[i]).abs())
                .fold(0.0, f64::max);
            let rate = samples.iter().map(|s| s.q_dot[i].abs()).fold(0.0, f64::max);
            if jump == 0.0 {
                0.0
            } else {
                jump / (rate * dt)
            }
        })
        .fold(0.0, f64::max)
}

#[test]
fn quintic_endpoints_and_midpoint() {
    for t_f in [0.1, 0.4799, 2.0, 17.0] {
        let (r0, v0, a0) = quintic(0.0, t_f).unwrap();
        let (r1, v1, a1) = quintic(t_f, t_f).unwrap();
        assert_eq!(r0, 0.0);
        assert!((r1 - 1.0).abs() <= 1e-12);
        for x in [v0, a0, v1, a1] {
            assert!(x.abs() <= 1e-12);
        }
        let (rm, vm, _) = quintic(0.5 * t_f, t_f).unwrap();
        assert!((rm - 0.5).abs() <= 1e-15);
        assert!((vm - 1.875 / t_f).abs() <= 1e-9);
    }
    assert!(quintic(1.0, 0.0).is_err());
    assert!(quintic(-0.1, 1.0).is_err());
}

#[test]
fn reference_tour() {
    let p = MachineParams::default();
    let opts = PlanOptions::default();
    let [p1, p2, p3, _] = reference_poses();
    assert!((travel_time(&p2, &p3, &p, 1.0).unwrap() - 0.4799).abs() <= 1e-4);
    assert!((travel_time(&p1, &p2, &p, 1.0).unwrap() - 0.1937).abs() <= 3e-4);

    let plan = plan_linear_tour(&reference_poses(), &p, &opts).unwrap();
    assert_eq!(plan.segments.len(), 3);
    within_limits(&plan, &p, &opts);
    let leg = &plan.segments[1];
    let peak = plan
        .samples
        .iter()
        .filter(|s| s.t >= leg.start_time && s.t <= leg.start_time + leg.duration)
        .map(|s| s.velocity.linear().norm())
        .fold(0.0, f64::max);
    assert!((peak - 1.2).abs() <= 0.012, "{peak}");
    assert!(joint_jump_ratio(&plan.samples) <= 1.0 + 1e-3);
    assert_eq!(plan.first_pose(), Some(p1));
    assert_eq!(plan.last_pose(), Some(p1));
}

#[test]
fn reference_circular_trajectory() {
    let p = MachineParams::default();
    let opts = PlanOptions::default();
    let (entry, exit) = circle_entry_exit();
    let spec = reference_circle();
    let plan = plan_circular(&spec, &entry, &exit, &p, &opts).unwrap();
    within_limits(&plan, &p, &opts);
    assert!(joint_jump_ratio(&plan.samples) <= 1.0 + 1e-3);
    assert_eq!(plan.first_pose(), Some(entry));
    assert_eq!(plan.last_pose(), Some(exit));

    // The arc keeps its radius about the center.
    let arc = &plan.segments[1];
    for s in plan
        .samples
        .iter()
        .filter(|s| s.t >= arc.start_time && s.t <= arc.start_time + arc.duration)
    {
        let r = (s.pose.position() - spec.center).norm();
        assert!((r - spec.radius).abs() < 1e-12);
    }
}

#[test]
fn square_program_pipeline() {
    let p = MachineParams::default();
    let opts = PlanOptions::default();
    let start = reference_poses()[0];
    let (path, plan) = plan_gcode_program(&square_program(), &start, &p, 0.01, &opts).unwrap();
    assert_eq!(path.corners.len(), 3);
    assert!(path.corners.iter().all(|c| c.kind == CornerKind::Blended));
    let (gap, angle) = path.junction_errors();
    assert!(gap <= 1e-12, "{gap}");
    assert!(angle <= 1e-9, "{angle}");
    within_limits(&plan, &p, &opts);

    let mut arc_samples = 0;
    for s in &plan.samples {
        let v: Vector3<f64> = s.velocity.linear();
        let a = s.acceleration.fixed_rows::<3>(2).into_owned();
        let speed = v.norm();
        if speed == 0.0 {
            continue;
        }
        let curvature = v.cross(&a).norm() / speed.powi(3);
        if curvature > 1.0 {
            arc_samples += 1;
            assert!(speed * speed * curvature <= p.a_t_max * (1.0 + 1e-9));
        }
    }
    assert!(arc_samples > 0);
    assert_eq!(plan.last_pose(), Some(start));
}

#[test]
fn safety_cap_slows_everything() {
    let p = MachineParams::default();
    let [p1, p2, ..] = reference_poses();
    let opts = PlanOptions {
        safety_cap: true,
        ..PlanOptions::default()
    };
    let plan = plan_linear(&p1, &p2, &p, &opts).unwrap();
    within_limits(&plan, &p, &opts);
    let peak = plan
        .samples
        .iter()
        .map(|s| s.velocity.linear().norm())
        .fold(0.0, f64::max);
    assert!(peak <= 0.1 * p.k_vt * (1.0 + 1e-9));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_lines_respect_limits(
        a in prop::array::uniform5(-0.6f64..0.6),
        b in prop::array::uniform5(-0.6f64..0.6),
        ratio in 0.05f64..1.0,
    ) {
        let p = MachineParams::default();
        let pose = |v: [f64; 5]| {
            hpkm_core::Pose::from_wrist_center(
                v[0], v[1],
                Vector3::new(0.25 + 0.4 * v[2], 0.25 + 0.4 * v[3], 0.25 + 0.4 * v[4]),
                p.tool_length,
            )
        };
        let opts = PlanOptions { speed_ratio: ratio, ..PlanOptions::default() };
        let plan = plan_linear(&pose(a), &pose(b), &p, &opts).unwrap();
        let r = limit_ratios(&plan.samples, &opts.limits(&p));
        prop_assert!(r.velocity <= 1.0 + LIMIT_TOLERANCE);
        prop_assert!(r.acceleration <= 1.0 + LIMIT_TOLERANCE);
        prop_assert!(plan.segments[0].multiplier >= 1.0);
        let t = plan.samples.windows(2).map(|w| w[1].t - w[0].t).fold(0.0, f64::max);
        prop_assert!(t <= 1.0 / 1500.0 + 1e-12);
    }
}
