use hpkm_core::{
    evaluate_cycle, fk_full, fk_translation, fk_wrist, full_inv_jacobian, full_inv_jacobian_dot,
    ik_full, ik_translation, ik_wrist, workspace_contains, wrist_center_of, AssemblyMode,
    MachineParams, Pose, Twist, WorkingMode, WristAngles,
};
use nalgebra::{Matrix5, Vector3, Vector5};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tip pose whose wrist center lies in the 0.5 m design cube.
fn random_pose(rng: &mut impl Rng, params: &MachineParams, max_tilt: f64) -> Pose {
    let c = Vector3::from_fn(|_, _| rng.random_range(0.0..0.5));
    let alpha = rng.random_range(-max_tilt..max_tilt);
    let beta = rng.random_range(-max_tilt..max_tilt);
    Pose::from_wrist_center(alpha, beta, c, params.tool_length)
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

fn rel(a: &Matrix5<f64>, b: &Matrix5<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

#[test]
fn full_round_trip_on_random_poses() {
    let p = MachineParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let pose = random_pose(&mut rng, &p, p.tilt_limit);
        let q = ik_full(&pose, &p, WorkingMode::default()).unwrap();
        let mode = AssemblyMode::of(&wrist_center_of(&pose, &p), &q.rho());
        let back = fk_full(&q, &p, mode).unwrap();
        assert!(
            (back.position() - pose.position()).norm() < 1e-9,
            "{pose:?}"
        );
        assert!(angle_diff(back.alpha, pose.alpha) < 1e-12, "{pose:?}");
        assert!(angle_diff(back.beta, pose.beta) < 1e-12, "{pose:?}");
    }
}

fn fd_jacobian(pose: &Pose, params: &MachineParams) -> Matrix5<f64> {
    let h = 1e-7;
    let base = pose.to_vector();
    let ik = |v: Vector5<f64>| {
        ik_full(&Pose::from_vector(&v), params, WorkingMode::default())
            .unwrap()
            .to_vector()
    };
    let mut m = Matrix5::zeros();
    for j in 0..5 {
        let mut step = Vector5::zeros();
        step[j] = h;
        m.set_column(j, &((ik(base + step) - ik(base - step)) / (2.0 * h)));
    }
    m
}

#[test]
fn inverse_jacobian_matches_finite_differences() {
    let p = MachineParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let pose = random_pose(&mut rng, &p, p.tilt_limit - 1e-3);
        let q = ik_full(&pose, &p, WorkingMode::default()).unwrap();
        let j = full_inv_jacobian(&pose, &q, &p).unwrap().into_inner();
        worst = worst.max(rel(&j, &fd_jacobian(&pose, &p)));
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn jacobian_derivative_matches_time_differences() {
    let p = MachineParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-6;
    let jac = |v: Vector5<f64>| {
        let pose = Pose::from_vector(&v);
        let q = ik_full(&pose, &p, WorkingMode::default()).unwrap();
        full_inv_jacobian(&pose, &q, &p).unwrap().into_inner()
    };
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let pose = random_pose(&mut rng, &p, p.tilt_limit - 1e-3);
        let t = Vector5::new(
            rng.random_range(-p.k_vr..p.k_vr),
            rng.random_range(-p.k_vr..p.k_vr),
            rng.random_range(-p.k_vt..p.k_vt),
            rng.random_range(-p.k_vt..p.k_vt),
            rng.random_range(-p.k_vt..p.k_vt),
        );
        let q = ik_full(&pose, &p, WorkingMode::default()).unwrap();
        let analytic = full_inv_jacobian_dot(&pose, &q, &Twist::from_vector(&t), &p).unwrap();
        let base = pose.to_vector();
        let numeric = (jac(base + t * h) - jac(base - t * h)) / (2.0 * h);
        worst = worst.max(rel(&analytic, &numeric));
    }
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn evaluate_cycle_agrees_with_the_parts() {
    let p = MachineParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let pose = random_pose(&mut rng, &p, p.tilt_limit);
        let twist = Twist::new(0.5, -1.0, 0.3, 0.2, -0.4);
        let k = evaluate_cycle(&pose, &twist, &p, WorkingMode::default()).unwrap();
        let q = ik_full(&pose, &p, WorkingMode::default()).unwrap();
        assert_eq!(k.q, q);
        assert_eq!(k.jacobian, full_inv_jacobian(&pose, &q, &p).unwrap());
        assert_eq!(
            k.jacobian_dot,
            full_inv_jacobian_dot(&pose, &q, &twist, &p).unwrap()
        );
    }
}

#[test]
fn design_cube_lies_in_the_workspace() {
    let p = MachineParams::default();
    let n = 11;
    let mut inside = 0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let c = Vector3::new(i as f64, j as f64, k as f64) * (0.5 / (n - 1) as f64);
                let pose = Pose::from_wrist_center(0.0, 0.0, c, p.tool_length);
                inside += usize::from(workspace_contains(&pose, &p).inside());
            }
        }
    }
    assert_eq!(inside, n * n * n);

    let far = Pose::from_wrist_center(0.0, 0.0, Vector3::new(2.0, 2.0, 2.0), p.tool_length);
    assert!(!workspace_contains(&far, &p).inside());
}

#[test]
fn tilt_beyond_limit_is_rejected() {
    let p = MachineParams::default();
    let pose = Pose::new(60f64.to_radians(), 0.0, 0.0, 0.0, 0.0);
    assert!(ik_full(&pose, &p, WorkingMode::default()).is_err());
    assert!(!workspace_contains(&pose, &p).inside());
}

proptest! {
    #[test]
    fn translation_round_trip(x in 0.0f64..0.5, y in 0.0f64..0.5, z in 0.0f64..0.5) {
        let p = MachineParams::default();
        let c = Vector3::new(x, y, z);
        let rho = ik_translation(&c, &p, WorkingMode::default()).unwrap();
        let back = fk_translation(&rho, &p, AssemblyMode::of(&c, &rho)).unwrap().center;
        prop_assert!((back - c).norm() < 1e-9);
        for i in 0..3 {
            // Each leg keeps its length.
            let mut joint = Vector3::zeros();
            joint[i] = rho[i];
            prop_assert!(((c - joint).norm() - p.leg_lengths[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn wrist_round_trip(alpha in -0.785f64..0.785, beta in -0.785f64..0.785) {
        let theta: WristAngles = ik_wrist(alpha, beta).unwrap();
        let (a, b) = fk_wrist(theta).unwrap();
        prop_assert!(angle_diff(a, alpha) < 1e-12);
        prop_assert!(angle_diff(b, beta) < 1e-12);
    }

    #[test]
    fn joint_rates_follow_the_jacobian(
        x in 0.05f64..0.45, y in 0.05f64..0.45, z in 0.05f64..0.45,
        a in -0.7f64..0.7, b in -0.7f64..0.7,
        v in prop::array::uniform5(-1.0f64..1.0),
    ) {
        // q(t + h) - q(t - h) over 2h tracks J * V for a pose moving at V.
        let p = MachineParams::default();
        let pose = Pose::from_wrist_center(a, b, Vector3::new(x, y, z), p.tool_length);
        let v = Vector5::from(v);
        let q = ik_full(&pose, &p, WorkingMode::default()).unwrap();
        let j = full_inv_jacobian(&pose, &q, &p).unwrap().into_inner();
        let h = 1e-6;
        let at = |s: f64| ik_full(&Pose::from_vector(&(pose.to_vector() + v * s)), &p, WorkingMode::default())
            .unwrap()
            .to_vector();
        let numeric = (at(h) - at(-h)) / (2.0 * h);
        prop_assert!((j * v - numeric).amax() < 1e-6);
    }
}
