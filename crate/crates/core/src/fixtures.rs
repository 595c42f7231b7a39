//! Reference poses and the reference circle used by the examples, tests and
//! the command-line `--reference-poses` / `--reference-circle` options.

use nalgebra::Vector3;

use crate::machine::Pose;
use crate::trajectory::CircleSpec;

fn mm(x: f64) -> f64 {
    x / 1000.0
}

fn deg(x: f64) -> f64 {
    x.to_radians()
}

/// Four-pose linear tour; the last pose repeats the first.
pub fn reference_poses() -> [Pose; 4] {
    let p1 = Pose::new(0.0, 0.0, 0.0, 0.0, mm(-72.0));
    let p2 = Pose::new(deg(20.0), 0.0, mm(140.0), mm(130.0), mm(60.0));
    let p3 = Pose::new(0.0, deg(20.0), mm(-240.0), mm(-230.0), mm(-180.0));
    [p1, p2, p3, p1]
}

/// Reference pose by name, `P1` to `P4` (case-insensitive).
pub fn reference_pose(name: &str) -> Option<Pose> {
    let k = match name.to_ascii_uppercase().as_str() {
        "P1" => 0,
        "P2" => 1,
        "P3" => 2,
        "P4" => 3,
        _ => return None,
    };
    Some(reference_poses()[k])
}

/// Reference circle: 30 mm radius about (10, 10, 10) mm in a horizontal
/// plane, one full turn, tilting from (20 deg, 0) to (0, 20 deg).
pub fn reference_circle() -> CircleSpec {
    CircleSpec {
        center: Vector3::new(mm(10.0), mm(10.0), mm(10.0)),
        radius: mm(30.0),
        eta_min: 0.0,
        eta_max: 2.0 * std::f64::consts::PI,
        alpha1: 0.0,
        beta1: 0.0,
        start_angles: (deg(20.0), 0.0),
        end_angles: (0.0, deg(20.0)),
        speed_ratio: 1.0,
    }
}

/// Entry and exit poses around the reference circle.
pub fn circle_entry_exit() -> (Pose, Pose) {
    let p1 = reference_poses()[0];
    (p1, p1)
}

/// Square of 100 mm edges at the height of the first reference pose, fed at
/// 30 m/min, returning to its start.
pub fn square_program() -> String {
    [
        "(square, 100 mm edges)",
        "G1 X100 Y0 Z-72 F30000",
        "Y100",
        "X0",
        "Y0",
    ]
    .join("\n")
}
