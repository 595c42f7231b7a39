use nalgebra::Vector5;

use super::TrajectorySample;
use crate::machine::MachineParams;

/// Velocity and acceleration caps used to stretch trajectories in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub joint_velocity: [f64; 5],
    pub joint_acceleration: [f64; 5],
    pub linear_speed: f64,
    pub angular_speed: f64,
    pub linear_acceleration: f64,
    pub angular_acceleration: f64,
}

impl Limits {
    /// Machine limits. With `safety_cap`, every speed limit is multiplied by
    /// the safety speed ratio; accelerations are unchanged.
    pub fn from_params(params: &MachineParams, safety_cap: bool) -> Self {
        let k = if safety_cap {
            params.safety_speed_ratio
        } else {
            1.0
        };
        let (vr, vt) = (params.k_vr * k, params.k_vt * k);
        let (ar, at) = (params.a_r_max, params.a_t_max);
        Limits {
            joint_velocity: [vr, vr, vt, vt, vt],
            joint_acceleration: [ar, ar, at, at, at],
            linear_speed: vt,
            angular_speed: vr,
            linear_acceleration: at,
            angular_acceleration: ar,
        }
    }
}

/// Number of velocity channels (and of acceleration channels).
pub(crate) const CHANNELS: usize = 7;

/// Per-channel demand ratios: five joints, then Cartesian linear and
/// angular norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ChannelRatios {
    pub velocity: [f64; CHANNELS],
    pub acceleration: [f64; CHANNELS],
}

pub(crate) fn channel_ratios(
    velocity: &Vector5<f64>,
    acceleration: &Vector5<f64>,
    q_dot: &Vector5<f64>,
    q_ddot: &Vector5<f64>,
    limits: &Limits,
) -> ChannelRatios {
    let mut out = ChannelRatios {
        velocity: [0.0; CHANNELS],
        acceleration: [0.0; CHANNELS],
    };
    for i in 0..5 {
        out.velocity[i] = q_dot[i].abs() / limits.joint_velocity[i];
        out.acceleration[i] = q_ddot[i].abs() / limits.joint_acceleration[i];
    }
    out.velocity[5] = velocity.fixed_rows::<3>(2).norm() / limits.linear_speed;
    out.velocity[6] = velocity.fixed_rows::<2>(0).norm() / limits.angular_speed;
    out.acceleration[5] = acceleration.fixed_rows::<3>(2).norm() / limits.linear_acceleration;
    out.acceleration[6] = acceleration.fixed_rows::<2>(0).norm() / limits.angular_acceleration;
    out
}

/// Worst-case demand ratios over a sampled trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LimitRatios {
    /// Largest velocity ratio, joints and Cartesian.
    pub velocity: f64,
    /// Largest acceleration ratio, joints and Cartesian.
    pub acceleration: f64,
}

impl LimitRatios {
    /// Time stretch needed to bring both ratios to one, never below one.
    pub fn multiplier(&self) -> f64 {
        self.velocity.max(self.acceleration.sqrt()).max(1.0)
    }
}

pub fn limit_ratios(samples: &[TrajectorySample], limits: &Limits) -> LimitRatios {
    samples.iter().fold(LimitRatios::default(), |acc, s| {
        let r = channel_ratios(
            &s.velocity.to_vector(),
            &s.acceleration,
            &s.q_dot,
            &s.q_ddot,
            limits,
        );
        LimitRatios {
            velocity: r.velocity.iter().copied().fold(acc.velocity, f64::max),
            acceleration: r
                .acceleration
                .iter()
                .copied()
                .fold(acc.acceleration, f64::max),
        }
    })
}

/// Duration multiplier `max(gamma_v, sqrt(gamma_a))` for samples taken at a
/// provisional duration; 1 when the samples already respect the limits.
pub fn rescale_to_limits(samples: &[TrajectorySample], limits: &Limits) -> f64 {
    limit_ratios(samples, limits).multiplier()
}
