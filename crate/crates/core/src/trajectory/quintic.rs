use crate::error::PlanError;

/// Quintic time scaling with zero velocity and acceleration at both ends:
/// returns `(r, r_dot, r_ddot)` at time `t` of a move lasting `t_f`.
pub fn quintic(t: f64, t_f: f64) -> Result<(f64, f64, f64), PlanError> {
    if !(t_f > 0.0) || !(0.0..=t_f).contains(&t) {
        return Err(PlanError::Domain { t, t_f });
    }
    let (r, dr, ddr) = unit_quintic(t / t_f);
    Ok((r, dr / t_f, ddr / (t_f * t_f)))
}

/// Quintic and its first two derivatives with respect to the normalized
/// time `u`, clamped to `[0, 1]`.
pub(crate) fn unit_quintic(u: f64) -> (f64, f64, f64) {
    let u = u.clamp(0.0, 1.0);
    let u2 = u * u;
    let u3 = u2 * u;
    (
        u3 * (10.0 - 15.0 * u + 6.0 * u2),
        30.0 * u2 * (1.0 - 2.0 * u + u2),
        60.0 * u * (1.0 - 3.0 * u + 2.0 * u2),
    )
}

/// Integral of the unit quintic over `[0, u]`.
pub(crate) fn unit_quintic_integral(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    let u4 = u * u * u * u;
    u4 * (2.5 - 3.0 * u + u * u)
}

/// Peak of `r_dot * t_f`, reached at mid-move.
pub const QUINTIC_PEAK_SPEED: f64 = 1.875;
