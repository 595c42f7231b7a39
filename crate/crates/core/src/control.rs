//! Decoupled computed-torque PID control of five equivalent single-axis
//! plants, simulated at the sensing rate under a slower control loop.

use std::time::Instant;

use nalgebra::{Complex, Matrix3, Vector5};

use crate::error::SimError;
use crate::machine::{ControlGains, MachineParams};
use crate::trajectory::TrajectorySample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    Rotational,
    Translational,
}

/// Axis kinds in joint order: two wrist motors, three prismatic actuators.
pub const AXES: [AxisKind; 5] = [
    AxisKind::Rotational,
    AxisKind::Rotational,
    AxisKind::Translational,
    AxisKind::Translational,
    AxisKind::Translational,
];

/// One actuator driving an equivalent inertia (rad, kg m^2) or mass (m, kg).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisPlant {
    pub kind: AxisKind,
    pub inertia: f64,
    pub torque_limit: f64,
    pub position: f64,
    pub velocity: f64,
}

impl AxisPlant {
    /// Advances by `h` under a constant generalized force.
    fn step(&mut self, force: f64, h: f64, integrator: Integrator) {
        let a = force / self.inertia;
        match integrator {
            Integrator::ExactHold => {
                self.position += h * (self.velocity + 0.5 * a * h);
                self.velocity += a * h;
            }
            Integrator::SemiImplicitEuler => {
                self.velocity += a * h;
                self.position += self.velocity * h;
            }
        }
    }
}

/// Plant update rule between sensing instants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    SemiImplicitEuler,
    /// Exact solution for a force held over the step.
    ExactHold,
}

/// Desired acceleration fed forward over a control period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Feedforward {
    /// Mean over the period: the change of desired velocity up to the next
    /// cycle, divided by the period.
    #[default]
    HoldMean,
    /// The acceleration of the held plan sample.
    Sample,
}

/// Largest actuator effort per axis: mass times linear acceleration limit,
/// inertia times angular acceleration limit.
pub fn torque_normalization(params: &MachineParams) -> [f64; 5] {
    let r = params.equiv_inertia * params.a_r_max;
    let t = params.equiv_mass * params.a_t_max;
    [r, r, t, t, t]
}

fn axis_gains(gains: &ControlGains, kind: AxisKind) -> (f64, f64, f64) {
    match kind {
        AxisKind::Rotational => (gains.kp_r, gains.kd_r, gains.ki_r),
        AxisKind::Translational => (gains.kp_t, gains.kd_t, gains.ki_t),
    }
}

/// Unsaturated computed torque `m (q_ddot_d + kp e + kd e_dot + ki int_e)`.
pub fn computed_torque(
    inertia: f64,
    (kp, kd, ki): (f64, f64, f64),
    q_ddot_desired: f64,
    error: f64,
    error_rate: f64,
    error_integral: f64,
) -> f64 {
    inertia * (q_ddot_desired + kp * error + kd * error_rate + ki * error_integral)
}

/// Roots of `s^3 + kd s^2 + kp s + ki`, the closed-loop error polynomial.
pub fn error_poles(kp: f64, kd: f64, ki: f64) -> [Complex<f64>; 3] {
    #[rustfmt::skip]
    let companion = Matrix3::new(
        -kd, -kp, -ki,
        1.0, 0.0, 0.0,
        0.0, 1.0, 0.0,
    );
    let ev = companion.complex_eigenvalues();
    [ev[0], ev[1], ev[2]]
}

/// Backward difference followed by a first-order low-pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityEstimator {
    gain: f64,
    h: f64,
    last: f64,
    value: f64,
}

impl VelocityEstimator {
    pub fn new(sample_rate: f64, cutoff: f64, position: f64, velocity: f64) -> Self {
        let h = 1.0 / sample_rate;
        VelocityEstimator {
            gain: 1.0 - (-2.0 * std::f64::consts::PI * cutoff * h).exp(),
            h,
            last: position,
            value: velocity,
        }
    }

    pub fn update(&mut self, position: f64) -> f64 {
        let raw = (position - self.last) / self.h;
        self.last = position;
        self.value += self.gain * (raw - self.value);
        self.value
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Filtered velocity of positions sampled at `sample_rate`, kept every
/// `decimation`-th sample (starting with the first update). The filter is
/// primed with the first backward difference.
pub fn estimate_velocity(
    positions: &[f64],
    sample_rate: f64,
    cutoff: f64,
    decimation: usize,
) -> Vec<f64> {
    let [first, second, ..] = *positions else {
        return Vec::new();
    };
    let mut est =
        VelocityEstimator::new(sample_rate, cutoff, first, (second - first) * sample_rate);
    positions[1..]
        .iter()
        .map(|&p| est.update(p))
        .enumerate()
        .filter(|(k, _)| k % decimation.max(1) == 0)
        .map(|(_, v)| v)
        .collect()
}

/// Constant force (N or N m) applied to one axis from `start` onwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub axis: usize,
    pub force: f64,
    pub start: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub control_rate: f64,
    pub sensing_rate: f64,
    pub filter_cutoff: f64,
    /// Simulated time; the plan's duration when `None`. The last plan sample
    /// is held past the end of the plan.
    pub duration: Option<f64>,
    pub disturbances: Vec<Disturbance>,
    /// Added to the plant's initial joint positions.
    pub initial_offset: [f64; 5],
    pub integrator: Integrator,
    pub feedforward: Feedforward,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            control_rate: 1500.0,
            sensing_rate: 9000.0,
            filter_cutoff: 200.0,
            duration: None,
            disturbances: Vec::new(),
            initial_offset: [0.0; 5],
            integrator: Integrator::default(),
            feedforward: Feedforward::default(),
        }
    }
}

impl SimConfig {
    /// Sensing steps per control period.
    pub fn substeps(&self) -> Result<usize, SimError> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.control_rate) || !positive(self.sensing_rate) {
            return Err(SimError::Invalid("rates must be positive".into()));
        }
        let ratio = self.sensing_rate / self.control_rate;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
            return Err(SimError::Invalid(format!(
                "sensing rate {} is not a whole multiple of control rate {}",
                self.sensing_rate, self.control_rate
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.substeps()?;
        if !(self.filter_cutoff > 0.0 && self.filter_cutoff < self.sensing_rate / 2.0) {
            return Err(SimError::Invalid(format!(
                "filter cutoff {} must lie in (0, sensing_rate / 2)",
                self.filter_cutoff
            )));
        }
        if let Some(d) = self.duration {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(SimError::Invalid(format!(
                    "duration {d} must not be negative"
                )));
            }
        }
        if let Some(d) = self.disturbances.iter().find(|d| d.axis >= 5) {
            return Err(SimError::Invalid(format!("no axis {}", d.axis)));
        }
        Ok(())
    }
}

/// One control cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub q_desired: [f64; 5],
    pub q_actual: [f64; 5],
    pub q_dot_desired: [f64; 5],
    pub q_dot_estimated: [f64; 5],
    pub error: [f64; 5],
    /// Effort over its maximum, in `[-1, 1]`.
    pub u: [f64; 5],
    pub shutdown: bool,
    /// Wall-clock time spent computing the control law (s).
    pub cycle_time: f64,
}

/// Where and why the error watchdog stopped the machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shutdown {
    pub t: f64,
    pub axis: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub rows: Vec<TraceRow>,
    pub shutdown: Option<Shutdown>,
}

impl SimTrace {
    pub fn max_abs_error(&self) -> [f64; 5] {
        self.fold(|r| r.error)
    }

    pub fn max_abs_u(&self) -> [f64; 5] {
        self.fold(|r| r.u)
    }

    fn fold(&self, f: impl Fn(&TraceRow) -> [f64; 5]) -> [f64; 5] {
        self.rows.iter().fold([0.0; 5], |mut acc, r| {
            for (a, v) in acc.iter_mut().zip(f(r)) {
                *a = a.max(v.abs());
            }
            acc
        })
    }

    /// Rows with the wall-clock timing cleared, for comparing runs.
    pub fn without_timing(&self) -> SimTrace {
        SimTrace {
            rows: self
                .rows
                .iter()
                .map(|r| TraceRow {
                    cycle_time: 0.0,
                    ..*r
                })
                .collect(),
            shutdown: self.shutdown,
        }
    }
}

/// Desired joint state of the sample in force at `t`.
fn held_sample(plan: &[TrajectorySample], t: f64) -> (Vector5<f64>, Vector5<f64>, Vector5<f64>) {
    let k = plan.partition_point(|s| s.t <= t + 1e-12).max(1) - 1;
    let s = &plan[k];
    if k + 1 == plan.len() && t > s.t {
        // Past the end of the plan: hold still.
        (s.q.to_vector(), Vector5::zeros(), Vector5::zeros())
    } else {
        (s.q.to_vector(), s.q_dot, s.q_ddot)
    }
}

/// Runs the control loop along `plan`.
///
/// Each control cycle reads the desired joint state (held between plan
/// samples), checks the translational errors against the shutdown
/// threshold, then applies a saturated computed-torque PID whose
/// feedforward is set by [`SimConfig::feedforward`]. The derivative
/// term compares velocity estimates obtained by the same filter from the
/// measured positions and from the desired positions, extrapolated to the
/// sensing instants. Plants then advance over the sensing sub-steps with
/// the effort held.
pub fn run_sim(
    plan: &[TrajectorySample],
    params: &MachineParams,
    sim: &SimConfig,
) -> Result<SimTrace, SimError> {
    if plan.is_empty() {
        return Err(SimError::EmptyPlan);
    }
    sim.validate()?;
    let substeps = sim.substeps()?;
    let h = 1.0 / sim.control_rate;
    let hs = h / substeps as f64;
    let duration = sim.duration.unwrap_or(plan.last().map_or(0.0, |s| s.t));
    let cycles = (duration * sim.control_rate + 1e-9).floor() as usize + 1;
    let limits = torque_normalization(params);

    let (q0, qd0, _) = held_sample(plan, 0.0);
    let mut plants: [AxisPlant; 5] = std::array::from_fn(|i| AxisPlant {
        kind: AXES[i],
        inertia: match AXES[i] {
            AxisKind::Rotational => params.equiv_inertia,
            AxisKind::Translational => params.equiv_mass,
        },
        torque_limit: limits[i],
        position: q0[i] + sim.initial_offset[i],
        velocity: qd0[i],
    });
    let estimator =
        |p: f64, v: f64| VelocityEstimator::new(sim.sensing_rate, sim.filter_cutoff, p, v);
    let mut measured: [VelocityEstimator; 5] =
        std::array::from_fn(|i| estimator(plants[i].position, plants[i].velocity));
    let mut reference: [VelocityEstimator; 5] = std::array::from_fn(|i| estimator(q0[i], qd0[i]));
    let mut integral = [0.0; 5];
    let mut last_error: Option<[f64; 5]> = None;
    let mut trace = SimTrace::default();
    trace.rows.reserve(cycles);

    for k in 0..cycles {
        let t = k as f64 * h;
        let started = Instant::now();
        let (q_d, qd_d, qdd_sample) = held_sample(plan, t);
        let qdd_d = match sim.feedforward {
            Feedforward::Sample => qdd_sample,
            Feedforward::HoldMean => (held_sample(plan, t + h).1 - qd_d) / h,
        };
        let mut row = TraceRow {
            t,
            q_desired: q_d.into(),
            q_actual: std::array::from_fn(|i| plants[i].position),
            q_dot_desired: qd_d.into(),
            q_dot_estimated: std::array::from_fn(|i| measured[i].value()),
            error: std::array::from_fn(|i| q_d[i] - plants[i].position),
            u: [0.0; 5],
            shutdown: false,
            cycle_time: 0.0,
        };
        let violation = (0..5)
            .filter(|&i| AXES[i] == AxisKind::Translational)
            .find(|&i| row.error[i].abs() > params.error_shutdown);
        if let Some(axis) = violation {
            row.shutdown = true;
            row.cycle_time = started.elapsed().as_secs_f64();
            trace.shutdown = Some(Shutdown {
                t,
                axis,
                error: row.error[axis],
            });
            trace.rows.push(row);
            break;
        }
        let mut force = [0.0; 5];
        for i in 0..5 {
            let e = row.error[i];
            if let Some(prev) = last_error {
                integral[i] += 0.5 * h * (prev[i] + e);
            }
            let e_dot = reference[i].value() - measured[i].value();
            let gains = axis_gains(&params.gains, AXES[i]);
            let raw = computed_torque(plants[i].inertia, gains, qdd_d[i], e, e_dot, integral[i]);
            force[i] = raw.clamp(-plants[i].torque_limit, plants[i].torque_limit);
            row.u[i] = force[i] / plants[i].torque_limit;
        }
        last_error = Some(row.error);
        row.cycle_time = started.elapsed().as_secs_f64();
        trace.rows.push(row);

        for j in 1..=substeps {
            let ts = t + (j - 1) as f64 * hs;
            let tau = j as f64 * hs;
            for i in 0..5 {
                let disturbance: f64 = sim
                    .disturbances
                    .iter()
                    .filter(|d| d.axis == i && ts >= d.start)
                    .map(|d| d.force)
                    .sum();
                plants[i].step(force[i] + disturbance, hs, sim.integrator);
                measured[i].update(plants[i].position);
                reference[i].update(q_d[i] + tau * (qd_d[i] + 0.5 * tau * qdd_d[i]));
            }
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn torque_examples() {
        let p = MachineParams::default();
        let gains = axis_gains(&p.gains, AxisKind::Translational);
        assert_eq!(
            computed_torque(p.equiv_mass, gains, 0.0, 0.0, 0.0, 0.0),
            0.0
        );
        let g = computed_torque(p.equiv_mass, gains, 0.0, 1e-3, 0.0, 0.0);
        assert_relative_eq!(g, 91.6278 * 19200.0 * 0.001, max_relative = 1e-15);
        assert!((g - 1759.3).abs() < 0.05);
        let gains = axis_gains(&p.gains, AxisKind::Rotational);
        assert_relative_eq!(
            computed_torque(p.equiv_inertia, gains, 10.0, 0.0, 0.0, 0.0),
            2.772,
            max_relative = 1e-15
        );
    }

    #[test]
    fn normalization() {
        let mut p = MachineParams::default();
        let n = torque_normalization(&p);
        assert_relative_eq!(n[2], 91.6278 * 13.0, max_relative = 1e-15);
        assert!((n[2] - 1191.2).abs() < 0.05);
        assert!((n[0] - 74.84).abs() < 0.005);
        p.equiv_mass *= 2.0;
        assert_eq!(torque_normalization(&p)[4], 2.0 * n[4]);
    }

    #[test]
    fn error_polynomial_is_hurwitz() {
        let g = ControlGains::default();
        assert!(g.kd_t * g.kp_t > g.ki_t);
        for r in error_poles(g.kp_t, g.kd_t, g.ki_t) {
            assert!(r.re < 0.0);
            // (s + 80)^3 with these gains.
            assert!((r - Complex::new(-80.0, 0.0)).norm() < 0.1);
        }
        assert!(error_poles(1.0, 1.0, 2.0).iter().any(|r| r.re > 0.0));
    }

    #[test]
    fn estimator_examples() {
        let rate = 9000.0;
        assert!(estimate_velocity(&[0.3; 50], rate, 200.0, 1)
            .iter()
            .all(|&v| v == 0.0));

        // Ramp: five time constants after the start the lag has decayed.
        let tau = 1.0 / (2.0 * std::f64::consts::PI * 200.0);
        let n = (5.0 * tau * rate).ceil() as usize + 2;
        let ramp: Vec<f64> = (0..n).map(|k| 0.25 * k as f64 / rate).collect();
        let v = estimate_velocity(&ramp, rate, 200.0, 1);
        assert!((v.last().unwrap() - 0.25).abs() <= 1e-3 * 0.25);

        // 200 Hz sine: steady-state amplitude about 1/sqrt(2) of the true rate.
        let w = 2.0 * std::f64::consts::PI * 200.0;
        let sine: Vec<f64> = (0..9000).map(|k| (w * k as f64 / rate).sin()).collect();
        let v = estimate_velocity(&sine, rate, 200.0, 1);
        let amp = v[4500..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(
            (amp / w - std::f64::consts::FRAC_1_SQRT_2).abs()
                <= 0.02 * std::f64::consts::FRAC_1_SQRT_2,
            "{}",
            amp / w
        );

        assert_eq!(
            estimate_velocity(&ramp, rate, 200.0, 6).len(),
            (n - 1).div_ceil(6)
        );
    }

    #[test]
    fn config_validation() {
        let mut c = SimConfig::default();
        assert_eq!(c.substeps().unwrap(), 6);
        c.sensing_rate = 10_000.0;
        assert!(c.validate().is_err());
        c.sensing_rate = 9000.0;
        c.filter_cutoff = 5000.0;
        assert!(c.validate().is_err());
        c.filter_cutoff = 200.0;
        c.disturbances.push(Disturbance {
            axis: 7,
            force: 1.0,
            start: 0.0,
        });
        assert!(c.validate().is_err());
    }

    #[test]
    fn exact_hold_integrates_constant_force_exactly() {
        let mut p = AxisPlant {
            kind: AxisKind::Translational,
            inertia: 2.0,
            torque_limit: 1.0,
            position: 0.5,
            velocity: -0.25,
        };
        for _ in 0..6 {
            p.step(3.0, 0.01, Integrator::ExactHold);
        }
        let t = 0.06f64;
        assert_relative_eq!(p.position, 0.5 - 0.25 * t + 0.75 * t * t, epsilon = 1e-15);
        assert_relative_eq!(p.velocity, -0.25 + 1.5 * t, epsilon = 1e-15);
    }
}
