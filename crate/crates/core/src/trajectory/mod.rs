//! Time-parameterized task-space motions, sampled at the control rate and
//! projected into joint space.
//!
//! Every motion is described over a normalized time `u` in `[0, 1]`. For a
//! duration `T` the task velocity is `dP/du / T` and the acceleration is
//! `d2P/du2 / T^2`, so stretching a move in time rescales joint rates
//! exactly. The planner uses this to pick the shortest duration that keeps
//! every joint and Cartesian rate within its limit.

mod circle;
mod limits;
mod linear;
mod quintic;

use nalgebra::Vector5;

use crate::error::{KinematicsError, PlanError};
use crate::hybrid::{evaluate_cycle, ik_full, project_rates, Twist};
use crate::machine::{workspace_contains_in_mode, JointState, MachineParams, Pose};
use crate::translation::WorkingMode;

pub use circle::{plan_circular, CircleSpec, CircularArc};
pub use limits::{limit_ratios, rescale_to_limits, LimitRatios, Limits};
pub use linear::{close_loop, plan_linear, plan_linear_tour, travel_time, LinearMotion};
pub use quintic::{quintic, QUINTIC_PEAK_SPEED};

pub(crate) use quintic::{unit_quintic, unit_quintic_integral};

use limits::{channel_ratios, ChannelRatios, CHANNELS};

/// Default control and sampling frequency (Hz).
pub const DEFAULT_SAMPLE_RATE: f64 = 1500.0;

/// Tolerance on post-rescale limit ratios.
pub const LIMIT_TOLERANCE: f64 = 1e-9;

/// Pose and its first two derivatives with respect to normalized time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub pose: Vector5<f64>,
    pub d1: Vector5<f64>,
    pub d2: Vector5<f64>,
}

/// A task-space move over normalized time `u` in `[0, 1]`.
pub trait Motion {
    /// Duration before any limit rescaling (s). Zero means a stationary
    /// point.
    fn provisional_duration(&self) -> f64;

    fn eval(&self, u: f64) -> PathPoint;
}

/// One control-rate sample of a planned trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub pose: Pose,
    pub velocity: Twist,
    pub acceleration: Vector5<f64>,
    pub q: JointState,
    pub q_dot: Vector5<f64>,
    pub q_ddot: Vector5<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Linear,
    Approach,
    Arc,
    Retract,
    Blended,
}

impl std::fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SegmentKind::Linear => "linear",
            SegmentKind::Approach => "approach",
            SegmentKind::Arc => "arc",
            SegmentKind::Retract => "retract",
            SegmentKind::Blended => "blended",
        };
        f.write_str(s)
    }
}

/// Timing summary of one planned segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentReport {
    pub kind: SegmentKind,
    pub start_time: f64,
    pub provisional_duration: f64,
    /// Final duration over provisional duration; at least 1.
    pub multiplier: f64,
    pub duration: f64,
    /// Worst sampled ratios after rescaling.
    pub ratios: LimitRatios,
}

/// Sampled trajectory made of consecutive segments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub segments: Vec<SegmentReport>,
}

impl Trajectory {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn first_pose(&self) -> Option<Pose> {
        self.samples.first().map(|s| s.pose)
    }

    pub fn last_pose(&self) -> Option<Pose> {
        self.samples.last().map(|s| s.pose)
    }

    /// Appends another trajectory, shifting its times to start at the end of
    /// this one. The first sample of `other` repeats the junction and is
    /// dropped.
    pub fn append(&mut self, other: Trajectory) {
        let offset = self.duration();
        let skip = usize::from(!self.samples.is_empty());
        self.samples
            .extend(other.samples.into_iter().skip(skip).map(|mut s| {
                s.t += offset;
                s
            }));
        self.segments
            .extend(other.segments.into_iter().map(|mut r| {
                r.start_time += offset;
                r
            }));
    }

    pub fn limit_ratios(&self, limits: &Limits) -> LimitRatios {
        limit_ratios(&self.samples, limits)
    }
}

/// Planner settings shared by every trajectory type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    /// Fraction of the machine's maximum speeds used for travel time.
    pub speed_ratio: f64,
    pub sample_rate: f64,
    /// Caps speeds at the machine's safety ratio.
    pub safety_cap: bool,
    pub working_mode: WorkingMode,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            speed_ratio: 1.0,
            sample_rate: DEFAULT_SAMPLE_RATE,
            safety_cap: false,
            working_mode: WorkingMode::default(),
        }
    }
}

impl PlanOptions {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.speed_ratio > 0.0 && self.speed_ratio <= 1.0) {
            return Err(PlanError::Invalid(format!(
                "speed ratio {} outside (0, 1]",
                self.speed_ratio
            )));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(PlanError::Invalid(format!(
                "sample rate {} must be positive",
                self.sample_rate
            )));
        }
        Ok(())
    }

    /// Speed ratio after applying the safety cap.
    pub fn effective_ratio(&self, params: &MachineParams) -> f64 {
        effective_ratio(self.speed_ratio, self.safety_cap, params)
    }

    pub fn limits(&self, params: &MachineParams) -> Limits {
        Limits::from_params(params, self.safety_cap)
    }
}

pub(crate) fn effective_ratio(ratio: f64, safety_cap: bool, params: &MachineParams) -> f64 {
    if safety_cap {
        ratio.min(params.safety_speed_ratio)
    } else {
        ratio
    }
}

enum Failure {
    Workspace(String),
    Kinematics(KinematicsError),
}

impl From<KinematicsError> for Failure {
    fn from(e: KinematicsError) -> Self {
        Failure::Kinematics(e)
    }
}

impl Failure {
    fn at(self, t: f64) -> PlanError {
        match self {
            Failure::Workspace(reason) => PlanError::WorkspaceExit { t, reason },
            Failure::Kinematics(source) => PlanError::Kinematics { t, source },
        }
    }
}

/// Samples motions and stretches them to respect limits.
pub(crate) struct Sampler<'a> {
    pub params: &'a MachineParams,
    pub limits: Limits,
    pub rate: f64,
    pub mode: WorkingMode,
}

const MIN_GRID: usize = 64;
const REFINE_FRACTION: f64 = 0.99;
const MAX_RESCALE_PASSES: usize = 3;

impl<'a> Sampler<'a> {
    pub fn new(params: &'a MachineParams, opts: &PlanOptions) -> Result<Self, PlanError> {
        opts.validate()?;
        Ok(Sampler {
            params,
            limits: opts.limits(params),
            rate: opts.sample_rate,
            mode: opts.working_mode,
        })
    }

    fn check(&self, pose: &Pose) -> Result<(), Failure> {
        match workspace_contains_in_mode(pose, self.params, self.mode).violation {
            Some(v) => Err(Failure::Workspace(v.to_string())),
            None => Ok(()),
        }
    }

    fn sample(&self, m: &dyn Motion, duration: f64, t: f64) -> Result<TrajectorySample, Failure> {
        let (p, velocity, acceleration) = if duration > 0.0 {
            let p = m.eval(t / duration);
            (p.pose, p.d1 / duration, p.d2 / (duration * duration))
        } else {
            (m.eval(0.0).pose, Vector5::zeros(), Vector5::zeros())
        };
        let pose = Pose::from_vector(&p);
        self.check(&pose)?;
        let velocity = Twist::from_vector(&velocity);
        let q = ik_full(&pose, self.params, self.mode)?;
        let (q_dot, q_ddot) = project_rates(&pose, &q, &velocity, &acceleration, self.params)?;
        Ok(TrajectorySample {
            t,
            pose,
            velocity,
            acceleration,
            q,
            q_dot,
            q_ddot,
        })
    }

    /// Limit ratios of the motion run in unit time.
    fn unit_ratios(&self, m: &dyn Motion, u: f64) -> Result<ChannelRatios, Failure> {
        let p = m.eval(u);
        let pose = Pose::from_vector(&p.pose);
        self.check(&pose)?;
        let k = evaluate_cycle(&pose, &Twist::from_vector(&p.d1), self.params, self.mode)?;
        let q_dot = k.jacobian.matrix() * p.d1;
        let q_ddot = k.jacobian.matrix() * p.d2 + k.jacobian_dot * p.d1;
        Ok(channel_ratios(&p.d1, &p.d2, &q_dot, &q_ddot, &self.limits))
    }

    /// Uniform time grid at the sampling rate, endpoint always included.
    fn times(&self, duration: f64) -> Vec<f64> {
        let step = 1.0 / self.rate;
        let mut out: Vec<f64> = (0..)
            .map(|k| k as f64 * step)
            .take_while(|&t| t < duration - 1e-12)
            .collect();
        out.push(duration);
        out
    }

    fn sample_all(
        &self,
        m: &dyn Motion,
        duration: f64,
        start: f64,
    ) -> Result<Vec<TrajectorySample>, PlanError> {
        self.times(duration)
            .into_iter()
            .map(|t| self.sample(m, duration, t).map_err(|f| f.at(start + t)))
            .collect()
    }

    /// Shortest duration, not below the provisional one, for which the
    /// continuous-time peaks respect every limit.
    fn required_duration(&self, m: &dyn Motion, t0: f64, start: f64) -> Result<f64, PlanError> {
        let n = ((t0 * self.rate).ceil() as usize).max(MIN_GRID);
        let grid: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let ratios = grid
            .iter()
            .map(|&u| self.unit_ratios(m, u).map_err(|f| f.at(start + u * t0)))
            .collect::<Result<Vec<_>, _>>()?;

        let eval = |u: f64, ch: usize, acc: bool| -> f64 {
            match self.unit_ratios(m, u) {
                Ok(r) if acc => r.acceleration[ch],
                Ok(r) => r.velocity[ch],
                Err(_) => f64::NEG_INFINITY,
            }
        };
        let mut peak = [0.0f64; 2];
        for (slot, acc) in [(0, false), (1, true)] {
            for ch in 0..CHANNELS {
                let values: Vec<f64> = ratios
                    .iter()
                    .map(|r| {
                        if acc {
                            r.acceleration[ch]
                        } else {
                            r.velocity[ch]
                        }
                    })
                    .collect();
                let top = values.iter().copied().fold(0.0, f64::max);
                if top <= 0.0 {
                    continue;
                }
                let mut best = top;
                for k in 0..values.len() {
                    let v = values[k];
                    let left = if k > 0 {
                        values[k - 1]
                    } else {
                        f64::NEG_INFINITY
                    };
                    let right = values.get(k + 1).copied().unwrap_or(f64::NEG_INFINITY);
                    if v < REFINE_FRACTION * top || v < left || v < right {
                        continue;
                    }
                    let a = grid[k.saturating_sub(1)];
                    let b = grid[(k + 1).min(n)];
                    best = best.max(golden_max(|u| eval(u, ch, acc), a, b));
                }
                peak[slot] = peak[slot].max(best);
            }
        }
        Ok(t0.max(peak[0]).max(peak[1].sqrt()))
    }

    /// Plans one motion starting at time zero.
    pub fn segment(&self, m: &dyn Motion, kind: SegmentKind) -> Result<Trajectory, PlanError> {
        let t0 = m.provisional_duration();
        if !(t0 > 0.0) {
            let s = self.sample(m, 0.0, 0.0).map_err(|f| f.at(0.0))?;
            return Ok(Trajectory {
                samples: vec![s],
                segments: vec![SegmentReport {
                    kind,
                    start_time: 0.0,
                    provisional_duration: 0.0,
                    multiplier: 1.0,
                    duration: 0.0,
                    ratios: LimitRatios::default(),
                }],
            });
        }
        let mut duration = self.required_duration(m, t0, 0.0)?;
        let mut samples = self.sample_all(m, duration, 0.0)?;
        let mut ratios = limit_ratios(&samples, &self.limits);
        for _ in 0..MAX_RESCALE_PASSES {
            if ratios.velocity <= 1.0 + LIMIT_TOLERANCE
                && ratios.acceleration <= 1.0 + LIMIT_TOLERANCE
            {
                break;
            }
            duration *= ratios.multiplier();
            samples = self.sample_all(m, duration, 0.0)?;
            ratios = limit_ratios(&samples, &self.limits);
        }
        Ok(Trajectory {
            samples,
            segments: vec![SegmentReport {
                kind,
                start_time: 0.0,
                provisional_duration: t0,
                multiplier: duration / t0,
                duration,
                ratios,
            }],
        })
    }

    /// Samples a motion at a fixed duration without rescaling.
    #[cfg(test)]
    pub fn fixed(
        &self,
        m: &dyn Motion,
        duration: f64,
        kind: SegmentKind,
    ) -> Result<Trajectory, PlanError> {
        let samples = self.sample_all(m, duration, 0.0)?;
        let ratios = limit_ratios(&samples, &self.limits);
        Ok(Trajectory {
            samples,
            segments: vec![SegmentReport {
                kind,
                start_time: 0.0,
                provisional_duration: duration,
                multiplier: 1.0,
                duration,
                ratios,
            }],
        })
    }
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = fc.max(fd);
    for _ in 0..60 {
        if (b - a) <= 1e-13 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            best = best.max(fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            best = best.max(fd);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_a_parabola_peak() {
        let m = golden_max(|x| 3.0 - (x - 0.3).powi(2), 0.0, 1.0);
        assert!((m - 3.0).abs() < 1e-14);
    }

    #[test]
    fn append_shifts_times_and_drops_the_junction() {
        let params = MachineParams::default();
        let s = |t| TrajectorySample {
            t,
            pose: Pose::home(&params),
            velocity: Twist::default(),
            acceleration: Vector5::zeros(),
            q: JointState::default(),
            q_dot: Vector5::zeros(),
            q_ddot: Vector5::zeros(),
        };
        let mut a = Trajectory {
            samples: vec![s(0.0), s(0.5)],
            segments: vec![],
        };
        a.append(Trajectory {
            samples: vec![s(0.0), s(0.25)],
            segments: vec![],
        });
        let times: Vec<f64> = a.samples.iter().map(|s| s.t).collect();
        assert_eq!(times, vec![0.0, 0.5, 0.75]);
    }

    #[test]
    fn options_validation() {
        let mut o = PlanOptions::default();
        assert!(o.validate().is_ok());
        o.speed_ratio = 0.0;
        assert!(o.validate().is_err());
        o.speed_ratio = 1.5;
        assert!(o.validate().is_err());
        o.speed_ratio = 0.5;
        o.sample_rate = -1.0;
        assert!(o.validate().is_err());
    }

    #[test]
    fn safety_cap_lowers_the_ratio() {
        let p = MachineParams::default();
        let o = PlanOptions {
            safety_cap: true,
            ..PlanOptions::default()
        };
        assert_eq!(o.effective_ratio(&p), 0.1);
        assert_eq!(o.limits(&p).linear_speed, p.k_vt * 0.1);
    }
}
