//! Command-line front-end: kinematic queries, trajectory planning, control
//! simulation and workspace checks. All quantities are SI unless a flag
//! carries a `_mm` or `_deg` suffix.

pub mod csvio;

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hpkm_core::fixtures::{circle_entry_exit, reference_circle, reference_pose};
use hpkm_core::{
    fk_full, ik_full, load_params, plan_circular, plan_gcode_program, plan_linear_tour, run_sim,
    workspace_contains, AssemblyMode, BlendedPath, CircleSpec, Disturbance, Feedforward,
    Integrator, JointState, MachineParams, PlanOptions, Pose, SimConfig, SimTrace, Trajectory,
    TrajectorySample, WorkingMode,
};
use nalgebra::Vector3;

use csvio::JOINTS;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Usage = 1,
    Failure = 2,
    Shutdown = 3,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            exit: Exit::Usage,
            message: message.into(),
        }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        CliError {
            exit: Exit::Failure,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::usage(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hpkm",
    version,
    about = "Five-axis hybrid parallel kinematic machine toolkit"
)]
pub struct Cli {
    /// Machine configuration file (`key = value` lines, `#` comments).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Joint coordinates for a tool pose.
    Ik(IkArgs),
    /// Tool pose for joint coordinates.
    Fk(FkArgs),
    /// Plan a trajectory and write it as CSV.
    Plan {
        #[command(subcommand)]
        kind: PlanKind,
    },
    /// Simulate the control loop along a planned trajectory.
    Sim(SimArgs),
    /// Sample a cube of wrist-center positions against the workspace.
    CheckWorkspace(WorkspaceArgs),
}

#[derive(Debug, Args)]
pub struct IkArgs {
    #[arg(long, allow_negative_numbers = true, conflicts_with = "alpha_deg")]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "beta_deg")]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha_deg: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta_deg: Option<f64>,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "x_mm")]
    pub x: Option<f64>,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "y_mm")]
    pub y: Option<f64>,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "z_mm")]
    pub z: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub x_mm: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub y_mm: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub z_mm: Option<f64>,
    /// Working mode, one sign per leg (e.g. `+++`, `+-+`).
    #[arg(long, default_value = "+++", allow_hyphen_values = true)]
    pub mode: WorkingMode,
    /// Print the solution of every working mode.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Args)]
pub struct FkArgs {
    #[arg(long, allow_negative_numbers = true, conflicts_with = "theta1_deg")]
    pub theta1: Option<f64>,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "theta2_deg")]
    pub theta2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta1_deg: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta2_deg: Option<f64>,
    /// Prismatic joint positions `rho1,rho2,rho3` (m).
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<Vec3Arg>,
    /// Prismatic joint positions in millimetres.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "rho")]
    pub rho_mm: Option<Vec3Arg>,
    /// Assembly mode: `-` (origin side of the actuator plane) or `+`.
    #[arg(long, default_value = "-", allow_hyphen_values = true)]
    pub mode: AssemblyMode,
    /// Print both assembly modes.
    #[arg(long)]
    pub all: bool,
}

/// Settings shared by every planner.
#[derive(Debug, Args)]
pub struct PlanCommon {
    /// Fraction of the maximum speeds used for travel time, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub speed_ratio: f64,
    /// Sampling rate (Hz).
    #[arg(long, default_value_t = 1500.0)]
    pub sample_rate: f64,
    /// Limit speeds to the machine's safety ratio.
    #[arg(long)]
    pub safety_cap: bool,
    /// Working mode used for inverse kinematics.
    #[arg(long, default_value = "+++", allow_hyphen_values = true)]
    pub mode: WorkingMode,
    /// Output CSV file.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

impl PlanCommon {
    fn options(&self) -> PlanOptions {
        PlanOptions {
            speed_ratio: self.speed_ratio,
            sample_rate: self.sample_rate,
            safety_cap: self.safety_cap,
            working_mode: self.mode,
        }
    }
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum PlanKind {
    /// Straight-line moves through two or more poses.
    Line(LineArgs),
    /// Approach, circular arc, retract.
    Circle(CircleArgs),
    /// G0/G1 program with blended corners.
    Gcode(GcodeArgs),
}

#[derive(Debug, Args)]
pub struct LineArgs {
    /// Reference poses by name (`P1` to `P4`).
    #[arg(long, num_args = 2.., value_name = "NAME", conflicts_with = "pose")]
    pub reference_poses: Vec<String>,
    /// Pose `alpha,beta,x,y,z` (rad, m); repeat for each waypoint.
    #[arg(long, allow_hyphen_values = true)]
    pub pose: Vec<PoseArg>,
    #[command(flatten)]
    pub common: PlanCommon,
}

#[derive(Debug, Args)]
pub struct CircleArgs {
    /// Start from the reference circle; other flags override its fields.
    #[arg(long)]
    pub reference_circle: bool,
    /// Circle center `x,y,z` (m).
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<Vec3Arg>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta_max: Option<f64>,
    /// Plane rotation about z (rad).
    #[arg(long, allow_negative_numbers = true)]
    pub alpha1: Option<f64>,
    /// Plane rotation about y (rad).
    #[arg(long, allow_negative_numbers = true)]
    pub beta1: Option<f64>,
    /// Tilt `alpha,beta` at the arc start (rad).
    #[arg(long, allow_hyphen_values = true)]
    pub start_angles: Option<PairArg>,
    /// Tilt `alpha,beta` at the arc end (rad).
    #[arg(long, allow_hyphen_values = true)]
    pub end_angles: Option<PairArg>,
    /// Speed ratio of the arc itself.
    #[arg(long)]
    pub arc_ratio: Option<f64>,
    /// Pose before the approach; defaults to the arc start.
    #[arg(long, allow_hyphen_values = true)]
    pub entry: Option<PoseArg>,
    /// Pose after the retract; defaults to the arc end.
    #[arg(long, allow_hyphen_values = true)]
    pub exit: Option<PoseArg>,
    #[command(flatten)]
    pub common: PlanCommon,
}

#[derive(Debug, Args)]
pub struct GcodeArgs {
    /// Program file.
    pub file: PathBuf,
    /// Pose before the first move.
    #[arg(long, default_value = "0,0,0,0,0", allow_hyphen_values = true)]
    pub start: PoseArg,
    /// Largest corner blending radius (m).
    #[arg(long, default_value_t = 0.01)]
    pub corner_cap: f64,
    #[command(flatten)]
    pub common: PlanCommon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegratorArg {
    Euler,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeedforwardArg {
    Mean,
    Sample,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Planned trajectory CSV.
    #[arg(long, value_name = "FILE", conflicts_with = "reference_poses")]
    pub plan: Option<PathBuf>,
    /// Plan a tour through reference poses instead of reading a file.
    #[arg(long, num_args = 2.., value_name = "NAME")]
    pub reference_poses: Vec<String>,
    /// Constant force `AXIS=FORCE[@START]` (N or N m, s); repeatable.
    /// Axes are `theta1 theta2 rho1 rho2 rho3` or indices 0 to 4.
    #[arg(long, allow_hyphen_values = true)]
    pub disturbance: Vec<DisturbanceArg>,
    /// Initial joint offset `AXIS=VALUE` (m or rad); repeatable.
    #[arg(long, allow_hyphen_values = true)]
    pub offset: Vec<OffsetArg>,
    /// Initial joint offset `AXIS=VALUE` in millimetres or degrees.
    #[arg(long, allow_hyphen_values = true)]
    pub offset_mm: Vec<OffsetArg>,
    /// Simulated time (s); the plan's duration by default.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 1500.0)]
    pub control_rate: f64,
    #[arg(long, default_value_t = 9000.0)]
    pub sensing_rate: f64,
    /// Velocity filter cutoff (Hz).
    #[arg(long, default_value_t = 200.0)]
    pub cutoff: f64,
    #[arg(long, value_enum, default_value_t = IntegratorArg::Euler)]
    pub integrator: IntegratorArg,
    #[arg(long, value_enum, default_value_t = FeedforwardArg::Mean)]
    pub feedforward: FeedforwardArg,
    /// Output trace CSV.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WorkspaceArgs {
    /// Cube edge (m).
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub cube: f64,
    /// Cube center `x,y,z` (m).
    #[arg(long, default_value = "0.25,0.25,0.25", allow_hyphen_values = true)]
    pub center: Vec3Arg,
    /// Grid points per edge.
    #[arg(long, default_value_t = 11)]
    pub samples: usize,
    /// Tool tilt held at every grid point (rad).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta: f64,
    /// Failures listed in the report.
    #[arg(long, default_value_t = 10)]
    pub max_failures: usize,
}

fn parse_list<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0; N];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
    }
    Ok(out)
}

/// `alpha,beta,x,y,z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseArg(pub Pose);

impl FromStr for PoseArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let [a, b, x, y, z] = parse_list::<5>(s)?;
        Ok(PoseArg(Pose::new(a, b, x, y, z)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3Arg(pub Vector3<f64>);

impl FromStr for Vec3Arg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Vec3Arg(Vector3::from(parse_list::<3>(s)?)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairArg(pub (f64, f64));

impl FromStr for PairArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let [a, b] = parse_list::<2>(s)?;
        Ok(PairArg((a, b)))
    }
}

fn parse_axis(s: &str) -> Result<usize, String> {
    let s = s.trim();
    JOINTS
        .iter()
        .position(|j| *j == s)
        .or_else(|| s.parse::<usize>().ok().filter(|&i| i < 5))
        .ok_or_else(|| format!("unknown axis `{s}` (use {} or 0 to 4)", JOINTS.join(", ")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceArg(pub Disturbance);

impl FromStr for DisturbanceArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (axis, rest) = s
            .split_once('=')
            .ok_or_else(|| format!("expected AXIS=FORCE, got `{s}`"))?;
        let (force, start) = match rest.split_once('@') {
            Some((f, t)) => (
                f,
                t.trim()
                    .parse()
                    .map_err(|_| format!("`{t}` is not a time"))?,
            ),
            None => (rest, 0.0),
        };
        Ok(DisturbanceArg(Disturbance {
            axis: parse_axis(axis)?,
            force: force
                .trim()
                .parse()
                .map_err(|_| format!("`{force}` is not a force"))?,
            start,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetArg {
    pub axis: usize,
    pub value: f64,
}

impl FromStr for OffsetArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (axis, value) = s
            .split_once('=')
            .ok_or_else(|| format!("expected AXIS=VALUE, got `{s}`"))?;
        Ok(OffsetArg {
            axis: parse_axis(axis)?,
            value: value
                .trim()
                .parse()
                .map_err(|_| format!("`{value}` is not a number"))?,
        })
    }
}

/// Loads the machine configuration, or the defaults without `--config`.
pub fn load_config(path: Option<&Path>) -> Result<MachineParams, CliError> {
    match path {
        None => Ok(MachineParams::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            load_params(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))
        }
    }
}

fn pick(rad: Option<f64>, deg: Option<f64>) -> f64 {
    rad.or(deg.map(f64::to_radians)).unwrap_or(0.0)
}

fn pick_len(m: Option<f64>, mm: Option<f64>) -> f64 {
    m.or(mm.map(|v| v / 1000.0)).unwrap_or(0.0)
}

fn named_poses(names: &[String]) -> Result<Vec<Pose>, CliError> {
    names
        .iter()
        .map(|n| {
            reference_pose(n)
                .ok_or_else(|| CliError::usage(format!("unknown pose `{n}` (P1 to P4)")))
        })
        .collect()
}

fn joints_line(q: &JointState) -> String {
    format!(
        "theta1={:?} theta2={:?} rho1={:?} rho2={:?} rho3={:?}",
        q.theta1, q.theta2, q.rho1, q.rho2, q.rho3
    )
}

fn pose_line(p: &Pose) -> String {
    format!(
        "alpha={:?} beta={:?} x={:?} y={:?} z={:?}",
        p.alpha, p.beta, p.x, p.y, p.z
    )
}

fn cmd_ik(a: &IkArgs, params: &MachineParams, out: &mut dyn Write) -> Result<(), CliError> {
    let pose = Pose::new(
        pick(a.alpha, a.alpha_deg),
        pick(a.beta, a.beta_deg),
        pick_len(a.x, a.x_mm),
        pick_len(a.y, a.y_mm),
        pick_len(a.z, a.z_mm),
    );
    if a.all {
        let mut any = false;
        for mode in WorkingMode::ALL {
            match ik_full(&pose, params, mode) {
                Ok(q) => {
                    any = true;
                    writeln!(out, "mode {mode}: {}", joints_line(&q))?;
                }
                Err(e) => writeln!(out, "mode {mode}: {e}")?,
            }
        }
        return if any {
            Ok(())
        } else {
            Err(CliError::failure("no working mode reaches this pose"))
        };
    }
    let q = ik_full(&pose, params, a.mode).map_err(|e| CliError::failure(e.to_string()))?;
    writeln!(out, "mode {}: {}", a.mode, joints_line(&q))?;
    Ok(())
}

fn cmd_fk(a: &FkArgs, params: &MachineParams, out: &mut dyn Write) -> Result<(), CliError> {
    let rho = match (a.rho, a.rho_mm) {
        (Some(r), _) => r.0,
        (None, Some(r)) => r.0 / 1000.0,
        (None, None) => return Err(CliError::usage("fk needs --rho or --rho-mm")),
    };
    let q = JointState::new(
        pick(a.theta1, a.theta1_deg),
        pick(a.theta2, a.theta2_deg),
        rho.x,
        rho.y,
        rho.z,
    );
    let modes: Vec<AssemblyMode> = if a.all {
        AssemblyMode::ALL.to_vec()
    } else {
        vec![a.mode]
    };
    let mut last_err = None;
    for mode in modes {
        match fk_full(&q, params, mode) {
            Ok(p) => writeln!(out, "mode {mode}: {}", pose_line(&p))?,
            Err(e) => {
                if a.all {
                    writeln!(out, "mode {mode}: {e}")?;
                }
                last_err = Some(e);
            }
        }
    }
    match last_err {
        Some(e) if !a.all => Err(CliError::failure(e.to_string())),
        _ => Ok(()),
    }
}

fn write_plan_csv(path: Option<&Path>, samples: &[TrajectorySample]) -> Result<(), CliError> {
    if let Some(p) = path {
        csvio::write_trajectory(BufWriter::new(File::create(p)?), samples)?;
    }
    Ok(())
}

/// Segment timing and peak rates of a plan.
pub fn plan_summary(plan: &Trajectory, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "segments: {}", plan.segments.len())?;
    for (k, s) in plan.segments.iter().enumerate() {
        writeln!(
            out,
            "  {k} {:<9} start {:.6} s  t_f {:.6} s -> {:.6} s  multiplier {:.6}  ratios v {:.6} a {:.6}",
            s.kind.to_string(),
            s.start_time,
            s.provisional_duration,
            s.duration,
            s.multiplier,
            s.ratios.velocity,
            s.ratios.acceleration,
        )?;
    }
    writeln!(
        out,
        "duration: {:.6} s, {} samples",
        plan.duration(),
        plan.samples.len()
    )?;
    let peak =
        |f: &dyn Fn(&TrajectorySample) -> f64| plan.samples.iter().map(f).fold(0.0, f64::max);
    writeln!(
        out,
        "peak linear speed {:.6} m/s, angular speed {:.6} rad/s",
        peak(&|s| s.velocity.linear().norm()),
        peak(&|s| s.velocity.angular().norm()),
    )?;
    for (i, name) in JOINTS.iter().enumerate() {
        writeln!(
            out,
            "  {name:<6} peak |q_dot| {:.6}  peak |q_ddot| {:.6}",
            peak(&|s| s.q_dot[i].abs()),
            peak(&|s| s.q_ddot[i].abs()),
        )?;
    }
    Ok(())
}

fn plan_error(e: impl fmt::Display) -> CliError {
    CliError::failure(e.to_string())
}

fn plan_line(a: &LineArgs, params: &MachineParams) -> Result<Trajectory, CliError> {
    let poses = if a.reference_poses.is_empty() {
        a.pose.iter().map(|p| p.0).collect()
    } else {
        named_poses(&a.reference_poses)?
    };
    if poses.len() < 2 {
        return Err(CliError::usage(
            "plan line needs two or more poses (--reference-poses or --pose)",
        ));
    }
    plan_linear_tour(&poses, params, &a.common.options()).map_err(plan_error)
}

fn circle_spec(a: &CircleArgs) -> Result<(CircleSpec, Option<(Pose, Pose)>), CliError> {
    let (base, ends) = if a.reference_circle {
        (Some(reference_circle()), Some(circle_entry_exit()))
    } else {
        (None, None)
    };
    let center = a.center.map(|c| c.0).or(base.map(|b| b.center));
    let radius = a.radius.or(base.map(|b| b.radius));
    let (Some(center), Some(radius)) = (center, radius) else {
        return Err(CliError::usage(
            "plan circle needs --reference-circle or --center and --radius",
        ));
    };
    let spec = CircleSpec {
        center,
        radius,
        eta_min: a.eta_min.or(base.map(|b| b.eta_min)).unwrap_or(0.0),
        eta_max: a
            .eta_max
            .or(base.map(|b| b.eta_max))
            .unwrap_or(std::f64::consts::TAU),
        alpha1: a.alpha1.or(base.map(|b| b.alpha1)).unwrap_or(0.0),
        beta1: a.beta1.or(base.map(|b| b.beta1)).unwrap_or(0.0),
        start_angles: a
            .start_angles
            .map(|p| p.0)
            .or(base.map(|b| b.start_angles))
            .unwrap_or((0.0, 0.0)),
        end_angles: a
            .end_angles
            .map(|p| p.0)
            .or(base.map(|b| b.end_angles))
            .unwrap_or((0.0, 0.0)),
        speed_ratio: a.arc_ratio.or(base.map(|b| b.speed_ratio)).unwrap_or(1.0),
    };
    Ok((spec, ends))
}

fn plan_circle(a: &CircleArgs, params: &MachineParams) -> Result<Trajectory, CliError> {
    let (spec, ends) = circle_spec(a)?;
    spec.validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let entry = a
        .entry
        .map(|p| p.0)
        .or(ends.map(|e| e.0))
        .unwrap_or_else(|| spec.start_pose());
    let exit = a
        .exit
        .map(|p| p.0)
        .or(ends.map(|e| e.1))
        .unwrap_or_else(|| spec.end_pose());
    plan_circular(&spec, &entry, &exit, params, &a.common.options()).map_err(plan_error)
}

/// One line per corner of a blended program.
pub fn corner_report(path: &BlendedPath, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "corners: {}", path.corners.len())?;
    for c in &path.corners {
        writeln!(
            out,
            "  after move {} {:?}: turn {:.6} rad  radius {:.6} m  tangent distance {:.6} m  speed {:.6} m/s",
            c.segment, c.kind, c.turn_angle, c.radius, c.tangent_distance, c.speed
        )?;
    }
    let (gap, angle) = path.junction_errors();
    writeln!(out, "junction gap {gap:e} m, tangent angle {angle:e} rad")
}

fn plan_program(
    a: &GcodeArgs,
    params: &MachineParams,
    out: &mut dyn Write,
) -> Result<Trajectory, CliError> {
    let text = std::fs::read_to_string(&a.file)
        .map_err(|e| CliError::usage(format!("{}: {e}", a.file.display())))?;
    let (path, plan) =
        plan_gcode_program(&text, &a.start.0, params, a.corner_cap, &a.common.options()).map_err(
            |e| match e {
                hpkm_core::GcodeError::Plan(p) => plan_error(p),
                other => CliError::usage(format!("{}: {other}", a.file.display())),
            },
        )?;
    corner_report(&path, out)?;
    Ok(plan)
}

fn cmd_plan(kind: &PlanKind, params: &MachineParams, out: &mut dyn Write) -> Result<(), CliError> {
    let (plan, common) = match kind {
        PlanKind::Line(a) => (plan_line(a, params)?, &a.common),
        PlanKind::Circle(a) => (plan_circle(a, params)?, &a.common),
        PlanKind::Gcode(a) => (plan_program(a, params, out)?, &a.common),
    };
    plan_summary(&plan, out)?;
    write_plan_csv(common.out.as_deref(), &plan.samples)?;
    if let Some(p) = &common.out {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}

/// Builds the simulation settings from the command-line flags.
pub fn sim_config(a: &SimArgs) -> SimConfig {
    let mut initial_offset = [0.0; 5];
    for o in &a.offset {
        initial_offset[o.axis] += o.value;
    }
    for o in &a.offset_mm {
        initial_offset[o.axis] += if o.axis < 2 {
            o.value.to_radians()
        } else {
            o.value / 1000.0
        };
    }
    SimConfig {
        control_rate: a.control_rate,
        sensing_rate: a.sensing_rate,
        filter_cutoff: a.cutoff,
        duration: a.duration,
        disturbances: a.disturbance.iter().map(|d| d.0).collect(),
        initial_offset,
        integrator: match a.integrator {
            IntegratorArg::Euler => Integrator::SemiImplicitEuler,
            IntegratorArg::Exact => Integrator::ExactHold,
        },
        feedforward: match a.feedforward {
            FeedforwardArg::Mean => Feedforward::HoldMean,
            FeedforwardArg::Sample => Feedforward::Sample,
        },
    }
}

/// Error, effort, shutdown and timing summary of a trace.
pub fn sim_summary(trace: &SimTrace, out: &mut dyn Write) -> std::io::Result<()> {
    let e = trace.max_abs_error();
    let u = trace.max_abs_u();
    writeln!(out, "cycles: {}", trace.rows.len())?;
    for (i, name) in JOINTS.iter().enumerate() {
        writeln!(
            out,
            "  {name:<6} max |error| {:e}  max |u| {:.6}",
            e[i], u[i]
        )?;
    }
    writeln!(
        out,
        "max error: {:e}",
        e.iter().copied().fold(0.0, f64::max)
    )?;
    match trace.shutdown {
        Some(s) => writeln!(
            out,
            "shutdown: t = {:.6} s, {} error {:e} m",
            s.t, JOINTS[s.axis], s.error
        )?,
        None => writeln!(out, "shutdown: none")?,
    }
    let mut times: Vec<f64> = trace.rows.iter().map(|r| r.cycle_time).collect();
    times.sort_by(f64::total_cmp);
    if let (Some(&max), false) = (times.last(), times.is_empty()) {
        let median = times[times.len() / 2];
        writeln!(
            out,
            "cycle compute time: median {:.3} us, max {:.3} us",
            median * 1e6,
            max * 1e6
        )?;
    }
    Ok(())
}

fn cmd_sim(a: &SimArgs, params: &MachineParams, out: &mut dyn Write) -> Result<(), CliError> {
    let samples = match (&a.plan, a.reference_poses.is_empty()) {
        (Some(p), _) => {
            let file =
                File::open(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            csvio::read_trajectory(BufReader::new(file))
                .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
        }
        (None, false) => {
            let poses = named_poses(&a.reference_poses)?;
            plan_linear_tour(&poses, params, &PlanOptions::default())
                .map_err(plan_error)?
                .samples
        }
        (None, true) => {
            return Err(CliError::usage(
                "sim needs --plan FILE or --reference-poses NAMES",
            ))
        }
    };
    let trace =
        run_sim(&samples, params, &sim_config(a)).map_err(|e| CliError::usage(e.to_string()))?;
    sim_summary(&trace, out)?;
    if let Some(p) = &a.out {
        csvio::write_trace(BufWriter::new(File::create(p)?), &trace)?;
        writeln!(out, "wrote {}", p.display())?;
    }
    match trace.shutdown {
        Some(s) => Err(CliError {
            exit: Exit::Shutdown,
            message: format!(
                "machine shut down at t = {:.6} s ({} error {:e} m)",
                s.t, JOINTS[s.axis], s.error
            ),
        }),
        None => Ok(()),
    }
}

/// Grid check of wrist-center positions: `(passed, total, failures)`.
pub fn check_cube(
    params: &MachineParams,
    edge: f64,
    center: Vector3<f64>,
    n: usize,
    tilt: (f64, f64),
) -> (usize, usize, Vec<(Vector3<f64>, String)>) {
    let mut passed = 0;
    let mut failures = Vec::new();
    let step = if n > 1 { edge / (n - 1) as f64 } else { 0.0 };
    let corner = center - Vector3::repeat(if n > 1 { 0.5 * edge } else { 0.0 });
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let c = corner + Vector3::new(i as f64, j as f64, k as f64) * step;
                let pose = Pose::from_wrist_center(tilt.0, tilt.1, c, params.tool_length);
                match workspace_contains(&pose, params).violation {
                    None => passed += 1,
                    Some(v) => failures.push((c, v.to_string())),
                }
            }
        }
    }
    (passed, n * n * n, failures)
}

fn cmd_check_workspace(
    a: &WorkspaceArgs,
    params: &MachineParams,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if !(a.cube > 0.0 && a.cube.is_finite()) {
        return Err(CliError::usage("cube edge must be positive"));
    }
    if a.samples == 0 {
        return Err(CliError::usage("samples per edge must be positive"));
    }
    let (passed, total, failures) =
        check_cube(params, a.cube, a.center.0, a.samples, (a.alpha, a.beta));
    writeln!(
        out,
        "passed {passed}/{total} ({:.3}%)",
        100.0 * passed as f64 / total as f64
    )?;
    for (c, why) in failures.iter().take(a.max_failures) {
        writeln!(out, "  fail at ({:?}, {:?}, {:?}): {why}", c.x, c.y, c.z)?;
    }
    if failures.len() > a.max_failures {
        writeln!(out, "  ... {} more", failures.len() - a.max_failures)?;
    }
    Ok(())
}

/// Runs a parsed command, writing its report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let params = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Ik(a) => cmd_ik(a, &params, out),
        Command::Fk(a) => cmd_fk(a, &params, out),
        Command::Plan { kind } => cmd_plan(kind, &params, out),
        Command::Sim(a) => cmd_sim(a, &params, out),
        Command::CheckWorkspace(a) => cmd_check_workspace(a, &params, out),
    }
}
