//! CSV encoding of trajectories and simulation traces.
//!
//! Values are SI and written in Rust's shortest round-trip form, so reading a
//! file back yields bit-identical numbers.

use std::io::{Read, Write};

use hpkm_core::{JointState, Pose, SimTrace, TrajectorySample, Twist};
use nalgebra::Vector5;

pub const JOINTS: [&str; 5] = ["theta1", "theta2", "rho1", "rho2", "rho3"];

pub fn trajectory_columns() -> Vec<String> {
    let mut cols: Vec<String> = ["t", "alpha", "beta", "x", "y", "z"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for s in ["alpha", "beta", "x", "y", "z"] {
        cols.push(format!("{s}_dot"));
    }
    for s in ["alpha", "beta", "x", "y", "z"] {
        cols.push(format!("a_{s}"));
    }
    for suffix in ["", "_dot", "_ddot"] {
        cols.extend(JOINTS.iter().map(|j| format!("{j}{suffix}")));
    }
    cols
}

pub fn trace_columns() -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for suffix in [
        "desired",
        "actual",
        "dot_desired",
        "dot_estimated",
        "error",
        "u",
    ] {
        cols.extend(JOINTS.iter().map(|j| format!("{j}_{suffix}")));
    }
    cols.push("shutdown".into());
    cols.push("cycle_time".into());
    cols
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_trajectory<W: Write>(out: W, samples: &[TrajectorySample]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_columns())?;
    for s in samples {
        let mut row = vec![num(s.t)];
        row.extend(s.pose.to_vector().iter().map(|&v| num(v)));
        row.extend(s.velocity.to_vector().iter().map(|&v| num(v)));
        row.extend(s.acceleration.iter().map(|&v| num(v)));
        row.extend(s.q.to_vector().iter().map(|&v| num(v)));
        row.extend(s.q_dot.iter().map(|&v| num(v)));
        row.extend(s.q_ddot.iter().map(|&v| num(v)));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory written by [`write_trajectory`]. Columns are located by
/// name, so extra columns are ignored.
pub fn read_trajectory<R: Read>(input: R) -> Result<Vec<TrajectorySample>, String> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    let index: Vec<usize> = trajectory_columns()
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h.trim() == c)
                .ok_or_else(|| format!("missing column `{c}`"))
        })
        .collect::<Result<_, _>>()?;

    let mut samples = Vec::new();
    for (n, record) in r.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let values: Vec<f64> = index
            .iter()
            .map(|&i| {
                let field = record.get(i).unwrap_or("").trim();
                field
                    .parse::<f64>()
                    .map_err(|_| format!("row {}: `{field}` is not a number", n + 1))
            })
            .collect::<Result<_, _>>()?;
        let v5 = |k: usize| Vector5::from_column_slice(&values[k..k + 5]);
        samples.push(TrajectorySample {
            t: values[0],
            pose: Pose::from_vector(&v5(1)),
            velocity: Twist::from_vector(&v5(6)),
            acceleration: v5(11),
            q: JointState::from_vector(&v5(16)),
            q_dot: v5(21),
            q_ddot: v5(26),
        });
    }
    Ok(samples)
}

pub fn write_trace<W: Write>(out: W, trace: &SimTrace) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_columns())?;
    for r in &trace.rows {
        let mut row = vec![num(r.t)];
        for group in [
            r.q_desired,
            r.q_actual,
            r.q_dot_desired,
            r.q_dot_estimated,
            r.error,
            r.u,
        ] {
            row.extend(group.iter().map(|&v| num(v)));
        }
        row.push(u8::from(r.shutdown).to_string());
        row.push(num(r.cycle_time));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
