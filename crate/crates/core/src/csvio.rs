//! Trajectory and benchmark CSV output.
//!
//! Values are printed with Rust's shortest round-trip float formatting, so
//! re-reading a file reproduces every f64 bit for bit. Event markers appear
//! as `#`-prefixed comment lines between the bracketing rows.

use std::io::{self, Write};
use std::path::Path;

use crate::layout::VariableLayout;
use crate::trajectory::Trajectory;
use crate::workprec::WorkPrecisionRecord;

/// Write `t,<variable names...>` rows; event markers become comment lines
/// placed before the row at the event time (that row already carries the
/// post-event algebraic values).
pub fn write_trajectory_csv(
    traj: &Trajectory,
    layout: &VariableLayout,
    out: &mut impl Write,
) -> io::Result<()> {
    assert!(!traj.is_empty(), "refusing to write an empty trajectory");
    assert_eq!(traj.width(), layout.total());
    write!(out, "t")?;
    for name in layout.names() {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;

    let events = traj.events();
    let mut ev = 0usize;
    for (t, row) in traj.iter_rows() {
        while ev < events.len() && events[ev].0 <= t {
            writeln!(out, "# event t={}: {}", events[ev].0, events[ev].1)?;
            ev += 1;
        }
        write!(out, "{t}")?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    for (t, label) in &events[ev..] {
        writeln!(out, "# event t={t}: {label}")?;
    }
    Ok(())
}

pub fn write_trajectory_csv_file(
    traj: &Trajectory,
    layout: &VariableLayout,
    path: impl AsRef<Path>,
) -> io::Result<()> {
    let mut file = io::BufWriter::new(std::fs::File::create(path)?);
    write_trajectory_csv(traj, layout, &mut file)
}

/// Parse a trajectory CSV back into (times, rows); comments are skipped.
/// Mainly a test aid for the round-trip guarantee.
pub fn read_trajectory_csv(text: &str) -> Result<(Vec<f64>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let _header = lines.next().ok_or("empty file")?;
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let t: f64 = fields
            .next()
            .ok_or_else(|| format!("row {i}: missing time"))?
            .parse()
            .map_err(|e| format!("row {i}: {e}"))?;
        let row: Result<Vec<f64>, _> = fields.map(|f| f.parse::<f64>()).collect();
        times.push(t);
        rows.push(row.map_err(|e| format!("row {i}: {e}"))?);
    }
    Ok((times, rows))
}

/// Benchmark CSV: one row per (solver, control) pair.
pub fn write_bench_csv(records: &[WorkPrecisionRecord], out: &mut impl Write) -> io::Result<()> {
    writeln!(
        out,
        "solver,control,error,mean_time_s,steps_accepted,steps_rejected,newton_iters,error_l2"
    )?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.solver,
            r.control,
            r.error,
            r.mean_time_s,
            r.steps_accepted,
            r.steps_rejected,
            r.newton_iters,
            r.error_l2
        )?;
    }
    Ok(())
}

pub fn write_bench_csv_file(
    records: &[WorkPrecisionRecord],
    path: impl AsRef<Path>,
) -> io::Result<()> {
    let mut file = io::BufWriter::new(std::fs::File::create(path)?);
    write_bench_csv(records, &mut file)
}
