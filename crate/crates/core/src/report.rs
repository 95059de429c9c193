//! Plain-text persistence: snapshot CSV, diagnostics CSV and series CSV.
//! All floats are written with 17 significant digits so that re-reads are
//! bit-exact and re-runs byte-identical.

use crate::clusters::ClusterState;
use crate::diagnostics::DiagnosticsReport;
use crate::integrator::{PairState, ParticleSystemState, TrajectoryRecord};
use std::io::{self, Write};

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One CSV row of a snapshot.
#[derive(Debug, Clone, Copy)]
pub struct SnapshotRow {
    pub particle_index: usize,
    pub x: f64,
    pub y: f64,
    pub mass: Option<f64>,
}

/// States that can be flattened into per-particle CSV rows.
pub trait SnapshotRows {
    const HAS_MASS: bool;
    fn rows(&self, out: &mut Vec<SnapshotRow>);
}

impl SnapshotRows for ParticleSystemState {
    const HAS_MASS: bool = false;
    fn rows(&self, out: &mut Vec<SnapshotRow>) {
        out.extend(self.positions.iter().enumerate().map(|(i, p)| SnapshotRow {
            particle_index: i,
            x: p.x,
            y: p.y,
            mass: None,
        }));
    }
}

impl SnapshotRows for PairState {
    const HAS_MASS: bool = false;
    fn rows(&self, out: &mut Vec<SnapshotRow>) {
        out.push(SnapshotRow {
            particle_index: 0,
            x: self.z.x,
            y: self.z.y,
            mass: None,
        });
    }
}

impl SnapshotRows for ClusterState {
    const HAS_MASS: bool = true;
    fn rows(&self, out: &mut Vec<SnapshotRow>) {
        out.extend(self.particles.iter().enumerate().map(|(i, p)| SnapshotRow {
            particle_index: i,
            x: p.position.x,
            y: p.position.y,
            mass: Some(p.units as f64 / self.n_initial as f64),
        }));
    }
}

/// Header of the snapshot CSV; the mass column appears only for
/// mass-carrying states.
pub fn snapshot_header<S: SnapshotRows>() -> &'static str {
    if S::HAS_MASS {
        "replica,time,particle_index,x,y,mass"
    } else {
        "replica,time,particle_index,x,y"
    }
}

/// Append the rows of one replica's record (header written by the caller).
pub fn write_snapshot_rows<S: SnapshotRows, W: Write>(
    w: &mut W,
    replica: u64,
    record: &TrajectoryRecord<S>,
) -> io::Result<()> {
    let mut rows = Vec::new();
    for (time, state) in record.times.iter().zip(&record.states) {
        rows.clear();
        state.rows(&mut rows);
        for row in &rows {
            match row.mass {
                Some(mass) => writeln!(
                    w,
                    "{replica},{},{},{},{},{}",
                    fmt_f64(*time),
                    row.particle_index,
                    fmt_f64(row.x),
                    fmt_f64(row.y),
                    fmt_f64(mass)
                )?,
                None => writeln!(
                    w,
                    "{replica},{},{},{},{}",
                    fmt_f64(*time),
                    row.particle_index,
                    fmt_f64(row.x),
                    fmt_f64(row.y)
                )?,
            }
        }
    }
    Ok(())
}

/// Scalar rows of a diagnostics report: bound columns sit next to the
/// estimate so that pass/fail is recomputable offline.
pub fn write_diagnostics_csv<W: Write>(w: &mut W, report: &DiagnosticsReport) -> io::Result<()> {
    writeln!(w, "name,estimate,half_width,confidence,n,bound")?;
    for s in &report.scalars {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.name,
            fmt_f64(s.estimate),
            fmt_f64(s.half_width),
            fmt_f64(s.confidence),
            s.n,
            s.bound.map(fmt_f64).unwrap_or_default()
        )?;
    }
    Ok(())
}

/// One named series as a two-column CSV.
pub fn write_series_csv<W: Write>(w: &mut W, points: &[(f64, f64)]) -> io::Result<()> {
    writeln!(w, "time,value")?;
    for &(t, v) in points {
        writeln!(w, "{},{}", fmt_f64(t), fmt_f64(v))?;
    }
    Ok(())
}
