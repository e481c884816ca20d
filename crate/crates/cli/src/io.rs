//! File formats. CSV is canonical (mandatory headers, 17 significant
//! digits); VTK legacy files are for display only.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use acopt_core::objective::OptimalityReport;
use acopt_core::{ControlPair, Discretization, Grid, IterateRecord, Trajectory};
use serde_json::json;

use crate::verify::Check;

/// 17 significant digits, enough to reproduce every `f64` exactly.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> io::Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn level_headers(prefix: &str, range: std::ops::Range<usize>) -> impl Iterator<Item = String> + '_ {
    range.map(move |k| format!("{prefix}{k}"))
}

/// Bulk field: one row per node, one column per time level.
pub fn write_bulk_trajectory(path: &Path, grid: &Grid, traj: &Trajectory) -> io::Result<()> {
    let mut w = create(path)?;
    let header: Vec<String> = ["node", "x", "y"].map(String::from).into_iter().chain(level_headers("t_", 0..traj.levels())).collect();
    w.write_record(&header)?;
    for (i, &[x, y]) in grid.coords().iter().enumerate() {
        let mut row = vec![i.to_string(), num(x), num(y)];
        row.extend((0..traj.levels()).map(|k| num(traj.level(k)[i])));
        w.write_record(&row)?;
    }
    w.flush()
}

/// Boundary trace: one row per boundary node in cycle order.
pub fn write_trace_trajectory(path: &Path, grid: &Grid, traj: &Trajectory) -> io::Result<()> {
    let mut w = create(path)?;
    let header: Vec<String> =
        ["index", "node", "x", "y"].map(String::from).into_iter().chain(level_headers("t_", 0..traj.levels())).collect();
    w.write_record(&header)?;
    for (j, &g) in grid.boundary_cycle().iter().enumerate() {
        let [x, y] = grid.coords()[g];
        let mut row = vec![j.to_string(), g.to_string(), num(x), num(y)];
        row.extend((0..traj.levels()).map(|k| num(traj.level(k)[g])));
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn write_energy(path: &Path, disc: &Discretization, energy: &[f64]) -> io::Result<()> {
    let mut w = create(path)?;
    w.write_record(["level", "time", "energy"])?;
    for (k, e) in energy.iter().enumerate() {
        w.write_record([k.to_string(), num(disc.time().time(k)), num(*e)])?;
    }
    w.flush()
}

/// One legacy structured-points file per time level, named
/// `{prefix}_{level:04}.vtk`.
pub fn write_vtk_snapshots(dir: &Path, prefix: &str, grid: &Grid, traj: &Trajectory) -> io::Result<()> {
    let side = grid.cells() + 1;
    for k in 0..traj.levels() {
        let mut f = BufWriter::new(File::create(dir.join(format!("{prefix}_{k:04}.vtk")))?);
        writeln!(f, "# vtk DataFile Version 3.0")?;
        writeln!(f, "{prefix} level {k}")?;
        writeln!(f, "ASCII")?;
        writeln!(f, "DATASET STRUCTURED_POINTS")?;
        writeln!(f, "DIMENSIONS {side} {side} 1")?;
        writeln!(f, "ORIGIN 0 0 0")?;
        writeln!(f, "SPACING {} {} 1", grid.h(), grid.h())?;
        writeln!(f, "POINT_DATA {}", grid.num_nodes())?;
        writeln!(f, "SCALARS {prefix} double 1")?;
        writeln!(f, "LOOKUP_TABLE default")?;
        for v in traj.level(k) {
            writeln!(f, "{}", num(*v))?;
        }
        f.flush()?;
    }
    Ok(())
}

/// Streams iterate records, flushing after each row.
pub struct HistoryWriter(csv::Writer<BufWriter<File>>);

impl HistoryWriter {
    pub fn create(path: &Path) -> io::Result<Self> {
        let mut w = create(path)?;
        w.write_record(["iter", "cost", "stationarity", "step"])?;
        w.flush()?;
        Ok(Self(w))
    }

    pub fn push(&mut self, r: &IterateRecord) -> io::Result<()> {
        self.0.write_record([r.iter.to_string(), num(r.cost), num(r.stationarity), num(r.step)])?;
        self.0.flush()
    }
}

/// Control pair as one table: rows `u` (bulk nodes) then `u_gamma`
/// (boundary cycle), one column per step, labelled by the time level it
/// acts on.
pub fn write_control(path: &Path, disc: &Discretization, u: &ControlPair) -> io::Result<()> {
    let grid = disc.grid();
    let steps = u.steps();
    let mut w = create(path)?;
    let header: Vec<String> =
        ["field", "index", "node", "x", "y"].map(String::from).into_iter().chain(level_headers("t_", 1..steps + 1)).collect();
    w.write_record(&header)?;
    for (i, &[x, y]) in grid.coords().iter().enumerate() {
        let mut row = vec!["u".to_string(), i.to_string(), i.to_string(), num(x), num(y)];
        row.extend((0..steps).map(|s| num(u.bulk_at(s)[i])));
        w.write_record(&row)?;
    }
    for (j, &g) in grid.boundary_cycle().iter().enumerate() {
        let [x, y] = grid.coords()[g];
        let mut row = vec!["u_gamma".to_string(), j.to_string(), g.to_string(), num(x), num(y)];
        row.extend((0..steps).map(|s| num(u.surface_at(s)[j])));
        w.write_record(&row)?;
    }
    w.flush()
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
}

fn parse_cell(record: &csv::StringRecord, col: usize, line: usize) -> Result<f64, ReadError> {
    let raw = record.get(col).ok_or_else(|| ReadError::Format(format!("row {line}: missing column {col}")))?;
    raw.trim().parse().map_err(|_| ReadError::Format(format!("row {line}: `{raw}` is not a number")))
}

/// Reads a table written by [`write_control`].
pub fn read_control(path: &Path, disc: &Discretization) -> Result<ControlPair, ReadError> {
    let grid = disc.grid();
    let steps = disc.time().steps();
    let mut reader = csv::Reader::from_path(path)?;
    let width = reader.headers()?.len();
    if width != 5 + steps {
        return Err(ReadError::Format(format!("expected {} columns for {steps} steps, found {width}", 5 + steps)));
    }
    let mut u = ControlPair::zeros(disc);
    let (mut bulk_rows, mut surf_rows) = (0, 0);
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let index: usize = record[1].trim().parse().map_err(|_| ReadError::Format(format!("row {line}: bad index")))?;
        let (limit, counter) = match &record[0] {
            "u" => (grid.num_nodes(), &mut bulk_rows),
            "u_gamma" => (grid.num_boundary(), &mut surf_rows),
            other => return Err(ReadError::Format(format!("row {line}: unknown field `{other}`"))),
        };
        if index >= limit {
            return Err(ReadError::Format(format!("row {line}: index {index} out of range")));
        }
        *counter += 1;
        for s in 0..steps {
            let v = parse_cell(&record, 5 + s, line)?;
            if &record[0] == "u" {
                u.bulk_at_mut(s)[index] = v;
            } else {
                u.surface_at_mut(s)[index] = v;
            }
        }
    }
    if bulk_rows != grid.num_nodes() || surf_rows != grid.num_boundary() {
        return Err(ReadError::Format(format!(
            "expected {} u rows and {} u_gamma rows, found {bulk_rows} and {surf_rows}",
            grid.num_nodes(),
            grid.num_boundary()
        )));
    }
    Ok(u)
}

/// Reads a bulk target table laid out like [`write_bulk_trajectory`], with
/// either `m + 1` level columns (level 0 ignored) or `m` columns for levels
/// `1..=m`. Returns the per-step bulk targets; the last is the terminal
/// target.
pub fn read_bulk_target(path: &Path, disc: &Discretization) -> Result<Vec<Vec<f64>>, ReadError> {
    let nodes = disc.grid().num_nodes();
    let steps = disc.time().steps();
    let mut reader = csv::Reader::from_path(path)?;
    let width = reader.headers()?.len();
    let skip = match width.checked_sub(3) {
        Some(c) if c == steps + 1 => 4,
        Some(c) if c == steps => 3,
        _ => return Err(ReadError::Format(format!("expected {} or {} level columns, found {}", steps, steps + 1, width.saturating_sub(3)))),
    };
    let mut levels = vec![vec![f64::NAN; nodes]; steps];
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let node: usize = record[0].trim().parse().map_err(|_| ReadError::Format(format!("row {line}: bad node id")))?;
        if node >= nodes {
            return Err(ReadError::Format(format!("row {line}: node {node} out of range")));
        }
        for (s, level) in levels.iter_mut().enumerate() {
            level[node] = parse_cell(&record, skip + s, line)?;
        }
        rows += 1;
    }
    if rows != nodes || levels.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ReadError::Format(format!("expected one finite row for each of the {nodes} nodes")));
    }
    Ok(levels)
}

/// Summary line followed by one line per curvature sample.
pub fn write_report_jsonl(path: &Path, report: &OptimalityReport) -> io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    let (residual, residual_error) = match &report.projection_residual {
        Ok(r) => (Some(*r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = json!({
        "record": "summary",
        "cost": report.cost,
        "grad_norm": report.grad_norm,
        "stationarity": report.stationarity,
        "tau": report.tau,
        "active_set_fraction": report.active_set_fraction,
        "projection_residual": residual,
        "projection_residual_error": residual_error,
        "delta": report.delta,
        "curvature_flagged": report.curvature_flagged(),
        "samples": report.curvature_samples.len(),
        "clamp_events": report.clamp_events,
    });
    writeln!(f, "{summary}")?;
    for s in &report.curvature_samples {
        let line = json!({
            "record": "curvature_sample",
            "id": s.id,
            "curvature": s.curvature,
            "norm_sq": s.norm_sq,
            "ratio": s.ratio,
        });
        writeln!(f, "{line}")?;
    }
    f.flush()
}

pub fn write_curvature_csv(path: &Path, report: &OptimalityReport) -> io::Result<()> {
    let mut w = create(path)?;
    w.write_record(["id", "curvature", "norm_sq", "ratio"])?;
    for s in &report.curvature_samples {
        w.write_record([s.id.to_string(), num(s.curvature), num(s.norm_sq), num(s.ratio)])?;
    }
    w.flush()
}

pub fn write_checks(path: &Path, checks: &[Check]) -> io::Result<()> {
    let mut w = create(path)?;
    w.write_record(["test", "observed", "relation", "threshold", "passed"])?;
    for c in checks {
        w.write_record([c.name.clone(), num(c.observed), c.relation.symbol().into(), num(c.threshold), c.passed().to_string()])?;
    }
    w.flush()
}
