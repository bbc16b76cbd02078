//! Field snapshots and their file formats.
//!
//! CSV: header `i,j[,l],x,y[,z],<field>...`, one row per cell with 1-based
//! indices, `i` varying fastest. Numbers use the shortest representation
//! that round-trips, so identical runs give identical bytes.
//!
//! VTK: legacy ASCII `STRUCTURED_POINTS` with `DIMENSIONS` = cells + 1 per
//! axis (1 for the unused z axis in 2D), `CELL_DATA` holding one `SCALARS`
//! block per field in snapshot order and, when present, a `VECTORS velocity`
//! block of face velocities averaged to cell centers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::grid::{CellField, FaceField, StaggeredGrid};
use crate::scenarios::SnapshotFormat;
use crate::stepper::SimState;

/// Overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "WORMHOLE_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("snapshot has no cell fields")]
    EmptyFieldList,
    #[error("field `{name}` has {got} values, grid has {expected} cells")]
    ShapeMismatch { name: String, expected: usize, got: usize },
    #[error("field `{name}` has a non-finite value at cell {cell}")]
    NonFinite { name: String, cell: usize },
    #[error("porosity {value} at cell {cell} outside (0, 1)")]
    PorosityRange { cell: usize, value: f64 },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedField {
    pub name: String,
    pub field: CellField,
}

/// Fields at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub cells: Vec<NamedField>,
    pub velocity: Option<FaceField>,
}

impl Snapshot {
    /// Porosity, pressure, concentration and temperature, plus the velocity.
    pub fn from_state(state: &SimState) -> Self {
        let named = |name: &str, f: &CellField| NamedField { name: name.to_string(), field: f.clone() };
        Snapshot {
            step: state.step,
            time: state.time,
            cells: vec![
                named("porosity", &state.porosity),
                named("pressure", &state.pressure),
                named("concentration", &state.concentration),
                named("temperature", &state.temperature),
            ],
            velocity: Some(state.velocity.clone()),
        }
    }

    pub fn validate(&self, grid: &StaggeredGrid) -> Result<(), OutputError> {
        if self.cells.is_empty() {
            return Err(OutputError::EmptyFieldList);
        }
        for f in &self.cells {
            let n = f.field.values.len();
            if n != grid.num_cells() {
                return Err(OutputError::ShapeMismatch { name: f.name.clone(), expected: grid.num_cells(), got: n });
            }
            if let Some(cell) = f.field.values.iter().position(|v| !v.is_finite()) {
                return Err(OutputError::NonFinite { name: f.name.clone(), cell });
            }
            if f.name == "porosity" {
                if let Some((cell, &value)) = f.field.values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && **v < 1.0)) {
                    return Err(OutputError::PorosityRange { cell, value });
                }
            }
        }
        if let Some(u) = &self.velocity {
            for (a, comp) in u.comps.iter().enumerate() {
                if comp.len() != grid.num_faces(a) {
                    return Err(OutputError::ShapeMismatch {
                        name: "velocity".into(),
                        expected: grid.num_faces(a),
                        got: comp.len(),
                    });
                }
                if let Some(cell) = comp.iter().position(|v| !v.is_finite()) {
                    return Err(OutputError::NonFinite { name: "velocity".into(), cell });
                }
            }
        }
        Ok(())
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];
const INDICES: [&str; 3] = ["i", "j", "l"];

pub fn to_csv(grid: &StaggeredGrid, snap: &Snapshot) -> Result<String, OutputError> {
    snap.validate(grid)?;
    let dim = grid.dim();
    let mut header: Vec<&str> = INDICES[..dim].to_vec();
    header.extend_from_slice(&AXES[..dim]);
    header.extend(snap.cells.iter().map(|f| f.name.as_str()));
    let mut out = header.join(",");
    out.push('\n');
    for c in 0..grid.num_cells() {
        let ijk = grid.cell_ijk(c);
        let x = grid.cell_center(ijk);
        let mut row: Vec<String> = (0..dim).map(|a| (ijk[a] + 1).to_string()).collect();
        row.extend((0..dim).map(|a| x[a].to_string()));
        row.extend(snap.cells.iter().map(|f| f.field.values[c].to_string()));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn to_vtk(grid: &StaggeredGrid, snap: &Snapshot) -> Result<String, OutputError> {
    snap.validate(grid)?;
    let dim = grid.dim();
    let shape = grid.shape();
    let dims: Vec<String> = (0..3).map(|a| if a < dim { shape[a] + 1 } else { 1 }.to_string()).collect();
    let origin: Vec<String> = (0..3).map(|a| if a < dim { grid.axis(a).lo } else { 0.0 }.to_string()).collect();
    let spacing: Vec<String> = (0..3).map(|a| grid.spacing(if a < dim { a } else { 0 }).to_string()).collect();
    let mut out = String::new();
    // writing to a String cannot fail
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "wormhole step {} time {}", snap.step, snap.time);
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(out, "DIMENSIONS {}", dims.join(" "));
    let _ = writeln!(out, "ORIGIN {}", origin.join(" "));
    let _ = writeln!(out, "SPACING {}", spacing.join(" "));
    let _ = writeln!(out, "CELL_DATA {}", grid.num_cells());
    for f in &snap.cells {
        let _ = writeln!(out, "SCALARS {} double 1", f.name);
        let _ = writeln!(out, "LOOKUP_TABLE default");
        for v in &f.field.values {
            let _ = writeln!(out, "{v}");
        }
    }
    if let Some(u) = &snap.velocity {
        let _ = writeln!(out, "VECTORS velocity double");
        for v in u.cell_average(grid) {
            let _ = writeln!(out, "{} {} {}", v[0], v[1], v[2]);
        }
    }
    Ok(out)
}

fn write_file(path: PathBuf, text: &str) -> Result<PathBuf, OutputError> {
    fs::write(&path, text).map_err(|source| OutputError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Writes `<dir>/<stem>_<step>.<ext>` for each format and returns the paths.
pub fn write_snapshot(
    dir: &Path,
    stem: &str,
    grid: &StaggeredGrid,
    snap: &Snapshot,
    formats: &[SnapshotFormat],
) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.to_path_buf(), source })?;
    let mut paths = Vec::new();
    for fmt in formats {
        let (ext, text) = match fmt {
            SnapshotFormat::Csv => ("csv", to_csv(grid, snap)?),
            SnapshotFormat::Vtk => ("vtk", to_vtk(grid, snap)?),
        };
        paths.push(write_file(dir.join(format!("{stem}_{:05}.{ext}", snap.step)), &text)?);
    }
    Ok(paths)
}

/// One `step,time,average_porosity` row per step.
pub fn write_porosity_series(dir: &Path, stem: &str, series: &[(usize, f64, f64)]) -> Result<PathBuf, OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.to_path_buf(), source })?;
    let mut text = String::from("step,time,average_porosity\n");
    for (step, t, avg) in series {
        let _ = writeln!(text, "{step},{t},{avg}");
    }
    write_file(dir.join(format!("{stem}_porosity.csv")), &text)
}

/// Resolves the output directory: environment override, then the
/// configured directory, then `output/<name>`.
pub fn output_dir(configured: Option<&Path>, name: &str) -> PathBuf {
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir).join(name);
    }
    configured.map(Path::to_path_buf).unwrap_or_else(|| Path::new("output").join(name))
}

/// Steps at which snapshots are written: 0, then `count` evenly spaced
/// steps ending at `steps`.
pub fn snapshot_steps(steps: usize, count: usize) -> Vec<usize> {
    let mut out = vec![0];
    for k in 1..=count.min(steps) {
        let s = (k * steps).div_ceil(count.min(steps));
        if out.last() != Some(&s) {
            out.push(s);
        }
    }
    out
}
