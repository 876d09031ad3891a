//! VTK and CSV writers.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::constitutive::{bulk_energy_density, recover_stress_strain, ModelParams};
use crate::driver::StepRecord;
use crate::error::MeshError;
use crate::fem::sample_line;
use crate::mesh::{Mesh, Point};

/// Legacy ASCII unstructured grid with one POINT_DATA scalar per field.
pub fn write_vtk(mesh: &Mesh, fields: &[(&str, &[f64])], path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "limitfrac")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_nodes())?;
    for p in mesh.nodes() {
        writeln!(w, "{:.17e} {:.17e} 0", p[0], p[1])?;
    }
    writeln!(w, "CELLS {} {}", mesh.n_cells(), 5 * mesh.n_cells())?;
    for c in mesh.cells() {
        writeln!(w, "4 {} {} {} {}", c.nodes[0], c.nodes[1], c.nodes[2], c.nodes[3])?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.n_cells())?;
    for _ in mesh.cells() {
        writeln!(w, "9")?;
    }
    if !fields.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.n_nodes())?;
        for (name, values) in fields {
            assert_eq!(values.len(), mesh.n_nodes(), "field {name} does not match the mesh");
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in *values {
                writeln!(w, "{v:.17e}")?;
            }
        }
    }
    w.flush()
}

fn fmt(v: f64) -> String {
    format!("{v:.14e}")
}

/// Header plus one row per entry.
pub fn write_csv(header: &[&str], rows: &[Vec<f64>], path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let cells: Vec<String> = r.iter().map(|&v| fmt(v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()
}

pub const PROBE_COLUMNS: [&str; 10] =
    ["arc", "x", "y", "Phi", "phi", "sigma13", "sigma23", "eps13", "eps23", "W"];

/// Samples every recovered quantity along a segment.
pub fn probe(
    mesh: &Mesh,
    airy: &[f64],
    pf: &[f64],
    params: &ModelParams,
    p0: Point,
    p1: Point,
    n: usize,
) -> Result<Vec<Vec<f64>>, MeshError> {
    let samples = sample_line(mesh, p0, p1, n, |qp| {
        let g = qp.gradient(airy);
        let v = qp.value(pf);
        let s = recover_stress_strain(g, v, params);
        vec![qp.x[0], qp.x[1], qp.value(airy), v, s.sigma13, s.sigma23, s.eps13, s.eps23, bulk_energy_density(g, params)]
    })?;
    Ok(samples
        .into_iter()
        .map(|(arc, rest)| std::iter::once(arc).chain(rest).collect())
        .collect())
}

pub fn write_probe_csv(rows: &[Vec<f64>], path: &Path) -> io::Result<()> {
    write_csv(&PROBE_COLUMNS, rows, path)
}

pub const SERIES_COLUMNS: [&str; 13] = [
    "step",
    "time",
    "bulk_energy",
    "crack_energy",
    "tip_pos",
    "tip_speed",
    "staggered_iterations",
    "r1",
    "r2",
    "mech_newton",
    "pf_newton",
    "max_pf_increase",
    "max_eps23",
];

pub fn write_series_csv(records: &[StepRecord], path: &Path) -> io::Result<()> {
    let rows: Vec<Vec<f64>> = records
        .iter()
        .map(|r| {
            vec![
                r.n as f64,
                r.time,
                r.energy.bulk,
                r.energy.crack,
                r.tip,
                r.tip_speed,
                r.staggered_iterations as f64,
                r.r1,
                r.r2,
                r.mech_newton as f64,
                r.pf_newton as f64,
                r.max_pf_increase,
                r.max_eps23,
            ]
        })
        .collect();
    write_csv(&SERIES_COLUMNS, &rows, path)
}
