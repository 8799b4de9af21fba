//! Convergence tables as CSV and per-iteration legacy VTK files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;

use super::adapt::{ConvergenceRow, RunResult, Snapshot};

pub const CSV_HEADER: &str =
    "iteration,cells,dofs,J_value,eta_global,sum_local,reference_error,relative_error,effectivity_global,effectivity_sum";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10e}")).unwrap_or_default()
}

pub fn rows_to_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.14e},{:.10e},{:.10e},{},{},{},{}",
            r.iteration,
            r.cells,
            r.dofs,
            r.j_value,
            r.eta_global,
            r.sum_local,
            opt(r.reference_error),
            opt(r.relative_error),
            opt(r.effectivity_global),
            opt(r.effectivity_sum)
        );
    }
    s
}

pub fn write_csv(rows: &[ConvergenceRow], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, rows_to_csv(rows))?;
    Ok(())
}

/// Legacy ASCII unstructured grid with the point fields of the snapshot
/// (vectors padded to three components) and `eta` plus `region` as cell data.
pub fn vtk_string(snap: &Snapshot, title: &str) -> String {
    let m = &snap.mesh;
    let (nv, nc) = (m.n_vertices(), m.n_cells());
    let mut s = String::with_capacity(64 * (nv + nc));
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{title}");
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {nv} double");
    for p in m.vertices() {
        let _ = writeln!(s, "{:.17e} {:.17e} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {nc} {}", 4 * nc);
    for c in m.cells() {
        let _ = writeln!(s, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    for _ in 0..nc {
        s.push_str("5\n");
    }
    if !snap.points.is_empty() {
        let _ = writeln!(s, "POINT_DATA {nv}");
        for f in &snap.points {
            if f.ncomp == 1 {
                let _ = writeln!(s, "SCALARS {} double 1\nLOOKUP_TABLE default", f.name);
                for v in &f.values {
                    let _ = writeln!(s, "{v:.17e}");
                }
            } else {
                let _ = writeln!(s, "VECTORS {} double", f.name);
                for v in f.values.chunks(f.ncomp) {
                    let _ = writeln!(s, "{:.17e} {:.17e} 0", v[0], v[1]);
                }
            }
        }
    }
    let _ = writeln!(s, "CELL_DATA {nc}");
    s.push_str("SCALARS eta double 1\nLOOKUP_TABLE default\n");
    for e in &snap.eta {
        let _ = writeln!(s, "{e:.17e}");
    }
    if snap.rho.len() == nc {
        s.push_str("SCALARS rho double 1\nLOOKUP_TABLE default\n");
        for e in &snap.rho {
            let _ = writeln!(s, "{e:.17e}");
        }
    }
    s.push_str("SCALARS region int 1\nLOOKUP_TABLE default\n");
    for r in m.regions() {
        let _ = writeln!(s, "{r}");
    }
    s
}

pub fn write_vtk(snap: &Snapshot, title: &str, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, vtk_string(snap, title))?;
    Ok(())
}

/// Writes `convergence.csv` and `mesh_NNN.vtk` (1-based) into `dir`.
pub fn write_outputs(result: &RunResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_csv(&result.rows, dir.join("convergence.csv"))?;
    for (i, snap) in result.snapshots.iter().enumerate() {
        let it = i + 1;
        write_vtk(snap, &format!("dwr-adapt iteration {it}"), dir.join(format!("mesh_{it:03}.vtk")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::driver::adapt::PointData;
    use crate::mesh::unit_square;

    #[test]
    fn empty_rows_give_header_only() {
        assert_eq!(rows_to_csv(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn missing_reference_leaves_empty_fields() {
        let row = ConvergenceRow {
            iteration: 1,
            cells: 2,
            dofs: 3,
            j_value: 1.0,
            eta_global: 0.5,
            sum_local: 0.75,
            reference_error: None,
            relative_error: None,
            effectivity_global: None,
            effectivity_sum: None,
            components: vec![1.0],
            weights: vec![1.0],
        };
        let csv = rows_to_csv(&[row]);
        let line = csv.lines().nth(1).unwrap();
        assert_eq!(line.split(',').count(), CSV_HEADER.split(',').count());
        assert!(line.ends_with(",,,,"));
    }

    #[test]
    fn vtk_sections_have_matching_counts() {
        let mesh = Arc::new(unit_square());
        let nv = mesh.n_vertices();
        let snap = Snapshot {
            mesh: mesh.clone(),
            points: vec![PointData {
                name: "u_h".into(),
                ncomp: 2,
                values: vec![0.5; 2 * nv],
            }],
            eta: vec![0.25; mesh.n_cells()],
            rho: vec![-0.25; mesh.n_cells()],
        };
        let s = vtk_string(&snap, "t");
        assert!(s.contains(&format!("POINTS {nv} double")));
        assert!(s.contains(&format!("CELL_DATA {}", mesh.n_cells())));
        assert!(s.contains("VECTORS u_h double"));
    }
}
