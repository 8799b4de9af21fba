//! Plain-text mesh format.
//!
//! ```text
//! NV NC NBE
//! x y             (NV lines)
//! v0 v1 v2 region (NC lines)
//! v0 v1 tag       (NBE lines)
//! ```
//! Indices are 0-based. Blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{Mesh, MeshWarning};
use crate::error::{Error, Result};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let (mesh, warnings) = read_mesh(&text, path)?;
    for w in warnings {
        match w {
            MeshWarning::Reoriented { cell } => log::warn!(
                "{}: cell {cell} is clockwise, reoriented counter-clockwise",
                path.display()
            ),
        }
    }
    Ok(mesh)
}

struct Lines<'a> {
    path: PathBuf,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_fields(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok((i + 1, t.split_whitespace().collect()));
        }
        Err(Error::Parse {
            path: self.path.clone(),
            line: 0,
            msg: format!("unexpected end of file while reading {what}"),
        })
    }

    fn record<T: FromStr, const N: usize>(&mut self, what: &str) -> Result<(usize, [T; N])> {
        let (line, fields) = self.next_fields(what)?;
        let err = |msg: String| Error::Parse {
            path: self.path.clone(),
            line,
            msg,
        };
        if fields.len() != N {
            return Err(err(format!(
                "{what}: expected {N} fields, found {}",
                fields.len()
            )));
        }
        let mut out = Vec::with_capacity(N);
        for f in &fields {
            out.push(
                f.parse::<T>()
                    .map_err(|_| err(format!("{what}: cannot parse '{f}'")))?,
            );
        }
        match out.try_into() {
            Ok(arr) => Ok((line, arr)),
            Err(_) => unreachable!(),
        }
    }
}

/// Parses mesh text; `origin` is only used in diagnostics.
pub fn read_mesh(text: &str, origin: &Path) -> Result<(Mesh, Vec<MeshWarning>)> {
    let mut lines = Lines {
        path: origin.to_path_buf(),
        inner: text.lines().enumerate(),
    };
    let (_, [nv, nc, nbe]) = lines.record::<usize, 3>("header")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, [x, y]) = lines.record::<f64, 2>("vertex")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line,
                msg: "non-finite coordinate".into(),
            });
        }
        vertices.push([x, y]);
    }
    let mut cells = Vec::with_capacity(nc);
    let mut regions = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (line, [a, b, c, r]) = lines.record::<i64, 4>("cell")?;
        let idx = [a, b, c];
        if idx.iter().any(|&v| v < 0 || v as usize >= nv) {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line,
                msg: format!("cell vertex index out of range 0..{nv}"),
            });
        }
        cells.push([a as usize, b as usize, c as usize]);
        regions.push(r as i32);
    }
    let mut boundary = Vec::with_capacity(nbe);
    for _ in 0..nbe {
        let (line, [a, b, t]) = lines.record::<i64, 3>("boundary edge")?;
        if a < 0 || b < 0 || a as usize >= nv || b as usize >= nv {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line,
                msg: format!("boundary vertex index out of range 0..{nv}"),
            });
        }
        boundary.push((a as usize, b as usize, t as i32));
    }
    Mesh::with_warnings(vertices, cells, regions, &boundary)
}

pub fn mesh_to_string(mesh: &Mesh) -> String {
    let bnd = mesh.boundary_edges();
    let mut s = String::new();
    let _ = writeln!(s, "{} {} {}", mesh.n_vertices(), mesh.n_cells(), bnd.len());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {}", v[0], v[1]);
    }
    for (c, cell) in mesh.cells().iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {}", cell[0], cell[1], cell[2], mesh.region(c));
    }
    for (a, b, t) in bnd {
        let _ = writeln!(s, "{a} {b} {t}");
    }
    s
}

pub fn write_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "4 2 4\n0 0\n1 0\n1 1\n0 1\n0 1 2 1\n0 2 3 1\n0 1 1\n1 2 2\n2 3 1\n3 0 1\n";

    #[test]
    fn parses_unit_square() {
        let (m, w) = read_mesh(SQUARE, Path::new("sq")).unwrap();
        assert!(w.is_empty());
        assert_eq!((m.n_vertices(), m.n_cells()), (4, 2));
        assert_eq!(m.boundary_tags(), vec![1, 2]);
    }

    #[test]
    fn round_trip_is_exact() {
        let (m, _) = read_mesh(SQUARE, Path::new("sq")).unwrap();
        let s = mesh_to_string(&m);
        let (m2, _) = read_mesh(&s, Path::new("sq2")).unwrap();
        assert_eq!(m.vertices(), m2.vertices());
        assert_eq!(m.cells(), m2.cells());
        assert_eq!(m.regions(), m2.regions());
        assert_eq!(mesh_to_string(&m2), s);
    }

    #[test]
    fn errors_are_distinct() {
        let bad_number = SQUARE.replacen("1 0\n", "1 zero\n", 1);
        assert!(matches!(
            read_mesh(&bad_number, Path::new("a")),
            Err(Error::Parse { line: 3, .. })
        ));
        let truncated = "4 2 4\n0 0\n1 0\n";
        assert!(matches!(
            read_mesh(truncated, Path::new("a")),
            Err(Error::Parse { .. })
        ));
        let flat = "3 1 3\n0 0\n1 0\n2 0\n0 1 2 1\n0 1 1\n1 2 1\n2 0 1\n";
        assert!(matches!(
            read_mesh(flat, Path::new("a")),
            Err(Error::InvertedCell { cell: 0 })
        ));
        let untagged = SQUARE.replacen("4 2 4", "4 2 3", 1).replacen("3 0 1\n", "", 1);
        assert!(matches!(
            read_mesh(&untagged, Path::new("a")),
            Err(Error::UntaggedBoundaryEdge { a: 0, b: 3 })
        ));
    }

    #[test]
    fn clockwise_cell_warns() {
        let cw = SQUARE.replacen("0 1 2 1", "0 2 1 1", 1);
        let (m, w) = read_mesh(&cw, Path::new("a")).unwrap();
        assert_eq!(w, vec![MeshWarning::Reoriented { cell: 0 }]);
        assert!(m.area(0) > 0.0);
    }
}
