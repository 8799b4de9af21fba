//! Conforming triangle meshes with region and boundary tags.
//!
//! Local edge `i` of a cell is the edge opposite local vertex `i`. The
//! refinement edge used by newest-vertex bisection is stored by that index.

mod generate;
mod io;
mod marking;
mod refine;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::Vec2;

pub use generate::{
    artery_proxy, rectangle, silicone_proxy, two_subdomain_square, unit_square, ArteryTags,
    SiliconeTags,
};
pub use io::{load_mesh, mesh_to_string, read_mesh, write_mesh};
pub use marking::{dorfler_mark, MarkedSet};
pub use refine::{refine, uniform_refine};

pub type Point = Vec2;

/// Non-fatal observations made while building a mesh.
#[derive(Clone, Debug, PartialEq)]
pub enum MeshWarning {
    /// The cell was given clockwise and has been reoriented.
    Reoriented { cell: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeSide {
    pub cell: usize,
    pub local: usize,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    regions: Vec<i32>,
    refinement_edge: Vec<u8>,
    parent: Vec<Option<usize>>,
    edges: Vec<[usize; 2]>,
    edge_tags: Vec<Option<i32>>,
    edge_sides: Vec<[Option<EdgeSide>; 2]>,
    cell_edges: Vec<[usize; 3]>,
    edge_index: HashMap<(usize, usize), usize>,
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Endpoints of local edge `i` (opposite local vertex `i`), counter-clockwise.
pub fn local_edge(i: usize) -> (usize, usize) {
    ((i + 1) % 3, (i + 2) % 3)
}

fn signed_area(p: &[Point; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

impl Mesh {
    /// Builds a mesh, reorienting clockwise cells and choosing the longest
    /// edge of every cell as its refinement edge. Warnings are logged.
    pub fn new(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        regions: Vec<i32>,
        boundary: &[(usize, usize, i32)],
    ) -> Result<Self> {
        let (mesh, warnings) = Self::with_warnings(vertices, cells, regions, boundary)?;
        for w in &warnings {
            log::warn!("{w:?}");
        }
        Ok(mesh)
    }

    pub fn with_warnings(
        vertices: Vec<Point>,
        mut cells: Vec<[usize; 3]>,
        regions: Vec<i32>,
        boundary: &[(usize, usize, i32)],
    ) -> Result<(Self, Vec<MeshWarning>)> {
        let mut warnings = Vec::new();
        for (c, cell) in cells.iter_mut().enumerate() {
            if cell.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} references a vertex out of range"
                )));
            }
            let area = signed_area(&[vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]]);
            if !area.is_finite() || area == 0.0 {
                return Err(Error::InvertedCell { cell: c });
            }
            if area < 0.0 {
                cell.swap(1, 2);
                warnings.push(MeshWarning::Reoriented { cell: c });
            }
        }
        let refinement_edge = cells
            .iter()
            .map(|cell| longest_edge(&vertices, cell))
            .collect();
        let parent = vec![None; cells.len()];
        let mesh = Self::assemble(vertices, cells, regions, boundary, refinement_edge, parent)?;
        Ok((mesh, warnings))
    }

    /// Builds topology for already oriented cells with explicit bisection metadata.
    pub(crate) fn assemble(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        regions: Vec<i32>,
        boundary: &[(usize, usize, i32)],
        refinement_edge: Vec<u8>,
        parent: Vec<Option<usize>>,
    ) -> Result<Self> {
        if regions.len() != cells.len() {
            return Err(Error::InvalidMesh(format!(
                "{} region tags for {} cells",
                regions.len(),
                cells.len()
            )));
        }
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::with_capacity(cells.len() * 2);
        let mut edges = Vec::new();
        let mut edge_sides: Vec<[Option<EdgeSide>; 2]> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut ce = [0usize; 3];
            for (i, slot) in ce.iter_mut().enumerate() {
                let (a, b) = local_edge(i);
                let key = edge_key(cell[a], cell[b]);
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_sides.push([None, None]);
                    edges.len() - 1
                });
                let side = EdgeSide { cell: c, local: i };
                match edge_sides[e] {
                    [None, _] => edge_sides[e][0] = Some(side),
                    [Some(_), None] => edge_sides[e][1] = Some(side),
                    [Some(_), Some(_)] => {
                        return Err(Error::NonManifoldEdge {
                            a: key.0,
                            b: key.1,
                            count: 3,
                        })
                    }
                }
                *slot = e;
            }
            cell_edges.push(ce);
        }
        let mut edge_tags = vec![None; edges.len()];
        for &(a, b, tag) in boundary {
            let key = edge_key(a, b);
            match edge_index.get(&key) {
                Some(&e) if edge_sides[e][1].is_none() => edge_tags[e] = Some(tag),
                _ => return Err(Error::TaggedInteriorEdge { a: key.0, b: key.1 }),
            }
        }
        for (e, sides) in edge_sides.iter().enumerate() {
            if sides[1].is_none() && edge_tags[e].is_none() {
                return Err(Error::UntaggedBoundaryEdge {
                    a: edges[e][0],
                    b: edges[e][1],
                });
            }
        }
        Ok(Self {
            vertices,
            cells,
            regions,
            refinement_edge,
            parent,
            edges,
            edge_tags,
            edge_sides,
            cell_edges,
            edge_index,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn regions(&self) -> &[i32] {
        &self.regions
    }

    pub fn region(&self, cell: usize) -> i32 {
        self.regions[cell]
    }

    pub fn refinement_edge(&self, cell: usize) -> usize {
        self.refinement_edge[cell] as usize
    }

    pub fn parent(&self, cell: usize) -> Option<usize> {
        self.parent[cell]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_tag(&self, edge: usize) -> Option<i32> {
        self.edge_tags[edge]
    }

    pub fn edge_sides(&self, edge: usize) -> [Option<EdgeSide>; 2] {
        self.edge_sides[edge]
    }

    pub fn cell_edges(&self, cell: usize) -> [usize; 3] {
        self.cell_edges[cell]
    }

    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&edge_key(a, b)).copied()
    }

    pub fn is_boundary_edge(&self, edge: usize) -> bool {
        self.edge_sides[edge][1].is_none()
    }

    /// The cell on the other side of local edge `local` of `cell`.
    pub fn neighbor(&self, cell: usize, local: usize) -> Option<EdgeSide> {
        let e = self.cell_edges[cell][local];
        self.edge_sides[e]
            .iter()
            .flatten()
            .find(|s| s.cell != cell)
            .copied()
    }

    /// Boundary edges as `(v0, v1, tag)`, oriented counter-clockwise along the cell.
    pub fn boundary_edges(&self) -> Vec<(usize, usize, i32)> {
        let mut out = Vec::new();
        for (e, sides) in self.edge_sides.iter().enumerate() {
            if let [Some(s), None] = sides {
                let cell = self.cells[s.cell];
                let (a, b) = local_edge(s.local);
                out.push((cell[a], cell[b], self.edge_tags[e].unwrap_or_default()));
            }
        }
        out
    }

    pub fn boundary_tags(&self) -> Vec<i32> {
        let mut tags: Vec<i32> = self.edge_tags.iter().flatten().copied().collect();
        tags.sort_unstable();
        tags.dedup();
        tags
    }

    pub fn cell_points(&self, cell: usize) -> [Point; 3] {
        let c = self.cells[cell];
        [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]]
    }

    pub fn area(&self, cell: usize) -> f64 {
        signed_area(&self.cell_points(cell))
    }

    pub fn centroid(&self, cell: usize) -> Point {
        let p = self.cell_points(cell);
        [
            (p[0][0] + p[1][0] + p[2][0]) / 3.0,
            (p[0][1] + p[1][1] + p[2][1]) / 3.0,
        ]
    }

    pub fn edge_length(&self, edge: usize) -> f64 {
        let [a, b] = self.edges[edge];
        dist(&self.vertices[a], &self.vertices[b])
    }

    pub fn diameter(&self, cell: usize) -> f64 {
        let p = self.cell_points(cell);
        dist(&p[0], &p[1]).max(dist(&p[1], &p[2])).max(dist(&p[2], &p[0]))
    }

    /// Smallest interior angle of a cell in radians.
    pub fn min_angle(&self, cell: usize) -> f64 {
        let p = self.cell_points(cell);
        (0..3)
            .map(|i| {
                let a = p[i];
                let b = p[(i + 1) % 3];
                let c = p[(i + 2) % 3];
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - a[0], c[1] - a[1]];
                let cos = (u[0] * v[0] + u[1] * v[1]) / ((u[0].hypot(u[1])) * (v[0].hypot(v[1])));
                cos.clamp(-1.0, 1.0).acos()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_angle_overall(&self) -> f64 {
        (0..self.n_cells())
            .map(|c| self.min_angle(c))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.area(c)).sum()
    }

    /// Cells incident to each vertex.
    pub fn vertex_cells(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (c, cell) in self.cells.iter().enumerate() {
            for &v in cell {
                out[v].push(c);
            }
        }
        out
    }

    /// Verifies that the mesh has no hanging nodes: every edge has one or two
    /// cells, every one-sided edge is tagged, and no vertex sits strictly
    /// inside a boundary edge.
    pub fn check_conforming(&self) -> Result<()> {
        for (e, sides) in self.edge_sides.iter().enumerate() {
            let [a, b] = self.edges[e];
            match sides {
                [Some(_), Some(_)] => {}
                [Some(_), None] => {
                    if self.edge_tags[e].is_none() {
                        return Err(Error::UntaggedBoundaryEdge { a, b });
                    }
                }
                _ => return Err(Error::InvalidMesh(format!("edge ({a}, {b}) has no cell"))),
            }
        }
        let boundary: Vec<_> = (0..self.n_edges())
            .filter(|&e| self.is_boundary_edge(e))
            .collect();
        let bverts: std::collections::BTreeSet<usize> = boundary
            .iter()
            .flat_map(|&e| self.edges[e])
            .collect();
        for &e in &boundary {
            let [a, b] = self.edges[e];
            let pa = self.vertices[a];
            let pb = self.vertices[b];
            let len = dist(&pa, &pb);
            for &v in &bverts {
                if v == a || v == b {
                    continue;
                }
                let p = self.vertices[v];
                if (dist(&pa, &p) + dist(&p, &pb) - len).abs() < 1e-12 * len {
                    return Err(Error::InvalidMesh(format!(
                        "hanging vertex {v} on edge ({a}, {b})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reference coordinates of a physical point with respect to a cell.
    pub fn to_reference(&self, cell: usize, x: &Point) -> Point {
        let p = self.cell_points(cell);
        let j = [
            [p[1][0] - p[0][0], p[2][0] - p[0][0]],
            [p[1][1] - p[0][1], p[2][1] - p[0][1]],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let d = [x[0] - p[0][0], x[1] - p[0][1]];
        [
            (j[1][1] * d[0] - j[0][1] * d[1]) / det,
            (-j[1][0] * d[0] + j[0][0] * d[1]) / det,
        ]
    }

    pub fn to_physical(&self, cell: usize, xi: &Point) -> Point {
        let p = self.cell_points(cell);
        [
            p[0][0] + (p[1][0] - p[0][0]) * xi[0] + (p[2][0] - p[0][0]) * xi[1],
            p[0][1] + (p[1][1] - p[0][1]) * xi[0] + (p[2][1] - p[0][1]) * xi[1],
        ]
    }

    /// Finds a cell containing `x` (closed cells, tolerance relative to cell size).
    pub fn locate(&self, x: &Point) -> Option<usize> {
        let tol = 1e-10;
        (0..self.n_cells()).find(|&c| {
            let xi = self.to_reference(c, x);
            xi[0] >= -tol && xi[1] >= -tol && xi[0] + xi[1] <= 1.0 + tol
        })
    }

    /// Cells whose region tag is in `tags`.
    pub fn cells_in_regions(&self, tags: &[i32]) -> Vec<usize> {
        (0..self.n_cells())
            .filter(|&c| tags.contains(&self.regions[c]))
            .collect()
    }
}

pub(crate) fn dist(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Local index of the longest edge; ties broken by the smaller sorted global vertex pair.
fn longest_edge(vertices: &[Point], cell: &[usize; 3]) -> u8 {
    let mut best = 0usize;
    let mut best_key = (f64::NEG_INFINITY, (usize::MAX, usize::MAX));
    for i in 0..3 {
        let (a, b) = local_edge(i);
        let len = dist(&vertices[cell[a]], &vertices[cell[b]]);
        let key = edge_key(cell[a], cell[b]);
        let better = len > best_key.0 || (len == best_key.0 && key < best_key.1);
        if better {
            best = i;
            best_key = (len, key);
        }
    }
    best as u8
}
