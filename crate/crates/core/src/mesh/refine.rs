//! Newest-vertex bisection and uniform red refinement.

use std::collections::HashMap;

use super::{edge_key, MarkedSet, Mesh, Point};

struct Builder {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    regions: Vec<i32>,
    refinement_edge: Vec<u8>,
    parent: Vec<Option<usize>>,
}

impl Builder {
    fn new(mesh: &Mesh) -> Self {
        Self {
            vertices: mesh.vertices().to_vec(),
            cells: Vec::with_capacity(mesh.n_cells() * 2),
            regions: Vec::with_capacity(mesh.n_cells() * 2),
            refinement_edge: Vec::with_capacity(mesh.n_cells() * 2),
            parent: Vec::with_capacity(mesh.n_cells() * 2),
        }
    }

    fn push(&mut self, cell: [usize; 3], refinement: u8, region: i32, parent: usize) {
        self.cells.push(cell);
        self.refinement_edge.push(refinement);
        self.regions.push(region);
        self.parent.push(Some(parent));
    }

    fn midpoints(&mut self, mesh: &Mesh, marked: &[bool]) -> HashMap<(usize, usize), usize> {
        let mut mid = HashMap::new();
        for (e, &[a, b]) in mesh.edges().iter().enumerate() {
            if marked[e] {
                let pa = mesh.vertices()[a];
                let pb = mesh.vertices()[b];
                self.vertices
                    .push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                mid.insert((a, b), self.vertices.len() - 1);
            }
        }
        mid
    }

    fn finish(self, mesh: &Mesh, mid: &HashMap<(usize, usize), usize>) -> Mesh {
        let mut boundary = Vec::new();
        for (a, b, tag) in mesh.boundary_edges() {
            match mid.get(&edge_key(a, b)) {
                Some(&m) => {
                    boundary.push((a, m, tag));
                    boundary.push((m, b, tag));
                }
                None => boundary.push((a, b, tag)),
            }
        }
        Mesh::assemble(
            self.vertices,
            self.cells,
            self.regions,
            &boundary,
            self.refinement_edge,
            self.parent,
        )
        .expect("refinement preserves mesh validity")
    }
}

/// Cell vertices rotated so that the refinement edge is opposite local vertex 0.
fn rotated(mesh: &Mesh, cell: usize) -> [usize; 3] {
    let c = mesh.cells()[cell];
    let r = mesh.refinement_edge(cell);
    [c[r], c[(r + 1) % 3], c[(r + 2) % 3]]
}

/// Bisects marked cells by newest-vertex bisection and closes the refinement
/// so that the result has no hanging nodes.
pub fn refine(mesh: &Mesh, marked: &MarkedSet) -> Mesh {
    if marked.is_empty() {
        return mesh.clone();
    }
    let mut edge_marked = vec![false; mesh.n_edges()];
    let mut queue = Vec::new();
    for &c in &marked.cell_ids {
        assert!(c < mesh.n_cells(), "marked cell {c} does not exist");
        // all three edges: marked cells are split into four (bisec3)
        for e in mesh.cell_edges(c) {
            if !edge_marked[e] {
                edge_marked[e] = true;
                queue.push(e);
            }
        }
    }
    while let Some(e) = queue.pop() {
        for side in mesh.edge_sides(e).into_iter().flatten() {
            let r = mesh.cell_edges(side.cell)[mesh.refinement_edge(side.cell)];
            if !edge_marked[r] {
                edge_marked[r] = true;
                queue.push(r);
            }
        }
    }

    let mut b = Builder::new(mesh);
    let mid = b.midpoints(mesh, &edge_marked);
    for c in 0..mesh.n_cells() {
        bisect(&mut b, &mid, rotated(mesh, c), mesh.region(c), c);
    }
    b.finish(mesh, &mid)
}

/// Splits `[v0, v1, v2]` across `(v1, v2)` if that edge is marked and recurses
/// into the children, whose refinement edges are the remaining parent edges.
fn bisect(
    b: &mut Builder,
    mid: &HashMap<(usize, usize), usize>,
    t: [usize; 3],
    region: i32,
    parent: usize,
) {
    let [v0, v1, v2] = t;
    let Some(&m) = mid.get(&edge_key(v1, v2)) else {
        b.push(t, 0, region, parent);
        return;
    };
    // Children keep counter-clockwise order; the new vertex m is the newest one.
    for child in [[m, v0, v1], [m, v2, v0]] {
        if mid.contains_key(&edge_key(child[1], child[2])) {
            bisect(b, mid, child, region, parent);
        } else {
            b.push(child, 0, region, parent);
        }
    }
}

/// Red refinement: every cell is split into four similar children through
/// its edge midpoints.
pub fn uniform_refine(mesh: &Mesh) -> Mesh {
    let all = vec![true; mesh.n_edges()];
    let mut b = Builder::new(mesh);
    let mid = b.midpoints(mesh, &all);
    for c in 0..mesh.n_cells() {
        let [v0, v1, v2] = rotated(mesh, c);
        let m01 = mid[&edge_key(v0, v1)];
        let m12 = mid[&edge_key(v1, v2)];
        let m20 = mid[&edge_key(v2, v0)];
        let region = mesh.region(c);
        // corner children inherit the parent's refinement edge direction
        b.push([v0, m01, m20], 0, region, c);
        b.push([m01, v1, m12], 0, region, c);
        b.push([m20, m12, v2], 0, region, c);
        b.push([m01, m12, m20], 1, region, c);
    }
    b.finish(mesh, &mid)
}
