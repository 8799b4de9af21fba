//! Continuous Lagrange spaces with Dirichlet constraints, and fields on them.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::basis::{element, LagrangeElement};
use crate::error::{Error, Result};
use crate::mesh::{local_edge, Mesh, Point};
use crate::tensor::Mat2;

pub type BcValue = Arc<dyn Fn(&Point, usize) -> f64 + Send + Sync>;

/// Prescribes components of the unknown on all edges carrying `tag`.
#[derive(Clone)]
pub struct DirichletBc {
    pub tag: i32,
    pub components: Vec<usize>,
    pub value: BcValue,
}

impl fmt::Debug for DirichletBc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DirichletBc")
            .field("tag", &self.tag)
            .field("components", &self.components)
            .finish_non_exhaustive()
    }
}

impl DirichletBc {
    pub fn zero(tag: i32, ncomp: usize) -> Self {
        Self::constant(tag, &vec![0.0; ncomp])
    }

    /// All components fixed to `values[c]`.
    pub fn constant(tag: i32, values: &[f64]) -> Self {
        let v = values.to_vec();
        Self {
            tag,
            components: (0..v.len()).collect(),
            value: Arc::new(move |_, c| v[c]),
        }
    }

    pub fn new(
        tag: i32,
        components: Vec<usize>,
        value: impl Fn(&Point, usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            tag,
            components,
            value: Arc::new(value),
        }
    }
}

/// Affine map data of one cell.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry {
    pub origin: Point,
    /// Columns are the edge vectors `p1 - p0`, `p2 - p0`.
    pub jac: Mat2,
    /// `J^{-T}`, maps reference gradients to physical gradients.
    pub inv_jt: Mat2,
    pub det: f64,
}

impl CellGeometry {
    pub fn new(mesh: &Mesh, cell: usize) -> Self {
        let p = mesh.cell_points(cell);
        let jac = [
            [p[1][0] - p[0][0], p[2][0] - p[0][0]],
            [p[1][1] - p[0][1], p[2][1] - p[0][1]],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_jt = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        Self {
            origin: p[0],
            jac,
            inv_jt,
            det,
        }
    }

    pub fn map(&self, xi: &[f64; 2]) -> Point {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn grad(&self, g: &[f64; 2]) -> [f64; 2] {
        [
            self.inv_jt[0][0] * g[0] + self.inv_jt[0][1] * g[1],
            self.inv_jt[1][0] * g[0] + self.inv_jt[1][1] * g[1],
        ]
    }

    /// `J^{-T} H J^{-1}`.
    pub fn hessian(&self, h: &Mat2) -> Mat2 {
        let a = &self.inv_jt;
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        s += a[i][k] * h[k][l] * a[j][l];
                    }
                }
                out[i][j] = s;
            }
        }
        out
    }
}

#[derive(Debug)]
pub struct Space {
    mesh: Arc<Mesh>,
    degree: usize,
    ncomp: usize,
    nloc: usize,
    cell_nodes: Vec<usize>,
    node_coords: Vec<Point>,
    node_owner: Vec<(usize, usize)>,
    constraints: BTreeMap<usize, f64>,
}

impl Space {
    /// Degree-`degree` continuous space with `ncomp` components per node.
    pub fn new(mesh: Arc<Mesh>, degree: usize, ncomp: usize, bcs: &[DirichletBc]) -> Result<Self> {
        let el = element(degree)?;
        let tags = mesh.boundary_tags();
        for bc in bcs {
            if !tags.contains(&bc.tag) {
                return Err(Error::UnknownBoundaryTag(bc.tag));
            }
            if let Some(&c) = bc.components.iter().find(|&&c| c >= ncomp) {
                return Err(Error::InvalidArgument(format!(
                    "component {c} out of range for a {ncomp}-component space"
                )));
            }
        }
        let k = degree;
        let nv = mesh.n_vertices();
        let ne = mesh.n_edges();
        let per_edge = k - 1;
        let per_cell = if k == 3 { 1 } else { 0 };
        let n_nodes = nv + ne * per_edge + mesh.n_cells() * per_cell;
        let nloc = el.n_nodes();
        let mut cell_nodes = vec![0usize; mesh.n_cells() * nloc];
        let mut node_coords = vec![[0.0; 2]; n_nodes];
        let mut node_owner = vec![(usize::MAX, 0); n_nodes];
        for c in 0..mesh.n_cells() {
            let cell = mesh.cells()[c];
            let edges = mesh.cell_edges(c);
            let loc = &mut cell_nodes[c * nloc..(c + 1) * nloc];
            loc[..3].copy_from_slice(&cell);
            for i in 0..3 {
                let (a, b) = local_edge(i);
                let forward = cell[a] < cell[b];
                for j in 1..k {
                    let g = if forward { j - 1 } else { k - 1 - j };
                    loc[3 + i * per_edge + (j - 1)] = nv + edges[i] * per_edge + g;
                }
            }
            if per_cell == 1 {
                loc[nloc - 1] = nv + ne * per_edge + c;
            }
            let geo = CellGeometry::new(&mesh, c);
            for (l, &g) in loc.iter().enumerate() {
                if node_owner[g].0 == usize::MAX {
                    node_owner[g] = (c, l);
                    node_coords[g] = geo.map(&el.nodes[l]);
                }
            }
        }
        let mut space = Self {
            mesh,
            degree,
            ncomp,
            nloc,
            cell_nodes,
            node_coords,
            node_owner,
            constraints: BTreeMap::new(),
        };
        for bc in bcs {
            for node in space.boundary_nodes(bc.tag) {
                let x = space.node_coords[node];
                for &c in &bc.components {
                    space.constraints.insert(node * ncomp + c, (bc.value)(&x, c));
                }
            }
        }
        Ok(space)
    }

    /// Scalar (`ncomp = 1`) or vector space without constraints.
    pub fn unconstrained(mesh: Arc<Mesh>, degree: usize, ncomp: usize) -> Result<Self> {
        Self::new(mesh, degree, ncomp, &[])
    }

    /// Nodes lying on edges tagged `tag`, sorted.
    pub fn boundary_nodes(&self, tag: i32) -> Vec<usize> {
        let mut out = Vec::new();
        for e in 0..self.mesh.n_edges() {
            if self.mesh.edge_tag(e) != Some(tag) {
                continue;
            }
            out.extend(self.edge_nodes(e));
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// All nodes on edge `e` (end points first).
    pub fn edge_nodes(&self, e: usize) -> Vec<usize> {
        let [a, b] = self.mesh.edges()[e];
        let per_edge = self.degree - 1;
        let base = self.mesh.n_vertices() + e * per_edge;
        let mut out = vec![a, b];
        out.extend(base..base + per_edge);
        out
    }

    /// Adds or overrides a constraint on a single dof.
    pub fn constrain(&mut self, dof: usize, value: f64) {
        self.constraints.insert(dof, value);
    }

    /// Copy of this space with all constrained values set to zero.
    pub fn homogeneous(&self) -> Self {
        let mut s = self.clone_structure();
        s.constraints = self.constraints.keys().map(|&d| (d, 0.0)).collect();
        s
    }

    /// Copy of this space without any constraints.
    pub fn clone_structure(&self) -> Self {
        Self {
            mesh: self.mesh.clone(),
            degree: self.degree,
            ncomp: self.ncomp,
            nloc: self.nloc,
            cell_nodes: self.cell_nodes.clone(),
            node_coords: self.node_coords.clone(),
            node_owner: self.node_owner.clone(),
            constraints: BTreeMap::new(),
        }
    }

    /// Same mesh and degree with a different number of components and constraints.
    pub fn with_components(&self, ncomp: usize, bcs: &[DirichletBc]) -> Result<Self> {
        Self::new(self.mesh.clone(), self.degree, ncomp, bcs)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_components(&self) -> usize {
        self.ncomp
    }

    pub fn element(&self) -> &'static LagrangeElement {
        element(self.degree).expect("degree checked at construction")
    }

    pub fn n_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_nodes() * self.ncomp
    }

    pub fn n_local_nodes(&self) -> usize {
        self.nloc
    }

    pub fn n_local_dofs(&self) -> usize {
        self.nloc * self.ncomp
    }

    pub fn cell_nodes(&self, cell: usize) -> &[usize] {
        &self.cell_nodes[cell * self.nloc..(cell + 1) * self.nloc]
    }

    /// Global dofs of a cell, ordered `node * ncomp + comp`.
    pub fn cell_dofs(&self, cell: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_local_dofs());
        for &n in self.cell_nodes(cell) {
            for c in 0..self.ncomp {
                out.push(n * self.ncomp + c);
            }
        }
        out
    }

    pub fn node_coords(&self) -> &[Point] {
        &self.node_coords
    }

    /// A cell containing the node and the node's local index in it.
    pub fn node_owner(&self, node: usize) -> (usize, usize) {
        self.node_owner[node]
    }

    pub fn constraints(&self) -> &BTreeMap<usize, f64> {
        &self.constraints
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constraints.contains_key(&dof)
    }

    pub fn n_free_dofs(&self) -> usize {
        self.n_dofs() - self.constraints.len()
    }

    pub fn same_mesh(&self, other: &Space) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
            || (self.mesh.n_cells() == other.mesh.n_cells()
                && self.mesh.cells() == other.mesh.cells()
                && self.mesh.vertices() == other.mesh.vertices())
    }
}

/// Coefficient vector bound to a space.
#[derive(Clone, Debug)]
pub struct Field {
    pub space: Arc<Space>,
    pub coeffs: Vec<f64>,
}

impl Field {
    pub fn zeros(space: Arc<Space>) -> Self {
        let n = space.n_dofs();
        Self {
            space,
            coeffs: vec![0.0; n],
        }
    }

    /// Zero field with the Dirichlet values of the space applied.
    pub fn with_boundary_values(space: Arc<Space>) -> Self {
        let mut f = Self::zeros(space);
        f.apply_constraints();
        f
    }

    pub fn new(space: Arc<Space>, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), space.n_dofs());
        Self { space, coeffs }
    }

    /// Nodal interpolation of `f(x, comp)`.
    pub fn from_fn(space: Arc<Space>, f: impl Fn(&Point, usize) -> f64) -> Self {
        let nc = space.n_components();
        let coeffs = (0..space.n_dofs())
            .map(|d| f(&space.node_coords()[d / nc], d % nc))
            .collect();
        Self { space, coeffs }
    }

    pub fn apply_constraints(&mut self) {
        for (&d, &v) in self.space.constraints() {
            self.coeffs[d] = v;
        }
    }

    pub fn local(&self, cell: usize) -> Vec<f64> {
        self.space.cell_dofs(cell).iter().map(|&d| self.coeffs[d]).collect()
    }

    /// Component values at reference point `xi` of `cell`.
    pub fn value_at(&self, cell: usize, xi: &[f64; 2]) -> Vec<f64> {
        let nc = self.space.n_components();
        let phi = self.space.element().values(xi);
        let loc = self.local(cell);
        let mut out = vec![0.0; nc];
        for (i, p) in phi.iter().enumerate() {
            for c in 0..nc {
                out[c] += p * loc[i * nc + c];
            }
        }
        out
    }

    /// Physical gradients of each component at reference point `xi`.
    pub fn grad_at(&self, cell: usize, xi: &[f64; 2]) -> Vec<[f64; 2]> {
        let nc = self.space.n_components();
        let geo = CellGeometry::new(self.space.mesh(), cell);
        let g = self.space.element().grads(xi);
        let loc = self.local(cell);
        let mut out = vec![[0.0; 2]; nc];
        for (i, gi) in g.iter().enumerate() {
            let gp = geo.grad(gi);
            for c in 0..nc {
                out[c][0] += gp[0] * loc[i * nc + c];
                out[c][1] += gp[1] * loc[i * nc + c];
            }
        }
        out
    }

    /// Displacement gradient `G[i][j] = d u_i / d x_j` of a two-component field.
    pub fn grad_matrix(&self, cell: usize, xi: &[f64; 2]) -> Mat2 {
        debug_assert_eq!(self.space.n_components(), 2);
        let g = self.grad_at(cell, xi);
        [g[0], g[1]]
    }

    /// Physical Hessians of each component at reference point `xi`.
    pub fn hessian_at(&self, cell: usize, xi: &[f64; 2]) -> Vec<Mat2> {
        let nc = self.space.n_components();
        let geo = CellGeometry::new(self.space.mesh(), cell);
        let h = self.space.element().hessians(xi);
        let loc = self.local(cell);
        let mut out = vec![[[0.0; 2]; 2]; nc];
        for (i, hi) in h.iter().enumerate() {
            let hp = geo.hessian(hi);
            for c in 0..nc {
                for a in 0..2 {
                    for b in 0..2 {
                        out[c][a][b] += hp[a][b] * loc[i * nc + c];
                    }
                }
            }
        }
        out
    }

    /// Value at a physical point.
    pub fn eval(&self, x: &Point) -> Result<Vec<f64>> {
        let mesh = self.space.mesh();
        let cell = mesh
            .locate(x)
            .ok_or(Error::PointOutside { x: x[0], y: x[1] })?;
        Ok(self.value_at(cell, &mesh.to_reference(cell, x)))
    }

    pub fn norm_max(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn axpy(&mut self, a: f64, other: &Field) {
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }
}
