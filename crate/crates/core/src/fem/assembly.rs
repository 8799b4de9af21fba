//! Cell loops, physical shape-function values and a scalar diffusion-reaction
//! form used by tests and the model-error hierarchy.

use std::sync::Arc;

use rayon::prelude::*;

use super::basis::{reference_vertices, Tabulation};
use super::quadrature::{self, Quadrature};
use super::space::{CellGeometry, Field, Space};
use super::sparse::{CsrMatrix, SparseSystem, TripletBuilder};
use crate::error::Result;
use crate::mesh::{local_edge, Mesh, Point};
use crate::tensor::Mat2;

/// Physical basis data of one cell at the points of a rule.
#[derive(Clone, Debug)]
pub struct CellValues {
    pub geo: CellGeometry,
    pub x: Vec<Point>,
    /// Quadrature weight times `|det J|`.
    pub jxw: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub dphi: Vec<Vec<[f64; 2]>>,
    /// Empty unless requested.
    pub hess: Vec<Vec<Mat2>>,
}

impl CellValues {
    pub fn new(space: &Space, cell: usize, rule: &Quadrature, tab: &Tabulation, hessians: bool) -> Self {
        let geo = CellGeometry::new(space.mesh(), cell);
        let x = rule.points.iter().map(|p| geo.map(p)).collect();
        let jxw = rule.weights.iter().map(|w| w * geo.det.abs()).collect();
        let dphi = tab
            .grads
            .iter()
            .map(|gs| gs.iter().map(|g| geo.grad(g)).collect())
            .collect();
        let hess = if hessians {
            tab.hessians
                .iter()
                .map(|hs| hs.iter().map(|h| geo.hessian(h)).collect())
                .collect()
        } else {
            Vec::new()
        };
        Self {
            geo,
            x,
            jxw,
            phi: tab.values.clone(),
            dphi,
            hess,
        }
    }

    pub fn n_points(&self) -> usize {
        self.jxw.len()
    }
}

/// Quadrature on local edge `local` of `cell`, traversed from local vertex
/// `local + 1` to `local + 2`.
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub x: Vec<Point>,
    pub xi: Vec<[f64; 2]>,
    /// Weight times edge length.
    pub jxw: Vec<f64>,
    /// Outward unit normal of the cell.
    pub normal: [f64; 2],
    pub length: f64,
    /// End points; quadrature nodes sit at `a + t (b - a)`.
    pub a: Point,
    pub b: Point,
}

impl EdgeRule {
    pub fn new(mesh: &Mesh, cell: usize, local: usize, order: usize) -> Self {
        let (ia, ib) = local_edge(local);
        let p = mesh.cell_points(cell);
        let (a, b) = (p[ia], p[ib]);
        let r = reference_vertices();
        let (ra, rb) = (r[ia], r[ib]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let length = d[0].hypot(d[1]);
        let (ts, ws) = quadrature::line(order);
        Self {
            x: ts.iter().map(|t| [a[0] + t * d[0], a[1] + t * d[1]]).collect(),
            xi: ts
                .iter()
                .map(|t| [ra[0] + t * (rb[0] - ra[0]), ra[1] + t * (rb[1] - ra[1])])
                .collect(),
            jxw: ws.iter().map(|w| w * length).collect(),
            normal: [d[1] / length, -d[0] / length],
            length,
            a,
            b,
        }
    }

    pub fn n_points(&self) -> usize {
        self.jxw.len()
    }

    pub fn at(&self, t: f64) -> Point {
        [self.a[0] + t * (self.b[0] - self.a[0]), self.a[1] + t * (self.b[1] - self.a[1])]
    }
}

/// Element contribution: dense row-major matrix (may be empty) and vector
/// (may be empty) on `dofs`.
#[derive(Clone, Debug, Default)]
pub struct LocalSystem {
    pub dofs: Vec<usize>,
    pub matrix: Vec<f64>,
    pub vector: Vec<f64>,
}

/// Runs `kernel` on every cell in parallel and scatters the results.
pub fn assemble<F>(n_dofs: usize, n_cells: usize, kernel: F) -> Result<(CsrMatrix, Vec<f64>)>
where
    F: Fn(usize) -> Result<LocalSystem> + Sync + Send,
{
    let locals: Vec<LocalSystem> = (0..n_cells)
        .into_par_iter()
        .map(&kernel)
        .collect::<Result<_>>()?;
    let nnz: usize = locals.iter().map(|l| l.matrix.len()).sum();
    let mut trip = TripletBuilder::with_capacity(n_dofs, nnz);
    let mut rhs = vec![0.0; n_dofs];
    for l in &locals {
        if !l.matrix.is_empty() {
            trip.add_block(&l.dofs, &l.matrix);
        }
        for (&d, &v) in l.dofs.iter().zip(&l.vector) {
            rhs[d] += v;
        }
    }
    Ok((trip.build(), rhs))
}

/// Eliminates the constraints of `space`, solves, and wraps the result.
pub fn solve_on(space: Arc<Space>, matrix: &CsrMatrix, rhs: &[f64]) -> Result<Field> {
    let sys = SparseSystem::eliminate(matrix, rhs, space.constraints());
    let x = sys.solve_full()?;
    Ok(Field::new(space, x))
}

/// Coefficients of `-div(a grad u) + c u = f` at a point of a cell region.
pub type ScalarCoefficients<'a> = dyn Fn(&Point, i32) -> (f64, f64, f64) + Sync + 'a;

/// Assembles `(a grad u, grad v) + (c u, v)` and `(f, v)` on a scalar space.
pub fn assemble_scalar(space: &Space, order: usize, coef: &ScalarCoefficients) -> Result<(CsrMatrix, Vec<f64>)> {
    assert_eq!(space.n_components(), 1);
    let rule = quadrature::triangle(order)?;
    let tab = space.element().tabulate_rule(&rule);
    let mesh = space.mesh();
    assemble(space.n_dofs(), mesh.n_cells(), |c| {
        let cv = CellValues::new(space, c, &rule, &tab, false);
        let n = space.n_local_dofs();
        let mut k = vec![0.0; n * n];
        let mut f = vec![0.0; n];
        for q in 0..cv.n_points() {
            let (a, r, src) = coef(&cv.x[q], mesh.region(c));
            let w = cv.jxw[q];
            for i in 0..n {
                f[i] += w * src * cv.phi[q][i];
                for j in 0..n {
                    let gi = cv.dphi[q][i];
                    let gj = cv.dphi[q][j];
                    k[i * n + j] +=
                        w * (a * (gi[0] * gj[0] + gi[1] * gj[1]) + r * cv.phi[q][i] * cv.phi[q][j]);
                }
            }
        }
        Ok(LocalSystem {
            dofs: space.cell_dofs(c),
            matrix: k,
            vector: f,
        })
    })
}

/// `sum_K int_K f(x, region) . v` for every basis function `v` of `space`.
pub fn assemble_load(
    space: &Space,
    order: usize,
    f: &(dyn Fn(&Point, i32) -> Vec<f64> + Sync),
) -> Result<Vec<f64>> {
    let rule = quadrature::triangle(order)?;
    let tab = space.element().tabulate_rule(&rule);
    let nc = space.n_components();
    let mesh = space.mesh();
    let (_, v) = assemble(space.n_dofs(), mesh.n_cells(), |c| {
        let cv = CellValues::new(space, c, &rule, &tab, false);
        let mut vec = vec![0.0; space.n_local_dofs()];
        for q in 0..cv.n_points() {
            let val = f(&cv.x[q], mesh.region(c));
            for i in 0..space.n_local_nodes() {
                for comp in 0..nc {
                    vec[i * nc + comp] += cv.jxw[q] * val[comp] * cv.phi[q][i];
                }
            }
        }
        Ok(LocalSystem {
            dofs: space.cell_dofs(c),
            matrix: Vec::new(),
            vector: vec,
        })
    })?;
    Ok(v)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
