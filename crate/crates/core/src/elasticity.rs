//! Small-strain plane elasticity with an additive active-fiber stress
//! `beta T e_A (x) e_A` on the fiber region.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{
    assemble, quadrature, CellValues, CsrMatrix, EdgeRule, Field, LocalSystem, Space, SparseSystem,
};
use crate::goals::{Constitutive, Goal, State, Tangent};
use crate::mesh::{Mesh, Point};
use crate::tensor::{Mat2, Vec2};

pub type VectorFn = Arc<dyn Fn(&Point) -> Vec2 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Young {
    pub e: f64,
    pub nu: f64,
}

/// Hooke's law per region tag.
#[derive(Clone, Debug)]
pub struct LinearMaterial {
    regions: BTreeMap<i32, Young>,
    default: Option<Young>,
    pub plane_strain: bool,
}

fn check_young(e: f64, nu: f64) -> Result<Young> {
    if !(e > 0.0 && e.is_finite()) || !(0.0..0.5).contains(&nu) {
        return Err(Error::InvalidArgument(format!(
            "need E > 0 and 0 <= nu < 0.5, got E = {e}, nu = {nu}"
        )));
    }
    Ok(Young { e, nu })
}

impl LinearMaterial {
    /// Empty plane-strain material; add regions with [`with_region`](Self::with_region).
    pub fn new() -> Self {
        Self {
            regions: BTreeMap::new(),
            default: None,
            plane_strain: true,
        }
    }

    /// Same parameters in every region.
    pub fn uniform(e: f64, nu: f64) -> Result<Self> {
        Ok(Self {
            default: Some(check_young(e, nu)?),
            ..Self::new()
        })
    }

    pub fn with_region(mut self, tag: i32, e: f64, nu: f64) -> Result<Self> {
        self.regions.insert(tag, check_young(e, nu)?);
        Ok(self)
    }

    pub fn young(&self, region: i32) -> Result<Young> {
        self.regions
            .get(&region)
            .copied()
            .or(self.default)
            .ok_or(Error::MissingMaterial(region))
    }

    /// `(lambda, mu)`; plane stress uses the reduced `lambda`.
    pub fn lame(&self, region: i32) -> Result<(f64, f64)> {
        let Young { e, nu } = self.young(region)?;
        let mu = e / (2.0 * (1.0 + nu));
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        if self.plane_strain {
            Ok((lambda, mu))
        } else {
            Ok((2.0 * lambda * mu / (lambda + 2.0 * mu), mu))
        }
    }
}

impl Default for LinearMaterial {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FiberDirection {
    Constant(Vec2),
    /// `e_theta` around `center`, evaluated at the cell centroid.
    Circumferential { center: Point },
}

#[derive(Clone, Debug)]
pub struct ActiveFibers {
    pub regions: Vec<i32>,
    pub beta: f64,
    pub tension: f64,
    pub direction: FiberDirection,
}

impl ActiveFibers {
    pub fn new(regions: Vec<i32>, beta: f64, tension: f64, direction: FiberDirection) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) || !tension.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "activation must lie in [0, 1] with finite tension, got beta = {beta}, T = {tension}"
            )));
        }
        Ok(Self {
            regions,
            beta,
            tension,
            direction,
        })
    }

    /// Unit fiber direction of a cell.
    pub fn direction(&self, mesh: &Mesh, cell: usize) -> Vec2 {
        let d = match self.direction {
            FiberDirection::Constant(d) => d,
            FiberDirection::Circumferential { center } => {
                let x = mesh.centroid(cell);
                [-(x[1] - center[1]), x[0] - center[0]]
            }
        };
        let n = d[0].hypot(d[1]);
        [d[0] / n, d[1] / n]
    }

    /// `beta T e (x) e` inside the fiber region, zero elsewhere.
    pub fn stress(&self, mesh: &Mesh, cell: usize) -> Mat2 {
        if !self.regions.contains(&mesh.region(cell)) {
            return [[0.0; 2]; 2];
        }
        let e = self.direction(mesh, cell);
        let s = self.beta * self.tension;
        [[s * e[0] * e[0], s * e[0] * e[1]], [s * e[1] * e[0], s * e[1] * e[1]]]
    }
}

/// Body force and tractions on Neumann boundary tags.
#[derive(Clone, Default)]
pub struct Loads {
    pub body: Option<VectorFn>,
    pub tractions: Vec<(i32, VectorFn)>,
}

impl Loads {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn traction(&self, tag: i32) -> Option<&VectorFn> {
        self.tractions.iter().find(|(t, _)| *t == tag).map(|(_, f)| f)
    }
}

#[derive(Clone, Copy, Debug)]
struct CellLaw {
    lambda: f64,
    mu: f64,
    active: Mat2,
}

/// Per-cell Hooke law plus active stress: `sigma_A = lambda tr(eps) I + 2 mu eps + A`.
#[derive(Clone, Debug)]
pub struct ElasticLaw {
    cells: Vec<CellLaw>,
}

impl ElasticLaw {
    pub fn new(mesh: &Mesh, mat: &LinearMaterial, fibers: Option<&ActiveFibers>) -> Result<Self> {
        let cells = (0..mesh.n_cells())
            .map(|c| {
                let (lambda, mu) = mat.lame(mesh.region(c))?;
                let active = fibers.map_or([[0.0; 2]; 2], |f| f.stress(mesh, c));
                Ok(CellLaw { lambda, mu, active })
            })
            .collect::<Result<_>>()?;
        Ok(Self { cells })
    }

    pub fn active_stress(&self, cell: usize) -> Mat2 {
        self.cells[cell].active
    }
}

impl Constitutive for ElasticLaw {
    fn stress(&self, cell: usize, g: &Mat2, _p: f64) -> Result<Mat2> {
        let CellLaw { lambda, mu, active } = self.cells[cell];
        let tr = g[0][0] + g[1][1];
        let mut s = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                s[i][j] = mu * (g[i][j] + g[j][i]) + active[i][j];
            }
            s[i][i] += lambda * tr;
        }
        Ok(s)
    }

    fn stress_derivative(&self, cell: usize, _g: &Mat2, _p: f64) -> Result<(Tangent, Mat2)> {
        let CellLaw { lambda, mu, .. } = self.cells[cell];
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut t = [[[[0.0; 2]; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        t[i][j][k][l] = lambda * d(i, j) * d(k, l) + mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k));
                    }
                }
            }
        }
        Ok((t, [[0.0; 2]; 2]))
    }

    fn is_affine(&self) -> bool {
        true
    }
}

fn load_order(space: &Space) -> usize {
    (2 * space.degree() + 2).min(8)
}

/// `int_Omega B . v + sum_N int_Gamma_N B_N . v` on a two-component space.
pub fn external_load(space: &Space, loads: &Loads) -> Result<Vec<f64>> {
    let mesh = space.mesh();
    let nc = space.n_components();
    let mut rhs = vec![0.0; space.n_dofs()];
    if let Some(body) = &loads.body {
        let rule = quadrature(load_order(space))?;
        let tab = space.element().tabulate_rule(&rule);
        let (_, v) = assemble(space.n_dofs(), mesh.n_cells(), |c| {
            let cv = CellValues::new(space, c, &rule, &tab, false);
            let mut f = vec![0.0; space.n_local_dofs()];
            for q in 0..cv.n_points() {
                let b = body(&cv.x[q]);
                for (i, phi) in cv.phi[q].iter().enumerate() {
                    for comp in 0..nc {
                        f[i * nc + comp] += cv.jxw[q] * b[comp] * phi;
                    }
                }
            }
            Ok(LocalSystem {
                dofs: space.cell_dofs(c),
                matrix: Vec::new(),
                vector: f,
            })
        })?;
        rhs = v;
    }
    let tags = mesh.boundary_tags();
    for (tag, g) in &loads.tractions {
        if !tags.contains(tag) {
            return Err(Error::UnknownBoundaryTag(*tag));
        }
        for e in 0..mesh.n_edges() {
            if mesh.edge_tag(e) != Some(*tag) {
                continue;
            }
            let side = mesh.edge_sides(e)[0].expect("boundary edge has one cell");
            let er = EdgeRule::new(mesh, side.cell, side.local, load_order(space));
            let dofs = space.cell_dofs(side.cell);
            for q in 0..er.n_points() {
                let t = g(&er.x[q]);
                for (i, phi) in space.element().values(&er.xi[q]).iter().enumerate() {
                    for comp in 0..nc {
                        rhs[dofs[i * nc + comp]] += er.jxw[q] * t[comp] * phi;
                    }
                }
            }
        }
    }
    Ok(rhs)
}

/// Full (unconstrained) stiffness and right-hand side `l_E + l_A` of an affine
/// stress law: the matrix is `dP/dG`, the law's stress at `G = 0` moves to
/// the right-hand side.
pub fn assemble_full(space: &Space, law: &dyn Constitutive, loads: &Loads) -> Result<(CsrMatrix, Vec<f64>)> {
    if space.n_components() != 2 {
        return Err(Error::IncompatibleSpaces("elasticity needs two components".into()));
    }
    let rule = quadrature(2 * space.degree())?;
    let tab = space.element().tabulate_rule(&rule);
    let (k, mut rhs) = assemble(space.n_dofs(), space.mesh().n_cells(), |c| {
        let cv = CellValues::new(space, c, &rule, &tab, false);
        let nn = space.n_local_nodes();
        let n = 2 * nn;
        let mut mat = vec![0.0; n * n];
        let mut vec = vec![0.0; n];
        for q in 0..cv.n_points() {
            let (d, _) = law.stress_derivative(c, &[[0.0; 2]; 2], 0.0)?;
            let s0 = law.stress(c, &[[0.0; 2]; 2], 0.0)?;
            let w = cv.jxw[q];
            let dphi = &cv.dphi[q];
            for i in 0..nn {
                for ci in 0..2 {
                    vec[2 * i + ci] -= w * (s0[ci][0] * dphi[i][0] + s0[ci][1] * dphi[i][1]);
                    for j in 0..nn {
                        for cj in 0..2 {
                            let mut v = 0.0;
                            for b in 0..2 {
                                for l in 0..2 {
                                    v += d[ci][b][cj][l] * dphi[i][b] * dphi[j][l];
                                }
                            }
                            mat[(2 * i + ci) * n + 2 * j + cj] += w * v;
                        }
                    }
                }
            }
        }
        Ok(LocalSystem {
            dofs: space.cell_dofs(c),
            matrix: mat,
            vector: vec,
        })
    })?;
    for (r, e) in rhs.iter_mut().zip(external_load(space, loads)?) {
        *r += e;
    }
    Ok((k, rhs))
}

/// Primal system `a(u, v) = l_E(v) + l_A(v)` with the space's Dirichlet data eliminated.
pub fn assemble_primal(
    space: &Space,
    mat: &LinearMaterial,
    fibers: Option<&ActiveFibers>,
    loads: &Loads,
) -> Result<SparseSystem> {
    let law = ElasticLaw::new(space.mesh(), mat, fibers)?;
    let (k, f) = assemble_full(space, &law, loads)?;
    Ok(SparseSystem::eliminate(&k, &f, space.constraints()))
}

pub fn solve_primal(space: Arc<Space>, law: &dyn Constitutive, loads: &Loads) -> Result<Field> {
    let (k, f) = assemble_full(&space, law, loads)?;
    let x = SparseSystem::eliminate(&k, &f, space.constraints()).solve_full()?;
    Ok(Field::new(space, x))
}

/// `l(v) - a(u, v)` for all basis functions of the space of `u`.
pub fn residual_vector(k: &CsrMatrix, f: &[f64], u: &Field) -> Vec<f64> {
    k.matvec(&u.coeffs)
        .iter()
        .zip(f)
        .map(|(ku, fi)| fi - ku)
        .collect()
}

/// Stress `sigma_A(u)` at each cell centroid (exact per cell for degree 1).
pub fn sigma_active(u: &Field, law: &dyn Constitutive) -> Result<Vec<Mat2>> {
    (0..u.space.mesh().n_cells())
        .map(|c| law.stress(c, &u.grad_matrix(c, &[1.0 / 3.0, 1.0 / 3.0]), 0.0))
        .collect()
}

/// Homogeneous constraints of a space.
pub fn homogeneous_constraints(space: &Space) -> BTreeMap<usize, f64> {
    space.constraints().keys().map(|&d| (d, 0.0)).collect()
}

/// Dual system `a(v, z) = J(v)` on `space` (homogeneous Dirichlet data).
pub fn assemble_dual(space: &Arc<Space>, law: &dyn Constitutive, goal: &Goal) -> Result<SparseSystem> {
    if !goal.is_affine(Some(law)) {
        return Err(Error::NonlinearGoal);
    }
    let (k, _) = assemble_full(space, law, &Loads::none())?;
    let zero = Field::zeros(space.clone());
    let rhs = goal.derivative_rhs(State::new(&zero), Some(law), space, None)?.u;
    Ok(SparseSystem::eliminate(&k.transpose(), &rhs, &homogeneous_constraints(space)))
}

pub fn solve_dual(space: Arc<Space>, law: &dyn Constitutive, goal: &Goal) -> Result<Field> {
    let x = assemble_dual(&space, law, goal)?.solve_full()?;
    Ok(Field::new(space, x))
}
