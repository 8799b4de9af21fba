//! Quantities of interest: evaluation, derivatives with respect to the
//! discrete unknowns, and sign-weighted combination of several goals.

use crate::error::{Error, Result};
use crate::fem::{quadrature, CellValues, EdgeRule, Field, Space};
use crate::mesh::Point;
use crate::tensor::{m_vec, Mat2, Vec2};

/// `d[i][j][k][l] = dP_ij / dG_kl`.
pub type Tangent = [[Mat2; 2]; 2];

/// Pointwise stress law `P(grad u, p)` used by flux goals and residuals.
/// Rows of `P` are components, columns are directions.
pub trait Constitutive: Sync {
    fn stress(&self, cell: usize, grad: &Mat2, p: f64) -> Result<Mat2>;
    /// Derivatives with respect to the gradient and the pressure.
    fn stress_derivative(&self, cell: usize, grad: &Mat2, p: f64) -> Result<(Tangent, Mat2)>;
    /// Whether `P` is affine in `(grad u, p)`.
    fn is_affine(&self) -> bool;
}

/// Displacement and optional pressure.
#[derive(Clone, Copy, Debug)]
pub struct State<'a> {
    pub u: &'a Field,
    pub p: Option<&'a Field>,
}

impl<'a> State<'a> {
    pub fn new(u: &'a Field) -> Self {
        Self { u, p: None }
    }

    pub fn mixed(u: &'a Field, p: &'a Field) -> Self {
        Self { u, p: Some(p) }
    }

    fn pressure(&self, cell: usize, xi: &[f64; 2]) -> f64 {
        self.p.map_or(0.0, |p| p.value_at(cell, xi)[0])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FluxDirection {
    /// `(P n) . n`
    Normal,
    /// `(P n) . d`
    Fixed(Vec2),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Goal {
    /// `int_omega sum_c weights[c] u_c` over the cells of one region.
    SubdomainIntegral { region: i32, weights: Vec<f64> },
    /// `scale * int_Gamma (P n) . d` over the edges with boundary tag `tag`.
    BoundaryFlux {
        tag: i32,
        direction: FluxDirection,
        scale: f64,
    },
    PointValue { point: Point, component: usize },
    /// `sum_i w_i J_i`; `weights` holds resolved sign weights and falls back
    /// to `omegas` until resolved.
    Combined {
        goals: Vec<Goal>,
        omegas: Vec<f64>,
        weights: Option<Vec<f64>>,
    },
}

/// Goal derivative with respect to displacement and pressure test functions.
#[derive(Clone, Debug, Default)]
pub struct GoalDerivative {
    pub u: Vec<f64>,
    /// Empty when no pressure space is given.
    pub p: Vec<f64>,
}

fn order_for(space: &Space) -> usize {
    (2 * space.degree() + 2).min(8)
}

fn region_cells(space: &Space, region: i32) -> Result<Vec<usize>> {
    let cells = space.mesh().cells_in_regions(&[region]);
    if cells.is_empty() {
        return Err(Error::UnknownRegion(region));
    }
    Ok(cells)
}

/// Boundary edges with `tag` as `(cell, local edge)`.
fn tagged_sides(space: &Space, tag: i32) -> Result<Vec<(usize, usize)>> {
    let mesh = space.mesh();
    let sides: Vec<_> = (0..mesh.n_edges())
        .filter(|&e| mesh.edge_tag(e) == Some(tag))
        .filter_map(|e| mesh.edge_sides(e)[0].map(|s| (s.cell, s.local)))
        .collect();
    if sides.is_empty() {
        return Err(Error::UnknownBoundaryTag(tag));
    }
    Ok(sides)
}

fn need_law(law: Option<&dyn Constitutive>) -> Result<&dyn Constitutive> {
    law.ok_or_else(|| Error::InvalidArgument("boundary flux goal needs a stress law".into()))
}

fn flux_dir(direction: FluxDirection, n: &Vec2) -> Vec2 {
    match direction {
        FluxDirection::Normal => *n,
        FluxDirection::Fixed(d) => d,
    }
}

impl Goal {
    /// Combined goal; components must not be combined themselves.
    pub fn combined(goals: Vec<Goal>, omegas: Vec<f64>) -> Result<Self> {
        if goals.len() != omegas.len() {
            return Err(Error::InvalidArgument(format!(
                "{} goals but {} weights",
                goals.len(),
                omegas.len()
            )));
        }
        if goals.iter().any(|g| matches!(g, Goal::Combined { .. })) {
            return Err(Error::InvalidArgument("combined goals cannot be nested".into()));
        }
        if let Some(w) = omegas.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("goal weight {w} must be >= 0")));
        }
        Ok(Goal::Combined {
            goals,
            omegas,
            weights: None,
        })
    }

    /// Whether `J` is affine for the given law.
    pub fn is_affine(&self, law: Option<&dyn Constitutive>) -> bool {
        match self {
            Goal::SubdomainIntegral { .. } | Goal::PointValue { .. } => true,
            Goal::BoundaryFlux { .. } => law.is_none_or(|l| l.is_affine()),
            Goal::Combined { goals, .. } => goals.iter().all(|g| g.is_affine(law)),
        }
    }

    pub fn evaluate(&self, state: State, law: Option<&dyn Constitutive>) -> Result<f64> {
        let u = state.u;
        let space = &*u.space;
        match self {
            Goal::SubdomainIntegral { region, weights } => {
                let rule = quadrature(order_for(space))?;
                let tab = space.element().tabulate_rule(&rule);
                let mut total = 0.0;
                for c in region_cells(space, *region)? {
                    let cv = CellValues::new(space, c, &rule, &tab, false);
                    let loc = u.local(c);
                    let nc = space.n_components();
                    for q in 0..cv.n_points() {
                        for (i, phi) in cv.phi[q].iter().enumerate() {
                            for (comp, w) in weights.iter().enumerate().take(nc) {
                                total += cv.jxw[q] * w * phi * loc[i * nc + comp];
                            }
                        }
                    }
                }
                Ok(total)
            }
            Goal::BoundaryFlux {
                tag,
                direction,
                scale,
            } => {
                let law = need_law(law)?;
                let mesh = space.mesh();
                let mut total = 0.0;
                for (c, l) in tagged_sides(space, *tag)? {
                    let er = EdgeRule::new(mesh, c, l, order_for(space));
                    let d = flux_dir(*direction, &er.normal);
                    for q in 0..er.n_points() {
                        let g = u.grad_matrix(c, &er.xi[q]);
                        let p = law.stress(c, &g, state.pressure(c, &er.xi[q]))?;
                        let t = m_vec(&p, &er.normal);
                        total += er.jxw[q] * (t[0] * d[0] + t[1] * d[1]);
                    }
                }
                Ok(scale * total)
            }
            Goal::PointValue { point, component } => Ok(u.eval(point)?[*component]),
            Goal::Combined { goals, .. } => {
                let w = self.combination_weights();
                let mut total = 0.0;
                for (g, wi) in goals.iter().zip(w) {
                    if wi != 0.0 {
                        total += wi * g.evaluate(state, law)?;
                    }
                }
                Ok(total)
            }
        }
    }

    /// Resolved sign weights, or the raw `omegas` before resolution.
    pub fn combination_weights(&self) -> Vec<f64> {
        match self {
            Goal::Combined { omegas, weights, .. } => weights.clone().unwrap_or_else(|| omegas.clone()),
            _ => vec![1.0],
        }
    }

    /// `J'(u)(phi_i)` for every basis function of `test_u` (and `test_p`).
    /// The test spaces must live on the mesh of `state.u`.
    pub fn derivative_rhs(
        &self,
        state: State,
        law: Option<&dyn Constitutive>,
        test_u: &Space,
        test_p: Option<&Space>,
    ) -> Result<GoalDerivative> {
        if !test_u.same_mesh(&state.u.space) || test_p.is_some_and(|s| !s.same_mesh(test_u)) {
            return Err(Error::MeshMismatch);
        }
        let nc = test_u.n_components();
        let mut out = GoalDerivative {
            u: vec![0.0; test_u.n_dofs()],
            p: vec![0.0; test_p.map_or(0, |s| s.n_dofs())],
        };
        match self {
            Goal::SubdomainIntegral { region, weights } => {
                let rule = quadrature(order_for(test_u))?;
                let tab = test_u.element().tabulate_rule(&rule);
                for c in region_cells(test_u, *region)? {
                    let cv = CellValues::new(test_u, c, &rule, &tab, false);
                    let nodes = test_u.cell_nodes(c);
                    for q in 0..cv.n_points() {
                        for (i, phi) in cv.phi[q].iter().enumerate() {
                            for (comp, w) in weights.iter().enumerate().take(nc) {
                                out.u[nodes[i] * nc + comp] += cv.jxw[q] * w * phi;
                            }
                        }
                    }
                }
            }
            Goal::BoundaryFlux {
                tag,
                direction,
                scale,
            } => {
                let law = need_law(law)?;
                let mesh = test_u.mesh();
                let order = order_for(test_u).max(order_for(&state.u.space));
                for (c, l) in tagged_sides(test_u, *tag)? {
                    let er = EdgeRule::new(mesh, c, l, order);
                    let d = flux_dir(*direction, &er.normal);
                    let n = er.normal;
                    let geo = crate::fem::CellGeometry::new(mesh, c);
                    let nodes = test_u.cell_nodes(c);
                    for q in 0..er.n_points() {
                        let xi = &er.xi[q];
                        let g = state.u.grad_matrix(c, xi);
                        let (dp, dpp) = law.stress_derivative(c, &g, state.pressure(c, xi))?;
                        let w = scale * er.jxw[q];
                        for (i, gr) in test_u.element().grads(xi).iter().enumerate() {
                            let gp = geo.grad(gr);
                            for comp in 0..nc {
                                // dP[e_comp (x) grad phi] n . d
                                let mut val = 0.0;
                                for a in 0..2 {
                                    for b in 0..2 {
                                        let dpab = dp[a][b][comp][0] * gp[0] + dp[a][b][comp][1] * gp[1];
                                        val += dpab * n[b] * d[a];
                                    }
                                }
                                out.u[nodes[i] * nc + comp] += w * val;
                            }
                        }
                        if let Some(sp) = test_p {
                            let t = m_vec(&dpp, &n);
                            let val = t[0] * d[0] + t[1] * d[1];
                            let pn = sp.cell_nodes(c);
                            for (i, phi) in sp.element().values(xi).iter().enumerate() {
                                out.p[pn[i]] += w * val * phi;
                            }
                        }
                    }
                }
            }
            Goal::PointValue { point, component } => {
                let mesh = test_u.mesh();
                let c = mesh
                    .locate(point)
                    .ok_or(Error::PointOutside {
                        x: point[0],
                        y: point[1],
                    })?;
                let xi = mesh.to_reference(c, point);
                let nodes = test_u.cell_nodes(c);
                for (i, phi) in test_u.element().values(&xi).iter().enumerate() {
                    out.u[nodes[i] * nc + component] += phi;
                }
            }
            Goal::Combined { goals, .. } => {
                for (g, wi) in goals.iter().zip(self.combination_weights()) {
                    if wi == 0.0 {
                        continue;
                    }
                    let d = g.derivative_rhs(state, law, test_u, test_p)?;
                    for (o, v) in out.u.iter_mut().zip(&d.u) {
                        *o += wi * v;
                    }
                    for (o, v) in out.p.iter_mut().zip(&d.p) {
                        *o += wi * v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Resolves the sign weights of a combined goal from a discrete state and
    /// a higher-order approximation of it. No-op for single goals.
    pub fn resolve(&mut self, h: State, h2: State, law: Option<&dyn Constitutive>) -> Result<()> {
        if let Goal::Combined {
            goals,
            omegas,
            weights,
        } = self
        {
            *weights = Some(resolve_signs(goals, omegas, h, h2, law)?);
        }
        Ok(())
    }
}

/// `w_i = omega_i sign(J_i(u_h2) - J_i(u_h)) / |J_i(u_h)|`.
pub fn resolve_signs(
    goals: &[Goal],
    omegas: &[f64],
    h: State,
    h2: State,
    law: Option<&dyn Constitutive>,
) -> Result<Vec<f64>> {
    let vh = goals.iter().map(|g| g.evaluate(h, law)).collect::<Result<Vec<_>>>()?;
    let vh2 = goals.iter().map(|g| g.evaluate(h2, law)).collect::<Result<Vec<_>>>()?;
    Ok(sign_weights(&vh, &vh2, omegas))
}

/// Sign weights from goal values. A vanishing `J_i(u_h)` uses a unit
/// denominator; a vanishing difference drops the goal.
pub fn sign_weights(values_h: &[f64], values_h2: &[f64], omegas: &[f64]) -> Vec<f64> {
    values_h
        .iter()
        .zip(values_h2)
        .zip(omegas)
        .enumerate()
        .map(|(i, ((&jh, &jh2), &om))| {
            let scale = jh.abs().max(jh2.abs());
            let diff = jh2 - jh;
            if diff.abs() <= 1e-15 * scale || diff == 0.0 {
                log::warn!("goal {i}: no error direction (J(u_h2) = J(u_h)); dropped from the combination");
                return 0.0;
            }
            let denom = if jh.abs() < 1e-14 * scale { 1.0 } else { jh.abs() };
            om * diff.signum() / denom
        })
        .collect()
}
