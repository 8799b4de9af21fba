//! Stationary simplified fluid-structure interaction model: a vector Poisson
//! problem for the velocity `v` in the fluid part `F`, coupled through the
//! linearized ALE determinant `1 + div u` to the deformation `u` on the whole
//! domain. Find `v in H1_0(F)^2`, `u in H1_0(Omega)^2` with
//!
//! `((1 + div u) grad v, grad phi)_F + (grad u, grad phi)_S + (grad u, grad psi)_F = (f, phi)`
//!
//! for all `phi in H1_0(Omega)^2`, `psi in H1_0(F)^2`.
//!
//! Unknowns are stacked as `[v; u]`. Residual rows follow the same layout:
//! the rows at `v` dofs are the `psi` equations, the rows at `u` dofs the
//! `phi` equations, so both share the unknown's Dirichlet constraints.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dwr::{signed_contributions, weight, DwrReport, Localization};
use crate::elasticity::VectorFn;
use crate::error::{Error, Result};
use crate::fem::{assemble, extrapolate, interpolate, quadrature, CellGeometry, CellValues, CsrMatrix, DirichletBc, EdgeRule, Field, LocalSystem, Space, SparseSystem};
use crate::mesh::{Mesh, Point};
use crate::tensor::{Mat2, Vec2};

/// Mesh split into fluid and solid cells with the spaces of both unknowns.
#[derive(Clone, Debug)]
pub struct FsiDomain {
    pub fluid: i32,
    pub solid: i32,
    pub v_space: Arc<Space>,
    pub u_space: Arc<Space>,
    /// Edges between a fluid and a solid cell.
    pub interface: Vec<usize>,
}

impl FsiDomain {
    pub fn new(mesh: Arc<Mesh>, fluid: i32, solid: i32, degree: usize) -> Result<Self> {
        if fluid == solid {
            return Err(Error::InvalidArgument("fluid and solid tags coincide".into()));
        }
        for c in 0..mesh.n_cells() {
            let r = mesh.region(c);
            if r != fluid && r != solid {
                return Err(Error::InvalidMesh(format!("cell {c} has region {r}, neither fluid nor solid")));
            }
        }
        for tag in [fluid, solid] {
            if mesh.cells_in_regions(&[tag]).is_empty() {
                return Err(Error::UnknownRegion(tag));
            }
        }
        let bcs: Vec<DirichletBc> = mesh.boundary_tags().into_iter().map(|t| DirichletBc::zero(t, 2)).collect();
        let u_space = Space::new(mesh.clone(), degree, 2, &bcs)?;
        let mut v_space = Space::unconstrained(mesh.clone(), degree, 2)?;
        // v lives on nodes strictly inside F
        let mut inside = vec![false; v_space.n_nodes()];
        for c in mesh.cells_in_regions(&[fluid]) {
            for &n in v_space.cell_nodes(c) {
                inside[n] = true;
            }
        }
        for c in mesh.cells_in_regions(&[solid]) {
            for &n in v_space.cell_nodes(c) {
                inside[n] = false;
            }
        }
        for e in 0..mesh.n_edges() {
            if mesh.is_boundary_edge(e) {
                for n in v_space.edge_nodes(e) {
                    inside[n] = false;
                }
            }
        }
        for (n, _) in inside.iter().enumerate().filter(|(_, &i)| !i) {
            v_space.constrain(2 * n, 0.0);
            v_space.constrain(2 * n + 1, 0.0);
        }
        let interface = (0..mesh.n_edges())
            .filter(|&e| match mesh.edge_sides(e) {
                [Some(a), Some(b)] => mesh.region(a.cell) != mesh.region(b.cell),
                _ => false,
            })
            .collect();
        Ok(Self {
            fluid,
            solid,
            v_space: Arc::new(v_space),
            u_space: Arc::new(u_space),
            interface,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.u_space.mesh()
    }

    pub fn degree(&self) -> usize {
        self.u_space.degree()
    }

    /// Same partition one degree higher.
    pub fn enriched(&self) -> Result<Self> {
        Self::new(self.mesh().clone(), self.fluid, self.solid, self.degree() + 1)
    }

    pub fn n_v(&self) -> usize {
        self.v_space.n_dofs()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_v() + self.u_space.n_dofs()
    }

    pub fn n_free_dofs(&self) -> usize {
        self.v_space.n_free_dofs() + self.u_space.n_free_dofs()
    }

    /// Constraints of the stacked system (all homogeneous).
    pub fn constraints(&self) -> BTreeMap<usize, f64> {
        let nv = self.n_v();
        self.v_space
            .constraints()
            .keys()
            .map(|&d| (d, 0.0))
            .chain(self.u_space.constraints().keys().map(|&d| (nv + d, 0.0)))
            .collect()
    }

    pub fn stack(&self, v: &Field, u: &Field) -> Vec<f64> {
        let mut x = v.coeffs.clone();
        x.extend_from_slice(&u.coeffs);
        x
    }

    pub fn split(&self, x: &[f64]) -> (Field, Field) {
        let nv = self.n_v();
        (
            Field::new(self.v_space.clone(), x[..nv].to_vec()),
            Field::new(self.u_space.clone(), x[nv..].to_vec()),
        )
    }

    fn is_fluid(&self, cell: usize) -> bool {
        self.mesh().region(cell) == self.fluid
    }
}

/// Domain, forcing `scale * f` and whether the ALE coefficient is active.
#[derive(Clone)]
pub struct FsiProblem {
    pub domain: FsiDomain,
    pub forcing: VectorFn,
    pub scale: f64,
    /// Replaces `1 + div u` by 1, which decouples `v` from `u`.
    pub frozen: bool,
}

#[derive(Clone, Debug)]
pub struct FsiSolution {
    pub v: Field,
    pub u: Field,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Linear goals of the toy model.
#[derive(Clone, Debug, PartialEq)]
pub enum FsiGoal {
    /// `int_I (grad u n_s) . e_component`, taken from the solid side.
    InterfaceFlux { component: usize },
    /// `int_F v . weights`.
    VelocityIntegral { weights: Vec2 },
}

/// Smooth bump of height `amplitude` centered at `center`, pointing along `direction`.
pub fn bump(center: Point, radius: f64, amplitude: f64, direction: Vec2) -> VectorFn {
    Arc::new(move |x: &Point| {
        let r2 = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)) / (radius * radius);
        let s = amplitude * (-r2).exp();
        [s * direction[0], s * direction[1]]
    })
}

fn grad2(loc: &[f64], dphi: &[[f64; 2]]) -> Mat2 {
    let mut g = [[0.0; 2]; 2];
    for (i, d) in dphi.iter().enumerate() {
        for c in 0..2 {
            g[c][0] += loc[2 * i + c] * d[0];
            g[c][1] += loc[2 * i + c] * d[1];
        }
    }
    g
}

fn contract(g: &Mat2, d: &[f64; 2]) -> Vec2 {
    [g[0][0] * d[0] + g[0][1] * d[1], g[1][0] * d[0] + g[1][1] * d[1]]
}

impl FsiProblem {
    pub fn new(domain: FsiDomain, forcing: VectorFn) -> Self {
        Self {
            domain,
            forcing,
            scale: 1.0,
            frozen: false,
        }
    }

    /// The same problem on another domain (refined mesh or higher degree).
    pub fn on(&self, domain: FsiDomain) -> Self {
        Self {
            domain,
            forcing: self.forcing.clone(),
            scale: self.scale,
            frozen: self.frozen,
        }
    }

    // The highest rule on every level, so that the enriched residual at the
    // embedded state reproduces the discrete one for non-polynomial forcing.
    fn order(&self) -> usize {
        8
    }

    fn coefficient(&self, cell: usize, gu: &Mat2) -> Result<f64> {
        if self.frozen {
            return Ok(1.0);
        }
        let a = 1.0 + gu[0][0] + gu[1][1];
        if a <= 0.0 || !a.is_finite() {
            return Err(Error::DegenerateCoefficient { cell, value: a });
        }
        Ok(a)
    }

    /// Residual `(f, phi) - A(v, u)` and optionally the tangent `A'(v, u)`.
    pub fn assemble(&self, x: &[f64], with_tangent: bool) -> Result<(Option<CsrMatrix>, Vec<f64>)> {
        let d = &self.domain;
        let us = &*d.u_space;
        let nv = d.n_v();
        let rule = quadrature(self.order())?;
        let tab = us.element().tabulate_rule(&rule);
        let nn = us.n_local_nodes();
        let (k, r) = assemble(d.n_dofs(), d.mesh().n_cells(), |c| {
            let cv = CellValues::new(us, c, &rule, &tab, false);
            let udofs: Vec<usize> = us.cell_dofs(c).iter().map(|&i| nv + i).collect();
            let fluid = d.is_fluid(c);
            // local layout: [v dofs; u dofs] in fluid cells, u dofs in solid cells
            let (dofs, off) = if fluid {
                let mut dd = d.v_space.cell_dofs(c);
                dd.extend(&udofs);
                (dd, 2 * nn)
            } else {
                (udofs, 0)
            };
            let lv: Vec<f64> = if fluid { dofs[..2 * nn].iter().map(|&i| x[i]).collect() } else { Vec::new() };
            let lu: Vec<f64> = dofs[off..].iter().map(|&i| x[i]).collect();
            let n = dofs.len();
            let mut km = if with_tangent { vec![0.0; n * n] } else { Vec::new() };
            let mut rv = vec![0.0; n];
            for q in 0..cv.n_points() {
                let w = cv.jxw[q];
                let dphi = &cv.dphi[q];
                let gu = grad2(&lu, dphi);
                let f = (self.forcing)(&cv.x[q]);
                for (i, phi) in cv.phi[q].iter().enumerate() {
                    for comp in 0..2 {
                        rv[off + 2 * i + comp] += w * self.scale * f[comp] * phi;
                    }
                }
                if fluid {
                    let gv = grad2(&lv, dphi);
                    let a = self.coefficient(c, &gu)?;
                    for i in 0..nn {
                        let fu = contract(&gu, &dphi[i]);
                        let fv = contract(&gv, &dphi[i]);
                        for comp in 0..2 {
                            rv[2 * i + comp] -= w * fu[comp];
                            rv[off + 2 * i + comp] -= w * a * fv[comp];
                        }
                        if !with_tangent {
                            continue;
                        }
                        for j in 0..nn {
                            let lap = dphi[i][0] * dphi[j][0] + dphi[i][1] * dphi[j][1];
                            for comp in 0..2 {
                                // psi rows against u, phi rows against v
                                km[(2 * i + comp) * n + off + 2 * j + comp] += w * lap;
                                km[(off + 2 * i + comp) * n + 2 * j + comp] += w * a * lap;
                                if !self.frozen {
                                    for kc in 0..2 {
                                        km[(off + 2 * i + comp) * n + off + 2 * j + kc] += w * dphi[j][kc] * fv[comp];
                                    }
                                }
                            }
                        }
                    }
                } else {
                    for i in 0..nn {
                        let fu = contract(&gu, &dphi[i]);
                        for comp in 0..2 {
                            rv[2 * i + comp] -= w * fu[comp];
                        }
                        if !with_tangent {
                            continue;
                        }
                        for j in 0..nn {
                            let lap = dphi[i][0] * dphi[j][0] + dphi[i][1] * dphi[j][1];
                            for comp in 0..2 {
                                km[(2 * i + comp) * n + 2 * j + comp] += w * lap;
                            }
                        }
                    }
                }
            }
            Ok(LocalSystem {
                dofs,
                matrix: km,
                vector: rv,
            })
        })?;
        Ok((with_tangent.then_some(k), r))
    }

    pub fn residual(&self, v: &Field, u: &Field) -> Result<Vec<f64>> {
        Ok(self.assemble(&self.domain.stack(v, u), false)?.1)
    }

    pub fn tangent(&self, v: &Field, u: &Field) -> Result<CsrMatrix> {
        Ok(self.assemble(&self.domain.stack(v, u), true)?.0.expect("tangent requested"))
    }

    /// Matrix of the adjoint system, the transpose of the tangent.
    pub fn adjoint_matrix(&self, v: &Field, u: &Field) -> Result<CsrMatrix> {
        Ok(self.tangent(v, u)?.transpose())
    }

    fn free_norm(&self, r: &[f64], cons: &BTreeMap<usize, f64>) -> f64 {
        r.iter()
            .enumerate()
            .filter(|(i, _)| !cons.contains_key(i))
            .map(|(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Newton's method from `initial` (zero by default) with step halving.
    pub fn solve(&self, initial: Option<&[f64]>, abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<FsiSolution> {
        let d = &self.domain;
        let cons = d.constraints();
        let mut x = initial.map_or_else(|| vec![0.0; d.n_dofs()], |x| x.to_vec());
        if x.len() != d.n_dofs() {
            return Err(Error::IncompatibleSpaces("initial guess has the wrong length".into()));
        }
        for &i in cons.keys() {
            x[i] = 0.0;
        }
        let mut history = Vec::new();
        let mut iterations = 0;
        loop {
            let (k, r) = self.assemble(&x, true).map_err(|e| Error::NewtonDiverged {
                step: 1,
                reason: e.to_string(),
            })?;
            let norm = self.free_norm(&r, &cons);
            history.push(norm);
            if norm <= abs_tol.max(rel_tol * history[0]) {
                break;
            }
            if iterations == max_iter {
                return Err(Error::NewtonDiverged {
                    step: 1,
                    reason: format!("no convergence in {max_iter} iterations (|r| = {norm:.3e})"),
                });
            }
            let dx = SparseSystem::eliminate(&k.expect("tangent"), &r, &cons).solve_full()?;
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..=8 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + alpha * b).collect();
                if let Ok((_, rt)) = self.assemble(&trial, false) {
                    if self.free_norm(&rt, &cons) < norm {
                        x = trial;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                return Err(Error::NewtonDiverged {
                    step: 1,
                    reason: format!("line search failed (|r| = {norm:.3e})"),
                });
            }
            iterations += 1;
        }
        let (v, u) = d.split(&x);
        Ok(FsiSolution {
            v,
            u,
            iterations,
            history,
        })
    }

    /// Solves `A'(v, u)^T (w_f, z) = j` and returns `(z, w_f)`.
    pub fn adjoint(&self, v: &Field, u: &Field, goal: &FsiGoal) -> Result<(Field, Field)> {
        let kt = self.adjoint_matrix(v, u)?;
        let rhs = goal.derivative(&self.domain)?;
        let y = SparseSystem::eliminate(&kt, &rhs, &self.domain.constraints()).solve_full()?;
        let (w, z) = self.domain.split(&y);
        Ok((z, w))
    }

    /// DWR estimate with the adjoint solved one degree higher at the embedded
    /// primal state.
    pub fn dwr(&self, sol: &FsiSolution, goal: &FsiGoal) -> Result<DwrReport> {
        Ok(self.estimate(sol, goal, false)?.0)
    }

    /// DWR estimate with the adjoint solved in the primal space and lifted
    /// one degree by patchwise extrapolation.
    pub fn dwr_extrapolated(&self, sol: &FsiSolution, goal: &FsiGoal) -> Result<DwrReport> {
        Ok(self.estimate(sol, goal, true)?.0)
    }

    /// Report together with the enriched adjoint `(z, w_f)` it used.
    pub fn estimate(&self, sol: &FsiSolution, goal: &FsiGoal, extrapolated: bool) -> Result<(DwrReport, Field, Field)> {
        let d = &self.domain;
        let fine = self.on(d.enriched()?);
        let fd = &fine.domain;
        let ve = interpolate(&sol.v, fd.v_space.clone())?;
        let ue = interpolate(&sol.u, fd.u_space.clone())?;
        let (z, w) = if extrapolated {
            let (z, w) = self.adjoint(&sol.v, &sol.u, goal)?;
            (extrapolate(&z, fd.u_space.clone())?, extrapolate(&w, fd.v_space.clone())?)
        } else {
            fine.adjoint(&ve, &ue, goal)?
        };
        let wz = weight(&z, d.u_space.clone())?;
        let ww = weight(&w, d.v_space.clone())?;
        let r = fine.residual(&ve, &ue)?;
        let eta: f64 = r.iter().zip(fd.stack(&ww, &wz)).map(|(a, b)| a * b).sum();
        let local = self.localize(sol, &wz, &ww)?;
        let report = DwrReport::new(eta, local, d.n_free_dofs(), goal.evaluate(d, &sol.v, &sol.u)?);
        Ok((report, z, w))
    }

    /// Signed cell contributions of `r(wz, ww)` after integration by parts.
    pub fn localize(&self, sol: &FsiSolution, wz: &Field, ww: &Field) -> Result<Vec<f64>> {
        let d = &self.domain;
        let (v, u) = (&sol.v, &sol.u);
        let lap = |f: &Field, c: usize, xi: &[f64; 2]| -> Vec<Mat2> { f.hessian_at(c, xi) };
        let flux_z = |c: usize, xi: &[f64; 2]| -> Result<Vec<Vec2>> {
            let gu = u.grad_matrix(c, xi);
            if d.is_fluid(c) {
                let a = self.coefficient(c, &gu)?;
                let gv = v.grad_matrix(c, xi);
                Ok(gv.iter().map(|row| [a * row[0], a * row[1]]).collect())
            } else {
                Ok(gu.to_vec())
            }
        };
        let div_z = |c: usize, xi: &[f64; 2]| -> Result<Vec<f64>> {
            let hu = lap(u, c, xi);
            if d.is_fluid(c) {
                let gu = u.grad_matrix(c, xi);
                let a = self.coefficient(c, &gu)?;
                let gv = v.grad_matrix(c, xi);
                let hv = lap(v, c, xi);
                let ga = if self.frozen {
                    [0.0; 2]
                } else {
                    [hu[0][0][0] + hu[1][1][0], hu[0][0][1] + hu[1][1][1]]
                };
                Ok((0..2)
                    .map(|i| a * (hv[i][0][0] + hv[i][1][1]) + ga[0] * gv[i][0] + ga[1] * gv[i][1])
                    .collect())
            } else {
                Ok((0..2).map(|i| hu[i][0][0] + hu[i][1][1]).collect())
            }
        };
        let f = self.forcing.clone();
        let scale = self.scale;
        let source = move |_: usize, x: &Point| -> Vec<f64> { f(x).iter().map(|v| scale * v).collect() };
        let none = |_: i32, _: &Point| -> Option<Vec<f64>> { None };
        let rz = signed_contributions(&Localization {
            weight: wz,
            degree: d.degree(),
            flux: &flux_z,
            div_flux: &div_z,
            source: Some(&source),
            traction: &none,
        })?;
        let flux_w = |c: usize, xi: &[f64; 2]| -> Result<Vec<Vec2>> {
            Ok(if d.is_fluid(c) { u.grad_matrix(c, xi).to_vec() } else { vec![[0.0; 2]; 2] })
        };
        let div_w = |c: usize, xi: &[f64; 2]| -> Result<Vec<f64>> {
            if d.is_fluid(c) {
                let hu = lap(u, c, xi);
                Ok((0..2).map(|i| hu[i][0][0] + hu[i][1][1]).collect())
            } else {
                Ok(vec![0.0; 2])
            }
        };
        let rw = signed_contributions(&Localization {
            weight: ww,
            degree: d.degree(),
            flux: &flux_w,
            div_flux: &div_w,
            source: None,
            traction: &none,
        })?;
        Ok(rz.iter().zip(&rw).map(|(a, b)| a + b).collect())
    }

    /// L2 norm on the interface of `grad w_f n_f + grad z n_s + (grad v : grad z) n_f`,
    /// the natural interface condition of the adjoint.
    pub fn adjoint_interface_defect(&self, v: &Field, z: &Field, w: &Field) -> Result<f64> {
        let mesh = self.domain.mesh();
        let order = self.order();
        let mut s = 0.0;
        for &e in &self.domain.interface {
            let [Some(a), Some(b)] = mesh.edge_sides(e) else { continue };
            let (fs, ss) = if self.domain.is_fluid(a.cell) { (a, b) } else { (b, a) };
            let ef = EdgeRule::new(mesh, fs.cell, fs.local, order);
            for q in 0..ef.n_points() {
                let x = ef.x[q];
                let xs = mesh.to_reference(ss.cell, &x);
                let nf = ef.normal;
                let gw = w.grad_matrix(fs.cell, &ef.xi[q]);
                let gv = v.grad_matrix(fs.cell, &ef.xi[q]);
                let gzf = z.grad_matrix(fs.cell, &ef.xi[q]);
                let gzs = z.grad_matrix(ss.cell, &xs);
                let vz: f64 = (0..2).map(|i| gv[i][0] * gzf[i][0] + gv[i][1] * gzf[i][1]).sum();
                let ns = [-nf[0], -nf[1]];
                let a1 = contract(&gw, &nf);
                let a2 = contract(&gzs, &ns);
                for i in 0..2 {
                    s += ef.jxw[q] * (a1[i] + a2[i] + vz * nf[i]).powi(2);
                }
            }
        }
        Ok(s.sqrt())
    }
}

impl FsiGoal {
    fn check(&self) -> Result<()> {
        match self {
            FsiGoal::InterfaceFlux { component } if *component > 1 => {
                Err(Error::InvalidArgument(format!("component {component} out of range")))
            }
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, d: &FsiDomain, v: &Field, u: &Field) -> Result<f64> {
        let g = self.derivative(d)?;
        Ok(g.iter().zip(d.stack(v, u)).map(|(a, b)| a * b).sum())
    }

    /// Coefficients of the (linear) goal with respect to `[v; u]`.
    pub fn derivative(&self, d: &FsiDomain) -> Result<Vec<f64>> {
        self.check()?;
        let mesh = d.mesh();
        let nv = d.n_v();
        let mut out = vec![0.0; d.n_dofs()];
        let order = (2 * d.degree() + 2).min(8);
        match self {
            FsiGoal::InterfaceFlux { component } => {
                let el = d.u_space.element();
                for &e in &d.interface {
                    let [Some(a), Some(b)] = mesh.edge_sides(e) else { continue };
                    let s = if d.is_fluid(a.cell) { b } else { a };
                    let er = EdgeRule::new(mesh, s.cell, s.local, order);
                    let geo = CellGeometry::new(mesh, s.cell);
                    let nodes = d.u_space.cell_nodes(s.cell);
                    for q in 0..er.n_points() {
                        for (i, g) in el.grads(&er.xi[q]).iter().enumerate() {
                            let g = geo.grad(g);
                            out[nv + 2 * nodes[i] + component] += er.jxw[q] * (g[0] * er.normal[0] + g[1] * er.normal[1]);
                        }
                    }
                }
            }
            FsiGoal::VelocityIntegral { weights } => {
                let rule = quadrature(order)?;
                let tab = d.v_space.element().tabulate_rule(&rule);
                for c in mesh.cells_in_regions(&[d.fluid]) {
                    let cv = CellValues::new(&d.v_space, c, &rule, &tab, false);
                    let nodes = d.v_space.cell_nodes(c);
                    for q in 0..cv.n_points() {
                        for (i, phi) in cv.phi[q].iter().enumerate() {
                            for comp in 0..2 {
                                out[2 * nodes[i] + comp] += cv.jxw[q] * weights[comp] * phi;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}
