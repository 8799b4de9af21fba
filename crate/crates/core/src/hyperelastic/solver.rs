//! Residual, tangent, Newton solver with load stepping and the adjoint solve
//! for (possibly mixed) hyperelastic problems.
//!
//! Unknowns are stacked as `[u; p]`. The weak form is
//! `A(u, p)(v, q) = int Pi : grad v + int (1 - det C) q = L(v)` and the residual
//! is `r = L - A`; compressible problems drop the pressure block.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::elasticity::{external_load, Loads};
use crate::error::{Error, Result};
use crate::dwr::{mechanics_contributions, scalar_cell_term, weight};
use crate::fem::{
    assemble, interpolate, prolongate, quadrature, CellValues, CsrMatrix, DirichletBc, Field, LocalSystem, Space,
    SparseSystem,
};
use crate::mesh::Mesh;
use crate::goals::{Goal, State};

use super::material::HyperMaterial;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub load_steps: usize,
    /// Maximum number of step halvings per iteration.
    pub backtracking: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_iter: 30,
            load_steps: 20,
            backtracking: 8,
        }
    }
}

/// Spaces, material and dead loads. Dirichlet values of `u_space` are the
/// full-load values; the pressure space is present iff the material is
/// incompressible.
#[derive(Clone)]
pub struct HyperProblem {
    pub u_space: Arc<Space>,
    pub p_space: Option<Arc<Space>>,
    pub material: HyperMaterial,
    pub loads: Loads,
    /// Boundary conditions the spaces were built from; needed to rebuild them
    /// on other meshes or degrees.
    pub bcs: Vec<DirichletBc>,
    /// Quadrature order override.
    pub quadrature_order: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct HyperSolution {
    pub u: Field,
    pub p: Option<Field>,
    /// Newton iterations over all load steps.
    pub iterations: usize,
    /// Free-dof residual norms of the last load step.
    pub history: Vec<f64>,
}

impl HyperSolution {
    pub fn state(&self) -> State<'_> {
        State { u: &self.u, p: self.p.as_ref() }
    }
}

impl HyperProblem {
    pub fn new(u_space: Arc<Space>, p_space: Option<Arc<Space>>, material: HyperMaterial, loads: Loads) -> Result<Self> {
        if u_space.n_components() != 2 {
            return Err(Error::IncompatibleSpaces("displacement needs two components".into()));
        }
        if material.incompressible != p_space.is_some() {
            return Err(Error::IncompatibleSpaces(
                "a pressure space is required exactly for incompressible materials".into(),
            ));
        }
        if let Some(ps) = &p_space {
            if !ps.same_mesh(&u_space) || ps.n_components() != 1 {
                return Err(Error::IncompatibleSpaces("pressure space does not match".into()));
            }
        }
        Ok(Self {
            u_space,
            p_space,
            material,
            loads,
            bcs: Vec::new(),
            quadrature_order: None,
        })
    }

    /// Displacement space of degree `degree` and, for incompressible
    /// materials, a Taylor-Hood pressure space of degree `degree - 1`.
    pub fn on_mesh(mesh: Arc<Mesh>, degree: usize, bcs: &[DirichletBc], material: HyperMaterial, loads: Loads) -> Result<Self> {
        let u = Arc::new(Space::new(mesh.clone(), degree, 2, bcs)?);
        let p = if material.incompressible {
            if degree < 2 {
                return Err(Error::UnsupportedDegree(degree - 1));
            }
            Some(Arc::new(Space::unconstrained(mesh, degree - 1, 1)?))
        } else {
            None
        };
        let mut out = Self::new(u, p, material, loads)?;
        out.bcs = bcs.to_vec();
        Ok(out)
    }

    /// The same problem on another mesh (typically a refinement).
    pub fn remeshed(&self, mesh: Arc<Mesh>) -> Result<Self> {
        self.rebuilt(mesh, self.u_space.degree())
    }

    /// The same problem one polynomial degree higher, for the enriched adjoint.
    pub fn enriched(&self) -> Result<Self> {
        self.rebuilt(self.u_space.mesh().clone(), self.u_space.degree() + 1)
    }

    fn rebuilt(&self, mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        if self.bcs.is_empty() && !self.u_space.constraints().is_empty() {
            return Err(Error::InvalidArgument(
                "problem was built from explicit spaces; boundary conditions are unknown".into(),
            ));
        }
        let mut out = Self::on_mesh(mesh, degree, &self.bcs, self.material.clone(), self.loads.clone())?;
        out.quadrature_order = self.quadrature_order;
        Ok(out)
    }

    pub fn n_u(&self) -> usize {
        self.u_space.n_dofs()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_u() + self.p_space.as_ref().map_or(0, |s| s.n_dofs())
    }

    fn order(&self) -> usize {
        self.quadrature_order.unwrap_or((2 * self.u_space.degree() + 2).min(8))
    }

    /// Stacked coefficient vector.
    pub fn stack(&self, u: &Field, p: Option<&Field>) -> Vec<f64> {
        let mut x = u.coeffs.clone();
        if let Some(p) = p {
            x.extend_from_slice(&p.coeffs);
        }
        x
    }

    pub fn split(&self, x: &[f64]) -> (Field, Option<Field>) {
        let n = self.n_u();
        let u = Field::new(self.u_space.clone(), x[..n].to_vec());
        let p = self.p_space.as_ref().map(|s| Field::new(s.clone(), x[n..].to_vec()));
        (u, p)
    }

    /// Dirichlet constraints scaled by `factor`.
    pub fn constraints(&self, factor: f64) -> BTreeMap<usize, f64> {
        self.u_space.constraints().iter().map(|(&d, &v)| (d, factor * v)).collect()
    }

    /// Residual `L - A` and (optionally) tangent `dA/dx` at the stacked state `x`.
    pub fn assemble(&self, x: &[f64], load_factor: f64, with_tangent: bool) -> Result<(Option<CsrMatrix>, Vec<f64>)> {
        let us = &*self.u_space;
        let nu = self.n_u();
        let rule = quadrature(self.order())?;
        let tab_u = us.element().tabulate_rule(&rule);
        let tab_p = self.p_space.as_ref().map(|s| s.element().tabulate_rule(&rule));
        let mat = &self.material;
        let (k, mut r) = assemble(self.n_dofs(), us.mesh().n_cells(), |c| {
            let cv = CellValues::new(us, c, &rule, &tab_u, false);
            let mut dofs = us.cell_dofs(c);
            let lu: Vec<f64> = dofs.iter().map(|&d| x[d]).collect();
            let nn = us.n_local_nodes();
            let mut np = 0;
            if let Some(ps) = &self.p_space {
                let pd: Vec<usize> = ps.cell_nodes(c).iter().map(|&n| nu + n).collect();
                np = pd.len();
                dofs.extend(pd);
            }
            let lp: Vec<f64> = dofs[2 * nn..].iter().map(|&d| x[d]).collect();
            let n = dofs.len();
            let mut km = if with_tangent { vec![0.0; n * n] } else { Vec::new() };
            let mut rv = vec![0.0; n];
            for q in 0..cv.n_points() {
                let dphi = &cv.dphi[q];
                let mut g = [[0.0; 2]; 2];
                for i in 0..nn {
                    for comp in 0..2 {
                        g[comp][0] += lu[2 * i + comp] * dphi[i][0];
                        g[comp][1] += lu[2 * i + comp] * dphi[i][1];
                    }
                }
                let psi: &[f64] = match &tab_p {
                    Some(t) => &t.values[q],
                    None => &[],
                };
                let p: f64 = psi.iter().zip(&lp).map(|(a, b)| a * b).sum();
                let w = cv.jxw[q];
                let resp = mat.linearize(c, &g, p)?;
                let s = resp.stress;
                for i in 0..nn {
                    for ci in 0..2 {
                        rv[2 * i + ci] -= w * (s[ci][0] * dphi[i][0] + s[ci][1] * dphi[i][1]);
                    }
                }
                for (i, ps) in psi.iter().enumerate() {
                    rv[2 * nn + i] -= w * (-resp.constraint) * ps;
                }
                if !with_tangent {
                    continue;
                }
                let d = &resp.dstress;
                for i in 0..nn {
                    for ci in 0..2 {
                        let row = 2 * i + ci;
                        for j in 0..nn {
                            for cj in 0..2 {
                                let mut v = 0.0;
                                for b in 0..2 {
                                    v += dphi[i][b] * (d[ci][b][cj][0] * dphi[j][0] + d[ci][b][cj][1] * dphi[j][1]);
                                }
                                km[row * n + 2 * j + cj] += w * v;
                            }
                        }
                        let dp = resp.dstress_dp[ci][0] * dphi[i][0] + resp.dstress_dp[ci][1] * dphi[i][1];
                        for (j, pj) in psi.iter().enumerate() {
                            km[row * n + 2 * nn + j] += w * dp * pj;
                        }
                    }
                }
                for (i, pi) in psi.iter().enumerate() {
                    let row = 2 * nn + i;
                    for j in 0..nn {
                        for cj in 0..2 {
                            let dc = resp.dconstraint[cj][0] * dphi[j][0] + resp.dconstraint[cj][1] * dphi[j][1];
                            km[row * n + 2 * j + cj] -= w * dc * pi;
                        }
                    }
                }
            }
            debug_assert_eq!(np + 2 * nn, n);
            Ok(LocalSystem {
                dofs,
                matrix: km,
                vector: rv,
            })
        })?;
        if self.loads.body.is_some() || !self.loads.tractions.is_empty() {
            for (ri, li) in r.iter_mut().zip(external_load(us, &self.loads)?) {
                *ri += load_factor * li;
            }
        }
        Ok((with_tangent.then_some(k), r))
    }

    pub fn residual(&self, u: &Field, p: Option<&Field>, load_factor: f64) -> Result<Vec<f64>> {
        Ok(self.assemble(&self.stack(u, p), load_factor, false)?.1)
    }

    pub fn tangent(&self, u: &Field, p: Option<&Field>) -> Result<CsrMatrix> {
        Ok(self.assemble(&self.stack(u, p), 1.0, true)?.0.expect("tangent requested"))
    }

    fn free_norm(&self, r: &[f64]) -> f64 {
        let cons = self.u_space.constraints();
        r.iter()
            .enumerate()
            .filter(|(i, _)| !cons.contains_key(i))
            .map(|(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Newton's method with Dirichlet data and loads ramped over
    /// `cfg.load_steps` increments, starting from `initial` (zero by default).
    pub fn newton_solve(&self, initial: Option<&[f64]>, cfg: &NewtonConfig) -> Result<HyperSolution> {
        if cfg.load_steps == 0 || !(cfg.abs_tol > 0.0) || !(cfg.rel_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid Newton configuration {cfg:?}")));
        }
        let mut x = match initial {
            Some(x0) if x0.len() == self.n_dofs() => x0.to_vec(),
            Some(x0) => {
                return Err(Error::IncompatibleSpaces(format!(
                    "initial guess has {} entries, expected {}",
                    x0.len(),
                    self.n_dofs()
                )))
            }
            None => vec![0.0; self.n_dofs()],
        };
        let mut iterations = 0;
        let mut history = Vec::new();
        for step in 1..=cfg.load_steps {
            let factor = step as f64 / cfg.load_steps as f64;
            let target = self.constraints(factor);
            history.clear();
            let mut reference: Option<f64> = None;
            let mut converged = false;
            for it in 0..=cfg.max_iter {
                let (k, r) = self.assemble(&x, factor, true).map_err(|e| Error::NewtonDiverged {
                    step,
                    reason: e.to_string(),
                })?;
                let bc_gap = target.iter().map(|(&d, &v)| (v - x[d]).abs()).fold(0.0, f64::max);
                let norm = self.free_norm(&r);
                history.push(norm);
                if bc_gap == 0.0 {
                    let refn = *reference.get_or_insert(norm);
                    if norm <= cfg.abs_tol.max(cfg.rel_tol * refn) {
                        converged = true;
                        break;
                    }
                }
                if it == cfg.max_iter {
                    break;
                }
                let incr: BTreeMap<usize, f64> = target.iter().map(|(&d, &v)| (d, v - x[d])).collect();
                let dx = SparseSystem::eliminate(&k.expect("tangent"), &r, &incr)
                    .solve_full()
                    .map_err(|e| Error::NewtonDiverged {
                        step,
                        reason: e.to_string(),
                    })?;
                let mut alpha = 1.0;
                let mut accepted = false;
                for _ in 0..=cfg.backtracking {
                    let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + alpha * b).collect();
                    if let Ok((_, rt)) = self.assemble(&trial, factor, false) {
                        let nt = self.free_norm(&rt);
                        if nt.is_finite() && (bc_gap > 0.0 || nt < norm || norm <= cfg.abs_tol) {
                            x = trial;
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    return Err(Error::NewtonDiverged {
                        step,
                        reason: format!("line search failed after {} halvings (|r| = {norm:.3e})", cfg.backtracking),
                    });
                }
                iterations += 1;
            }
            if !converged {
                return Err(Error::NewtonDiverged {
                    step,
                    reason: format!(
                        "no convergence in {} iterations (|r| = {:.3e})",
                        cfg.max_iter,
                        history.last().copied().unwrap_or(f64::NAN)
                    ),
                });
            }
            log::debug!("load step {step}: {} iterations, |r| = {:.3e}", history.len() - 1, history.last().unwrap());
        }
        let (u, p) = self.split(&x);
        Ok(HyperSolution {
            u,
            p,
            iterations,
            history,
        })
    }

    /// Solves `A'(u)^T (z, w) = J'(u)` with homogeneous Dirichlet data.
    pub fn adjoint_solve(&self, state: State, goal: &Goal) -> Result<(Field, Option<Field>)> {
        let k = self.tangent(state.u, state.p)?;
        let d = goal.derivative_rhs(state, Some(&self.material), &self.u_space, self.p_space.as_deref())?;
        let mut rhs = d.u;
        rhs.extend(d.p);
        let cons: BTreeMap<usize, f64> = self.u_space.constraints().keys().map(|&k| (k, 0.0)).collect();
        let x = SparseSystem::eliminate(&k.transpose(), &rhs, &cons).solve_full()?;
        Ok(self.split(&x))
    }

    /// Stacked coefficients of `sol` moved onto this problem's space (a
    /// refined mesh or a higher degree), for use as a Newton starting point.
    pub fn transfer(&self, sol: &HyperSolution) -> Result<Vec<f64>> {
        let lift = |f: &Field, target: &Arc<Space>| {
            if f.space.same_mesh(target) {
                interpolate(f, target.clone())
            } else {
                prolongate(f, target.clone())
            }
        };
        let u = lift(&sol.u, &self.u_space)?;
        let p = match (&sol.p, &self.p_space) {
            (Some(p), Some(ps)) => Some(lift(p, ps)?),
            (None, None) => None,
            _ => return Err(Error::IncompatibleSpaces("pressure presence differs".into())),
        };
        Ok(self.stack(&u, p.as_ref()))
    }

    /// DWR estimate of `sol` given the adjoint `(z, w)` of `enriched`. Returns
    /// the global estimate `r(z - i_h z, w - i_h w)` and the signed cell
    /// contributions; `degree` is the data projection degree.
    pub fn estimate(
        &self,
        enriched: &HyperProblem,
        sol: &HyperSolution,
        z: &Field,
        w: Option<&Field>,
        degree: usize,
    ) -> Result<(f64, Vec<f64>)> {
        let ue = interpolate(&sol.u, enriched.u_space.clone())?;
        let pe = match (&sol.p, &enriched.p_space) {
            (Some(p), Some(ps)) => Some(interpolate(p, ps.clone())?),
            (None, None) => None,
            _ => return Err(Error::IncompatibleSpaces("pressure presence differs".into())),
        };
        let wz = weight(z, self.u_space.clone())?;
        let wp = match (w, &self.p_space) {
            (Some(w), Some(ps)) => Some(weight(w, ps.clone())?),
            (None, None) => None,
            _ => return Err(Error::IncompatibleSpaces("pressure adjoint presence differs".into())),
        };
        let r = enriched.residual(&ue, pe.as_ref(), 1.0)?;
        let wx = enriched.stack(&wz, wp.as_ref());
        let eta: f64 = r.iter().zip(&wx).map(|(a, b)| a * b).sum();
        let mut local = mechanics_contributions(sol.state(), &self.material, &self.loads, &wz, degree)?;
        if let Some(wp) = &wp {
            let u = &sol.u;
            let rp = |c: usize, xi: &[f64; 2]| Ok(HyperMaterial::constraint_generic(&u.grad_matrix(c, xi)));
            let extra = scalar_cell_term(wp, enriched.order(), &rp)?;
            for (l, e) in local.iter_mut().zip(extra) {
                *l += e;
            }
        }
        Ok((eta, local))
    }

    /// Cell means of `det C - 1`.
    pub fn constraint_means(&self, u: &Field) -> Result<Vec<f64>> {
        let us = &*self.u_space;
        let rule = quadrature(self.order())?;
        let wsum: f64 = rule.weights.iter().sum();
        Ok((0..us.mesh().n_cells())
            .map(|c| {
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(xi, w)| w * HyperMaterial::constraint_generic(&u.grad_matrix(c, xi)))
                    .sum::<f64>()
                    / wsum
            })
            .collect())
    }
}
