//! Dual weighted residual estimators: the global estimator `|r(z)|`, its
//! cellwise localization with element residuals and flux jumps, effectivity
//! bookkeeping and the model-error indicator.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::elasticity::Loads;
use crate::error::{Error, Result};
use crate::fem::{element, interpolate, quadrature, CellValues, CsrMatrix, EdgeRule, Field, Space};
use crate::goals::{Constitutive, State};
use crate::mesh::{Mesh, Point};
use crate::tensor::Vec2;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DwrReport {
    pub eta_global: f64,
    /// `eta_K = |rho_K|`.
    pub eta_local: Vec<f64>,
    /// Signed cell contributions `rho_K`.
    pub signed_local: Vec<f64>,
    pub sum_local: f64,
    pub dofs: usize,
    pub cells: usize,
    pub goal_value: f64,
    pub reference_error: Option<f64>,
    pub effectivity_global: Option<f64>,
    pub effectivity_sum: Option<f64>,
}

impl DwrReport {
    pub fn new(eta_global: f64, signed_local: Vec<f64>, dofs: usize, goal_value: f64) -> Self {
        let eta_local: Vec<f64> = signed_local.iter().map(|r| r.abs()).collect();
        let sum_local = eta_local.iter().sum();
        Self {
            eta_global: eta_global.abs(),
            cells: eta_local.len(),
            eta_local,
            signed_local,
            sum_local,
            dofs,
            goal_value,
            ..Self::default()
        }
    }

    /// Sum of the signed contributions.
    pub fn signed_sum(&self) -> f64 {
        self.signed_local.iter().sum()
    }

    /// `eta_h <= sum_K eta_K` up to round-off of the global residual.
    pub fn bound_holds(&self) -> bool {
        self.eta_global <= self.sum_local * (1.0 + 1e-9) + 1e-14
    }

    pub fn csv_header() -> &'static str {
        "iteration,cells,dofs,goal,eta_global,sum_local,reference_error,effectivity_global,effectivity_sum"
    }

    pub fn csv_row(&self, iteration: usize) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.10e}")).unwrap_or_default();
        format!(
            "{iteration},{},{},{:.12e},{:.10e},{:.10e},{},{},{}",
            self.cells,
            self.dofs,
            self.goal_value,
            self.eta_global,
            self.sum_local,
            opt(self.reference_error),
            opt(self.effectivity_global),
            opt(self.effectivity_sum)
        )
    }
}

/// Stores `eta_h / err` and `sum eta_K / err`.
pub fn effectivity(report: &DwrReport, reference_error: f64) -> Result<DwrReport> {
    if !(reference_error.abs() > 0.0) {
        return Err(Error::ZeroReferenceError(reference_error));
    }
    if !report.bound_holds() {
        log::warn!(
            "global estimator {} exceeds the sum of local indicators {}",
            report.eta_global,
            report.sum_local
        );
    }
    let err = reference_error.abs();
    Ok(DwrReport {
        reference_error: Some(err),
        effectivity_global: Some(report.eta_global / err),
        effectivity_sum: Some(report.sum_local / err),
        ..report.clone()
    })
}

/// Writes reports as CSV, one row per iteration.
pub fn reports_to_csv(reports: &[DwrReport]) -> String {
    let mut s = String::from(DwrReport::csv_header());
    s.push('\n');
    for (i, r) in reports.iter().enumerate() {
        let _ = writeln!(s, "{}", r.csv_row(i));
    }
    s
}

/// `|r(z)|` for a residual vector `r_i = l(phi_i) - a(u, phi_i)` on the space of `z`.
pub fn global_estimator(residual: &[f64], z_hat: &Field) -> Result<f64> {
    if residual.len() != z_hat.coeffs.len() {
        return Err(Error::IncompatibleSpaces(format!(
            "residual has {} entries, weight {}",
            residual.len(),
            z_hat.coeffs.len()
        )));
    }
    Ok(residual.iter().zip(&z_hat.coeffs).map(|(r, z)| r * z).sum::<f64>().abs())
}

/// `z - i_h z`, with `i_h` the nodal interpolant onto `coarse`, as a field on
/// the space of `z`.
pub fn weight(z_hat: &Field, coarse: Arc<Space>) -> Result<Field> {
    let ih = interpolate(z_hat, coarse)?;
    let back = interpolate(&ih, z_hat.space.clone())?;
    let mut w = z_hat.clone();
    w.axpy(-1.0, &back);
    Ok(w)
}

/// `-a_eps(u_C, z_C) = -z_C^T A_eps u_C`.
pub fn model_error_indicator(a_eps: &CsrMatrix, u_coarse: &Field, z_coarse: &Field) -> f64 {
    let au = a_eps.matvec(&u_coarse.coeffs);
    -au.iter().zip(&z_coarse.coeffs).map(|(a, z)| a * z).sum::<f64>()
}

pub type CellFn<'a, T> = dyn Fn(usize, &[f64; 2]) -> Result<T> + Sync + 'a;

/// Ingredients of the residual localization for a system in divergence form
/// `-div Q(u) = f` with natural boundary data `g`. Vectors are indexed by
/// component; `flux` returns the rows of `Q`.
pub struct Localization<'a> {
    /// `z - i_h z`.
    pub weight: &'a Field,
    /// Primal degree `k`: data are projected onto degree `k`, integrals use order `2k + 2`.
    pub degree: usize,
    pub flux: &'a CellFn<'a, Vec<Vec2>>,
    pub div_flux: &'a CellFn<'a, Vec<f64>>,
    pub source: Option<&'a (dyn Fn(usize, &Point) -> Vec<f64> + Sync)>,
    /// Natural boundary data per tag; `None` means zero.
    pub traction: &'a (dyn Fn(i32, &Point) -> Option<Vec<f64>> + Sync),
}

/// Cellwise L2 projection onto degree `k`, returned as nodal coefficients.
fn project_cell(mesh: &Mesh, cell: usize, k: usize, nc: usize, f: &dyn Fn(&Point) -> Vec<f64>) -> Result<Vec<Vec<f64>>> {
    let el = element(k)?;
    let rule = quadrature(8)?;
    let n = el.n_nodes();
    let det = 2.0 * mesh.area(cell);
    let mut m = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, nc);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let phi = el.values(p);
        let val = f(&mesh.to_physical(cell, p));
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += w * det * phi[i] * phi[j];
            }
            for c in 0..nc {
                b[(i, c)] += w * det * phi[i] * val[c];
            }
        }
    }
    let sol = m.lu().solve(&b).ok_or(Error::SingularMatrix { dof: cell })?;
    Ok((0..nc).map(|c| sol.column(c).iter().copied().collect()).collect())
}

fn legendre(n: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return p0;
    }
    for m in 1..n {
        let p2 = ((2 * m + 1) as f64 * x * p1 - m as f64 * p0) / (m + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// L2 projection of `g(t)` on `[0, 1]` onto degree `k`, evaluated at `ts`.
fn project_edge(k: usize, g: &dyn Fn(f64) -> Vec<f64>, ts: &[f64]) -> Vec<Vec<f64>> {
    let (qt, qw) = quadrature::line(8);
    let vals: Vec<Vec<f64>> = qt.iter().map(|&t| g(t)).collect();
    let nc = vals.first().map_or(0, |v| v.len());
    let coef: Vec<Vec<f64>> = (0..=k)
        .map(|n| {
            (0..nc)
                .map(|c| {
                    (2 * n + 1) as f64
                        * qt.iter()
                            .zip(&qw)
                            .zip(&vals)
                            .map(|((t, w), v)| w * v[c] * legendre(n, 2.0 * t - 1.0))
                            .sum::<f64>()
                })
                .collect()
        })
        .collect();
    ts.iter()
        .map(|&t| {
            (0..nc)
                .map(|c| (0..=k).map(|n| coef[n][c] * legendre(n, 2.0 * t - 1.0)).sum())
                .collect()
        })
        .collect()
}

fn flux_normal(q: &[Vec2], n: &Vec2) -> Vec<f64> {
    q.iter().map(|r| r[0] * n[0] + r[1] * n[1]).collect()
}

/// Signed contributions `rho_K = int_K R_K . w + sum_E int_E R_{E,K} . w` with
/// `R_K = f_K + div Q`, `R_{E,K} = -1/2 (Q_K n_K + Q_K' n_K')` on interior
/// edges and `g_E - Q n` on boundary edges. Their sum equals
/// `int f_K . w + int g_E . w - int Q : grad w`.
pub fn signed_contributions(loc: &Localization) -> Result<Vec<f64>> {
    let space = &loc.weight.space;
    let mesh = space.mesh();
    let nc = space.n_components();
    let k = loc.degree;
    let order = (2 * k + 2).min(8);
    let rule = quadrature(order)?;
    let tab = space.element().tabulate_rule(&rule);
    let (ts, _) = quadrature::line(order);
    let src_el = element(k)?;
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let cv = CellValues::new(space, c, &rule, &tab, false);
            let loc_w = loc.weight.local(c);
            let w_at = |phi: &[f64]| -> Vec<f64> {
                (0..nc)
                    .map(|comp| phi.iter().enumerate().map(|(i, p)| p * loc_w[i * nc + comp]).sum())
                    .collect()
            };
            let projected = match loc.source {
                Some(f) => Some(project_cell(mesh, c, k, nc, &|x| f(c, x))?),
                None => None,
            };
            let mut rho = 0.0;
            for (q, xi) in rule.points.iter().enumerate() {
                let mut r = (loc.div_flux)(c, xi)?;
                if let Some(coef) = &projected {
                    let phi = src_el.values(xi);
                    for (comp, rc) in r.iter_mut().enumerate() {
                        *rc += phi.iter().zip(&coef[comp]).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                let w = w_at(&cv.phi[q]);
                rho += cv.jxw[q] * r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            }
            for l in 0..3 {
                let er = EdgeRule::new(mesh, c, l, order);
                let e = mesh.cell_edges(c)[l];
                let own: Vec<Vec<f64>> = er
                    .xi
                    .iter()
                    .map(|xi| Ok(flux_normal(&(loc.flux)(c, xi)?, &er.normal)))
                    .collect::<Result<_>>()?;
                let resid: Vec<Vec<f64>> = match mesh.neighbor(c, l) {
                    Some(nb) => er
                        .x
                        .iter()
                        .zip(&own)
                        .map(|(x, qn)| {
                            let xi = mesh.to_reference(nb.cell, x);
                            let other = flux_normal(&(loc.flux)(nb.cell, &xi)?, &er.normal);
                            Ok(qn.iter().zip(&other).map(|(a, b)| -0.5 * (a - b)).collect())
                        })
                        .collect::<Result<_>>()?,
                    None => {
                        let tag = mesh.edge_tag(e).expect("boundary edges are tagged");
                        let at = |t: f64| er.at(t);
                        let g = if (loc.traction)(tag, &at(0.5)).is_some() {
                            project_edge(
                                k,
                                &|t| (loc.traction)(tag, &at(t)).unwrap_or_else(|| vec![0.0; nc]),
                                &ts,
                            )
                        } else {
                            vec![vec![0.0; nc]; ts.len()]
                        };
                        own.iter()
                            .zip(&g)
                            .map(|(qn, gq)| gq.iter().zip(qn).map(|(g, q)| g - q).collect())
                            .collect()
                    }
                };
                for (q, xi) in er.xi.iter().enumerate() {
                    let w = w_at(&space.element().values(xi));
                    rho += er.jxw[q] * resid[q].iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            Ok(rho)
        })
        .collect()
}

/// `sum_K int_K f(K, xi) w` for a scalar weight field.
pub fn scalar_cell_term(weight: &Field, order: usize, f: &CellFn<f64>) -> Result<Vec<f64>> {
    let space = &weight.space;
    let rule = quadrature(order.min(8))?;
    let tab = space.element().tabulate_rule(&rule);
    (0..space.mesh().n_cells())
        .into_par_iter()
        .map(|c| {
            let cv = CellValues::new(space, c, &rule, &tab, false);
            let lw = weight.local(c);
            let mut s = 0.0;
            for (q, xi) in rule.points.iter().enumerate() {
                let w: f64 = cv.phi[q].iter().zip(&lw).map(|(a, b)| a * b).sum();
                s += cv.jxw[q] * f(c, xi)? * w;
            }
            Ok(s)
        })
        .collect()
}

/// `div P(grad u, p)` at a point of a cell by the chain rule on the polynomial
/// displacement (and pressure).
pub fn stress_divergence(law: &dyn Constitutive, state: State, cell: usize, xi: &[f64; 2]) -> Result<Vec2> {
    let g = state.u.grad_matrix(cell, xi);
    let p = state.p.map_or(0.0, |p| p.value_at(cell, xi)[0]);
    let (d, dp) = law.stress_derivative(cell, &g, p)?;
    let h = state.u.hessian_at(cell, xi);
    let gp = state.p.map_or([0.0; 2], |p| p.grad_at(cell, xi)[0]);
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    *o += d[i][j][k][l] * h[k][l][j];
                }
            }
            *o += dp[i][j] * gp[j];
        }
    }
    Ok(out)
}

/// Signed contributions for a (possibly mixed) solid mechanics problem with
/// stress law `law` and loads `loads`.
pub fn mechanics_contributions(
    state: State,
    law: &dyn Constitutive,
    loads: &Loads,
    weight: &Field,
    degree: usize,
) -> Result<Vec<f64>> {
    if !weight.space.same_mesh(&state.u.space) {
        return Err(Error::MeshMismatch);
    }
    let flux = |c: usize, xi: &[f64; 2]| -> Result<Vec<Vec2>> {
        let g = state.u.grad_matrix(c, xi);
        let p = state.p.map_or(0.0, |p| p.value_at(c, xi)[0]);
        Ok(law.stress(c, &g, p)?.to_vec())
    };
    let div = |c: usize, xi: &[f64; 2]| -> Result<Vec<f64>> {
        Ok(stress_divergence(law, state, c, xi)?.to_vec())
    };
    let body = loads.body.clone();
    let source = move |_: usize, x: &Point| -> Vec<f64> { body.as_ref().map_or(vec![0.0; 2], |b| b(x).to_vec()) };
    let traction = |tag: i32, x: &Point| loads.traction(tag).map(|g| g(x).to_vec());
    signed_contributions(&Localization {
        weight,
        degree,
        flux: &flux,
        div_flux: &div,
        source: if loads.body.is_some() { Some(&source) } else { None },
        traction: &traction,
    })
}
