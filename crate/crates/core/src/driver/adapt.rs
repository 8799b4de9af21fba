//! The adaptive loop: solve the primal problem, solve the dual problem,
//! evaluate `eta_h`, test for convergence, localize, mark and refine.

use std::sync::Arc;

use crate::dwr::{mechanics_contributions, weight, DwrReport};
use crate::elasticity::{assemble_full, residual_vector, solve_dual, solve_primal, ElasticLaw, Loads};
use crate::error::{Error, Result};
use crate::fem::{extrapolate, interpolate, DirichletBc, Field, Space};
use crate::fsi::{FsiDomain, FsiGoal, FsiProblem, FsiSolution};
use crate::goals::{Goal, State};
use crate::hyperelastic::{HyperMaterial, HyperProblem, HyperSolution, NewtonConfig};
use crate::mesh::{dorfler_mark, refine, uniform_refine, Mesh};

use super::config::{dirichlet, loads, AdaptConfig, AdaptSettings, DualStrategy, ProblemConfig};

/// One line of the convergence table.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub iteration: usize,
    pub cells: usize,
    /// Free degrees of freedom of the primal problem.
    pub dofs: usize,
    pub j_value: f64,
    pub eta_global: f64,
    pub sum_local: f64,
    /// `|J(u_ref) - J(u_h)|`.
    pub reference_error: Option<f64>,
    /// `reference_error / |J(u_ref)|`.
    pub relative_error: Option<f64>,
    pub effectivity_global: Option<f64>,
    pub effectivity_sum: Option<f64>,
    /// Values of the individual goals (one entry for a single goal).
    pub components: Vec<f64>,
    /// Combination weights used for `j_value`.
    pub weights: Vec<f64>,
}

impl ConvergenceRow {
    fn new(iteration: usize, report: &DwrReport, components: Vec<f64>, weights: Vec<f64>) -> Self {
        Self {
            iteration,
            cells: report.cells,
            dofs: report.dofs,
            j_value: report.goal_value,
            eta_global: report.eta_global,
            sum_local: report.sum_local,
            reference_error: None,
            relative_error: None,
            effectivity_global: None,
            effectivity_sum: None,
            components,
            weights,
        }
    }

    /// Fills the error columns from reference goal values.
    pub fn set_reference(&mut self, reference: &[f64]) {
        let jref: f64 = self.weights.iter().zip(reference).map(|(w, r)| w * r).sum();
        let err = (jref - self.j_value).abs();
        self.reference_error = Some(err);
        self.relative_error = (jref != 0.0).then(|| err / jref.abs());
        if err > 0.0 {
            self.effectivity_global = Some(self.eta_global / err);
            self.effectivity_sum = Some(self.sum_local / err);
        }
    }
}

/// Vertex values of a field, for output.
#[derive(Clone, Debug)]
pub struct PointData {
    pub name: String,
    pub ncomp: usize,
    pub values: Vec<f64>,
}

impl PointData {
    pub fn of(name: &str, f: &Field) -> Self {
        let nc = f.space.n_components();
        let nv = f.space.mesh().n_vertices();
        Self {
            name: name.to_string(),
            ncomp: nc,
            values: f.coeffs[..nv * nc].to_vec(),
        }
    }
}

/// Mesh and fields of one iteration.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub mesh: Arc<Mesh>,
    pub points: Vec<PointData>,
    pub eta: Vec<f64>,
    /// Signed cell contributions.
    pub rho: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub enum StopReason {
    /// `eta_h <= epsilon`.
    Converged,
    MaxIterations,
    /// All requested uniform levels were computed.
    #[default]
    Completed,
    Failed(String),
}

#[derive(Clone, Debug, Default)]
pub struct RunResult {
    pub rows: Vec<ConvergenceRow>,
    pub snapshots: Vec<Snapshot>,
    pub stop: StopReason,
    /// Goal values on the reference discretization.
    pub reference: Option<Vec<f64>>,
    /// `|J(u_ref) - target| / |target|`.
    pub model_error: Option<f64>,
}

impl RunResult {
    pub fn exit_code(&self) -> i32 {
        match self.stop {
            StopReason::Converged | StopReason::Completed => 0,
            StopReason::MaxIterations => 2,
            StopReason::Failed(_) => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Adaptive,
    Uniform,
}

/// Runs the adaptive loop until `eta_h <= epsilon` or `max_iterations`.
/// A failing iteration ends the run with [`StopReason::Failed`] and keeps
/// the rows computed so far.
pub fn adaptive_loop(cfg: &AdaptConfig, mesh0: Mesh) -> Result<RunResult> {
    run(cfg, mesh0, Mode::Adaptive, cfg.adapt.max_iterations)
}

/// The same pipeline on `levels` uniformly refined meshes, without the
/// stopping test.
pub fn run_uniform(cfg: &AdaptConfig, mesh0: Mesh, levels: usize) -> Result<RunResult> {
    if levels == 0 {
        return Err(Error::Config("levels must be >= 1".into()));
    }
    run(cfg, mesh0, Mode::Uniform, levels)
}

fn run(cfg: &AdaptConfig, mesh0: Mesh, mode: Mode, count: usize) -> Result<RunResult> {
    cfg.validate()?;
    let physics = Physics::new(cfg)?;
    let a = &cfg.adapt;
    let mut out = RunResult::default();
    let mut mesh = Arc::new(mesh0);
    let mut warm: Option<HyperSolution> = None;
    for it in 1..=count {
        let step = match physics.step(&mesh, warm.as_ref(), a) {
            Ok(s) => s,
            Err(e) => {
                log::error!("iteration {it} failed: {e}");
                out.stop = StopReason::Failed(format!("iteration {it}: {e}"));
                return Ok(out);
            }
        };
        let r = &step.report;
        log::info!(
            "iteration {it}: {} cells, {} dofs, J = {:.8e}, eta = {:.4e}, sum eta_K = {:.4e}",
            r.cells,
            r.dofs,
            r.goal_value,
            r.eta_global,
            r.sum_local
        );
        out.rows.push(ConvergenceRow::new(it, r, step.components, step.weights));
        out.snapshots.push(step.snapshot);
        warm = step.warm;
        if mode == Mode::Adaptive && r.eta_global <= a.epsilon {
            out.stop = StopReason::Converged;
            break;
        }
        if it == count {
            out.stop = match mode {
                Mode::Adaptive => StopReason::MaxIterations,
                Mode::Uniform => StopReason::Completed,
            };
            break;
        }
        let next = match mode {
            Mode::Adaptive => dorfler_mark(&r.eta_local, a.alpha).map(|m| refine(&mesh, &m)),
            Mode::Uniform => Ok(uniform_refine(&mesh)),
        };
        match next {
            Ok(m) => mesh = Arc::new(m),
            Err(e) => {
                out.stop = StopReason::Failed(format!("marking after iteration {it}: {e}"));
                return Ok(out);
            }
        }
    }
    if let Err(e) = attach_reference(cfg, &physics, &mesh, warm.as_ref(), &mut out) {
        log::error!("reference solve failed: {e}");
        out.stop = StopReason::Failed(format!("reference: {e}"));
    }
    Ok(out)
}

fn attach_reference(
    cfg: &AdaptConfig,
    physics: &Physics,
    last: &Arc<Mesh>,
    warm: Option<&HyperSolution>,
    out: &mut RunResult,
) -> Result<()> {
    let rc = &cfg.reference;
    let reference = match rc.value {
        Some(v) => vec![v],
        None if rc.enabled => {
            let degree = rc.degree.unwrap_or(cfg.adapt.degree);
            physics.reference(last, rc.refinements(), degree, warm, cfg.adapt.degree)?
        }
        None => return Ok(()),
    };
    if reference.len() != physics.n_components() {
        return Err(Error::Config(format!(
            "reference has {} values for {} goals",
            reference.len(),
            physics.n_components()
        )));
    }
    for row in &mut out.rows {
        row.set_reference(&reference);
    }
    if let (Some(t), Some(row)) = (rc.target, out.rows.last()) {
        let jref: f64 = row.weights.iter().zip(&reference).map(|(w, r)| w * r).sum();
        out.model_error = Some((jref - t).abs() / t.abs());
    }
    out.reference = Some(reference);
    Ok(())
}

struct Step {
    report: DwrReport,
    components: Vec<f64>,
    weights: Vec<f64>,
    snapshot: Snapshot,
    warm: Option<HyperSolution>,
}

enum Physics {
    Elastic {
        law: Box<dyn Fn(&Mesh) -> Result<ElasticLaw> + Sync>,
        loads: Loads,
        bcs: Vec<DirichletBc>,
        goal: Goal,
    },
    Hyper {
        material: HyperMaterial,
        loads: Loads,
        bcs: Vec<DirichletBc>,
        newton: NewtonConfig,
        goal: Goal,
    },
    Fsi {
        fluid: i32,
        solid: i32,
        template: Box<dyn Fn(FsiDomain) -> FsiProblem + Sync>,
        tol: (f64, f64, usize),
        goal: FsiGoal,
    },
}

/// Constraints with the same components and zero values.
fn homogeneous(bcs: &[DirichletBc]) -> Vec<DirichletBc> {
    bcs.iter().map(|b| DirichletBc::new(b.tag, b.components.clone(), |_, _| 0.0)).collect()
}

fn state<'a>(u: &'a Field, p: Option<&'a Field>) -> State<'a> {
    match p {
        Some(p) => State::mixed(u, p),
        None => State::new(u),
    }
}

fn components(goal: &Goal, s: State, law: Option<&dyn crate::goals::Constitutive>) -> Result<Vec<f64>> {
    match goal {
        Goal::Combined { goals, .. } => goals.iter().map(|g| g.evaluate(s, law)).collect(),
        g => Ok(vec![g.evaluate(s, law)?]),
    }
}

fn extrapolate_opt(f: Option<&Field>, target: Option<&Arc<Space>>) -> Result<Option<Field>> {
    match (f, target) {
        (Some(f), Some(t)) => Ok(Some(extrapolate(f, t.clone())?)),
        _ => Ok(None),
    }
}

impl Physics {
    fn new(cfg: &AdaptConfig) -> Result<Self> {
        Ok(match &cfg.problem {
            ProblemConfig::Elasticity(e) => {
                let mat = e.material()?;
                let fibers = e.fibers()?;
                Physics::Elastic {
                    law: Box::new(move |m: &Mesh| ElasticLaw::new(m, &mat, fibers.as_ref())),
                    loads: loads(&e.tractions, e.body_force),
                    bcs: dirichlet(&e.dirichlet)?,
                    goal: cfg.goal.goal()?,
                }
            }
            ProblemConfig::Hyperelastic(h) => Physics::Hyper {
                material: h.material()?,
                loads: loads(&h.tractions, h.body_force),
                bcs: dirichlet(&h.dirichlet)?,
                newton: h.newton.config(),
                goal: cfg.goal.goal()?,
            },
            ProblemConfig::Fsi(f) => {
                let forcing = f.forcing();
                let frozen = f.frozen;
                Physics::Fsi {
                    fluid: f.fluid,
                    solid: f.solid,
                    template: Box::new(move |d| {
                        let mut p = FsiProblem::new(d, forcing.clone());
                        p.frozen = frozen;
                        p
                    }),
                    tol: (f.abs_tol, f.rel_tol, f.max_iter),
                    goal: cfg.goal.fsi_goal()?,
                }
            }
        })
    }

    fn n_components(&self) -> usize {
        match self {
            Physics::Elastic { goal, .. } | Physics::Hyper { goal, .. } => match goal {
                Goal::Combined { goals, .. } => goals.len(),
                _ => 1,
            },
            Physics::Fsi { .. } => 1,
        }
    }

    fn step(&self, mesh: &Arc<Mesh>, warm: Option<&HyperSolution>, a: &AdaptSettings) -> Result<Step> {
        let k = a.degree;
        match self {
            Physics::Elastic { law, loads, bcs, goal } => {
                let law = law(mesh)?;
                let space = Arc::new(Space::new(mesh.clone(), k, 2, bcs)?);
                let u = solve_primal(space.clone(), &law, loads)?;
                let enriched = Arc::new(Space::new(mesh.clone(), k + 1, 2, bcs)?);
                let mut goal = goal.clone();
                if matches!(goal, Goal::Combined { .. }) {
                    let u2 = extrapolate(&u, enriched.clone())?;
                    goal.resolve(State::new(&u), State::new(&u2), Some(&law))?;
                }
                let comps = components(&goal, State::new(&u), Some(&law))?;
                let weights = goal.combination_weights();
                let j: f64 = weights.iter().zip(&comps).map(|(w, c)| w * c).sum();
                let dual_space = Arc::new(Space::new(mesh.clone(), k + 1, 2, &homogeneous(bcs))?);
                let z = match a.dual_strategy {
                    DualStrategy::EnrichedSolve => solve_dual(dual_space, &law, &goal)?,
                    DualStrategy::Extrapolate => extrapolate(&solve_dual(space.clone(), &law, &goal)?, dual_space)?,
                };
                let (kmat, f) = assemble_full(&enriched, &law, loads)?;
                let ue = interpolate(&u, enriched.clone())?;
                let r = residual_vector(&kmat, &f, &ue);
                let w = weight(&z, space.clone())?;
                let eta: f64 = r.iter().zip(&w.coeffs).map(|(a, b)| a * b).sum();
                let local = mechanics_contributions(State::new(&u), &law, loads, &w, k)?;
                let report = DwrReport::new(eta, local, space.n_free_dofs(), j);
                let snapshot = Snapshot {
                    mesh: mesh.clone(),
                    points: vec![PointData::of("u_h", &u), PointData::of("z_h", &z)],
                    eta: report.eta_local.clone(),
                    rho: report.signed_local.clone(),
                };
                Ok(Step {
                    report,
                    components: comps,
                    weights,
                    snapshot,
                    warm: None,
                })
            }
            Physics::Hyper {
                material,
                loads,
                bcs,
                newton,
                goal,
            } => {
                let problem = HyperProblem::on_mesh(mesh.clone(), k, bcs, *material, loads.clone())?;
                let sol = hyper_solve(&problem, warm, newton)?;
                let enriched = problem.enriched()?;
                let mut goal = goal.clone();
                if matches!(goal, Goal::Combined { .. }) {
                    let u2 = extrapolate(&sol.u, enriched.u_space.clone())?;
                    let p2 = extrapolate_opt(sol.p.as_ref(), enriched.p_space.as_ref())?;
                    goal.resolve(sol.state(), state(&u2, p2.as_ref()), Some(material))?;
                }
                let comps = components(&goal, sol.state(), Some(material))?;
                let weights = goal.combination_weights();
                let j: f64 = weights.iter().zip(&comps).map(|(w, c)| w * c).sum();
                let (z, w) = match a.dual_strategy {
                    DualStrategy::EnrichedSolve => {
                        let ue = interpolate(&sol.u, enriched.u_space.clone())?;
                        let pe = match (&sol.p, &enriched.p_space) {
                            (Some(p), Some(ps)) => Some(interpolate(p, ps.clone())?),
                            _ => None,
                        };
                        enriched.adjoint_solve(state(&ue, pe.as_ref()), &goal)?
                    }
                    DualStrategy::Extrapolate => {
                        let (z, w) = problem.adjoint_solve(sol.state(), &goal)?;
                        let zs = Arc::new(Space::new(mesh.clone(), k + 1, 2, &homogeneous(bcs))?);
                        (extrapolate(&z, zs)?, extrapolate_opt(w.as_ref(), enriched.p_space.as_ref())?)
                    }
                };
                let (eta, local) = problem.estimate(&enriched, &sol, &z, w.as_ref(), k)?;
                let dofs = problem.n_dofs() - problem.u_space.constraints().len();
                let report = DwrReport::new(eta, local, dofs, j);
                let mut points = vec![PointData::of("u_h", &sol.u)];
                if let Some(p) = &sol.p {
                    points.push(PointData::of("p_h", p));
                }
                points.push(PointData::of("z_h", &z));
                if let Some(w) = &w {
                    points.push(PointData::of("w_h", w));
                }
                let snapshot = Snapshot {
                    mesh: mesh.clone(),
                    points,
                    eta: report.eta_local.clone(),
                    rho: report.signed_local.clone(),
                };
                Ok(Step {
                    report,
                    components: comps,
                    weights,
                    snapshot,
                    warm: Some(sol),
                })
            }
            Physics::Fsi {
                fluid,
                solid,
                template,
                tol,
                goal,
            } => {
                let problem = template(FsiDomain::new(mesh.clone(), *fluid, *solid, k)?);
                let sol = problem.solve(None, tol.0, tol.1, tol.2)?;
                let extrapolated = a.dual_strategy == DualStrategy::Extrapolate;
                let (report, z, w) = problem.estimate(&sol, goal, extrapolated)?;
                let snapshot = Snapshot {
                    mesh: mesh.clone(),
                    points: vec![
                        PointData::of("v_h", &sol.v),
                        PointData::of("u_h", &sol.u),
                        PointData::of("z_h", &z),
                        PointData::of("w_h", &w),
                    ],
                    eta: report.eta_local.clone(),
                    rho: report.signed_local.clone(),
                };
                Ok(Step {
                    components: vec![report.goal_value],
                    weights: vec![1.0],
                    report,
                    snapshot,
                    warm: None,
                })
            }
        }
    }

    /// Goal values on `refinements` uniform refinements of `last` at `degree`.
    fn reference(
        &self,
        last: &Arc<Mesh>,
        refinements: usize,
        degree: usize,
        warm: Option<&HyperSolution>,
        primal_degree: usize,
    ) -> Result<Vec<f64>> {
        let mut meshes = vec![last.clone()];
        for _ in 0..refinements {
            meshes.push(Arc::new(uniform_refine(meshes.last().unwrap())));
        }
        let fine = meshes.last().unwrap().clone();
        log::info!("reference solve on {} cells, degree {degree}", fine.n_cells());
        match self {
            Physics::Elastic { law, loads, bcs, goal } => {
                let law = law(&fine)?;
                let space = Arc::new(Space::new(fine.clone(), degree, 2, bcs)?);
                let u = solve_primal(space, &law, loads)?;
                components(goal, State::new(&u), Some(&law))
            }
            Physics::Hyper {
                material,
                loads,
                bcs,
                newton,
                goal,
            } => {
                // the chain starts on `last` itself when the degree is raised
                let start = if degree == primal_degree { 1 } else { 0 };
                let mut prev = warm.cloned();
                let mut problem = None;
                for m in &meshes[start..] {
                    let p = HyperProblem::on_mesh(m.clone(), degree, bcs, *material, loads.clone())?;
                    let s = hyper_solve(&p, prev.as_ref(), newton)?;
                    prev = Some(s);
                    problem = Some(p);
                }
                let (problem, sol) = match (problem, prev) {
                    (Some(p), Some(s)) => (p, s),
                    (_, prev) => {
                        let p = HyperProblem::on_mesh(fine.clone(), degree, bcs, *material, loads.clone())?;
                        let s = match prev {
                            Some(s) => s,
                            None => hyper_solve(&p, None, newton)?,
                        };
                        (p, s)
                    }
                };
                components(goal, sol.state(), Some(&problem.material))
            }
            Physics::Fsi {
                fluid,
                solid,
                template,
                tol,
                goal,
            } => {
                let problem = template(FsiDomain::new(fine, *fluid, *solid, degree)?);
                let sol: FsiSolution = problem.solve(None, tol.0, tol.1, tol.2)?;
                Ok(vec![goal.evaluate(&problem.domain, &sol.v, &sol.u)?])
            }
        }
    }
}

/// Newton from the transferred previous solution, falling back to the full
/// load ramp from zero.
fn hyper_solve(problem: &HyperProblem, warm: Option<&HyperSolution>, cfg: &NewtonConfig) -> Result<HyperSolution> {
    if let Some(prev) = warm {
        let x0 = problem.transfer(prev)?;
        let one = NewtonConfig { load_steps: 1, ..*cfg };
        match problem.newton_solve(Some(&x0), &one) {
            Ok(s) => return Ok(s),
            Err(e) => log::warn!("warm-started Newton failed ({e}); restarting with the load ramp"),
        }
    }
    problem.newton_solve(None, cfg)
}
