//! TOML run configuration.
//!
//! A configuration has the sections `[mesh]`, `[problem]`, `[goal]`,
//! `[adapt]` and `[reference]`; see the README for the full grammar.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::elasticity::{ActiveFibers, FiberDirection, LinearMaterial, Loads, VectorFn};
use crate::error::{Error, Result};
use crate::fem::DirichletBc;
use crate::fsi::{bump, FsiGoal};
use crate::goals::{FluxDirection, Goal};
use crate::hyperelastic::{ActiveTension, HyperMaterial, Law, NewtonConfig};
use crate::mesh::{artery_proxy, load_mesh, rectangle, silicone_proxy, two_subdomain_square, Mesh};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptConfig {
    pub mesh: MeshConfig,
    pub problem: ProblemConfig,
    pub goal: GoalConfig,
    #[serde(default)]
    pub adapt: AdaptSettings,
    #[serde(default)]
    pub reference: ReferenceConfig,
    /// Directory against which relative mesh paths are resolved.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshConfig {
    File {
        path: PathBuf,
    },
    Artery,
    Silicone {
        #[serde(default = "default_max_area")]
        max_area: f64,
        #[serde(default = "default_hole_segments")]
        hole_segments: usize,
    },
    Rectangle {
        lo: [f64; 2],
        hi: [f64; 2],
        nx: usize,
        ny: usize,
        #[serde(default = "one")]
        region: i32,
    },
    TwoSubdomainSquare {
        n: usize,
    },
}

fn default_max_area() -> f64 {
    4.0
}

fn default_hole_segments() -> usize {
    24
}

fn one() -> i32 {
    1
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualStrategy {
    /// Dual problem solved in the degree `k + 1` space.
    #[default]
    EnrichedSolve,
    /// Dual problem solved in the primal space, then extrapolated.
    Extrapolate,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptSettings {
    pub alpha: f64,
    /// Absolute tolerance on `eta_h`, in goal units.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub dual_strategy: DualStrategy,
    /// Polynomial degree of the primal displacement (or velocity) space.
    pub degree: usize,
}

impl Default for AdaptSettings {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            epsilon: 1e-8,
            max_iterations: 8,
            dual_strategy: DualStrategy::EnrichedSolve,
            degree: 1,
        }
    }
}

/// Fine reference solve on the final mesh refined `refinements` times, or a
/// given reference value. `target` is an experimental value used for the
/// model error.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub enabled: bool,
    pub refinements: Option<usize>,
    pub degree: Option<usize>,
    pub value: Option<f64>,
    pub target: Option<f64>,
}

impl ReferenceConfig {
    pub fn refinements(&self) -> usize {
        self.refinements.unwrap_or(2)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    Elasticity(ElasticityConfig),
    Hyperelastic(HyperConfig),
    Fsi(FsiConfig),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialEntry {
    /// Region tag; omitted for the default material.
    pub region: Option<i32>,
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    pub regions: Vec<i32>,
    pub beta: f64,
    #[serde(rename = "T")]
    pub tension: f64,
    /// Constant fiber direction.
    pub direction: Option<[f64; 2]>,
    /// Center of circumferential fibers.
    pub center: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletConfig {
    pub tag: i32,
    /// Constrained components, all by default.
    pub components: Option<Vec<usize>>,
    /// One value per constrained component, zero by default.
    pub values: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionConfig {
    pub tag: i32,
    pub value: [f64; 2],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticityConfig {
    #[serde(default)]
    pub plane_stress: bool,
    pub materials: Vec<MaterialEntry>,
    pub fibers: Option<FiberConfig>,
    #[serde(default)]
    pub dirichlet: Vec<DirichletConfig>,
    #[serde(default)]
    pub tractions: Vec<TractionConfig>,
    pub body_force: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    StVenantKirchhoff {
        mu: f64,
        lambda: f64,
    },
    Mooney {
        #[serde(rename = "C10")]
        c10: f64,
        #[serde(rename = "C01")]
        c01: f64,
    },
    Gent {
        #[serde(rename = "E")]
        e: f64,
        #[serde(rename = "Jm")]
        jm: f64,
    },
    HainesWilson {
        #[serde(rename = "C10")]
        c10: f64,
        #[serde(rename = "C01")]
        c01: f64,
        #[serde(rename = "C20")]
        c20: f64,
        #[serde(rename = "C02")]
        c02: f64,
        #[serde(rename = "C30")]
        c30: f64,
        #[serde(rename = "C11")]
        c11: f64,
    },
}

impl LawConfig {
    pub fn law(&self) -> Law {
        match *self {
            LawConfig::StVenantKirchhoff { mu, lambda } => Law::StVenantKirchhoff { mu, lambda },
            LawConfig::Mooney { c10, c01 } => Law::Mooney { c10, c01 },
            LawConfig::Gent { e, jm } => Law::Gent { e, jm },
            LawConfig::HainesWilson {
                c10,
                c01,
                c20,
                c02,
                c30,
                c11,
            } => Law::HainesWilson {
                c10,
                c01,
                c20,
                c02,
                c30,
                c11,
            },
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActiveConfig {
    pub beta: f64,
    #[serde(rename = "T_a")]
    pub tension: f64,
    pub f0: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub load_steps: usize,
    pub backtracking: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        let c = NewtonConfig::default();
        Self {
            abs_tol: c.abs_tol,
            rel_tol: c.rel_tol,
            max_iter: c.max_iter,
            load_steps: c.load_steps,
            backtracking: c.backtracking,
        }
    }
}

impl NewtonSettings {
    pub fn config(&self) -> NewtonConfig {
        NewtonConfig {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_iter: self.max_iter,
            load_steps: self.load_steps,
            backtracking: self.backtracking,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperConfig {
    pub law: LawConfig,
    #[serde(default)]
    pub incompressible: bool,
    /// Incompressible plane stress without a pressure field (thin sheets).
    #[serde(default)]
    pub plane_stress: bool,
    /// Bulk modulus of the compressible variant.
    pub bulk: Option<f64>,
    pub active: Option<ActiveConfig>,
    #[serde(default)]
    pub dirichlet: Vec<DirichletConfig>,
    #[serde(default)]
    pub tractions: Vec<TractionConfig>,
    pub body_force: Option<[f64; 2]>,
    #[serde(default)]
    pub newton: NewtonSettings,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
    pub direction: [f64; 2],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsiConfig {
    #[serde(default = "one")]
    pub fluid: i32,
    #[serde(default = "two")]
    pub solid: i32,
    pub forcing: ForcingConfig,
    #[serde(default)]
    pub frozen: bool,
    #[serde(default = "default_fsi_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_fsi_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_fsi_iter")]
    pub max_iter: usize,
}

fn two() -> i32 {
    2
}

fn default_fsi_tol() -> f64 {
    1e-12
}

fn default_fsi_iter() -> usize {
    30
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GoalConfig {
    Subdomain {
        region: i32,
        weights: Vec<f64>,
    },
    BoundaryFlux {
        tag: i32,
        /// Fixed direction `d` of `(P n) . d`; the outward normal if omitted.
        direction: Option<[f64; 2]>,
        #[serde(default = "unit")]
        scale: f64,
    },
    Point {
        x: [f64; 2],
        component: usize,
    },
    Combined {
        parts: Vec<GoalConfig>,
        omegas: Vec<f64>,
    },
    InterfaceFlux {
        component: usize,
    },
    VelocityIntegral {
        weights: [f64; 2],
    },
}

impl GoalConfig {
    pub fn goal(&self) -> Result<Goal> {
        Ok(match self {
            GoalConfig::Subdomain { region, weights } => Goal::SubdomainIntegral {
                region: *region,
                weights: weights.clone(),
            },
            GoalConfig::BoundaryFlux { tag, direction, scale } => Goal::BoundaryFlux {
                tag: *tag,
                direction: direction.map_or(FluxDirection::Normal, FluxDirection::Fixed),
                scale: *scale,
            },
            GoalConfig::Point { x, component } => Goal::PointValue {
                point: *x,
                component: *component,
            },
            GoalConfig::Combined { parts, omegas } => {
                let goals = parts.iter().map(|g| g.goal()).collect::<Result<Vec<_>>>()?;
                Goal::combined(goals, omegas.clone())?
            }
            GoalConfig::InterfaceFlux { .. } | GoalConfig::VelocityIntegral { .. } => {
                return Err(Error::Config("interface_flux and velocity_integral goals need an fsi problem".into()))
            }
        })
    }

    pub fn fsi_goal(&self) -> Result<FsiGoal> {
        match self {
            GoalConfig::InterfaceFlux { component } => Ok(FsiGoal::InterfaceFlux { component: *component }),
            GoalConfig::VelocityIntegral { weights } => Ok(FsiGoal::VelocityIntegral { weights: *weights }),
            _ => Err(Error::Config(
                "fsi problems take interface_flux or velocity_integral goals".into(),
            )),
        }
    }
}

impl AdaptConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: AdaptConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a configuration; relative mesh paths are taken relative to the
    /// file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Applies `DWR_ALPHA` / `DWR_EPSILON` style overrides.
    pub fn apply_overrides(&mut self, alpha: Option<&str>, epsilon: Option<&str>) -> Result<()> {
        let num = |name: &str, s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{name}={s:?} is not a number")))
        };
        if let Some(a) = alpha {
            self.adapt.alpha = num("DWR_ALPHA", a)?;
        }
        if let Some(e) = epsilon {
            self.adapt.epsilon = num("DWR_EPSILON", e)?;
        }
        self.validate()
    }

    pub fn apply_env(&mut self) -> Result<()> {
        let a = std::env::var("DWR_ALPHA").ok();
        let e = std::env::var("DWR_EPSILON").ok();
        self.apply_overrides(a.as_deref(), e.as_deref())
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.adapt;
        if !(a.alpha > 0.0 && a.alpha <= 1.0) {
            return Err(Error::InvalidFraction(a.alpha));
        }
        if !(a.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", a.epsilon)));
        }
        if a.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if !(1..=3).contains(&a.degree) {
            return Err(Error::UnsupportedDegree(a.degree));
        }
        match &self.problem {
            ProblemConfig::Fsi(_) => {
                self.goal.fsi_goal()?;
            }
            ProblemConfig::Hyperelastic(h) => {
                self.goal.goal()?;
                if h.plane_stress && !h.incompressible {
                    return Err(Error::Config("plane_stress is only available with incompressible = true".into()));
                }
                if h.incompressible && !h.plane_stress && a.degree < 2 {
                    return Err(Error::Config("incompressible problems need degree >= 2 (Taylor-Hood)".into()));
                }
                if !h.incompressible && h.bulk.is_none() {
                    return Err(Error::Config("compressible hyperelastic problems need `bulk`".into()));
                }
            }
            ProblemConfig::Elasticity(_) => {
                self.goal.goal()?;
            }
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        Ok(match &self.mesh {
            MeshConfig::File { path } => load_mesh(self.base_dir.join(path))?,
            MeshConfig::Artery => artery_proxy(),
            MeshConfig::Silicone {
                max_area,
                hole_segments,
            } => silicone_proxy(*max_area, *hole_segments),
            MeshConfig::Rectangle { lo, hi, nx, ny, region } => rectangle(*lo, *hi, *nx, *ny, *region),
            MeshConfig::TwoSubdomainSquare { n } => two_subdomain_square(*n),
        })
    }
}

pub(crate) fn constant(v: [f64; 2]) -> VectorFn {
    Arc::new(move |_| v)
}

pub(crate) fn loads(tractions: &[TractionConfig], body: Option<[f64; 2]>) -> Loads {
    Loads {
        body: body.map(constant),
        tractions: tractions.iter().map(|t| (t.tag, constant(t.value))).collect(),
    }
}

pub(crate) fn dirichlet(entries: &[DirichletConfig]) -> Result<Vec<DirichletBc>> {
    entries
        .iter()
        .map(|d| {
            let comps = d.components.clone().unwrap_or_else(|| vec![0, 1]);
            let vals = d.values.clone().unwrap_or_else(|| vec![0.0; comps.len()]);
            if vals.len() != comps.len() || comps.iter().any(|&c| c > 1) {
                return Err(Error::Config(format!("dirichlet tag {}: bad components or values", d.tag)));
            }
            let table: Vec<(usize, f64)> = comps.iter().copied().zip(vals).collect();
            Ok(DirichletBc::new(d.tag, comps, move |_, c| {
                table.iter().find(|(k, _)| *k == c).map_or(0.0, |(_, v)| *v)
            }))
        })
        .collect()
}

impl ElasticityConfig {
    pub fn material(&self) -> Result<LinearMaterial> {
        let mut m = LinearMaterial::new();
        for entry in self.materials.iter().filter(|m| m.region.is_none()) {
            m = LinearMaterial::uniform(entry.e, entry.nu)?;
        }
        for entry in &self.materials {
            if let Some(r) = entry.region {
                m = m.with_region(r, entry.e, entry.nu)?;
            }
        }
        m.plane_strain = !self.plane_stress;
        Ok(m)
    }

    pub fn fibers(&self) -> Result<Option<ActiveFibers>> {
        let Some(f) = &self.fibers else { return Ok(None) };
        let direction = match (f.direction, f.center) {
            (Some(d), None) => FiberDirection::Constant(d),
            (None, Some(c)) => FiberDirection::Circumferential { center: c },
            _ => return Err(Error::Config("fibers need exactly one of `direction` and `center`".into())),
        };
        Ok(Some(ActiveFibers::new(f.regions.clone(), f.beta, f.tension, direction)?))
    }
}

impl HyperConfig {
    pub fn material(&self) -> Result<HyperMaterial> {
        let law = self.law.law();
        let m = if self.plane_stress {
            HyperMaterial::thin_sheet(law)?
        } else if self.incompressible {
            HyperMaterial::incompressible(law)?
        } else {
            HyperMaterial::compressible(law, self.bulk.unwrap_or(0.0))?
        };
        match &self.active {
            Some(a) => m.with_active(ActiveTension {
                beta: a.beta,
                tension: a.tension,
                f0: a.f0,
            }),
            None => Ok(m),
        }
    }
}

impl FsiConfig {
    pub fn forcing(&self) -> VectorFn {
        let f = &self.forcing;
        bump(f.center, f.radius, f.amplitude, f.direction)
    }
}
