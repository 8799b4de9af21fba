use std::sync::Arc;

use dwr_core::elasticity::{solve_dual, ElasticLaw, LinearMaterial, Loads};
use dwr_core::fem::{DirichletBc, Space};
use dwr_core::goals::{FluxDirection, Goal, State};
use dwr_core::hyperelastic::{HyperMaterial, HyperProblem, Law, NewtonConfig};
use dwr_core::mesh::{rectangle, Mesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HW: Law = Law::HainesWilson {
    c10: 0.14,
    c01: 0.033,
    c20: -0.0026,
    c02: 0.00095,
    c30: 0.0038,
    c11: -0.0049,
};

fn laws() -> [Law; 4] {
    [
        Law::StVenantKirchhoff { mu: 0.4, lambda: 0.9 },
        Law::Mooney { c10: 0.14, c01: 0.033 },
        Law::Gent { e: 0.97, jm: 13.0 },
        HW,
    ]
}

fn strip(nx: usize, ny: usize) -> Arc<Mesh> {
    Arc::new(rectangle([0.0, 0.0], [3.0, 1.0], nx, ny, 1))
}

/// Every supported formulation of `law`, with its pressure space if any.
fn variants(law: Law, m: &Arc<Mesh>) -> Vec<HyperProblem> {
    let us = || Arc::new(Space::unconstrained(m.clone(), 2, 2).unwrap());
    let mut out = vec![HyperProblem::new(us(), None, HyperMaterial::compressible(law, 1.3).unwrap(), Loads::none()).unwrap()];
    if !matches!(law, Law::StVenantKirchhoff { .. }) {
        let ps = Arc::new(Space::unconstrained(m.clone(), 1, 1).unwrap());
        out.push(HyperProblem::new(us(), Some(ps), HyperMaterial::incompressible(law).unwrap(), Loads::none()).unwrap());
        out.push(HyperProblem::new(us(), None, HyperMaterial::thin_sheet(law).unwrap(), Loads::none()).unwrap());
    }
    out
}

#[test]
fn assembled_tangent_matches_residual_differences() {
    let m = strip(3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for law in laws() {
        for p in variants(law, &m) {
            let x: Vec<f64> = (0..p.n_dofs()).map(|_| rng.random_range(-0.04..0.04)).collect();
            let k = p.assemble(&x, 1.0, true).unwrap().0.unwrap();
            let d: Vec<f64> = (0..p.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = 1e-6;
            let at = |s: f64| {
                let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + s * b).collect();
                p.assemble(&y, 1.0, false).unwrap().1
            };
            let (rp, rm) = (at(h), at(-h));
            let kd = k.matvec(&d);
            let err = rp.iter().zip(&rm).zip(&kd).map(|((a, b), c)| ((b - a) / (2.0 * h) - c).powi(2)).sum::<f64>().sqrt();
            let nk = kd.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err <= 1e-6 * nk, "{law:?} {}: {err} vs {nk}", p.material.incompressible);
        }
    }
}

#[test]
fn adjoint_at_rest_is_the_linear_dual() {
    let (mu, lambda) = (0.4, 0.9);
    let e = mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu);
    let nu = lambda / (2.0 * (lambda + mu));
    let m = strip(6, 3);
    let bcs = [DirichletBc::zero(4, 2)];
    let p = HyperProblem::on_mesh(
        m.clone(),
        2,
        &bcs,
        HyperMaterial::compressible(Law::StVenantKirchhoff { mu, lambda }, 0.0).unwrap(),
        Loads::none(),
    )
    .unwrap();
    let law = ElasticLaw::new(&m, &LinearMaterial::uniform(e, nu).unwrap(), None).unwrap();
    let rest = p.newton_solve(None, &NewtonConfig::default()).unwrap();
    for goal in [
        Goal::SubdomainIntegral { region: 1, weights: vec![1.0, -0.5] },
        Goal::BoundaryFlux { tag: 2, direction: FluxDirection::Fixed([1.0, 0.0]), scale: 1.0 },
    ] {
        let (z, _) = p.adjoint_solve(rest.state(), &goal).unwrap();
        let zl = solve_dual(Arc::new(p.u_space.homogeneous()), &law, &goal).unwrap();
        let scale = zl.norm_max();
        assert!(scale > 0.0);
        for (a, b) in z.coeffs.iter().zip(&zl.coeffs) {
            assert!((a - b).abs() <= 1e-9 * scale, "{goal:?}: {a} vs {b}");
        }
    }
}

/// `(dW/dI1, dW/dI2)` of the Haines-Wilson polynomial.
fn hw_derivatives(i1: f64, i2: f64) -> (f64, f64) {
    let Law::HainesWilson { c10, c01, c20, c02, c30, c11 } = HW else { unreachable!() };
    let (a, b) = (i1 - 3.0, i2 - 3.0);
    (c10 + 2.0 * c20 * a + 3.0 * c30 * a * a + c11 * b, c01 + 2.0 * c02 * b + c11 * a)
}

#[test]
fn thin_sheet_strip_in_uniaxial_tension() {
    // rollers on the left and bottom edges, the right edge pulled to stretch l;
    // the homogeneous state F = diag(l, l^-1/2) is exact for P1
    let l = 1.6;
    let (w, h) = (3.0, 1.0);
    let m = strip(6, 2);
    let bcs = [
        DirichletBc::new(4, vec![0], |_, _| 0.0),
        DirichletBc::new(1, vec![1], |_, _| 0.0),
        DirichletBc::new(2, vec![0], move |_, _| (l - 1.0) * w),
    ];
    let mat = HyperMaterial::thin_sheet(HW).unwrap();
    let p = HyperProblem::on_mesh(m, 1, &bcs, mat.clone(), Loads::none()).unwrap();
    let cfg = NewtonConfig {
        load_steps: 6,
        ..Default::default()
    };
    let s = p.newton_solve(None, &cfg).unwrap();
    let lt = l.powf(-0.5);
    for (i, x) in p.u_space.node_coords().iter().enumerate() {
        assert!((s.u.coeffs[2 * i] - (l - 1.0) * x[0]).abs() < 1e-8);
        assert!((s.u.coeffs[2 * i + 1] - (lt - 1.0) * x[1]).abs() < 1e-8);
    }
    let (w1, w2) = hw_derivatives(l * l + 2.0 / l, 2.0 * l + 1.0 / (l * l));
    let p11 = 2.0 * (w1 + w2 / l) * (l - 1.0 / (l * l));
    let goal = Goal::BoundaryFlux { tag: 2, direction: FluxDirection::Fixed([1.0, 0.0]), scale: 1.0 };
    let force = goal.evaluate(State::new(&s.u), Some(&mat)).unwrap();
    assert!((force - p11 * h).abs() <= 1e-9 * p11 * h, "{force} vs {}", p11 * h);
}

#[test]
fn mixed_plane_strain_stretch_keeps_the_area() {
    let m = strip(6, 2);
    let bcs = [
        DirichletBc::new(4, vec![0], |_, _| 0.0),
        DirichletBc::new(1, vec![1], |_, _| 0.0),
        DirichletBc::new(2, vec![0], |_, _| 1.5),
    ];
    let p = HyperProblem::on_mesh(m, 2, &bcs, HyperMaterial::incompressible(HW).unwrap(), Loads::none()).unwrap();
    let s = p.newton_solve(None, &NewtonConfig { load_steps: 5, ..Default::default() }).unwrap();
    // plane strain: F = diag(1.5, 1/1.5)
    for (i, x) in p.u_space.node_coords().iter().enumerate() {
        assert!((s.u.coeffs[2 * i + 1] - (1.0 / 1.5 - 1.0) * x[1]).abs() < 1e-8);
    }
    let worst = p.constraint_means(&s.u).unwrap().into_iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(worst < 1e-10);
}
