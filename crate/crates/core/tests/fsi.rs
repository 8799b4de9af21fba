use std::sync::Arc;

use dwr_core::fem::{assemble_scalar, interpolate, solve_on, Field, Space};
use dwr_core::fsi::{bump, FsiDomain, FsiGoal, FsiProblem};
use dwr_core::mesh::{dorfler_mark, two_subdomain_square, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problem(n: usize, degree: usize) -> FsiProblem {
    let d = FsiDomain::new(Arc::new(two_subdomain_square(n)), 1, 2, degree).unwrap();
    FsiProblem::new(d, bump([0.5, 0.5], 0.25, 5.0, [1.0, 0.5]))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const VELOCITY: FsiGoal = FsiGoal::VelocityIntegral { weights: [1.0, 1.0] };

#[test]
fn adjoint_matrix_is_the_exact_transpose() {
    let p = problem(8, 2);
    let s = p.solve(None, 1e-12, 1e-12, 20).unwrap();
    let k = p.tangent(&s.v, &s.u).unwrap();
    let kt = p.adjoint_matrix(&s.v, &s.u).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = p.domain.n_dofs();
    for _ in 0..5 {
        let dx: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = dot(&k.matvec(&dx), &y);
        let b = dot(&dx, &kt.matvec(&y));
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }
    for i in 0..n {
        for (j, v) in k.row(i) {
            assert!((kt.get(j, i) - v).abs() <= 1e-12);
        }
    }
}

#[test]
fn adjoint_gradient_matches_solver_differences() {
    let p = problem(8, 1);
    let s = p.solve(None, 1e-13, 1e-14, 20).unwrap();
    let (z, w) = p.adjoint(&s.v, &s.u, &VELOCITY).unwrap();
    // d r / d scale is the unit load vector
    let mut unit = p.clone();
    unit.scale = 1.0;
    let load = unit.assemble(&vec![0.0; p.domain.n_dofs()], false).unwrap().1;
    let grad = dot(&p.domain.stack(&w, &z), &load);
    let h = 1e-3;
    let value = |scale: f64| {
        let mut q = p.clone();
        q.scale = scale;
        let s = q.solve(None, 1e-13, 1e-14, 20).unwrap();
        VELOCITY.evaluate(&q.domain, &s.v, &s.u).unwrap()
    };
    let fd = (value(1.0 + h) - value(1.0 - h)) / (2.0 * h);
    assert!((grad - fd).abs() <= 1e-4 * fd.abs(), "{grad} vs {fd}");
}

#[test]
fn discrete_adjoint_weight_gives_vanishing_estimate() {
    let p = problem(8, 1);
    let s = p.solve(None, 1e-13, 1e-14, 20).unwrap();
    let fine = p.on(p.domain.enriched().unwrap());
    let ve = interpolate(&s.v, fine.domain.v_space.clone()).unwrap();
    let ue = interpolate(&s.u, fine.domain.u_space.clone()).unwrap();
    let r = fine.residual(&ve, &ue).unwrap();
    let (z, w) = p.adjoint(&s.v, &s.u, &VELOCITY).unwrap();
    let zh = interpolate(&z, fine.domain.u_space.clone()).unwrap();
    let wh = interpolate(&w, fine.domain.v_space.clone()).unwrap();
    let (zf, wf) = fine.adjoint(&ve, &ue, &VELOCITY).unwrap();
    let scale = dot(&r, &fine.domain.stack(&wf, &zf)).abs();
    let eta = dot(&r, &fine.domain.stack(&wh, &zh)).abs();
    assert!(scale > 0.0);
    assert!(eta <= 1e-9 * scale, "{eta} vs {scale}");
}

#[test]
fn effectivity_against_fine_reference() {
    let fine = problem(64, 2);
    let sf = fine.solve(None, 1e-12, 1e-12, 20).unwrap();
    let jref = VELOCITY.evaluate(&fine.domain, &sf.v, &sf.u).unwrap();
    for n in [8, 16] {
        let p = problem(n, 1);
        let s = p.solve(None, 1e-12, 1e-12, 20).unwrap();
        let r = p.dwr(&s, &VELOCITY).unwrap();
        let eff = r.eta_global / (jref - r.goal_value).abs();
        assert!((0.3..=3.0).contains(&eff), "n = {n}: effectivity {eff}");
        assert!(r.bound_holds());
    }
}

#[test]
fn interface_goal_marks_near_the_interface() {
    let n = 16;
    let p = problem(n, 1);
    let s = p.solve(None, 1e-12, 1e-12, 20).unwrap();
    let r = p.dwr(&s, &FsiGoal::InterfaceFlux { component: 0 }).unwrap();
    let marked = dorfler_mark(&r.eta_local, 0.5).unwrap().sorted();
    let h = 1.0 / n as f64;
    let mesh = p.domain.mesh();
    let near = marked.iter().filter(|&&c| (mesh.centroid(c)[0] - 0.5).abs() < 2.0 * h).count();
    assert!(2 * near >= marked.len(), "{near} of {}", marked.len());
}

#[test]
fn adjoint_interface_defect_decreases() {
    let mut prev = f64::INFINITY;
    for n in [8, 16, 32] {
        let p = problem(n, 2);
        let s = p.solve(None, 1e-12, 1e-12, 20).unwrap();
        let (z, w) = p.adjoint(&s.v, &s.u, &VELOCITY).unwrap();
        let d = p.adjoint_interface_defect(&s.v, &z, &w).unwrap();
        assert!(d < prev, "n = {n}: {d} >= {prev}");
        prev = d;
    }
}

#[test]
fn frozen_coefficient_velocity_is_a_standalone_poisson_solve() {
    let mut p = problem(8, 2);
    p.frozen = true;
    let s = p.solve(None, 1e-13, 1e-14, 20).unwrap();
    let d = &p.domain;
    let f = p.forcing.clone();
    for comp in 0..2 {
        let mut scalar = Space::unconstrained(d.mesh().clone(), 2, 1).unwrap();
        for (&dof, _) in d.v_space.constraints().iter().filter(|(k, _)| *k % 2 == 0) {
            scalar.constrain(dof / 2, 0.0);
        }
        let scalar = Arc::new(scalar);
        let fl = f.clone();
        let (k, rhs) = assemble_scalar(&scalar, 8, &move |x: &Point, r: i32| {
            if r == 1 {
                (1.0, 0.0, fl(x)[comp])
            } else {
                (0.0, 0.0, 0.0)
            }
        })
        .unwrap();
        let v: Field = solve_on(scalar, &k, &rhs).unwrap();
        for (node, val) in v.coeffs.iter().enumerate() {
            assert!((s.v.coeffs[2 * node + comp] - val).abs() < 1e-10);
        }
    }
}
