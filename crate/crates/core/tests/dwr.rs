use std::f64::consts::PI;
use std::sync::Arc;

use dwr_core::dwr::{global_estimator, mechanics_contributions, model_error_indicator, weight, DwrReport};
use dwr_core::elasticity::{assemble_full, residual_vector, solve_dual, solve_primal, ElasticLaw, LinearMaterial, Loads};
use dwr_core::fem::{assemble_scalar, interpolate, solve_on, DirichletBc, Field, Space};
use dwr_core::goals::{FluxDirection, Goal, State};
use dwr_core::hyperelastic::{HyperMaterial, Law};
use dwr_core::mesh::{rectangle, Mesh, Point};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Manufactured {
    law: ElasticLaw,
    loads: Loads,
    exact: f64,
}

/// `u = (a, b) sin(pi x) sin(pi y)` on the unit square, clamped everywhere.
fn manufactured(m: &Mesh) -> Manufactured {
    let (e, nu) = (1.0, 0.3);
    let mu = e / (2.0 * (1.0 + nu));
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let (a, b) = (1.0, -0.4);
    let p2 = PI * PI;
    let body = move |x: &Point| {
        let s = (PI * x[0]).sin() * (PI * x[1]).sin();
        let cc = (PI * x[0]).cos() * (PI * x[1]).cos();
        [
            2.0 * p2 * mu * a * s - (lambda + mu) * (-a * p2 * s + b * p2 * cc),
            2.0 * p2 * mu * b * s - (lambda + mu) * (a * p2 * cc - b * p2 * s),
        ]
    };
    Manufactured {
        law: ElasticLaw::new(m, &LinearMaterial::uniform(e, nu).unwrap(), None).unwrap(),
        loads: Loads {
            body: Some(Arc::new(body)),
            tractions: vec![],
        },
        exact: (a + 2.0 * b) * 4.0 / p2,
    }
}

fn clamped() -> Vec<DirichletBc> {
    (1..=4).map(|t| DirichletBc::zero(t, 2)).collect()
}

/// `(free dofs, J(u_h), eta_h, report)` with the enriched-degree dual.
fn estimate(n: usize, goal: &Goal) -> (usize, f64, f64, DwrReport) {
    let m = Arc::new(rectangle([0.0, 0.0], [1.0, 1.0], n, n, 1));
    let p = manufactured(&m);
    let vh = Arc::new(Space::new(m.clone(), 1, 2, &clamped()).unwrap());
    let u = solve_primal(vh.clone(), &p.law, &p.loads).unwrap();
    let hat = Arc::new(Space::new(m.clone(), 2, 2, &clamped()).unwrap().homogeneous());
    let z = solve_dual(hat.clone(), &p.law, goal).unwrap();
    let w = weight(&z, vh.clone()).unwrap();
    let (k, f) = assemble_full(&hat, &p.law, &p.loads).unwrap();
    let res = residual_vector(&k, &f, &interpolate(&u, hat).unwrap());
    let eta = global_estimator(&res, &w).unwrap();
    let rho = mechanics_contributions(State::new(&u), &p.law, &p.loads, &w, 1).unwrap();
    let j = goal.evaluate(State::new(&u), None).unwrap();
    (vh.n_free_dofs(), j, eta, DwrReport::new(eta, rho, vh.n_free_dofs(), j))
}

fn whole_domain() -> Goal {
    Goal::SubdomainIntegral { region: 1, weights: vec![1.0, 2.0] }
}

#[test]
fn estimator_decays_like_inverse_dofs() {
    let data: Vec<(usize, f64)> = [8, 16, 32, 64]
        .iter()
        .map(|&n| estimate(n, &whole_domain()))
        .map(|d| (d.0, d.2))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = data.iter().map(|d| ((d.0 as f64).ln(), d.1.ln())).unzip();
    // least-squares slope of log eta against log dofs
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let slope = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    assert!((slope + 1.0).abs() <= 0.2, "slope {slope}: {data:?}");
}

#[test]
fn global_effectivity_against_the_exact_goal() {
    let goal = whole_domain();
    let exact = manufactured(&rectangle([0.0, 0.0], [1.0, 1.0], 1, 1, 1)).exact;
    for n in [8, 16] {
        let (_, j, eta, report) = estimate(n, &goal);
        let err = (exact - j).abs();
        let eff = eta / err;
        assert!((0.7..=1.3).contains(&eff), "n = {n}: effectivity {eff}");
        assert!(report.bound_holds());
    }
}

#[test]
fn model_error_indicator_predicts_the_model_change() {
    // coarse model -lap u = f, fine model adds c u; J = int u
    let m = Arc::new(rectangle([0.0, 0.0], [1.0, 1.0], 12, 12, 1));
    let bcs: Vec<DirichletBc> = (1..=4).map(|t| DirichletBc::zero(t, 1)).collect();
    let s = Arc::new(Space::new(m.clone(), 2, 1, &bcs).unwrap());
    let c = 0.5;
    let src = |x: &Point| 1.0 + x[0] * x[1];
    let solve = |react: f64| {
        let (k, f) = assemble_scalar(&s, 6, &|x, _| (1.0, react, src(x))).unwrap();
        solve_on(s.clone(), &k, &f).unwrap()
    };
    let (uc, uf) = (solve(0.0), solve(c));
    let (k, _) = assemble_scalar(&s, 6, &|_, _| (1.0, 0.0, 1.0)).unwrap();
    let (_, jvec) = assemble_scalar(&s, 6, &|_, _| (0.0, 0.0, 1.0)).unwrap();
    let zc = solve_on(Arc::new(s.homogeneous()), &k.transpose(), &jvec).unwrap();
    let (a_eps, _) = assemble_scalar(&s, 6, &|_, _| (0.0, c, 0.0)).unwrap();
    let est = model_error_indicator(&a_eps, &uc, &zc);
    let actual = dot(&jvec, &uf.coeffs) - dot(&jvec, &uc.coeffs);
    assert!(actual < 0.0 && est < 0.0);
    assert!((est - actual).abs() <= 0.1 * actual.abs(), "{est} vs {actual}");
}

fn sheet_state() -> (Arc<Space>, Field) {
    let m = Arc::new(rectangle([0.0, 0.0], [2.0, 1.0], 4, 3, 1));
    let s = Arc::new(Space::unconstrained(m, 2, 2).unwrap());
    let u = Field::from_fn(s.clone(), |x, c| 0.1 * (x[0] + 2.0 * c as f64 * x[1]).sin() + 0.05 * x[1] * c as f64);
    (s, u)
}

#[test]
fn flux_goal_derivative_matches_finite_differences() {
    let (s, u) = sheet_state();
    let mat = HyperMaterial::thin_sheet(Law::Mooney { c10: 0.14, c01: 0.033 }).unwrap();
    let v = Field::from_fn(s.clone(), |x, c| (x[0] * x[1] + c as f64).cos());
    for goal in [
        Goal::BoundaryFlux { tag: 3, direction: FluxDirection::Fixed([0.0, 1.0]), scale: 1.75 },
        Goal::BoundaryFlux { tag: 2, direction: FluxDirection::Normal, scale: 1.0 },
    ] {
        let d = goal.derivative_rhs(State::new(&u), Some(&mat), &s, None).unwrap();
        let h = 1e-6;
        let shifted = |t: f64| {
            let mut w = u.clone();
            w.axpy(t, &v);
            goal.evaluate(State::new(&w), Some(&mat)).unwrap()
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        let an = dot(&d.u, &v.coeffs);
        assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "{goal:?}: {fd} vs {an}");
    }
}

#[test]
fn goals_are_linear_for_a_linear_law() {
    let (s, u) = sheet_state();
    let m = s.mesh().clone();
    let law = ElasticLaw::new(&m, &LinearMaterial::uniform(3.0, 0.25).unwrap(), None).unwrap();
    let v = Field::from_fn(s.clone(), |x, c| x[0] * x[0] - c as f64 * x[1]);
    let (a, b) = (1.7, -0.6);
    let mut comb = u.clone();
    for x in comb.coeffs.iter_mut() {
        *x *= a;
    }
    comb.axpy(b, &v);
    for goal in [
        Goal::SubdomainIntegral { region: 1, weights: vec![0.3, -1.0] },
        Goal::BoundaryFlux { tag: 2, direction: FluxDirection::Fixed([1.0, 0.5]), scale: 2.0 },
        Goal::PointValue { point: [1.23, 0.45], component: 1 },
    ] {
        let j = |f: &Field| goal.evaluate(State::new(f), Some(&law)).unwrap();
        let lhs = j(&comb);
        let rhs = a * j(&u) + b * j(&v);
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{goal:?}");
    }
}

#[test]
fn combined_goal_is_the_weighted_sum() {
    let (s, u) = sheet_state();
    let m = s.mesh().clone();
    let law = ElasticLaw::new(&m, &LinearMaterial::uniform(3.0, 0.25).unwrap(), None).unwrap();
    let parts = vec![
        Goal::SubdomainIntegral { region: 1, weights: vec![1.0, 0.0] },
        Goal::BoundaryFlux { tag: 3, direction: FluxDirection::Normal, scale: 1.0 },
        Goal::PointValue { point: [0.5, 0.5], component: 0 },
    ];
    let omegas = vec![1.0, 0.5, 2.0];
    let mut g = Goal::combined(parts.clone(), omegas.clone()).unwrap();
    let vals: Vec<f64> = parts.iter().map(|p| p.evaluate(State::new(&u), Some(&law)).unwrap()).collect();
    let plain: f64 = vals.iter().zip(&omegas).map(|(v, w)| v * w).sum();
    let got = g.evaluate(State::new(&u), Some(&law)).unwrap();
    assert!((got - plain).abs() <= 1e-13 * (1.0 + plain.abs()));
    let mut u2 = u.clone();
    u2.axpy(0.1, &Field::from_fn(s, |x, _| x[0]));
    g.resolve(State::new(&u), State::new(&u2), Some(&law)).unwrap();
    let w = g.combination_weights();
    let sum: f64 = vals.iter().zip(&w).map(|(v, w)| v * w).sum();
    let got = g.evaluate(State::new(&u), Some(&law)).unwrap();
    assert!((got - sum).abs() <= 1e-13 * (1.0 + sum.abs()));
    assert!(w.iter().zip(&omegas).all(|(wi, om)| wi.abs() <= om / 1e-3));
}
