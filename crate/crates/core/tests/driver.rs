use std::collections::HashMap;

use dwr_core::driver::{adaptive_loop, rows_to_csv, run_uniform, write_outputs, AdaptConfig, StopReason};

fn artery(extra: &str) -> AdaptConfig {
    let text = format!(
        r#"
[mesh]
generator = "artery"

[problem]
kind = "elasticity"
materials = [{{ E = 0.6, nu = 0.4 }}, {{ region = 2, E = 0.011, nu = 0.4 }}]
fibers = {{ regions = [3], beta = 1.0, T = 0.01, center = [0.0, 0.0] }}
dirichlet = [{{ tag = 1 }}]

[goal]
kind = "subdomain"
region = 4
weights = [1.0, 1.0]

{extra}
"#
    );
    AdaptConfig::parse(&text).unwrap()
}

fn adapt(eps: f64, iters: usize) -> String {
    format!("[adapt]\nalpha = 0.5\nepsilon = {eps:e}\nmax_iterations = {iters}\n")
}

#[test]
fn loose_tolerance_stops_after_one_iteration() {
    let cfg = artery(&adapt(1e3, 5));
    let r = adaptive_loop(&cfg, cfg.build_mesh().unwrap()).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.stop, StopReason::Converged);
    assert_eq!(r.exit_code(), 0);
}

#[test]
fn iteration_cap_gives_exit_code_two() {
    let cfg = artery(&adapt(1e-14, 2));
    let r = adaptive_loop(&cfg, cfg.build_mesh().unwrap()).unwrap();
    assert_eq!(r.rows.len(), 2);
    assert_eq!(r.stop, StopReason::MaxIterations);
    assert_eq!(r.exit_code(), 2);
    assert!(r.rows[1].cells > r.rows[0].cells);
    assert!(r.rows.iter().all(|row| row.eta_global <= row.sum_local * (1.0 + 1e-9)));
}

#[test]
fn uniform_levels_quadruple_the_cells() {
    let cfg = artery(&adapt(1e-14, 5));
    let r = run_uniform(&cfg, cfg.build_mesh().unwrap(), 3).unwrap();
    let cells: Vec<usize> = r.rows.iter().map(|row| row.cells).collect();
    assert_eq!(cells, [1242, 4968, 19872]);
    assert_eq!(r.stop, StopReason::Completed);
    let a = adaptive_loop(&cfg, cfg.build_mesh().unwrap()).unwrap();
    let one = run_uniform(&cfg, cfg.build_mesh().unwrap(), 1).unwrap();
    assert_eq!(one.rows[0], a.rows[0]);
    assert_eq!(r.rows[0], a.rows[0]);
    assert!(run_uniform(&cfg, cfg.build_mesh().unwrap(), 0).is_err());
}

#[test]
fn runs_are_reproducible() {
    let cfg = artery(&adapt(1e-14, 3));
    let a = adaptive_loop(&cfg, cfg.build_mesh().unwrap()).unwrap();
    let b = adaptive_loop(&cfg, cfg.build_mesh().unwrap()).unwrap();
    assert_eq!(rows_to_csv(&a.rows), rows_to_csv(&b.rows));
}

/// Cell count and the named cell scalars of a legacy ASCII file.
fn parse_vtk(text: &str) -> (usize, HashMap<String, Vec<f64>>) {
    let mut lines = text.lines();
    let mut cells = 0;
    let mut data = HashMap::new();
    let mut in_cells = false;
    while let Some(line) = lines.next() {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["CELLS", n, _] => cells = n.parse().unwrap(),
            ["CELL_DATA", n] => {
                in_cells = true;
                assert_eq!(n.parse::<usize>().unwrap(), cells);
            }
            ["SCALARS", name, _, _] if in_cells => {
                assert_eq!(lines.next(), Some("LOOKUP_TABLE default"));
                let v: Vec<f64> = (0..cells).map(|_| lines.next().unwrap().trim().parse().unwrap()).collect();
                data.insert(name.to_string(), v);
            }
            _ => {}
        }
    }
    (cells, data)
}

#[test]
fn outputs_round_trip() {
    let cfg = artery(&adapt(1e-14, 2));
    let r = adaptive_loop(&cfg, cfg.build_mesh().unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&r, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), r.rows.len() + 1);
    for (i, (row, snap)) in r.rows.iter().zip(&r.snapshots).enumerate() {
        let text = std::fs::read_to_string(dir.path().join(format!("mesh_{:03}.vtk", i + 1))).unwrap();
        let (cells, data) = parse_vtk(&text);
        assert_eq!(cells, row.cells);
        for (a, b) in data["eta"].iter().zip(&snap.eta) {
            assert_eq!(*a as f32, *b as f32);
        }
        let total: f64 = data["eta"].iter().sum();
        assert!((total - row.sum_local).abs() <= 1e-6 * row.sum_local);
        let regions = &data["region"];
        assert!(regions.iter().zip(snap.mesh.regions()).all(|(a, b)| *a == *b as f64));
    }
    let fields: Vec<_> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(fields[0], "iteration");
}

#[test]
fn failed_reference_keeps_the_table() {
    let cfg = artery(&format!("{}\n[reference]\nenabled = true\nrefinements = 0\ndegree = 9\n", adapt(1e-14, 2)));
    let r = adaptive_loop(&cfg, cfg.build_mesh().unwrap()).unwrap();
    assert_eq!(r.rows.len(), 2);
    assert!(matches!(r.stop, StopReason::Failed(_)));
    assert_eq!(r.exit_code(), 1);
    assert!(r.rows.iter().all(|row| row.reference_error.is_none()));
}

#[test]
fn reference_value_fills_the_error_columns() {
    let cfg = artery(&format!("{}\n[reference]\nvalue = -1.8e-3\n", adapt(1e-14, 2)));
    let r = adaptive_loop(&cfg, cfg.build_mesh().unwrap()).unwrap();
    for row in &r.rows {
        let err = (-1.8e-3 - row.j_value).abs();
        assert_eq!(row.reference_error, Some(err));
        assert_eq!(row.effectivity_global, Some(row.eta_global / err));
    }
}
