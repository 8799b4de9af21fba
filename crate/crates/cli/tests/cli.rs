use std::path::Path;
use std::process::{Command, Output};

const ARTERY: &str = r#"
[mesh]
generator = "artery"

[problem]
kind = "elasticity"
materials = [{ E = 0.6, nu = 0.4 }, { region = 2, E = 0.011, nu = 0.4 }]
fibers = { regions = [3], beta = 1.0, T = 0.01, center = [0.0, 0.0] }
dirichlet = [{ tag = 1 }]

[goal]
kind = "subdomain"
region = 4
weights = [1.0, 1.0]

[adapt]
alpha = 0.5
epsilon = 1e-14
max_iterations = 2
"#;

fn dwr(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dwr-adapt"));
    cmd.args(args).env("RUST_LOG", "warn").env_remove("DWR_ALPHA").env_remove("DWR_EPSILON");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn setup(text: &str) -> (tempfile::TempDir, String, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("case.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    (dir, s(&cfg), s(&out))
}

fn csv_rows(out: &str) -> usize {
    std::fs::read_to_string(Path::new(out).join("convergence.csv")).unwrap().lines().count() - 1
}

#[test]
fn capped_run_exits_with_two_and_writes_outputs() {
    let (_d, cfg, out) = setup(ARTERY);
    let o = dwr(&["run", &cfg, "--out", &out], &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&out), 2);
    assert!(Path::new(&out).join("mesh_001.vtk").exists());
    assert!(Path::new(&out).join("mesh_002.vtk").exists());
}

#[test]
fn epsilon_override_converges_with_exit_zero() {
    let (_d, cfg, out) = setup(ARTERY);
    let o = dwr(&["run", &cfg, "--out", &out], &[("DWR_EPSILON", "1e3")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv_rows(&out), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("converged"));
}

#[test]
fn invalid_alpha_override_is_rejected() {
    let (_d, cfg, out) = setup(ARTERY);
    for bad in ["1.5", "0", "abc"] {
        let o = dwr(&["run", &cfg, "--out", &out], &[("DWR_ALPHA", bad)]);
        assert_eq!(o.status.code(), Some(1), "DWR_ALPHA={bad}");
    }
    assert!(!Path::new(&out).exists());
}

#[test]
fn uniform_subcommand_completes() {
    let (_d, cfg, out) = setup(ARTERY);
    let o = dwr(&["uniform", &cfg, "--levels", "2", "--out", &out], &[]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(Path::new(&out).join("convergence.csv")).unwrap();
    let cells: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(cells, ["1242", "4968"]);
}

#[test]
fn bad_inputs_exit_with_one() {
    let (_d, cfg, out) = setup("[mesh]\ngenerator = \"artery\"\n");
    assert_eq!(dwr(&["run", &cfg, "--out", &out], &[]).status.code(), Some(1));
    assert_eq!(dwr(&["run", "/nonexistent/case.toml", "--out", &out], &[]).status.code(), Some(1));
    let (_d2, cfg2, out2) = setup(&format!("{ARTERY}\n[reference]\nenabled = true\nrefinements = 0\ndegree = 9\n"));
    let o = dwr(&["run", &cfg2, "--out", &out2], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(csv_rows(&out2), 2);
}
