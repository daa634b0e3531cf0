//! End-to-end tests of the `residual` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use residual_core::stability::cubic_root_oracle;
use residual_core::transport::{l1_error_triangular, GridDensity, TriangularDensity};
use serde_json::Value;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) {
        std::fs::write(self.path(name), text).unwrap();
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path(name)).unwrap()
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&self.read(name)).unwrap()
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_residual")).current_dir(self.dir.path()).args(args).output().unwrap()
    }

    fn identity(&self, y: &str, beta: f64, p: f64) -> &'static str {
        self.write("I.csv", "1,0\n0,1\n");
        self.write("y.csv", y);
        self.write("problem.cfg", &format!("# identity fixture\noperator = I.csv\ndata = y.csv\nbeta = {beta}\np = {p}\n"));
        "problem.cfg"
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn f64_at(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("`{key}` is not a number in {v}"))
}

fn csv_column(text: &str, column: &str) -> Vec<Option<f64>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == column).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().ok()).collect()
}

#[test]
fn solve_identity_fixture_matches_closed_form() {
    let ws = Workspace::new();
    let cfg = ws.identity("2\n0\n", 1.0, 2.0);
    let out = ws.run(&["solve", cfg, "--out", "report.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = ws.json("report.json");
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, ["alpha", "discrepancy", "iterations", "objective", "restarts_used", "status", "x"]);
    let x: Vec<f64> = v["x"].as_array().unwrap().iter().map(|e| e.as_f64().unwrap()).collect();
    assert!((x[0] - 1.0).abs() < 1e-6 && x[1].abs() < 1e-6);
    assert!((f64_at(&v, "objective") - 1.0).abs() < 1e-6);
    assert!((f64_at(&v, "discrepancy") - 1.0).abs() < 1e-6);
    assert_eq!(v["status"], "ConstraintActive");
}

#[test]
fn solve_l1_fixture_thresholds() {
    let ws = Workspace::new();
    let cfg = ws.identity("2,0.5", 1.0, 1.0);
    let out = ws.run(&["solve", cfg]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let x0 = v["x"][0].as_f64().unwrap();
    assert!((x0 - (2.0 - 0.75f64.sqrt())).abs() < 1e-6, "{x0}");
    assert!(v["x"][1].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn squared_radius_is_converted() {
    let ws = Workspace::new();
    let cfg = ws.identity("3\n0\n", 4.0, 2.0);
    let out = ws.run(&["solve", cfg, "--radius-is-squared"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((f64_at(&v, "discrepancy") - 2.0).abs() < 1e-6);
    assert!((v["x"][0].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn infeasible_is_a_result() {
    let ws = Workspace::new();
    ws.write("F.csv", "1,1\n1,1\n");
    ws.write("y.csv", "1,-1");
    ws.write("p.cfg", "operator = F.csv\ndata = y.csv\nbeta = 0.1\np = 2\n");
    let out = ws.run(&["solve", "p.cfg"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "Infeasible");
}

#[test]
fn malformed_solve_inputs_exit_2() {
    let ws = Workspace::new();
    let cfg = ws.identity("2\n0\n", -1.0, 2.0);
    let out = ws.run(&["solve", cfg]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));

    ws.write("bad.cfg", "operator = I.csv\ndata = y.csv\nbeta = 1\np = 2\ntolerance = 3\n");
    assert_eq!(code(&ws.run(&["solve", "bad.cfg"])), 2);

    ws.write("short.csv", "1\n2\n3\n");
    ws.write("dims.cfg", "operator = I.csv\ndata = short.csv\nbeta = 1\np = 2\n");
    assert_eq!(code(&ws.run(&["solve", "dims.cfg"])), 2);

    ws.write("missing.cfg", "operator = nowhere.csv\ndata = y.csv\nbeta = 1\np = 2\n");
    assert_eq!(code(&ws.run(&["solve", "missing.cfg"])), 2);
    assert_eq!(code(&ws.run(&["solve", "no-such.cfg"])), 2);

    ws.write("p3.cfg", "operator = I.csv\ndata = y.csv\nbeta = 1\np = 3\n");
    assert_eq!(code(&ws.run(&["solve", "p3.cfg"])), 2);
    assert_eq!(code(&ws.run(&["solve"])), 2);
}

#[test]
fn rates_reports_expected_exponents() {
    let ws = Workspace::new();
    let out = ws.run(&["rates", "--p", "1", "--seeds", "2", "--out", "r.csv", "--summary", "r.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = ws.json("r.json");
    assert_eq!(f64_at(&v, "expected"), 1.0);
    assert_eq!(v["sparsity"], 5);
    assert_eq!(v["pass"], true);
    let csv = ws.read("r.csv");
    assert_eq!(csv.lines().next().unwrap(), "beta,seed,err_l2,err_lp,bregman,discrepancy,objective_gap");
    assert_eq!(csv.lines().count(), 1 + 9 * 2);

    let out = ws.run(&[
        "rates", "--p", "1.5", "--sparsity", "0", "--m", "12", "--n", "24", "--num-beta", "3", "--seeds", "1",
        "--out", "d.csv", "--summary", "d.json",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = ws.json("d.json");
    assert_eq!(f64_at(&v, "expected"), 0.5);
    assert!(v["slope"].is_number() && v["r_squared"].is_number() && v["pass"].is_boolean());
}

#[test]
fn rates_validation_and_construction_failure() {
    let ws = Workspace::new();
    assert_eq!(code(&ws.run(&["rates", "--p", "1", "--num-beta", "2", "--out", "r.csv"])), 2);
    assert_eq!(code(&ws.run(&["rates", "--p", "1", "--beta-min", "0.1", "--beta-max", "0.01"])), 2);
    assert_eq!(code(&ws.run(&["rates", "--p", "0.5", "--sparsity", "0"])), 2);
    // n ≫ m leaves no sign pattern with a valid certificate.
    let out = ws.run(&["rates", "--p", "1", "--m", "5", "--n", "400", "--num-beta", "3", "--out", "r.csv"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn counterexample_jumps() {
    let ws = Workspace::new();
    let out = ws.run(&["stability", "counterexample", "--y", "1", "--out", "ce.csv", "--summary", "ce.json"]);
    assert_eq!(code(&out), 0);
    let csv = ws.read("ce.csv");
    let deltas = csv_column(&csv, "delta");
    let xs = csv_column(&csv, "x");
    assert_eq!(deltas[0], Some(0.0));
    assert!(xs[0].unwrap().abs() <= 1e-3);
    let i = deltas.iter().position(|d| *d == Some(0.1)).unwrap();
    assert!((xs[i].unwrap() - 1.0849).abs() < 1e-3);
    assert!((xs[i].unwrap() - cubic_root_oracle(0.1)).abs() < 1e-3);
    assert!(f64_at(&ws.json("ce.json"), "jump") >= 0.98);
}

#[test]
fn stability_zero_perturbation_has_no_gap() {
    let ws = Workspace::new();
    let cfg = ws.identity("2\n0\n", 1.0, 2.0);
    for kind in ["data", "operator"] {
        let out = ws.run(&["stability", kind, cfg, "--scale", "0", "--out", "s.csv", "--summary", "s.json"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let csv = ws.read("s.csv");
        assert_eq!(csv.lines().next().unwrap(), "k,perturbation_size,norm_gap,r_gap,value_gap");
        assert_eq!(csv.lines().count(), 1 + 7);
        for col in ["norm_gap", "r_gap", "value_gap"] {
            assert!(csv_column(&csv, col).iter().all(|g| g.unwrap() <= 1e-6));
        }
    }
}

#[test]
fn stability_data_gap_shrinks() {
    let ws = Workspace::new();
    let cfg = ws.identity("2\n0\n", 1.0, 2.0);
    let out = ws.run(&["stability", "data", cfg, "--out", "s.csv", "--summary", "s.json"]);
    assert_eq!(code(&out), 0);
    let v = ws.json("s.json");
    assert_eq!(v["finest_k"], 64);
    assert!(f64_at(&v, "finest_norm_gap") <= 1.0 / 64.0 + 1e-6);
    // p ≤ 1 has no unique minimizer to track
    ws.write("l1.cfg", "operator = I.csv\ndata = y.csv\nbeta = 1\np = 1\n");
    assert_eq!(code(&ws.run(&["stability", "data", "l1.cfg"])), 2);
}

#[test]
fn value_is_right_continuous_on_scalar_fixture() {
    let ws = Workspace::new();
    ws.write("F.csv", "1\n");
    ws.write("y.csv", "2\n");
    ws.write("v.cfg", "operator = F.csv\ndata = y.csv\nbeta = 1\np = 2\n");
    let out = ws.run(&["stability", "value", "v.cfg", "--out", "v.csv", "--summary", "v.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = ws.json("v.json");
    assert!(f64_at(&v, "sup_gap") <= 1e-5);
    assert!((f64_at(&v, "value") - 1.0).abs() < 1e-6);
    // v(β + ε) = (1 − ε)²
    let csv = ws.read("v.csv");
    for (e, val) in csv_column(&csv, "epsilon").iter().zip(csv_column(&csv, "value")) {
        // the Morozov match tolerance (1e-6 relative) bounds the deviation
        assert!((val.unwrap() - (1.0 - e.unwrap()).powi(2)).abs() < 1e-5);
    }
}

fn density_values(text: &str) -> Vec<f64> {
    csv_column(text, "value").into_iter().map(Option::unwrap).collect()
}

#[test]
fn density_limits() {
    let ws = Workspace::new();
    ws.write("one.csv", &"0.3\n".repeat(50));
    let out = ws.run(&["density", "--samples", "one.csv", "--beta", "10", "--cells", "20", "--out", "u.csv", "--summary", "u.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(density_values(&ws.read("u.csv")).iter().all(|v| (v - 1.0).abs() < 1e-12));
    assert_eq!(ws.json("u.json")["status"], "InteriorMinimum");

    ws.write("two.csv", "0.15\n0.15\n0.15\n0.75\n");
    let out = ws.run(&["density", "--samples", "two.csv", "--beta", "0", "--cells", "10", "--out", "h.csv", "--summary", "h.json"]);
    assert_eq!(code(&out), 0);
    let h = density_values(&ws.read("h.csv"));
    let expected = [0.0, 7.5, 0.0, 0.0, 0.0, 0.0, 0.0, 2.5, 0.0, 0.0];
    assert!(h.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12), "{h:?}");

    let left = csv_column(&ws.read("h.csv"), "cell_left");
    assert!((left[3].unwrap() - 0.3).abs() < 1e-15);
}

#[test]
fn density_input_errors() {
    let ws = Workspace::new();
    ws.write("empty.csv", "");
    assert_eq!(code(&ws.run(&["density", "--samples", "empty.csv"])), 2);
    ws.write("outside.csv", "0.5\n1.5\n");
    assert_eq!(code(&ws.run(&["density", "--samples", "outside.csv"])), 2);
    ws.write("ok.csv", "0.5\n");
    assert_eq!(code(&ws.run(&["density", "--samples", "ok.csv", "--beta", "abc"])), 2);
    assert_eq!(code(&ws.run(&["density", "--samples", "ok.csv", "--beta", "-1"])), 2);
    assert_eq!(code(&ws.run(&["density", "--samples", "nowhere.csv"])), 2);
}

fn triangular_samples(path: &Path, k: usize, seed: u64) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let truth = TriangularDensity::standard();
    let xs: Vec<String> = (0..k).map(|_| truth.sample(&mut rng).to_string()).collect();
    std::fs::write(path, xs.join("\n")).unwrap();
}

#[test]
fn density_auto_beta_improves_with_more_samples() {
    let ws = Workspace::new();
    let truth = TriangularDensity::standard();
    let mut errors = Vec::new();
    for k in [100, 1000] {
        triangular_samples(&ws.path("xs.csv"), k, 42);
        let out = ws.run(&["density", "--samples", "xs.csv", "--cells", "50", "--out", "u.csv", "--summary", "u.json"]);
        assert_eq!(code(&out), 0);
        let summary = ws.json("u.json");
        assert_eq!(summary["beta_rule"], "auto");
        assert!((f64_at(&summary, "w1") - f64_at(&summary, "beta")).abs() <= 1e-9);
        let u = GridDensity::new(0.0, 1.0, density_values(&ws.read("u.csv"))).unwrap();
        errors.push(l1_error_triangular(&u, &truth));
    }
    assert!(errors[1] < errors[0], "{errors:?}");
}

#[test]
fn reruns_are_byte_identical() {
    let ws = Workspace::new();
    ws.write("F.csv", "1,0.5,0\n0,1,0.3\n");
    ws.write("y.csv", "2\n1\n");
    ws.write("q.cfg", "operator = F.csv\ndata = y.csv\nbeta = 0.5\np = 0.5\nrng_seed = 11\n");
    ws.write("c.cfg", "operator = F.csv\ndata = y.csv\nbeta = 0.5\np = 1.5\n");
    triangular_samples(&ws.path("xs.csv"), 200, 1);
    let commands: [&[&str]; 6] = [
        &["solve", "q.cfg"],
        &["rates", "--p", "1", "--sparsity", "2", "--m", "10", "--n", "20", "--num-beta", "3", "--seeds", "2"],
        &["stability", "data", "c.cfg", "--max-k", "4"],
        &["stability", "operator", "c.cfg", "--max-k", "4", "--seed", "2"],
        &["stability", "value", "c.cfg", "--eps-count", "3"],
        &["density", "--samples", "xs.csv", "--cells", "20", "--iterations", "500"],
    ];
    for args in commands {
        let a = ws.run(args);
        let b = ws.run(args);
        assert_eq!(code(&a), 0, "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}
