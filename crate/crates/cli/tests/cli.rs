use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dispersive-eo"));
    c.env_remove("DISPERSIVE_EO_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn default_run_reproduces_single_photon_reference() {
    let dir = TempDir::new().unwrap();
    let o = run(&["run", "--output-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines, ["F_average = 0.997953", "P_total = 0.175818"]);

    let raw = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let keys: Vec<_> = raw
        .lines()
        .filter_map(|l| l.trim().strip_prefix('"').and_then(|l| l.split('"').next()))
        .collect();
    assert_eq!(
        keys,
        [
            "g", "delta", "gamma_cav", "gamma_norm", "lambda_deph", "input_kind", "alpha", "n_max",
            "initial_atoms", "atom_amplitudes", "dt", "t_max", "steps", "f_average", "p_total",
            "truncated_tail_bound", "max_hermiticity_drift"
        ]
    );
    let s = summary(dir.path());
    assert_eq!(s["delta"], 20.0);
    assert_eq!(s["lambda_deph"], 0.1);
    assert_eq!(s["input_kind"], "single_photon");
    assert!(s["alpha"].is_null());
    assert!((s["gamma_norm"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((s["f_average"].as_f64().unwrap() - 0.998).abs() < 0.002);
    assert!(!dir.path().join("trajectory.csv").exists());
}

#[test]
fn trajectory_csv_format() {
    let dir = TempDir::new().unwrap();
    let o = run(&[
        "run", "--delta", "10", "--t-max", "2", "--emit-trajectory", "--record-stride", "10",
        "--output-dir", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,pc,fidelity,trace"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let steps = summary(dir.path())["steps"].as_u64().unwrap() as usize;
    assert_eq!(rows.len(), steps / 10 + 1);
    for row in &rows {
        assert_eq!(row.len(), 4);
        for cell in row {
            let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.replace('.', "").len(), 9, "{cell}");
            cell.parse::<f64>().unwrap();
        }
    }
    assert_eq!(rows[0][0], "0.00000000e0");
    assert_eq!(rows[0][3], "1.00000000e0");
}

#[test]
fn summary_fed_back_as_config_reproduces_itself() {
    let first = TempDir::new().unwrap();
    let second = TempDir::new().unwrap();
    let o = run(&[
        "run", "--delta", "9", "--gamma-norm", "1.3", "--lambda", "0.2", "--t-max", "6",
        "--atom-amplitudes", "0,0.6,0,0:0.8,0,0,0,0,0",
        "--output-dir", first.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let config = first.path().join("summary.json");
    let o = run(&[
        "run", "--config", config.to_str().unwrap(),
        "--output-dir", second.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(first.path().join("summary.json")).unwrap(),
        fs::read(second.path().join("summary.json")).unwrap()
    );
    assert_eq!(summary(second.path())["initial_atoms"], "custom");
}

#[test]
fn key_value_config_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("point.cfg");
    fs::write(&cfg, "# short run\ndelta = 8\nlambda = 0.4\nt_max = 3\n").unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "run", "--config", cfg.to_str().unwrap(), "--lambda", "0",
        "--output-dir", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&out);
    assert_eq!(s["delta"], 8.0);
    assert_eq!(s["lambda_deph"], 0.0);
    assert_eq!(s["t_max"], 3.0);
}

#[test]
fn uncoupled_atoms_never_herald() {
    let dir = TempDir::new().unwrap();
    let o = run(&["run", "--initial-atoms", "s00", "--output-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(summary(dir.path())["p_total"].as_f64().unwrap() < 1e-10);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().to_str().unwrap();
    let bad_file = dir.path().join("bad.cfg");
    fs::write(&bad_file, "delta = fast\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "--input", "laser", "--output-dir", d],
        vec!["run", "--input", "coherent", "--output-dir", d],
        vec!["run", "--alpha", "0.2", "--output-dir", d],
        vec!["run", "--delta", "-3", "--output-dir", d],
        vec!["run", "--gamma", "0.1", "--gamma-norm", "2", "--output-dir", d],
        vec!["run", "--config", "/nonexistent/file.cfg", "--output-dir", d],
        vec!["run", "--config", bad_file.to_str().unwrap(), "--output-dir", d],
        vec!["run", "--no-such-flag"],
        vec!["ideal", "success", "--theta", "tau"],
        vec!["ideal", "source-bound", "--p", "2"],
        vec!["ideal", "source-bound", "--p", "2:0.7,3:0.7"],
    ];
    for args in cases {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn integration_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let o = run(&["run", "--dt", "0.5", "--t-max", "50", "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("integration failed"));
    assert!(!dir.path().join("summary.json").exists());
}

fn write_spec(dir: &Path, text: &str) -> String {
    let p = dir.join("sweep.cfg");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn sweep_table_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(dir.path(), "deltas = 12, 8\ngamma_norms = 1, 2\nlambda = 0.5\nt_max = 20\n");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let o = run(&["sweep", "--spec", &spec, "--output", a.to_str().unwrap(), "--workers", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = bin()
        .args(["sweep", "--spec", &spec, "--output", b.to_str().unwrap()])
        .env("DISPERSIVE_EO_WORKERS", "1")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "delta,gamma_norm,f_average,p_total,status");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("8,1,"));
    assert!(lines[4].starts_with("12,2,"));
    assert!(lines[1..].iter().all(|l| l.ends_with(",ok")));
}

#[test]
fn sweep_failures_are_reported_per_row() {
    let dir = TempDir::new().unwrap();
    let spec = write_spec(
        dir.path(),
        "deltas = 8\ngamma_norms = 1, 2\ninput = coherent\nalpha = 0.5\nn_max = 1\nt_max = 5\n",
    );
    let out = dir.path().join("s.csv");
    let o = run(&["sweep", "--spec", &spec, "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stderr(&o).lines().filter(|l| l.starts_with("delta = 8")).count(), 2, "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",,,failed")), "{text}");
}

#[test]
fn sweep_spec_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.csv");
    for text in ["deltas =\n", "gamma_norms = 1, x\n", "workers = 0\n", "speed = 3\n"] {
        let spec = write_spec(dir.path(), text);
        let o = run(&["sweep", "--spec", &spec, "--output", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text:?}: {}", stderr(&o));
    }
    let spec = write_spec(dir.path(), "deltas = 8\ngamma_norms = 1\nt_max = 1\n");
    let o = bin()
        .args(["sweep", "--spec", &spec, "--output", out.to_str().unwrap()])
        .env("DISPERSIVE_EO_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ideal_values() {
    let cases: [(&[&str], &str); 6] = [
        (&["ideal", "success", "--theta", "3.14159265"], "0.5\n"),
        (&["ideal", "success", "--theta", "pi/2"], "0.25\n"),
        (&["ideal", "source-bound", "--p", "2:0.0008"], "0.9992\n"),
        (&["ideal", "source-bound", "--p", "0:0.14", "--p", "2:0.0008"], "0.9992\n"),
        (&["ideal", "coherent", "--alpha", "0.2", "--theta", "pi"], "F = 0.98\nP = 0.02\n"),
        (&["ideal", "phase", "--delta", "20", "--t", "62.8318530718"], "3.14159\n"),
    ];
    for (args, expected) in cases {
        let o = run(args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        assert_eq!(stdout(&o), expected, "{args:?}");
    }
}
