use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn starswipt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_starswipt")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_in(dir: &Path, cmd: &str, config: &Path, out: &str, extra: &[&str]) -> Output {
    let out = dir.join(out);
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    starswipt(&args)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let (h, rows) = read_csv(path);
    let i = h.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name} in {h:?}"));
    rows.into_iter().map(|r| r[i].clone()).collect()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const THETA_SWEEP: &str = r#"
name = "grid"
trials = 4000
seed = 3

[sweep]
axis = "theta"
values = [0.2, 0.5, 0.8]

[params]
beta_r = 0.65

[[variants]]
scheme = "proposed"

[[variants]]
scheme = "discrete_phase"
phase_bits = 3
"#;

#[test]
fn analyze_writes_closed_forms_only() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "grid.toml", THETA_SWEEP);
    let o = run_in(d.path(), "analyze", &cfg, "out", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = d.path().join("out/grid_proposed.csv");
    let (h, rows) = read_csv(&f);
    assert_eq!(h[0], "theta");
    assert!(h.iter().all(|c| !c.ends_with("_mc")));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][0], "5.000000000e-1");
    assert!(stdout(&o).contains("grid_proposed.csv"));
}

#[test]
fn undefined_analytic_values_are_empty() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "grid.toml", THETA_SWEEP);
    let o = run_in(d.path(), "sweep", &cfg, "out", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = d.path().join("out/grid_discrete_phase_e3.csv");
    assert!(column(&f, "po_r_analytic").iter().all(|c| c.is_empty()));
    assert!(column(&f, "po_r_mc").iter().all(|c| !c.is_empty()));
    assert_eq!(column(&f, "trials"), vec!["4000"; 3]);
}

#[test]
fn simulate_writes_estimates_only() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "grid.toml", THETA_SWEEP);
    let o = run_in(d.path(), "simulate", &cfg, "out", &["--trials", "1000", "--seed", "9"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = d.path().join("out/grid_proposed.csv");
    let (h, _) = read_csv(&f);
    assert!(h.iter().all(|c| !c.ends_with("_analytic")));
    assert_eq!(column(&f, "trials"), vec!["1000"; 3]);
    assert_eq!(column(&f, "seed"), vec!["9"; 3]);
}

fn same_bytes(a: &Path, b: &Path) {
    let mut names: Vec<_> = std::fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn output_independent_of_threads_and_reruns() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "grid.toml", THETA_SWEEP);
    for cmd in ["analyze", "simulate", "sweep"] {
        let a = run_in(d.path(), cmd, &cfg, &format!("{cmd}1"), &["--threads", "1"]);
        let b = run_in(d.path(), cmd, &cfg, &format!("{cmd}2"), &["--threads", "2"]);
        let c = run_in(d.path(), cmd, &cfg, &format!("{cmd}3"), &["--threads", "2"]);
        assert!(a.status.success() && b.status.success() && c.status.success());
        same_bytes(&d.path().join(format!("{cmd}1")), &d.path().join(format!("{cmd}2")));
        same_bytes(&d.path().join(format!("{cmd}1")), &d.path().join(format!("{cmd}3")));
    }
}

const DOWNLINK: &str = r#"
name = "down"
trials = 20000
seed = 5

[sweep]
axis = "snr_db"
values = [25.0, 30.0]

[params]
theta = 0.3
beta_r = 0.6
alpha_r = 0.6
"#;

#[test]
fn validate_passes_and_reports() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "down.toml", DOWNLINK);
    let o = run_in(d.path(), "validate", &cfg, "out", &[]);
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("failures: 0"));
    let rep = d.path().join("out/down_validation.csv");
    let status = column(&rep, "status");
    assert!(status.iter().any(|s| s == "pass"));
    assert!(status.iter().all(|s| s != "fail"));
}

// With the physical leg sharing the two users' gains are correlated, which
// the closed forms ignore.
#[test]
fn validate_fails_with_nonzero_exit() {
    let d = tempfile::tempdir().unwrap();
    let text = format!("{DOWNLINK}\n[[variants]]\nname = \"shared\"\nlegs = \"physical\"\n");
    let text = text.replace("trials = 20000", "trials = 200000").replace("values = [25.0, 30.0]", "values = [30.0, 35.0]");
    let cfg = write(d.path(), "down.toml", &text);
    let o = run_in(d.path(), "validate", &cfg, "out", &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL shared"));
    let status = column(&d.path().join("out/down_validation.csv"), "status");
    assert!(status.iter().any(|s| s == "fail"));
}

const SWARM: &str = r#"
name = "swarm"
seed = 2

[sweep]
axis = "snr_db"
values = [28.0, 30.0]

[params]
theta = 0.1
r_target = 0.5

[pso]
n_particles = 4
n_iterations = 3
"#;

#[test]
fn optimize_reports_allocations() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "swarm.toml", SWARM);
    let a = run_in(d.path(), "optimize", &cfg, "a", &["--threads", "1"]);
    let b = run_in(d.path(), "optimize", &cfg, "b", &["--threads", "2"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert!(b.status.success());
    same_bytes(&d.path().join("a"), &d.path().join("b"));
    let f = d.path().join("a/swarm_proposed.csv");
    for (br, bt) in column(&f, "beta_r").iter().zip(column(&f, "beta_t")) {
        let s: f64 = br.parse::<f64>().unwrap() + bt.parse::<f64>().unwrap();
        assert!((s - 1.0).abs() < 1e-9);
    }
    assert_eq!(column(&f, "evaluations"), vec!["16"; 2]);
}

#[test]
fn optimize_iteration_axis_reports_trace() {
    let d = tempfile::tempdir().unwrap();
    let text = SWARM.replace("axis = \"snr_db\"\nvalues = [28.0, 30.0]", "axis = \"iterations\"\nvalues = [0, 2, 4]");
    let cfg = write(d.path(), "swarm.toml", &text);
    let o = run_in(d.path(), "optimize", &cfg, "out", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = d.path().join("out/swarm_proposed.csv");
    assert_eq!(column(&f, "iteration"), vec!["0", "2", "4"]);
    let fit: Vec<f64> = column(&f, "fitness").iter().map(|x| x.parse().unwrap()).collect();
    assert!(fit.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn optimize_rejects_baselines() {
    let d = tempfile::tempdir().unwrap();
    let text = format!("{SWARM}\n[[variants]]\nscheme = \"tdma\"\n");
    let cfg = write(d.path(), "swarm.toml", &text);
    let o = run_in(d.path(), "optimize", &cfg, "out", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("proposed scheme only"));
}

#[test]
fn unknown_key_is_an_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "bad.toml", "[params]\nbeta_x = 0.5\n");
    let o = run_in(d.path(), "analyze", &cfg, "out", &[]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("beta_x") && e.contains("params"), "{e}");
}

#[test]
fn constraint_violation_is_named() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "bad.toml", "[params]\nbeta_r = 1.5\n");
    let o = run_in(d.path(), "analyze", &cfg, "out", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("C1"), "{}", stderr(&o));
}

#[test]
fn zero_trials_rejected() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "grid.toml", THETA_SWEEP);
    let o = run_in(d.path(), "simulate", &cfg, "out", &["--trials", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_is_an_error() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), "analyze", &d.path().join("none.toml"), "out", &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn json_config_accepted() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "j.json", r#"{"sweep": {"axis": "n_elements", "values": [16, 18]}}"#);
    let o = run_in(d.path(), "analyze", &cfg, "out", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(column(&d.path().join("out/j_proposed.csv"), "n_elements"), vec!["16", "18"]);
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

// More of the signal to decoding leaves less to harvest.
#[test]
fn shipped_power_outage_config_is_monotone() {
    let d = tempfile::tempdir().unwrap();
    let o = starswipt(&[
        "analyze",
        "--config",
        configs_dir().join("fig04.toml").to_str().unwrap(),
        "--out-dir",
        d.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for variant in ["proposed_indep", "buffer_less_indep"] {
        let f = d.path().join(format!("fig04_{variant}.csv"));
        for c in ["po_r_analytic", "po_t_analytic"] {
            let v: Vec<f64> = column(&f, c).iter().map(|x| x.parse().unwrap()).collect();
            assert_eq!(v.len(), 9);
            assert!(v.windows(2).all(|w| w[1] >= w[0]), "{variant} {c}: {v:?}");
        }
    }
}

#[test]
fn every_shipped_config_parses() {
    let mut n = 0;
    for e in std::fs::read_dir(configs_dir()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            starswipt_cli::load_config(&p).unwrap_or_else(|e| panic!("{}: {e:#}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 12);
}
