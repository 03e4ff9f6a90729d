use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flatopt::cli::{format_number, parse_summary, CliConfig, CsvTable};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flatopt"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn formation_simulate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs");
    let o = run(&["simulate", "--config", config("formation.toml").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let table = CsvTable::read(&out.join("trajectory.csv")).unwrap();
    assert_eq!(
        table.header.join(","),
        "t,y_1,y_2,y_3,y_4,ystar_1,ystar_2,ystar_3,ystar_4,err,u_1,u_2,u_3,u_4,f_1,lam_1,c,s"
    );
    assert_eq!(table.rows.len(), 1001);
    assert!(table.column("f_1").unwrap().iter().all(|f| *f <= 0.0));

    let summary = parse_summary(&fs::read_to_string(out.join("summary.txt")).unwrap());
    assert_eq!(summary["scenario"], "formation");
    assert!(summary.contains_key("multiplier_bound"));
    // formation.toml sets output.plot.
    assert!(out.join("constraints.svg").exists());

    let r = run(&["report", out.join("trajectory.csv").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    let text = stdout(&r);
    for line in ["decay", "feasible", "multiplier"] {
        let l = text.lines().find(|l| l.starts_with(line)).unwrap_or_else(|| panic!("no {line} verdict in\n{text}"));
        assert!(l.contains("PASS"), "{l}");
    }
}

#[test]
fn plot_flag_writes_svgs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["simulate", "--config", config("integrator.toml").to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--plot"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["trajectory.svg", "error.svg"] {
        assert!(fs::read_to_string(dir.path().join(f)).unwrap().starts_with("<svg"));
    }
    assert!(!dir.path().join("constraints.svg").exists());
}

#[test]
fn negative_horizon_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "scenario.name = \"tracking\"\nrun.t_final = -1\n").unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run.t_final must be positive"), "{}", stderr(&o));
    assert!(!dir.path().join("trajectory.csv").exists());
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "scenario.name = \"tracking\"\nrun.t_fianl = 3\n").unwrap();
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run.t_fianl"), "{}", stderr(&o));
}

#[test]
fn simulation_failure_exits_two_with_time() {
    // A speed below v_min puts the wheeled robot on a flatness singularity.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("stall.toml");
    fs::write(&cfg, "scenario.name = \"tracking\"\nscenario.initial_speed = 1e-9\n").unwrap();
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("simulation failed at t = "), "{}", stderr(&o));
}

#[test]
fn validate_shipped_configs() {
    for name in ["tracking.toml", "formation.toml", "obstacle.toml", "integrator.toml"] {
        let o = run(&["validate", "--config", config(name).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert!(stdout(&o).contains("all checks passed"));
    }
}

#[test]
fn shipped_configs_round_trip() {
    for name in ["tracking.toml", "formation.toml", "obstacle.toml", "integrator.toml"] {
        let cfg = CliConfig::parse(&fs::read_to_string(config(name)).unwrap()).unwrap();
        assert_eq!(CliConfig::parse(&cfg.to_text()).unwrap(), cfg, "{name}");
    }
}

/// A hand-written log decaying at 0.97 against alpha = 1 passes; one at
/// 0.9 fails. The verdict only depends on the file.
#[test]
fn report_on_a_synthetic_log() {
    let dir = tempfile::tempdir().unwrap();
    let write = |rate: f64| {
        let mut s = String::from("t,y_1,ystar_1,err,u_1\n");
        for j in 0..=1000 {
            let t = j as f64 * 0.01;
            let e = 0.7 * (-rate * t).exp();
            s.push_str(&format!("{},{},0,{},{}\n", format_number(t), format_number(e), format_number(e), format_number(-rate * e)));
        }
        let p = dir.path().join(format!("log_{rate}.csv"));
        fs::write(&p, s).unwrap();
        p
    };
    let pass = run(&["report", write(0.97).to_str().unwrap(), "--alpha", "1"]);
    assert_eq!(pass.status.code(), Some(0));
    let text = stdout(&pass);
    assert!(text.contains("fitted_rate = 0.970000"), "{text}");
    assert!(text.lines().any(|l| l.starts_with("decay") && l.contains("PASS")), "{text}");

    let fail = stdout(&run(&["report", write(0.9).to_str().unwrap(), "--alpha", "1"]));
    assert!(fail.lines().any(|l| l.starts_with("decay") && l.contains("FAIL")), "{fail}");
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
