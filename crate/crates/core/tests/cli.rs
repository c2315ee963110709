use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use passive_bb84::engine::{self, table, Settings, SweepConfig};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_passive-bb84"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn sweep_file_matches_library_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lossy.csv");
    let o = run(&["sweep", "--preset", "lossy-eta0.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let from_cli = table::read_points(fs::File::open(&out).unwrap()).unwrap();
    let direct = engine::sweep(&SweepConfig::preset("lossy-eta0.5").unwrap()).unwrap();
    assert_eq!(from_cli.len(), direct.len());
    for (a, b) in from_cli.iter().zip(&direct) {
        assert_eq!(
            (a.distance_km, a.rate, a.settings, a.gain, a.qber),
            (b.distance_km, b.rate, b.settings, b.gain, b.qber)
        );
    }
}

#[test]
fn config_overlays_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "fixed.toml",
        "optimize = false\n[distance]\nstart = 10.0\nstop = 12.0\nstep = 1.0\n[sps]\nt = 0.25\n",
    );
    let o = run(&["sweep", "--preset", "near-ideal-eta1", "--config", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let points = table::read_points(o.stdout.as_slice()).unwrap();
    assert_eq!(
        points.iter().map(|p| p.distance_km).collect::<Vec<_>>(),
        [10.0, 11.0, 12.0]
    );
    assert!(points
        .iter()
        .all(|p| p.settings == Settings::Tap { t: 0.25 } && p.rate > 0.0));
}

#[test]
fn optimize_cutoff_and_stats() {
    let o = run(&["optimize", "--preset", "coherent-passive", "--distance", "0"]);
    assert_eq!(code(&o), 0);
    let p = table::read_points(o.stdout.as_slice()).unwrap();
    let Settings::Coherent { mu, omega } = p[0].settings else {
        panic!("coherent settings")
    };
    assert!(
        (mu - 0.084).abs() < 0.005 && (omega - 0.365).abs() < 0.02,
        "{mu} {omega}"
    );

    let o = run(&["cutoff", "--preset", "coherent-active"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let km: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(text.starts_with("scenario,cutoff_km\ncoherent-active,"));
    assert!((km - 67.5).abs() < 1.0);

    let o = run(&["stats", "--preset", "lossy-active"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let row: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(text.starts_with("n_bar,g2\n"));
    assert!(
        (row[0] - 0.815).abs() < 1e-12 && (row[1] - 0.0452).abs() < 5e-5,
        "{text}"
    );
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "unknown.toml", "bogus = 1\n");
    let bad_value = write(dir.path(), "bad.toml", "[link]\neta_bob = 1.5\n");
    let bad_syntax = write(dir.path(), "syntax.toml", "[link\n");
    let missing = dir.path().join("missing.toml");
    for args in [
        vec!["sweep", "--preset", "bright-eta1"],
        vec!["sweep", "--preset", "help"],
        vec!["sweep", "--config", &unknown],
        vec!["cutoff", "--config", &bad_value],
        vec!["stats", "--config", &bad_syntax],
        vec!["sweep", "--config", missing.to_str().unwrap()],
        vec!["optimize", "--distance", "-5"],
        vec!["optimize"],
        vec!["launch"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stdout.is_empty());
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
    }
    assert_eq!(code(&run(&["--help"])), 0);
    let o = run(&["sweep", "--preset", "help"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("near-ideal-active"));
}

#[test]
fn unbounded_cutoff_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let lossless = write(dir.path(), "lossless.toml", "[link]\nalpha = 0.0\n");
    let o = run(&["cutoff", "--config", &lossless]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn audit_violation_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let grid = "distributions = [[0.2, 0.785, 0.015]]\nt = [0.15, 0.4]\neta_a = [0.5]\neps_a = [1e-3]\neta_sys = [0.1]\neps_b = [1e-2]\n";
    let strict = write(
        dir.path(),
        "strict.toml",
        &format!("[audit]\nthreshold = 1e-300\n{grid}"),
    );
    let o = run(&["audit", "--config", &strict]);
    assert_eq!(code(&o), 3);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",false,")));

    let loose = write(dir.path(), "loose.toml", &format!("[audit]\nthreshold = 1e-9\n{grid}"));
    assert_eq!(code(&run(&["audit", "--config", &loose])), 0);
}
