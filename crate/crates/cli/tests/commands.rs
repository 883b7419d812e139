use std::fs;
use std::process::{Command, Output};

fn sa_ea(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sa-ea"))
        .args(args)
        .env_remove("SA_EA_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_prints_one_line_and_is_deterministic() {
    let args = [
        "--seed",
        "5",
        "run",
        "--function",
        "dynbinval",
        "--n",
        "60",
        "--s",
        "0.8",
    ];
    let a = sa_ea(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a).lines().count(), 1);
    assert_eq!(stdout(&a), stdout(&sa_ea(&args)));
    assert_ne!(
        stdout(&a),
        stdout(&sa_ea(&[
            "--seed",
            "6",
            "run",
            "--function",
            "dynbinval",
            "--n",
            "60",
            "--s",
            "0.8"
        ]))
    );
}

#[test]
fn run_writes_full_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let o = sa_ea(&[
        "run",
        "--n",
        "30",
        "--trajectory",
        "full",
        "--trajectory-out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.lines().count() > 1);
}

#[test]
fn sweep_preset_writes_both_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let o = sa_ea(&[
        "sweep",
        "--preset",
        "scaling",
        "--n",
        "40",
        "--runs",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let raw = fs::read_to_string(dir.path().join("raw.csv")).unwrap();
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(raw.lines().count(), 1 + 3 * 2);
    assert_eq!(summary.lines().count(), 1 + 3);
    assert!(raw.starts_with("function,n,c,s,F,run_index,seed,"));
}

#[test]
fn sweep_config_with_unknown_key_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "functions = [{ kind = \"onemax\" }]\nn_list = [10]\nc_list = [1.0]\ns_list = [0.5]\nF_list = [1.5]\nrunz = 3\n",
    )
    .unwrap();
    let o = sa_ea(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("runz"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(sa_ea(&["run", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(sa_ea(&["run", "--F", "1.0"]).status.code(), Some(1));
    assert_eq!(sa_ea(&["sweep"]).status.code(), Some(1));
}

#[test]
fn non_monotone_hook_exits_two() {
    let o = sa_ea(&["run", "--function", "hook-zeromax", "--n", "20"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn drift_reports_three_components() {
    let o = sa_ea(&[
        "drift", "--n", "50", "--Z", "10", "--lambda", "4", "--trials", "5000",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(
        out.contains("positive") || out.contains("negative") || out.contains("inconclusive"),
        "{out}"
    );
}

#[test]
fn small_verify_passes() {
    let o = sa_ea(&[
        "verify", "--trials", "20000", "--pairs", "200", "--states", "2000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("all checks passed"));
}

#[test]
fn presets_list_and_print() {
    let o = sa_ea(&["presets"]);
    assert!(o.status.success());
    for name in [
        "threshold",
        "f-sweep",
        "scaling",
        "near-optimum",
        "scan g1",
        "scan g4",
    ] {
        assert!(stdout(&o).contains(name), "{name}");
    }
    let o = sa_ea(&["presets", "near-optimum", "--n", "100"]);
    assert!(stdout(&o).contains("zeromax10"), "{}", stdout(&o));
}

#[test]
fn scan_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = sa_ea(&[
        "scan",
        "--preset",
        "g4",
        "--trials",
        "2000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 16);
    let json = fs::read_to_string(dir.path().join("scan.json")).unwrap();
    assert!(json.contains("\"family\""), "{json}");
}
