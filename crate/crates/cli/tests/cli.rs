use std::path::Path;
use std::process::{Command, Output};

fn argus(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_argus"));
    cmd.args(args).env_remove("ARGUS_OUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_cross_product_of_strategies_and_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = argus(
        &["run", "garden-4cam", "--strategies", "conv,argus", "--seeds", "1,2,3", "--out", out, "--set", "steps=15"],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("report.csv"));
    assert_eq!(rows.len(), 6);
    let pairs: Vec<(&str, &str)> = rows.iter().map(|r| (r[0].as_str(), r[2].as_str())).collect();
    assert!(pairs.contains(&("argus", "3")) && pairs.contains(&("conv", "1")));
    for s in ["argus-seed1.csv", "conv-seed3.csv"] {
        assert!(dir.path().join("ledger").join(s).is_file(), "{s}");
        assert!(dir.path().join("tracklets").join(s).is_file(), "{s}");
    }
    assert!(dir.path().join("config.resolved.toml").is_file());
}

#[test]
fn repeated_runs_and_config_echo_reproduce_reports() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let common = ["--seeds", "4", "--argus.alpha=0.3", "--set", "steps=25"];
    for d in [&a, &b] {
        let mut args = vec!["run", "intersection-5cam", "--out", d.path().to_str().unwrap()];
        args.extend(common);
        assert!(argus(&args, &[]).status.success());
    }
    let echo = a.path().join("config.resolved.toml");
    let o = argus(&["run", echo.to_str().unwrap(), "--out", c.path().to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("report.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(read(&a), read(&c));
}

#[test]
fn missing_preset_exits_2_and_names_it() {
    let o = argus(&["validate", "garden-4cam", "--cameras.1.profile=jetson-orin-x"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("jetson-orin-x"), "{}", stderr(&o));
}

#[test]
fn bad_field_exits_2_with_line_and_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.toml");
    std::fs::write(&p, "base = \"garden-4cam\"\n[queries]\ntau = \"high\"\n").unwrap();
    let o = argus(&["run", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 3") && e.contains("queries.tau"), "{e}");
}

#[test]
fn unknown_override_key_is_rejected() {
    let o = argus(&["validate", "garden-4cam", "--detection.miss_rate=0.1"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("miss_rate"));
}

#[test]
fn validate_reports_a_summary() {
    let o = argus(&["validate", "intersection-5cam"], &[]);
    assert!(o.status.success());
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(s.starts_with("ok: intersection-5cam (5 cameras"), "{s}");
}

#[test]
fn output_dir_defaults_to_env_var() {
    let dir = tempfile::tempdir().unwrap();
    let o = argus(
        &["run", "garden-4cam", "--strategies", "conv", "--set", "steps=5"],
        &[("ARGUS_OUT_DIR", dir.path())],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(csv_rows(&dir.path().join("report.csv")).len(), 1);
}

#[test]
fn query_count_sweep_gives_one_row_per_point_and_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let o = argus(
        &[
            "sweep",
            "intersection-5cam",
            "--grid",
            "queries.count=1,2,3,4,5",
            "--out",
            dir.path().to_str().unwrap(),
            "--set",
            "queries.objects=[1,2,3,5,9]",
            "--set",
            "seeds=[1]",
            "--set",
            "steps=10",
            "--set",
            "strategies=[\"argus\",\"conv\"]",
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 10);
    assert_eq!(rows.iter().filter(|r| r[1] == "argus").count(), 5);
}

#[test]
fn camera_count_sweep_averages_every_subset() {
    let dir = tempfile::tempdir().unwrap();
    let o = argus(
        &[
            "sweep",
            "intersection-5cam",
            "--grid",
            "cameras.count=3",
            "--out",
            dir.path().to_str().unwrap(),
            "--set",
            "seeds=[1]",
            "--set",
            "steps=5",
            "--set",
            "strategies=[\"conv\"]",
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][3], "10");
}

#[test]
fn empty_grid_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let o = argus(&["sweep", "garden-4cam", "--grid", "", "--out", dir.path().to_str().unwrap()], &[]);
    assert!(o.status.success());
    assert!(!dir.path().join("sweep.csv").exists());
}
