use std::path::Path;
use std::process::Command;

fn gglab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gglab"))
}

const SMALL: &str = r#"{
  "schema": 1,
  "grid": { "L": 5.0, "n": 64 },
  "time": { "dt": 1e-3, "t_end": 0.2, "record_stride": 2 },
  "params": { "a1": 1.0, "a2": 1.0, "a3": 0.5, "b1": 1.0, "b2": 1.0, "r": 0.0 },
  "damping": { "kind": "mean_zero_projection", "omega": [0.3, 0.7] },
  "ic": {
    "u": { "kind": "random_modes", "seed": 1, "modes": 2 },
    "v": { "kind": "random_modes", "seed": 2, "modes": 2 },
    "energy": 1e-2
  },
  "outputs": { "snapshots": true, "snapshot_stride": 100 }
}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_writes_the_result_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.json", SMALL);
    let out = tmp.path().join("out");
    let st = gglab()
        .args(["run", "--config", &cfg, "--out"])
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert_eq!(st.code(), Some(0));

    let energy = std::fs::read_to_string(out.join("energy.csv")).unwrap();
    assert_eq!(
        energy.lines().next().unwrap(),
        "t,E,boundary_term,damping_term,dEdt_numeric,residual,h1_seminorm"
    );
    assert_eq!(energy.lines().count(), 1 + 101);

    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    for key in [
        "C",
        "k",
        "r_squared",
        "window",
        "E0",
        "quotient_T",
        "quotient_value",
    ] {
        assert!(fit.get(key).is_some(), "fit.json lacks {key}");
    }
    assert!((fit["E0"].as_f64().unwrap() - 1e-2).abs() < 1e-12);

    let snaps: Vec<_> = std::fs::read_dir(out.join("snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), 3);
    assert!(out.join("summary.json").exists());
}

#[test]
fn validation_failure_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("\"a3\": 0.5", "\"a3\": 1.0");
    let cfg = write(tmp.path(), "bad.json", &bad);
    let o = gglab().args(["run", "--config", &cfg]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("params: 1 - a3^2*b2 must be > 0"), "{err}");

    let cfg = write(tmp.path(), "broken.json", "{ not json");
    let o = gglab().args(["run", "--config", &cfg]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn blowup_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let wild = SMALL
        .replace(
            "\"dt\": 1e-3, \"t_end\": 0.2",
            "\"dt\": 0.05, \"t_end\": 50.0, \"scheme\": \"theta\", \"cfl_guard\": 1e9",
        )
        .replace("\"energy\": 1e-2", "\"energy\": 1e4")
        .replace("\"snapshots\": true", "\"snapshots\": false")
        .replace(
            "\"kind\": \"mean_zero_projection\", \"omega\": [0.3, 0.7]",
            "\"kind\": \"none\"",
        );
    let wild = wild.replacen(
        "\"params\"",
        "\"nonlinearity\": { \"kind\": \"power\", \"p\": 4.0 },\n  \"params\"",
        1,
    );
    let cfg = write(tmp.path(), "wild.json", &wild);
    let out = tmp.path().join("wild");
    let o = gglab()
        .args(["run", "--config", &cfg, "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"blowup\""));
}

#[test]
fn presets_are_listed_and_shown() {
    let o = gglab().args(["presets", "list"]).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for name in [
        "linear-check",
        "main-G-damped",
        "main-undamped",
        "theoremB-bx",
        "critical-u4-small",
        "open-problem-uonly",
        "open-problem-vonly",
        "p-sweep",
        "target-sweep",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
    let o = gglab()
        .args(["presets", "show", "linear-check"])
        .output()
        .unwrap();
    let cfg: gglab_harness::RunConfig = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cfg.grid.n, 128);
    let o = gglab().args(["presets", "show", "nope"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_and_converge_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = format!(
        r#"{{ "schema": 1, "base": {SMALL}, "axes": [ {{ "path": "damping.target", "values": ["both", "u_only"] }} ] }}"#
    );
    let cfg = write(tmp.path(), "sweep.json", &sweep);
    let out = tmp.path().join("sw");
    let st = gglab()
        .args(["sweep", "--config", &cfg, "--jobs", "2", "--out"])
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert_eq!(st.code(), Some(0));
    let table = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(
        table.lines().next().unwrap(),
        "damping.target,k,C,r_squared,max_residual,quotient,status"
    );
    assert!(out.join("cell_0001").join("energy.csv").exists());

    let base = write(tmp.path(), "base.json", SMALL);
    let out = tmp.path().join("conv");
    let o = gglab()
        .args([
            "converge", "--config", &base, "--levels", "3", "--mode", "time", "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("convergence.json")).unwrap())
            .unwrap();
    assert_eq!(rep["levels"].as_array().unwrap().len(), 3);
    assert_eq!(rep["observed_orders"].as_array().unwrap().len(), 1);

    let o = gglab()
        .args(["converge", "--config", &base, "--levels", "2"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
