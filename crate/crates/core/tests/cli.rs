use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gaussdkw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaussdkw"))
        .args(args)
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn override_replaces_config_value() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("dkw.json");
    std::fs::write(
        &config,
        r#"{"experiment": "dkw_envelope", "m": 200, "d": 4, "delta": 0.05, "trials": 3, "set_spec": "sphere:n=4,seed=1"}"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = gaussdkw(&[
        "experiment",
        "--config",
        path(&config),
        "--override",
        "trials=10",
        "--output-dir",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["trials"], 10);
    assert_eq!(m["config"]["m"], 200);
    assert_eq!(m["command"], "experiment");
    assert!(m["version"].is_string());
    let outcomes = std::fs::read_to_string(out.join("outcomes.csv")).unwrap();
    assert!(outcomes.starts_with("# schema: outcomes/v1"));
    assert_eq!(outcomes.lines().count(), 2 + 10);
}

#[test]
fn config_errors_exit_with_one_and_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = gaussdkw(&[
        "experiment",
        "dkw_envelope",
        "--override",
        "bogus=1",
        "--output-dir",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
    let o = gaussdkw(&["experiment", "sudakov", "--override", "trials=0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trials"));
    let o = gaussdkw(&["experiment", "single_t_lower", "--override", "delta=0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta"));
    assert_eq!(gaussdkw(&["experiment", "no_such"]).status.code(), Some(1));
    assert_eq!(
        gaussdkw(&["--threads", "zero", "analytics", "check"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn runtime_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let set = tmp.path().join("bad.csv");
    std::fs::write(
        &set,
        "# schema: point-set/v1\ndim,n,symmetric,label\n2,1,false,x\n3.0,0.0\n",
    )
    .unwrap();
    let o = gaussdkw(&["complexity", "report", path(&set)]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn help_lists_subcommands() {
    let o = gaussdkw(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in [
        "analytics",
        "setgen",
        "complexity",
        "deviation",
        "transport",
        "experiment",
    ] {
        assert!(text.contains(sub), "{sub}");
    }
    assert!(gaussdkw(&["experiment", "--help"]).status.success());
}

#[test]
fn setgen_and_complexity_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let set = tmp.path().join("sets").join("sphere.csv");
    let o = gaussdkw(&[
        "setgen",
        "sphere",
        "--d",
        "5",
        "--n",
        "12",
        "--seed",
        "3",
        "--out",
        path(&set),
    ]);
    assert!(o.status.success());
    let o = gaussdkw(&[
        "complexity",
        "report",
        path(&set),
        "--output-dir",
        path(tmp.path()),
    ]);
    assert!(o.status.success());
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["n"], 24);
    assert!(report["gamma1_upper"].as_f64().unwrap() >= 1.0);
    assert!(tmp.path().join("complexity.json").exists());
}

#[test]
fn deviation_and_transport_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dev = tmp.path().join("dev");
    let common = [
        "--override",
        "m=150",
        "--override",
        "d=5",
        "--override",
        "trials=2",
        "--override",
        "set_spec=cap:n=6,seed=2",
    ];
    let mut args = vec![
        "deviation",
        "run",
        "--override",
        "delta=0.05",
        "--output-dir",
        path(&dev),
    ];
    args.extend(common);
    assert!(gaussdkw(&args).status.success());
    let csv = std::fs::read_to_string(dev.join("deviation.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# schema: deviation-report/v1"));
    assert_eq!(
        lines.next(),
        Some("trial,seed,m,d,delta,direction_index,ks_sup,ks_arg_t,ss_sup,ss_arg_t,w2,coord_stat")
    );
    assert_eq!(lines.count(), 2 * 12);
    assert!(dev.join("envelope.csv").exists() && dev.join("rearrangement.csv").exists());

    let tr = tmp.path().join("tr");
    let mut args = vec!["transport", "run", "--output-dir", path(&tr)];
    args.extend(common);
    assert!(gaussdkw(&args).status.success());
    let cells = std::fs::read_to_string(tr.join("cells.csv")).unwrap();
    assert!(cells.starts_with("# schema: transport-cells/v1\ni,cell_contribution\n"));
    assert_eq!(cells.lines().count(), 2 + 150);

    let again = tmp.path().join("again");
    let o = gaussdkw(&[
        "deviation",
        "run",
        "--manifest",
        path(&dev.join("manifest.json")),
        "--output-dir",
        path(&again),
    ]);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(dev.join("deviation.csv")).unwrap(),
        std::fs::read(again.join("deviation.csv")).unwrap()
    );
    let o = gaussdkw(&["experiment", "--manifest", path(&dev.join("manifest.json"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn analytics_check_writes_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gaussdkw(&[
        "analytics",
        "check",
        "--mc-samples",
        "20000",
        "--output-dir",
        path(tmp.path()),
    ]);
    assert!(o.status.success());
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(
        summary["analytics"]["round_trip_max_error"]
            .as_f64()
            .unwrap()
            <= 1e-10
    );
    let csv = std::fs::read_to_string(tmp.path().join("symmetric_difference.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 7 * 4);
}
