use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn posflow(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_posflow"));
    c.args(args);
    match out_dir {
        Some(d) => c.env("POSFLOW_OUTPUT_DIR", d),
        None => c.env_remove("POSFLOW_OUTPUT_DIR"),
    };
    c.output().expect("binary runs")
}

fn preset_path(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "presets", name].iter().collect()
}

fn preset_json(name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(preset_path(name)).unwrap()).unwrap()
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sorted_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

#[test]
fn missing_field_is_a_usage_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = preset_json("advection_smooth.json");
    v["mesh"].as_object_mut().unwrap().remove("cells");
    let cfg = write_config(tmp.path(), &v);
    let o = posflow(&["run", "--config", cfg.to_str().unwrap()], Some(tmp.path()));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("mesh"), "{}", stderr(&o));
    assert!(stderr(&o).contains("cells"), "{}", stderr(&o));
}

#[test]
fn bad_arguments_exit_two() {
    assert_eq!(posflow(&["weights", "--cell", "hexagon", "--degree-max", "3"], None).status.code(), Some(2));
    assert_eq!(posflow(&["weights", "--cell", "square", "--degree-max", "3", "--format", "xml"], None).status.code(), Some(2));
    let o = posflow(&["convergence", "--problem", "burgers"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not smooth"));
    assert_eq!(posflow(&["convergence", "--problem", "advection", "--grids", "20"], None).status.code(), Some(2));
    assert_eq!(posflow(&["frobnicate"], None).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    assert_eq!(posflow(&["run", "--config", missing.to_str().unwrap()], Some(tmp.path())).status.code(), Some(2));
}

#[test]
fn weights_table_formats() {
    let o = posflow(&["weights", "--cell", "square", "--degree-max", "5", "--format", "csv"], None);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.starts_with("cell,k,lower,upper,provenance\n"));
    assert!(csv.contains("square,4,7/2,4,"));
    assert_eq!(csv.lines().count(), 7);
    let o = posflow(&["weights", "--cell", "triangle", "--degree-max", "3"], None);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("20/9"));
}

#[test]
fn run_is_deterministic_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = preset_path("advection_smooth.json");
    let cfg = cfg.to_str().unwrap();
    let oa = posflow(&["run", "--config", cfg, "--threads", "1"], Some(a.path()));
    let ob = posflow(&["run", "--config", cfg, "--threads", "4"], Some(b.path()));
    assert!(oa.status.success(), "{}", stderr(&oa));
    assert!(ob.status.success(), "{}", stderr(&ob));
    let files = sorted_files(a.path());
    assert_eq!(
        files,
        [
            "advection_t0.000.csv",
            "advection_t0.250.csv",
            "advection_t0.500.csv",
            "advection_t0.750.csv",
            "advection_t1.000.csv",
            "diagnostics.json"
        ]
    );
    assert_eq!(files, sorted_files(b.path()));
    for f in &files {
        let (x, y) = (fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        assert_eq!(x, y, "{f} differs");
    }
    let snap = fs::read_to_string(a.path().join("advection_t1.000.csv")).unwrap();
    assert!(snap.starts_with("x_center,u,min_u,theta\n"));
    assert_eq!(snap.lines().count(), 81);
}

#[test]
fn diagnostics_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = preset_path("euler_double_rarefaction.json");
    let o = posflow(&["run", "--config", cfg.to_str().unwrap()], Some(tmp.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let d: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("diagnostics.json")).unwrap()).unwrap();
    let s = &d["summary"];
    assert_eq!(s["dt_checks_passed"], Value::Bool(true));
    assert!(s["stopped"].is_null());
    assert!(s["min_pressure"].as_f64().unwrap() >= 0.0);
    assert!(s["min_average"].as_array().unwrap().iter().all(|v| v.as_f64().unwrap() >= -1e-12));
    assert_eq!(s["functionals"].as_array().unwrap().len(), s["min_average"].as_array().unwrap().len());
    let n = s["steps"].as_u64().unwrap() as usize;
    for key in ["time", "dt", "dt_stable", "dt_zero", "dt_pos", "retries", "theta_min", "triggered", "mass", "min_average"] {
        assert_eq!(d["steps"][key].as_array().unwrap().len(), n, "{key}");
    }
    assert_eq!(d["config"]["mesh"]["cells"], 200);
    let snaps: Vec<&str> = s["snapshots"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(snaps.iter().any(|p| p.ends_with("double_rarefaction_t0.100.csv")), "{snaps:?}");
}

#[test]
fn unlimited_run_reports_where_it_stopped() {
    let tmp = tempfile::tempdir().unwrap();
    let mut v = preset_json("shallow_water_dam_break.json");
    v["limiter"]["mode"] = Value::from("off");
    let cfg = write_config(tmp.path(), &v);
    let o = posflow(&["run", "--config", cfg.to_str().unwrap()], Some(tmp.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let d: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("diagnostics.json")).unwrap()).unwrap();
    assert!(d["summary"]["stopped"].as_str().unwrap().contains("average"));
    assert!(d["summary"]["min_average"][0].as_f64().unwrap() < 0.0);
}

#[test]
fn convergence_csv() {
    let o = posflow(
        &["convergence", "--problem", "advection", "--degrees", "1", "--grids", "10,20", "--t-final", "0.1"],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "problem,degree,cells,limiter,dx,l1,l2,linf,order_l1,order_l2,order_linf,limited_steps");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("advection,1,10,on,"));
    assert!(lines[4].starts_with("advection,1,20,off,"));
}

#[test]
fn verify_is_reproducible() {
    let args = ["verify", "--samples", "2000", "--seed", "5"];
    let (a, b) = (posflow(&args, None), posflow(&args, None));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.status.code(), b.status.code());
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("verify samples=2000 seed=5\n"));
    assert!(text.contains("NOTE star2 k=3"));
}
