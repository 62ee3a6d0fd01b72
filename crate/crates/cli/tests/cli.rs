use std::path::Path;
use std::process::{Command, Output};

use noe_core::envelopes::Noe;
use noe_core::plot::svg_polygons;

fn noe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noe")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FIX: [&str; 4] = ["--network", "fixture:canonical", "--snapshot", "fixture:canonical"];

#[test]
fn missing_network_file_is_input_error() {
    let o = noe(&["--network", "/nonexistent/net.json", "compute", "--kind", "capability"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error:"));
}

#[test]
fn malformed_network_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    std::fs::write(&path, r#"{"root": "a", "buses": [{"id": "a", "v_nom_kv": 11.0, "v_min_pu": "low"}]}"#).unwrap();
    let o = noe(&["--network", path.to_str().unwrap(), "compute", "--kind", "capability"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("buses"), "{}", stderr(&o));
}

#[test]
fn zero_samples_rejected() {
    let mut args = FIX.to_vec();
    args.extend(["verify", "--samples", "0", "-K", "2"]);
    let o = noe(&args);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn empty_cost_levels_rejected() {
    let mut args = FIX.to_vec();
    args.extend(["bidstack", "--service", "long_dr", "--levels="]);
    let o = noe(&args);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_service_lists_catalog() {
    let mut args = FIX.to_vec();
    args.extend(["bidstack", "--service", "nope", "--levels", "10"]);
    let o = noe(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("long_dr"), "{}", stderr(&o));
}

#[test]
fn ramp_without_rate_horizon_rejected() {
    let mut args = FIX.to_vec();
    args.extend(["compute", "--kind", "ramp"]);
    assert_eq!(noe(&args).status.code(), Some(2));
}

#[test]
fn single_level_sweep_has_six_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("noe.json");
    let mut args = FIX.to_vec();
    args.extend(["-o", out.to_str().unwrap(), "compute", "--kind", "feasibility", "-K", "1"]);
    let o = noe(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = Noe::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc.meta.k, 1);
    assert_eq!(doc.meta.statuses.len(), 6);
    assert!(doc.boundary.len() >= 3);
}

fn compute_to(dir: &Path, format: &str) -> String {
    let out = dir.join(format!("noe.{format}"));
    let mut args = FIX.to_vec();
    args.extend(["--format", format, "-o", out.to_str().unwrap(), "compute", "--kind", "feasibility", "-K", "6"]);
    let o = noe(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    std::fs::read_to_string(out).unwrap()
}

#[test]
fn svg_polygon_matches_json_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let json = Noe::from_json(&compute_to(dir.path(), "json")).unwrap();
    let svg = compute_to(dir.path(), "svg");
    let polys = svg_polygons(&svg);
    assert_eq!(polys.len(), 1);
    assert_eq!(polys[0], json.boundary.vertices());
    let csv = compute_to(dir.path(), "csv");
    assert_eq!(csv.lines().count(), json.boundary.len() + 1);
}
