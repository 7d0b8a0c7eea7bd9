use polystab::pl::PLConvexFunction;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn polystab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polystab")).args(args).output().expect("binary runs")
}

fn run_json(args: &[&str]) -> (i32, Value) {
    let out = polystab(args);
    let code = out.status.code().unwrap();
    let value = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (code, value)
}

fn input(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

#[test]
fn extremal_prints_rational_coefficients() {
    let (code, v) = run_json(&["extremal", "--input", &input("hirzebruch.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["l_ext"]["constant"], "108/13");
    assert_eq!(v["l_ext"]["linear"][0], "-48/13");
    assert!(v["residuals"].as_array().unwrap().iter().all(|r| r["value"] == "0"));
}

#[test]
fn identity_battery_is_exact() {
    let (code, v) = run_json(&["identities", "--input", &input("identities_22.json")]);
    assert_eq!(code, 0);
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.len() > 2);
    assert!(checks.iter().all(|c| c["difference"] == "0"));
    let futaki = checks.iter().find(|c| c["check"] == "futaki_transfer").unwrap();
    assert_eq!(futaki["rhs"], "1/4");
}

#[test]
fn delzant_verdicts_are_data() {
    let (code, v) = run_json(&["delzant", "--input", &input("crease.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["simple"], true);
    assert_eq!(v["integral"], false);
    assert_eq!(v["failing_vertices"][0]["vertex"], serde_json::json!(["1/2", "2"]));
    assert_eq!(v["failing_vertices"][0]["defects"][0]["index"], "2");
    let (code, v) = run_json(&["delzant", "--input", &input("pentagon.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["classification"], "DPL_dom");
    assert_eq!(v["vertices"].as_array().unwrap().len(), 5);
}

#[test]
fn exit_codes() {
    assert_eq!(polystab(&["bogus"]).status.code(), Some(1));
    assert_eq!(polystab(&["df"]).status.code(), Some(1));
    assert_eq!(polystab(&["df", "--input", &input("p1.json"), "--format", "csv"]).status.code(), Some(1));
    assert_eq!(polystab(&["stability", "--input", &input("p1.json"), "--N", "1"]).status.code(), Some(1));
    assert_eq!(polystab(&["df", "--input", &input("absent.json")]).status.code(), Some(2));
    assert_eq!(polystab(&["delzant", "--input", &input("crease_r1.json")]).status.code(), Some(2));
    assert_eq!(polystab(&["mabuchi", "--input", &input("not_convex.json")]).status.code(), Some(2));
    assert_eq!(polystab(&["extremal", "--input", &input("p1.json")]).status.code(), Some(2));
    assert_eq!(polystab(&["--help"]).status.code(), Some(0));
}

#[test]
fn df_and_jnorm_carry_two_pi_tags() {
    let (code, v) = run_json(&["df", "--input", &input("p1.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["futaki"], "1");
    assert_eq!(v["donaldson_futaki"]["rational"], "1");
    assert_eq!(v["donaldson_futaki"]["two_pi_power"], 2);
    let (code, v) = run_json(&["jnorm", "--input", &input("p1.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["j_norm"], "1/4");
    let (code, v) = run_json(&["df", "--input", &input("hirzebruch_f.json")]);
    assert_eq!(code, 0);
    assert!(v["bundle_donaldson_futaki"]["two_pi_power"].as_i64().unwrap() >= 2);
}

#[test]
fn stability_reports_and_certificates() {
    let (code, v) = run_json(&["stability", "--input", &input("p1.json"), "--N", "4,8,16"]);
    assert_eq!(code, 0);
    assert_eq!(v["verdict"], "no-destabilizer-found");
    assert_eq!(v["non_increasing"], true);
    let dir = std::env::temp_dir().join(format!("polystab-cert-{}", std::process::id()));
    let out = polystab(&["stability", "--input", &input("p1_nonextremal.json"), "--N", "4", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("stability.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "destabilized");
    assert_eq!(report["destabilizer"]["verified"], true);
    let text = std::fs::read_to_string(dir.join("destabilizer.json")).unwrap();
    let f: PLConvexFunction = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&f).unwrap() + "\n", text);
    assert_eq!(serde_json::to_value(&f).unwrap(), report["destabilizer"]["function"]);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn outputs_are_deterministic() {
    let args = ["stability", "--input", &input("hirzebruch.json"), "--N", "4,8", "--norm", "j"];
    assert_eq!(polystab(&args).stdout, polystab(&args).stdout);
    let sweep = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_polystab"))
            .args(["sweep", "--input", &input("hirzebruch_sweep.json"), "--N", "4,8"])
            .env("POLYSTAB_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = sweep("1");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, sweep("4").stdout);
    let csv = String::from_utf8(one.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("c,N,lambda_num,lambda_den,verdict,destabilizer_ref"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 6);
        assert!(!cols[2].starts_with('-') && cols[2] != "0");
        assert_eq!(cols[4], "no-destabilizer-found");
    }
    let mab = ["mabuchi", "--input", &input("mabuchi_interval.json"), "--seed", "3"];
    assert_eq!(polystab(&mab).stdout, polystab(&mab).stdout);
}

#[test]
fn mabuchi_compatible_lift() {
    let (code, v) = run_json(&["mabuchi", "--input", &input("mabuchi_22.json"), "--seed", "11"]);
    assert_eq!(code, 0);
    assert_eq!(v["det_points"].as_array().unwrap().len(), 60);
    assert!(v["max_det_relative_error"].as_f64().unwrap() < 1e-4);
    assert!(v["max_constant_deviation"].as_f64().unwrap() < 1e-5);
    assert_eq!(v["linear_differences_exact"], true);
}

#[test]
fn sweep_json_and_svg() {
    let dir = std::env::temp_dir().join(format!("polystab-sweep-{}", std::process::id()));
    let out = polystab(&[
        "sweep",
        "--input",
        &input("hirzebruch_sweep.json"),
        "--N",
        "4",
        "--format",
        "json",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
    assert!(report["sign_changes"].as_array().unwrap().is_empty());
    assert!(std::fs::read_to_string(dir.join("sweep.svg")).unwrap().starts_with("<svg"));
    std::fs::remove_dir_all(dir).unwrap();
}
